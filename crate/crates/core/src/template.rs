//! Face templates: the built-in synthetic reference template and loaders for
//! user-supplied meshes (OBJ with texture coordinates, or an NPY pair).
//!
//! The reference template is a mirror-symmetric UV lattice with exactly
//! [`REFERENCE_VERTEX_COUNT`] vertices: a 209 × 209 grid over `[0,1]²` plus
//! 186 cell-centre vertices on the mouth line. Its 68-landmark vertex lookup
//! is obtained by snapping a symmetric 68-point UV layout to the lattice.
//! All UV coordinates are rational expressions evaluated with basic IEEE
//! arithmetic, so vertex indices derived from them are platform independent.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{KeypointSet, Point3, Provenance, TemplateMesh, Uv, REFERENCE_VERTEX_COUNT};
use crate::kdtree::KdTree;
use crate::npy;

const GRID: usize = 209;
const EXTRA_ROW: usize = 162;
const EXTRA_FIRST_CELL: usize = 11;
const EXTRA_CELLS: usize = 186;

/// Left/right correspondence of the 68-point schema.
pub const MIRROR_68: [usize; 68] = [
    16, 15, 14, 13, 12, 11, 10, 9, 8, 7, 6, 5, 4, 3, 2, 1, 0, // jaw
    26, 25, 24, 23, 22, 21, 20, 19, 18, 17, // brows
    27, 28, 29, 30, // nose bridge
    35, 34, 33, 32, 31, // nostrils
    45, 44, 43, 42, 47, 46, 39, 38, 37, 36, 41, 40, // eyes
    54, 53, 52, 51, 50, 49, 48, 59, 58, 57, 56, 55, // outer lip
    64, 63, 62, 61, 60, 67, 66, 65, // inner lip
];

/// Jaw contour of the 68-point schema.
pub const JAW_68: std::ops::RangeInclusive<usize> = 0..=16;
/// Top of the nasal bridge.
pub const NASAL_ROOT_68: usize = 27;
/// Nose tip.
pub const NOSE_TIP_68: usize = 30;

/// A template mesh together with the vertices of the 68-point schema.
#[derive(Debug, Clone)]
pub struct FaceTemplate {
    pub mesh: TemplateMesh,
    /// 68 keypoints with the schema's mirror table.
    pub landmarks68: KeypointSet,
}

impl FaceTemplate {
    pub fn new(mesh: TemplateMesh, landmark_vertices: Vec<usize>) -> Result<Self> {
        if landmark_vertices.len() != 68 {
            return Err(Error::Invariant(format!("68-landmark lookup has {} entries", landmark_vertices.len())));
        }
        let landmarks68 = KeypointSet::with_mirror(
            landmark_vertices,
            MIRROR_68.to_vec(),
            vec![Provenance::Manual; 68],
            mesh.vertex_count(),
        )?;
        Ok(Self { mesh, landmarks68 })
    }

    /// The built-in synthetic reference template.
    pub fn reference() -> Self {
        let mesh = reference_mesh();
        let tree = KdTree::new(mesh.uv());
        let lookup = LAYOUT_68.iter().map(|&uv| tree.nearest(uv).0).collect();
        Self::new(mesh, lookup).expect("reference template is consistent")
    }
}

/// Left-half UV positions of the 68 schema; right-half entries are written as
/// `R(k)`, the reflection of entry `k` about `u = 0.5`.
const LAYOUT_68: [Uv; 68] = {
    const fn r(p: Uv) -> Uv {
        [1.0 - p[0], p[1]]
    }
    let jaw = [
        [0.120, 0.400],
        [0.126, 0.475],
        [0.138, 0.548],
        [0.158, 0.620],
        [0.188, 0.688],
        [0.228, 0.752],
        [0.282, 0.810],
        [0.365, 0.868],
        [0.500, 0.905],
    ];
    let brow = [[0.180, 0.330], [0.230, 0.300], [0.290, 0.295], [0.350, 0.305], [0.410, 0.325]];
    let nostril = [[0.430, 0.610], [0.465, 0.620], [0.500, 0.625]];
    let eye = [[0.220, 0.400], [0.260, 0.380], [0.310, 0.380], [0.350, 0.405], [0.310, 0.415], [0.260, 0.415]];
    [
        jaw[0],
        jaw[1],
        jaw[2],
        jaw[3],
        jaw[4],
        jaw[5],
        jaw[6],
        jaw[7],
        jaw[8],
        r(jaw[7]),
        r(jaw[6]),
        r(jaw[5]),
        r(jaw[4]),
        r(jaw[3]),
        r(jaw[2]),
        r(jaw[1]),
        r(jaw[0]),
        brow[0],
        brow[1],
        brow[2],
        brow[3],
        brow[4],
        r(brow[4]),
        r(brow[3]),
        r(brow[2]),
        r(brow[1]),
        r(brow[0]),
        [0.500, 0.390],
        [0.500, 0.450],
        [0.500, 0.510],
        [0.500, 0.570],
        nostril[0],
        nostril[1],
        nostril[2],
        r(nostril[1]),
        r(nostril[0]),
        eye[0],
        eye[1],
        eye[2],
        eye[3],
        eye[4],
        eye[5],
        r(eye[3]),
        r(eye[2]),
        r(eye[1]),
        r(eye[0]),
        r(eye[5]),
        r(eye[4]),
        // outer lip 48..59
        [0.370, 0.740],
        [0.410, 0.715],
        [0.460, 0.700],
        [0.500, 0.705],
        r([0.460, 0.700]),
        r([0.410, 0.715]),
        r([0.370, 0.740]),
        r([0.410, 0.770]),
        r([0.450, 0.785]),
        [0.500, 0.790],
        [0.450, 0.785],
        [0.410, 0.770],
        // inner lip 60..67
        [0.390, 0.742],
        [0.440, 0.730],
        [0.500, 0.732],
        r([0.440, 0.730]),
        r([0.390, 0.742]),
        r([0.440, 0.750]),
        [0.500, 0.752],
        [0.440, 0.750],
    ]
};

fn reference_mesh() -> TemplateMesh {
    let step = (GRID - 1) as f64;
    let mut uv = Vec::with_capacity(REFERENCE_VERTEX_COUNT);
    for r in 0..GRID {
        for c in 0..GRID {
            uv.push([c as f64 / step, r as f64 / step]);
        }
    }
    let v_extra = (EXTRA_ROW as f64 + 0.5) / step;
    for c in EXTRA_FIRST_CELL..EXTRA_FIRST_CELL + EXTRA_CELLS {
        uv.push([(c as f64 + 0.5) / step, v_extra]);
    }
    debug_assert_eq!(uv.len(), REFERENCE_VERTEX_COUNT);
    let vertices = uv.iter().map(|&t| reference_surface(t)).collect();
    TemplateMesh::new(vertices, uv).expect("reference mesh is valid")
}

/// Surface of the reference template at a UV: a face-like height field in
/// model units (about 160 wide, 200 tall, `y` up, `z` towards the viewer).
pub fn reference_surface([u, v]: Uv) -> Point3 {
    let x = (u - 0.5) * 160.0;
    let y = (0.5 - v) * 200.0;
    let du = (u - 0.5) / 0.5;
    let dv = (v - 0.5) / 0.5;
    let dome = 60.0 * (1.0 - 0.8 * du * du - 0.4 * dv * dv);
    let nose = 25.0 * (-((u - 0.5) / 0.06).powi(2) - ((v - 0.55) / 0.12).powi(2)).exp();
    [x, y, dome + nose]
}

/// Loads a template mesh from an OBJ file or a directory holding
/// `vertices.npy` `(N, 3)` and `uvs.npy` `(N, 2)`.
pub fn load_mesh(path: &Path) -> Result<TemplateMesh> {
    if path.is_dir() {
        let verts = npy::read_float_array(&path.join("vertices.npy"))?;
        let uvs = npy::read_float_array(&path.join("uvs.npy"))?;
        match (&verts.shape[..], &uvs.shape[..]) {
            ([n, 3], [m, 2]) if n == m => TemplateMesh::new(
                verts.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
                uvs.data.chunks_exact(2).map(|c| [c[0], c[1]]).collect(),
            ),
            (a, b) => Err(Error::Shape(format!(
                "{}: expected vertices (N,3) and uvs (N,2), got {a:?} and {b:?}",
                path.display()
            ))),
        }
    } else {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_obj(&text).map_err(|m| Error::parse(path, m))
    }
}

/// Parses `v`, `vt` and `f` records. Texture coordinates are attached to
/// vertices through `v/vt` face references; without faces, `v` and `vt`
/// records pair up by order.
pub fn parse_obj(text: &str) -> std::result::Result<TemplateMesh, String> {
    let mut vertices = Vec::new();
    let mut tex = Vec::new();
    let mut uv: Vec<Option<Uv>> = Vec::new();
    let mut saw_face_uv = false;
    for (lineno, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        let bad = |what: &str| format!("line {}: bad {what} record", lineno + 1);
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it.take(3).map(str::parse).collect::<Result<_, _>>().map_err(|_| bad("v"))?;
                let [x, y, z] = c[..] else { return Err(bad("v")) };
                vertices.push([x, y, z]);
                uv.push(None);
            }
            Some("vt") => {
                let c: Vec<f64> = it.take(2).map(str::parse).collect::<Result<_, _>>().map_err(|_| bad("vt"))?;
                let [u, v] = c[..] else { return Err(bad("vt")) };
                tex.push([u, v]);
            }
            Some("f") => {
                for corner in it {
                    let mut parts = corner.split('/');
                    let vi = parts.next().and_then(|s| resolve_obj_index(s, vertices.len()));
                    let ti = parts.next().filter(|s| !s.is_empty());
                    let (Some(vi), Some(ti)) = (vi, ti) else { continue };
                    let ti = resolve_obj_index(ti, tex.len()).ok_or_else(|| bad("f"))?;
                    let t = tex[ti];
                    match uv.get(vi).copied().flatten() {
                        Some(prev) if prev != t => {
                            return Err(format!(
                                "line {}: vertex {} has two texture coordinates (seam); per-vertex UVs required",
                                lineno + 1,
                                vi + 1
                            ))
                        }
                        _ => uv[vi] = Some(t),
                    }
                    saw_face_uv = true;
                }
            }
            _ => {}
        }
    }
    let uv: Vec<Uv> = if saw_face_uv {
        uv.iter()
            .enumerate()
            .map(|(i, t)| t.ok_or_else(|| format!("vertex {} has no texture coordinate", i + 1)))
            .collect::<Result<_, _>>()?
    } else if tex.len() == vertices.len() {
        tex
    } else {
        return Err(format!(
            "{} vertices but {} texture coordinates and no faces to pair them",
            vertices.len(),
            tex.len()
        ));
    };
    TemplateMesh::new(vertices, uv).map_err(|e| e.to_string())
}

fn resolve_obj_index(s: &str, len: usize) -> Option<usize> {
    let i: i64 = s.parse().ok()?;
    let idx = if i < 0 { len as i64 + i } else { i - 1 };
    (0..len as i64).contains(&idx).then_some(idx as usize)
}

/// Serialises a mesh as OBJ with one `vt` per vertex, in vertex order.
pub fn to_obj(mesh: &TemplateMesh) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    for v in mesh.vertices() {
        writeln!(s, "v {} {} {}", v[0], v[1], v[2]).unwrap();
    }
    for t in mesh.uv() {
        writeln!(s, "vt {} {}", t[0], t[1]).unwrap();
    }
    s
}
