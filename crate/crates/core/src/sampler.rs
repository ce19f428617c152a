//! Keypoint derivation: seed landmarks, rounds of Delaunay triangulation
//! with centroid insertion, snapping to template vertices and a left/right
//! mirror table.

use serde::{Deserialize, Serialize};

use crate::delaunay::{delaunay, Point2, Triangulation};
use crate::error::{Error, Result};
use crate::geom::{KeypointSet, Provenance, TemplateMesh};
use crate::kdtree::{dist2, KdTree};
use crate::template::{FaceTemplate, JAW_68, NASAL_ROOT_68, NOSE_TIP_68};

/// Points closer than this (UV units) are treated as duplicates.
pub const DUPLICATE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct SamplerConfig {
    /// Seed landmarks as indices into the 68-point schema.
    #[serde(rename = "seedIndices68")]
    pub seed_indices_68: Vec<usize>,
    /// Which seed is the nose tip (tagged `seed-nose`); the rest are `seed-jaw`.
    #[serde(rename = "noseTip68")]
    pub nose_tip_68: usize,
    pub iterations: u32,
    pub snap_dedup: bool,
    /// Vertex lookup of the 68-point schema for user-supplied templates.
    #[serde(rename = "landmarkVertices68", skip_serializing_if = "Option::is_none")]
    pub landmark_vertices_68: Option<Vec<usize>>,
    /// When set, the sampled set is completed to this size with
    /// [`complete_to_target`] (entries tagged `manual`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fill_target: Option<usize>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        let mut seeds: Vec<usize> = JAW_68.collect();
        seeds.push(NASAL_ROOT_68);
        seeds.push(NOSE_TIP_68);
        Self {
            seed_indices_68: seeds,
            nose_tip_68: NOSE_TIP_68,
            iterations: 3,
            snap_dedup: true,
            landmark_vertices_68: None,
            fill_target: None,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::Config("sampler.iterations must be >= 1".into()));
        }
        let mut seen = self.seed_indices_68.clone();
        seen.sort_unstable();
        seen.dedup();
        if self.seed_indices_68.len() != 19 || seen.len() != 19 {
            return Err(Error::Config(format!(
                "sampler.seedIndices68 must hold 19 unique entries, got {:?}",
                self.seed_indices_68
            )));
        }
        if let Some(i) = self.seed_indices_68.iter().find(|&&i| i >= 68) {
            return Err(Error::Config(format!("seed index {i} outside the 68-point schema")));
        }
        if !self.seed_indices_68.contains(&self.nose_tip_68) {
            return Err(Error::Config("sampler.noseTip68 must be one of the seeds".into()));
        }
        Ok(())
    }
}

/// A sampling-plane point with its provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaggedPoint {
    pub uv: Point2,
    pub provenance: Provenance,
}

/// One point per triangle: the mean of its three vertices, in triangle order.
pub fn centroids(t: &Triangulation) -> Vec<Point2> {
    t.triangles
        .iter()
        .map(|&[a, b, c]| {
            let (pa, pb, pc) = (t.points[a], t.points[b], t.points[c]);
            [(pa[0] + pb[0] + pc[0]) / 3.0, (pa[1] + pb[1] + pc[1]) / 3.0]
        })
        .collect()
}

/// Runs `iterations` rounds of triangulate-and-insert-centroids; the result
/// starts with the seeds, followed by each round's new centroids.
pub fn iterate_sampling(seeds: &[TaggedPoint], iterations: u32) -> Result<Vec<TaggedPoint>> {
    let mut acc: Vec<TaggedPoint> = Vec::with_capacity(seeds.len());
    for s in seeds {
        push_unique(&mut acc, *s);
    }
    for round in 1..=iterations {
        let plane: Vec<Point2> = acc.iter().map(|p| p.uv).collect();
        let tri = delaunay(&plane)?;
        for uv in centroids(&tri) {
            push_unique(&mut acc, TaggedPoint { uv, provenance: Provenance::Centroid(round) });
        }
    }
    Ok(acc)
}

/// Untagged convenience form of [`iterate_sampling`].
pub fn iterate_points(seeds: &[Point2], iterations: u32) -> Result<Vec<Point2>> {
    let tagged: Vec<TaggedPoint> =
        seeds.iter().map(|&uv| TaggedPoint { uv, provenance: Provenance::SeedJaw }).collect();
    Ok(iterate_sampling(&tagged, iterations)?.into_iter().map(|p| p.uv).collect())
}

fn push_unique(acc: &mut Vec<TaggedPoint>, p: TaggedPoint) {
    let tol2 = DUPLICATE_TOLERANCE * DUPLICATE_TOLERANCE;
    if acc.iter().all(|q| dist2(q.uv, p.uv) > tol2) {
        acc.push(p);
    }
}

/// Maps each point to its nearest template vertex (UV distance, lowest
/// vertex index on ties). With `dedup`, later points landing on an already
/// used vertex are dropped; without it they are an error.
pub fn snap_to_vertices(points: &[TaggedPoint], mesh: &TemplateMesh, dedup: bool) -> Result<KeypointSet> {
    if points.is_empty() {
        return Err(Error::Domain("nothing to snap: empty point list".into()));
    }
    let tree = KdTree::new(mesh.uv());
    let mut used = std::collections::HashSet::new();
    let mut indices = Vec::with_capacity(points.len());
    let mut provenance = Vec::with_capacity(points.len());
    for (ordinal, p) in points.iter().enumerate() {
        let (vertex, _) = tree.nearest(p.uv);
        if !used.insert(vertex) {
            if dedup {
                continue;
            }
            return Err(Error::Invariant(format!(
                "indices unique: point {ordinal} snaps to vertex {vertex} which is already taken"
            )));
        }
        indices.push(vertex);
        provenance.push(p.provenance);
    }
    KeypointSet::new(indices, provenance, mesh.vertex_count())
}

/// Pairs each keypoint with the keypoint nearest its reflection
/// `(1 - u, v)`; only mutual nearest pairs are kept, everything else
/// mirrors to itself.
pub fn build_mirror_table(keys: &KeypointSet, mesh: &TemplateMesh) -> Result<KeypointSet> {
    let uv: Vec<Point2> = keys
        .indices()
        .iter()
        .map(|&i| {
            mesh.uv()
                .get(i)
                .copied()
                .ok_or_else(|| Error::Domain(format!("vertex {i} outside template of {}", mesh.vertex_count())))
        })
        .collect::<Result<_>>()?;
    let mut out = keys.clone();
    if uv.is_empty() {
        out.set_mirror(Vec::new())?;
        return Ok(out);
    }
    let tree = KdTree::new(&uv);
    let partner: Vec<usize> = uv.iter().map(|t| tree.nearest([1.0 - t[0], t[1]]).0).collect();
    let mirror = (0..uv.len())
        .map(|i| {
            let j = partner[i];
            if partner[j] == i {
                j
            } else {
                i
            }
        })
        .collect();
    out.set_mirror(mirror)?;
    Ok(out)
}

/// Seeds for a template: UVs of the configured 68-schema vertices.
pub fn seed_points(template: &FaceTemplate, cfg: &SamplerConfig) -> Result<Vec<TaggedPoint>> {
    cfg.validate()?;
    let lookup = cfg.landmark_vertices_68.as_deref().unwrap_or_else(|| template.landmarks68.indices());
    if lookup.len() != 68 {
        return Err(Error::Config(format!("68-landmark lookup has {} entries", lookup.len())));
    }
    cfg.seed_indices_68
        .iter()
        .map(|&k| {
            let vertex = lookup[k];
            let uv = *template.mesh.uv().get(vertex).ok_or_else(|| {
                Error::Config(format!("68-landmark {k} maps to vertex {vertex} outside the template"))
            })?;
            let provenance = if k == cfg.nose_tip_68 { Provenance::SeedNose } else { Provenance::SeedJaw };
            Ok(TaggedPoint { uv, provenance })
        })
        .collect()
}

/// Full sampler: seeds, centroid rounds, snapping and mirror table, then the
/// optional completion to `fill_target`.
pub fn sample_keypoints(template: &FaceTemplate, cfg: &SamplerConfig) -> Result<KeypointSet> {
    let seeds = seed_points(template, cfg)?;
    let points = iterate_sampling(&seeds, cfg.iterations)?;
    let keys = snap_to_vertices(&points, &template.mesh, cfg.snap_dedup)?;
    let keys = match cfg.fill_target {
        Some(target) => complete_to_target(&keys, &template.mesh, target, &FaceRegion::default())?,
        None => keys,
    };
    build_mirror_table(&keys, &template.mesh)
}

/// Elliptical UV region that completion draws vertices from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceRegion {
    pub center: Point2,
    pub radii: [f64; 2],
}

impl Default for FaceRegion {
    fn default() -> Self {
        Self { center: [0.5, 0.5], radii: [0.4, 0.46] }
    }
}

impl FaceRegion {
    pub fn contains(&self, p: Point2) -> bool {
        let du = (p[0] - self.center[0]) / self.radii[0];
        let dv = (p[1] - self.center[1]) / self.radii[1];
        du * du + dv * dv <= 1.0
    }
}

/// Scripted stand-in for manual completion: adds template vertices inside
/// `region` by farthest-point sampling, each new vertex followed by the
/// vertex nearest its reflection, until `target` keypoints exist. Added
/// entries are tagged `manual`.
pub fn complete_to_target(
    keys: &KeypointSet,
    mesh: &TemplateMesh,
    target: usize,
    region: &FaceRegion,
) -> Result<KeypointSet> {
    if keys.len() >= target {
        return Ok(keys.clone());
    }
    let uv = mesh.uv();
    let candidates: Vec<usize> = (0..uv.len()).filter(|&i| region.contains(uv[i])).collect();
    let mut indices = keys.indices().to_vec();
    let mut provenance = keys.provenance().to_vec();
    let mut taken: std::collections::HashSet<usize> = indices.iter().copied().collect();
    if candidates.len() < target - keys.len() {
        return Err(Error::Domain(format!(
            "region holds {} vertices, cannot reach {target} keypoints",
            candidates.len()
        )));
    }
    let mut gap: Vec<f64> = candidates
        .iter()
        .map(|&c| indices.iter().map(|&k| dist2(uv[c], uv[k])).fold(f64::INFINITY, f64::min))
        .collect();
    let tree = KdTree::new(uv);
    let add = |v: usize, indices: &mut Vec<usize>, provenance: &mut Vec<Provenance>, gap: &mut [f64]| {
        indices.push(v);
        provenance.push(Provenance::Manual);
        for (g, &c) in gap.iter_mut().zip(&candidates) {
            *g = g.min(dist2(uv[c], uv[v]));
        }
    };
    while indices.len() < target {
        let (best, _) = gap
            .iter()
            .enumerate()
            .filter(|(k, _)| !taken.contains(&candidates[*k]))
            .fold((usize::MAX, f64::NEG_INFINITY), |acc, (k, &g)| if g > acc.1 { (k, g) } else { acc });
        let v = candidates[best];
        taken.insert(v);
        add(v, &mut indices, &mut provenance, &mut gap);
        if indices.len() < target {
            let (m, _) = tree.nearest([1.0 - uv[v][0], uv[v][1]]);
            if region.contains(uv[m]) && taken.insert(m) {
                add(m, &mut indices, &mut provenance, &mut gap);
            }
        }
    }
    KeypointSet::new(indices, provenance, mesh.vertex_count())
}

/// Combines a fresh sampler run with an existing keypoint file, ordinal by
/// ordinal: a `manual` entry of `existing` stays at its position, every other
/// position takes the fresh entry at that position. Fresh entries whose
/// vertex is already held by a kept manual entry are dropped, and positions
/// past the end of `existing` come from `fresh`.
pub fn merge_preserving_manual(
    existing: &KeypointSet,
    fresh: &KeypointSet,
    mesh: &TemplateMesh,
) -> Result<KeypointSet> {
    let is_kept = |k: usize| k < existing.len() && existing.provenance()[k].is_manual();
    let manual: std::collections::HashSet<usize> =
        (0..existing.len()).filter(|&k| is_kept(k)).map(|k| existing.indices()[k]).collect();
    let mut indices = Vec::new();
    let mut provenance = Vec::new();
    for k in 0..existing.len().max(fresh.len()) {
        if is_kept(k) {
            indices.push(existing.indices()[k]);
            provenance.push(existing.provenance()[k]);
        } else if k < fresh.len() && !manual.contains(&fresh.indices()[k]) {
            indices.push(fresh.indices()[k]);
            provenance.push(fresh.provenance()[k]);
        }
    }
    let mut merged = KeypointSet::new(indices, provenance, mesh.vertex_count())?;
    merged.version = existing.version;
    build_mirror_table(&merged, mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tagged(points: &[Point2]) -> Vec<TaggedPoint> {
        points.iter().map(|&uv| TaggedPoint { uv, provenance: Provenance::SeedJaw }).collect()
    }

    #[test]
    fn centroid_of_single_triangle() {
        let t = delaunay(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let c = centroids(&t);
        assert_eq!(c.len(), 1);
        assert!((c[0][0] - 1.0 / 3.0).abs() < 1e-15 && (c[0][1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn centroids_of_square_follow_tie_rule() {
        let t = delaunay(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        let c = centroids(&t);
        let expect = [[2.0 / 3.0, 1.0 / 3.0], [1.0 / 3.0, 2.0 / 3.0]];
        for (a, b) in c.iter().zip(expect) {
            assert!((a[0] - b[0]).abs() < 1e-15 && (a[1] - b[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn centroid_of_equilateral_triangle_is_its_centre() {
        let h = 3f64.sqrt() / 2.0;
        let t = delaunay(&[[-0.5, -h / 3.0], [0.5, -h / 3.0], [0.0, 2.0 * h / 3.0]]).unwrap();
        let c = centroids(&t)[0];
        assert!(c[0].abs() < 1e-15 && c[1].abs() < 1e-15);
    }

    #[test]
    fn iteration_counts_for_a_triangle() {
        let seeds = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        assert_eq!(iterate_points(&seeds, 1).unwrap().len(), 4);
        assert_eq!(iterate_points(&seeds, 2).unwrap().len(), 7);
        let three = iterate_sampling(&tagged(&seeds), 3).unwrap();
        assert_eq!(three.len(), 7 + 9);
        assert_eq!(three[3].provenance, Provenance::Centroid(1));
        assert_eq!(three[6].provenance, Provenance::Centroid(2));
        assert_eq!(three[15].provenance, Provenance::Centroid(3));
    }

    #[test]
    fn near_duplicate_seeds_are_dropped() {
        let seeds = tagged(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1e-12, 0.0]]);
        assert_eq!(iterate_sampling(&seeds, 1).unwrap().len(), 4);
    }

    fn small_mesh() -> TemplateMesh {
        let uv: Vec<Point2> =
            vec![[0.0, 0.0], [1.0, 0.0], [0.2, 0.5], [0.5, 0.9], [0.9, 0.9], [0.3, 0.4], [0.7, 0.4], [0.4, 0.5]];
        TemplateMesh::new(vec![[0.0; 3]; uv.len()], uv).unwrap()
    }

    #[test]
    fn snap_exact_and_tie() {
        let mesh = small_mesh();
        let k = snap_to_vertices(&tagged(&[[0.3, 0.4]]), &mesh, true).unwrap();
        assert_eq!(k.indices(), &[5]);
        // (0.3, 0.5) is 0.1 from both uv[2] = (0.2, 0.5) and uv[7] = (0.4, 0.5)
        let k = snap_to_vertices(&tagged(&[[0.3, 0.5]]), &mesh, true).unwrap();
        assert_eq!(k.indices(), &[2]);
    }

    #[test]
    fn snap_dedup_and_errors() {
        let mesh = small_mesh();
        let pts = tagged(&[[0.0, 0.01], [0.01, 0.0], [0.95, 0.9]]);
        assert_eq!(snap_to_vertices(&pts, &mesh, true).unwrap().indices(), &[0, 4]);
        assert!(snap_to_vertices(&pts, &mesh, false).is_err());
        assert!(matches!(snap_to_vertices(&[], &mesh, true), Err(Error::Domain(_))));
    }

    #[test]
    fn mirror_pairs_and_self_mirrors() {
        let mesh = small_mesh();
        // uv[5] = (0.3, 0.4) and uv[6] = (0.7, 0.4) reflect exactly; uv[3] sits on the axis
        let keys = KeypointSet::new(vec![5, 6, 3], vec![Provenance::Manual; 3], mesh.vertex_count()).unwrap();
        let m = build_mirror_table(&keys, &mesh).unwrap();
        assert_eq!(m.mirror(), &[1, 0, 2]);
    }

    #[test]
    fn default_config_is_valid() {
        let cfg = SamplerConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.seed_indices_68.len(), 19);
        let mut bad = cfg.clone();
        bad.seed_indices_68[0] = bad.seed_indices_68[1];
        assert!(bad.validate().is_err());
        let mut bad = cfg;
        bad.iterations = 0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn merge_keeps_manual_entries() {
        let mesh = small_mesh();
        let existing =
            KeypointSet::new(vec![0, 3, 5], vec![Provenance::SeedJaw, Provenance::Manual, Provenance::Centroid(1)], 8)
                .unwrap();
        let fresh = KeypointSet::new(
            vec![1, 3, 6],
            vec![Provenance::SeedJaw, Provenance::Centroid(1), Provenance::Centroid(2)],
            8,
        )
        .unwrap();
        let merged = merge_preserving_manual(&existing, &fresh, &mesh).unwrap();
        assert_eq!(merged.indices(), &[1, 3, 6]);
        assert_eq!(merged.provenance()[1], Provenance::Manual);
        assert_eq!(merged.provenance()[2], Provenance::Centroid(2));

        let colliding = KeypointSet::new(
            vec![6, 2, 4],
            vec![Provenance::SeedJaw, Provenance::Centroid(1), Provenance::Centroid(2)],
            8,
        )
        .unwrap();
        let merged = merge_preserving_manual(&existing, &colliding, &mesh).unwrap();
        assert_eq!(merged.indices(), &[6, 3, 4]);
        let taken = KeypointSet::new(vec![3, 2], vec![Provenance::SeedJaw, Provenance::Centroid(1)], 8).unwrap();
        assert_eq!(merge_preserving_manual(&existing, &taken, &mesh).unwrap().indices(), &[3]);
    }
}
