use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{KeypointSet, LandmarkSet, Point3, TemplateMesh, Uv};

/// Default position-map resolution (square).
pub const DEFAULT_RESOLUTION: usize = 256;

/// How a UV coordinate is resolved against the pixel grid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    /// Round-half-up to the nearest pixel centre.
    #[default]
    Nearest,
    Bilinear,
}

/// An `H × W` grid of `(x, y, z)` triples, row-major, with an optional
/// validity mask (`true` = face pixel).
#[derive(Debug, Clone, PartialEq)]
pub struct UvPositionMap {
    height: usize,
    width: usize,
    data: Vec<Point3>,
    mask: Option<Vec<bool>>,
}

impl UvPositionMap {
    pub fn new(height: usize, width: usize, data: Vec<Point3>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Shape(format!("empty position map ({height}x{width})")));
        }
        if data.len() != height * width {
            return Err(Error::Shape(format!(
                "position map {height}x{width} needs {} triples, got {}",
                height * width,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::Invariant(format!(
                "position map value at row {}, col {} is not finite",
                i / width,
                i % width
            )));
        }
        Ok(Self { height, width, data, mask: None })
    }

    /// Builds a map by evaluating `f(row, col)` at every pixel.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> Point3) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self::new(height, width, data)
    }

    pub fn constant(height: usize, width: usize, value: Point3) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.data.len() {
            return Err(Error::Shape(format!("mask has {} entries, map has {} pixels", mask.len(), self.data.len())));
        }
        self.mask = Some(mask);
        Ok(self)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[Point3] {
        &self.data
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    pub fn get(&self, row: usize, col: usize) -> Point3 {
        self.data[row * self.width + col]
    }

    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[row * self.width + col])
    }

    fn checked(&self, row: usize, col: usize) -> Result<Point3> {
        if self.is_valid(row, col) {
            Ok(self.get(row, col))
        } else {
            Err(Error::MaskedLookup { row, col })
        }
    }

    /// Pixel `(row, col)` that a UV coordinate resolves to in nearest mode.
    pub fn pixel_of(&self, uv: Uv) -> Result<(usize, usize)> {
        check_uv(uv)?;
        let row = round_half_up(uv[1] * (self.height - 1) as f64);
        let col = round_half_up(uv[0] * (self.width - 1) as f64);
        Ok((row, col))
    }

    /// `Pos(u, v)`: the stored triple for a UV coordinate.
    pub fn lookup(&self, uv: Uv, sampling: Sampling) -> Result<Point3> {
        match sampling {
            Sampling::Nearest => {
                let (row, col) = self.pixel_of(uv)?;
                self.checked(row, col)
            }
            Sampling::Bilinear => self.lookup_bilinear(uv),
        }
    }

    fn lookup_bilinear(&self, uv: Uv) -> Result<Point3> {
        check_uv(uv)?;
        let fr = uv[1] * (self.height - 1) as f64;
        let fc = uv[0] * (self.width - 1) as f64;
        let r0 = (fr.floor() as usize).min(self.height - 1);
        let c0 = (fc.floor() as usize).min(self.width - 1);
        let r1 = (r0 + 1).min(self.height - 1);
        let c1 = (c0 + 1).min(self.width - 1);
        let tr = fr - r0 as f64;
        let tc = fc - c0 as f64;
        let taps = [
            (r0, c0, (1.0 - tr) * (1.0 - tc)),
            (r0, c1, (1.0 - tr) * tc),
            (r1, c0, tr * (1.0 - tc)),
            (r1, c1, tr * tc),
        ];
        let mut out = [0.0; 3];
        for (r, c, wgt) in taps {
            if wgt == 0.0 {
                continue;
            }
            let p = self.checked(r, c)?;
            for k in 0..3 {
                out[k] += wgt * p[k];
            }
        }
        Ok(out)
    }

    /// Mirrors the grid column-wise: pixel `(r, c)` takes the value of `(r, W-1-c)`.
    /// Values are not touched; see [`UvPositionMap::map_values`].
    pub fn mirrored_columns(&self) -> Self {
        let w = self.width;
        let remap = |i: usize| (i / w) * w + (w - 1 - i % w);
        let data = (0..self.data.len()).map(|i| self.data[remap(i)]).collect();
        let mask = self.mask.as_ref().map(|m| (0..m.len()).map(|i| m[remap(i)]).collect());
        Self { height: self.height, width: self.width, data, mask }
    }

    pub fn map_values(mut self, f: impl Fn(Point3) -> Point3) -> Self {
        for p in &mut self.data {
            *p = f(*p);
        }
        self
    }
}

fn check_uv(uv: Uv) -> Result<()> {
    if uv.iter().all(|c| (0.0..=1.0).contains(c)) {
        Ok(())
    } else {
        Err(Error::Domain(format!("uv {uv:?} outside [0,1]²")))
    }
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Reads one landmark per keypoint: `points[i] = Pos(mesh.uv[keys[i]])`.
pub fn extract_landmarks(
    map: &UvPositionMap,
    mesh: &TemplateMesh,
    keys: &KeypointSet,
    sampling: Sampling,
) -> Result<LandmarkSet> {
    let uv = mesh.uv();
    let points = keys
        .indices()
        .iter()
        .enumerate()
        .map(|(ordinal, &vertex)| {
            let t = uv.get(vertex).ok_or_else(|| {
                Error::Domain(format!("keypoint {ordinal} references vertex {vertex}, template has {}", uv.len()))
            })?;
            map.lookup(*t, sampling).map_err(|e| Error::KeypointLookup { ordinal, vertex, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;
    LandmarkSet::for_count(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize) -> UvPositionMap {
        UvPositionMap::from_fn(n, n, |r, c| [c as f64, r as f64, 0.0]).unwrap()
    }

    #[test]
    fn constant_map_returns_constant() {
        let m = UvPositionMap::constant(256, 256, [5.0, 7.0, 9.0]).unwrap();
        assert_eq!(m.lookup([0.3, 0.6], Sampling::Nearest).unwrap(), [5.0, 7.0, 9.0]);
        assert_eq!(m.lookup([0.3, 0.6], Sampling::Bilinear).unwrap(), [5.0, 7.0, 9.0]);
    }

    #[test]
    fn corner_maps_to_corner() {
        let m = ramp(256);
        assert_eq!(m.pixel_of([0.0, 0.0]).unwrap(), (0, 0));
        assert_eq!(m.lookup([0.0, 0.0], Sampling::Nearest).unwrap(), [0.0, 0.0, 0.0]);
        assert_eq!(m.lookup([1.0, 1.0], Sampling::Nearest).unwrap(), [255.0, 255.0, 0.0]);
    }

    #[test]
    fn centre_rounds_half_up() {
        // 0.5 * 255 = 127.5 -> 128
        assert_eq!(ramp(256).lookup([0.5, 0.5], Sampling::Nearest).unwrap(), [128.0, 128.0, 0.0]);
    }

    #[test]
    fn u_is_column_v_is_row() {
        let m = ramp(256);
        let p = m.lookup([1.0, 0.0], Sampling::Nearest).unwrap();
        assert_eq!(p, [255.0, 0.0, 0.0]);
    }

    #[test]
    fn bilinear_interpolates_ramp() {
        let p = ramp(256).lookup([0.5, 0.25], Sampling::Bilinear).unwrap();
        assert!((p[0] - 127.5).abs() < 1e-12);
        assert!((p[1] - 63.75).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_uv_is_domain_error() {
        let m = ramp(4);
        assert!(matches!(m.lookup([1.01, 0.0], Sampling::Nearest), Err(Error::Domain(_))));
        assert!(matches!(m.lookup([0.0, -0.1], Sampling::Nearest), Err(Error::Domain(_))));
        assert!(matches!(m.lookup([f64::NAN, 0.0], Sampling::Nearest), Err(Error::Domain(_))));
    }

    #[test]
    fn masked_pixel_is_reported() {
        let mut mask = vec![true; 16];
        mask[0] = false;
        let m = ramp(4).with_mask(mask).unwrap();
        assert!(matches!(m.lookup([0.0, 0.0], Sampling::Nearest), Err(Error::MaskedLookup { row: 0, col: 0 })));
        assert!(m.lookup([1.0, 1.0], Sampling::Nearest).is_ok());
    }

    #[test]
    fn rejects_non_finite_and_bad_shape() {
        assert!(UvPositionMap::new(2, 2, vec![[0.0; 3]; 3]).is_err());
        assert!(UvPositionMap::new(1, 1, vec![[f64::INFINITY, 0.0, 0.0]]).is_err());
    }

    #[test]
    fn column_mirror_is_an_involution() {
        let m = ramp(5);
        let f = m.mirrored_columns();
        assert_eq!(f.get(2, 0), m.get(2, 4));
        assert_eq!(f.mirrored_columns(), m);
    }
}
