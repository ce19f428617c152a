use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

use super::Point3;

/// Landmark schema: which point definition a [`LandmarkSet`] follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Schema {
    L68,
    L21,
    D520,
    Custom(usize),
}

impl Schema {
    pub fn cardinality(self) -> usize {
        match self {
            Schema::L68 => 68,
            Schema::L21 => 21,
            Schema::D520 => 520,
            Schema::Custom(n) => n,
        }
    }

    /// Named schema for a point count, `Custom` otherwise.
    pub fn for_count(n: usize) -> Self {
        match n {
            68 => Schema::L68,
            21 => Schema::L21,
            520 => Schema::D520,
            n => Schema::Custom(n),
        }
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.cardinality())
    }
}

impl FromStr for Schema {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Schema::for_count)
            .ok_or_else(|| Error::Config(format!("unknown landmark schema {s:?}")))
    }
}

/// An ordered list of landmark positions (pixels) under a schema.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    points: Vec<Point3>,
    schema: Schema,
}

impl LandmarkSet {
    pub fn new(points: Vec<Point3>, schema: Schema) -> Result<Self> {
        if points.len() != schema.cardinality() {
            return Err(Error::Shape(format!(
                "schema {schema} expects {} points, got {}",
                schema.cardinality(),
                points.len()
            )));
        }
        if let Some(i) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::Invariant(format!("landmark {i} is not finite")));
        }
        Ok(Self { points, schema })
    }

    pub fn for_count(points: Vec<Point3>) -> Result<Self> {
        let schema = Schema::for_count(points.len());
        Self::new(points, schema)
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn schema(&self) -> Schema {
        self.schema
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Point3> {
        self.points
    }

    /// Flattened `[x0, y0, z0, x1, ...]` coordinates.
    pub fn flat(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().flatten().copied()
    }

    pub(crate) fn ensure_same_schema(&self, other: &LandmarkSet) -> Result<()> {
        if self.schema != other.schema {
            return Err(Error::Shape(format!("schema mismatch: {} vs {}", self.schema, other.schema)));
        }
        Ok(())
    }
}

/// Axis-aligned box in image pixels.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BoundingBox {
    pub x0: f64,
    pub y0: f64,
    pub h: f64,
    pub w: f64,
}

impl BoundingBox {
    pub fn new(x0: f64, y0: f64, h: f64, w: f64) -> Result<Self> {
        let b = Self { x0, y0, h, w };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.h > 0.0 && self.w > 0.0 && self.h.is_finite() && self.w.is_finite() {
            Ok(())
        } else {
            Err(Error::DegenerateBox { h: self.h, w: self.w })
        }
    }

    /// Normalisation factor `sqrt(h * w)`.
    pub fn diagonal_scale(&self) -> f64 {
        (self.h * self.w).sqrt()
    }
}

/// Tight box over the `(x, y)` projection of a landmark set.
pub fn landmark_bounding_box(l: &LandmarkSet) -> Result<BoundingBox> {
    if l.len() < 2 {
        return Err(Error::DegenerateBox { h: 0.0, w: 0.0 });
    }
    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in l.points() {
        min_x = min_x.min(p[0]);
        max_x = max_x.max(p[0]);
        min_y = min_y.min(p[1]);
        max_y = max_y.max(p[1]);
    }
    BoundingBox::new(min_x, min_y, max_y - min_y, max_x - min_x)
}
