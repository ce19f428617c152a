use crate::error::{Error, Result};

use super::{Point3, Uv};

/// Vertex count of the reference face template.
pub const REFERENCE_VERTEX_COUNT: usize = 43867;

/// The fixed face template: keypoint indices point into its vertex list.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateMesh {
    vertices: Vec<Point3>,
    uv: Vec<Uv>,
}

impl TemplateMesh {
    pub fn new(vertices: Vec<Point3>, uv: Vec<Uv>) -> Result<Self> {
        if vertices.len() != uv.len() {
            return Err(Error::Invariant(format!("vertex count {} != uv count {}", vertices.len(), uv.len())));
        }
        if vertices.is_empty() {
            return Err(Error::Invariant("template has no vertices".into()));
        }
        if let Some((i, t)) = uv.iter().enumerate().find(|(_, t)| !t.iter().all(|c| (0.0..=1.0).contains(c))) {
            return Err(Error::Invariant(format!("uv of vertex {i} outside [0,1]²: {t:?}")));
        }
        if let Some(i) = vertices.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::Invariant(format!("vertex {i} is not finite")));
        }
        Ok(Self { vertices, uv })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn uv(&self) -> &[Uv] {
        &self.uv
    }
}
