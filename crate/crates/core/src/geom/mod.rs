//! Domain types shared by every stage: the template mesh, UV position maps,
//! landmark sets and keypoint index sets.
//!
//! Coordinate conventions: `u` runs along image columns and `v` along rows,
//! both in `[0, 1]` with the origin at the top-left pixel. Position-map
//! triples store image-plane `(x, y)` in pixels and depth `z` in the same
//! pixel scale (left-handed).

mod keypoints;
mod landmarks;
mod mesh;
mod posmap;

pub use keypoints::{KeypointSet, Provenance, KEYPOINT_FILE_VERSION};
pub use landmarks::{landmark_bounding_box, BoundingBox, LandmarkSet, Schema};
pub use mesh::{TemplateMesh, REFERENCE_VERTEX_COUNT};
pub use posmap::{extract_landmarks, Sampling, UvPositionMap, DEFAULT_RESOLUTION};

/// A 3D point in model units or pixels depending on context.
pub type Point3 = [f64; 3];

/// A UV coordinate.
pub type Uv = [f64; 2];
