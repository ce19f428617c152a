//! Dense facial landmark tooling built around UV position maps.
//!
//! - [`geom`]: template mesh, position maps, landmark and keypoint sets
//! - [`sampler`] / [`delaunay`]: keypoint derivation by iterated Delaunay
//!   centroid insertion and snapping to template vertices
//! - [`dataset`]: ground-truth extraction and horizontal-flip augmentation
//! - [`loss`]: wing, MSE, L1/L2/smooth-L1 and the hybrid wing + MSE loss
//! - [`trainer`]: a small reference regressor trained with those losses
//! - [`eval`]: NME, yaw-binned aggregation, CED/AUC and table rendering
//! - [`serve`]: HTTP API used by the keypoint rectification UI
//! - [`synth`]: posed renderings of the reference surface for demos and tests
//! - [`config`] / [`cli`]: JSON config with overrides and the command line
//!
//! The `densemark` binary wires these together; see `examples/` for one
//! runnable program per capability.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod delaunay;
pub mod error;
pub mod eval;
pub mod geom;
pub mod kdtree;
pub mod loss;
pub mod npy;
pub mod sampler;
pub mod serve;
pub mod synth;
pub mod template;
pub mod trainer;

pub use error::{Error, Result};
