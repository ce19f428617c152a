//! Synthetic inputs: the reference surface rendered as UV position maps
//! under a head pose, and ready-made input directories for the dataset
//! builder.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::SampleMeta;
use crate::error::{Error, Result};
use crate::geom::UvPositionMap;
use crate::npy;
use crate::template::reference_surface;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    /// Degrees, positive turning the face towards image right.
    pub yaw: f64,
    /// Degrees, positive tilting the chin down.
    pub pitch: f64,
    /// Image pixels per model unit.
    pub scale: f64,
    /// Image position of the model origin.
    pub center: [f64; 2],
}

impl Default for Pose {
    fn default() -> Self {
        Self { yaw: 0.0, pitch: 0.0, scale: 0.9, center: [127.5, 127.5] }
    }
}

impl Pose {
    /// Model point to image coordinates: `x` right, `y` down, `z` scaled
    /// like `x` and `y`.
    pub fn project(&self, p: [f64; 3]) -> [f64; 3] {
        let (sy, cy) = self.yaw.to_radians().sin_cos();
        let (sp, cp) = self.pitch.to_radians().sin_cos();
        let x = cy * p[0] + sy * p[2];
        let z = -sy * p[0] + cy * p[2];
        let y = cp * p[1] - sp * z;
        let z = sp * p[1] + cp * z;
        [self.center[0] + self.scale * x, self.center[1] - self.scale * y, self.scale * z]
    }
}

/// Position map of the reference surface under `pose`, `size × size`.
pub fn position_map(pose: &Pose, size: usize) -> Result<UvPositionMap> {
    if size < 2 {
        return Err(Error::Shape(format!("position map needs at least 2x2 pixels, got {size}")));
    }
    let step = (size - 1) as f64;
    UvPositionMap::from_fn(size, size, |row, col| {
        pose.project(reference_surface([col as f64 / step, row as f64 / step]))
    })
}

/// `n` poses with yaw spread over `[-90, 90]`, ids `face_000`, `face_001`, ...
pub fn random_poses(n: usize, seed: u64) -> Vec<(String, Pose)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let pose = Pose {
                yaw: rng.gen_range(-90.0..=90.0),
                pitch: rng.gen_range(-15.0..15.0),
                scale: rng.gen_range(0.7..1.0),
                center: [rng.gen_range(110.0..146.0), rng.gen_range(110.0..146.0)],
            };
            (format!("face_{i:03}"), pose)
        })
        .collect()
}

/// Writes `<id>.npy`, an empty `<id>.png` placeholder and `<id>.meta.json`
/// (yaw, image width 256) for each pose.
pub fn write_input_dir(dir: &Path, poses: &[(String, Pose)], size: usize) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (id, pose) in poses {
        npy::write_position_map(&dir.join(format!("{id}.npy")), &position_map(pose, size)?)?;
        let image = dir.join(format!("{id}.png"));
        std::fs::write(&image, b"").map_err(|e| Error::io(&image, e))?;
        let meta = SampleMeta { yaw: Some(pose.yaw), image_width: Some(256), bbox: None };
        let path = dir.join(format!("{id}.meta.json"));
        std::fs::write(&path, serde_json::to_string_pretty(&meta).expect("meta serialises"))
            .map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
