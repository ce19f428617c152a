#![allow(dead_code)]

pub mod oracles;

use std::path::Path;
use std::sync::OnceLock;

use densemark::dataset::{build_dataset, DatasetManifest};
use densemark::geom::KeypointSet;
use densemark::sampler::{sample_keypoints, SamplerConfig};
use densemark::synth::{random_poses, write_input_dir};
use densemark::template::FaceTemplate;

pub fn fixture(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn template() -> &'static FaceTemplate {
    static T: OnceLock<FaceTemplate> = OnceLock::new();
    T.get_or_init(FaceTemplate::reference)
}

/// The completed 520-point set on the reference template.
pub fn keys520() -> &'static KeypointSet {
    static K: OnceLock<KeypointSet> = OnceLock::new();
    K.get_or_init(|| {
        sample_keypoints(template(), &SamplerConfig { fill_target: Some(520), ..Default::default() }).unwrap()
    })
}

/// Renders `n` posed samples into `dir/input` and builds `dir/dataset`.
pub fn synthetic_dataset(dir: &Path, n: usize, seed: u64, size: usize) -> DatasetManifest {
    write_input_dir(&dir.join("input"), &random_poses(n, seed), size).unwrap();
    build_dataset(&dir.join("input"), template(), keys520(), true, &dir.join("dataset")).unwrap()
}
