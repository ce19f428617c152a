//! Renders a few posed position maps, then builds the flip-augmented
//! landmark dataset from them.
//!
//! `cargo run --example build_dataset -- [workdir]`

use densemark::dataset::{build_dataset, DatasetManifest};
use densemark::geom::Schema;
use densemark::sampler::{sample_keypoints, SamplerConfig};
use densemark::synth::{random_poses, write_input_dir};
use densemark::template::FaceTemplate;

fn main() -> densemark::Result<()> {
    let work = match std::env::args().nth(1) {
        Some(d) => std::path::PathBuf::from(d),
        None => std::env::temp_dir().join("densemark-build-example"),
    };
    let input = work.join("input");
    let out = work.join("dataset");
    write_input_dir(&input, &random_poses(6, 7), 128)?;

    let template = FaceTemplate::reference();
    let keys = sample_keypoints(&template, &SamplerConfig { fill_target: Some(520), ..Default::default() })?;
    let built = build_dataset(&input, &template, &keys, true, &out)?;
    println!("{}", serde_json::to_string_pretty(&built.summary).unwrap());

    let manifest = DatasetManifest::load(&out)?;
    let rec = &manifest.records[1];
    let lm = manifest.load_landmarks(rec, Schema::L68)?;
    println!("{} (flipped: {}) nose tip at {:?}", rec.id, rec.flipped, lm.points()[30]);
    Ok(())
}
