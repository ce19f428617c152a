//! Derives the dense keypoint set on the built-in template.
//!
//! `cargo run --example sample_keypoints -- [out.json]`

use densemark::sampler::{sample_keypoints, SamplerConfig};
use densemark::template::FaceTemplate;

fn main() -> densemark::Result<()> {
    let template = FaceTemplate::reference();
    let raw = sample_keypoints(&template, &SamplerConfig::default())?;
    println!("19 seeds, 3 centroid rounds: {} keypoints", raw.len());

    let cfg = SamplerConfig { fill_target: Some(520), ..Default::default() };
    let keys = sample_keypoints(&template, &cfg)?;
    println!("completed set: {} keypoints", keys.len());
    for (tag, n) in keys.provenance_counts() {
        println!("  {tag:<16} {n}");
    }
    let paired = keys.mirror().iter().enumerate().filter(|&(i, &j)| i != j).count();
    println!("mirror pairs: {}, self-mirrored: {}", paired / 2, keys.len() - paired);

    if let Some(out) = std::env::args().nth(1) {
        keys.save(out.as_ref())?;
        println!("wrote {out}");
    }
    Ok(())
}
