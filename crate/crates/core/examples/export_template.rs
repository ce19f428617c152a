//! Writes the built-in reference template as an OBJ file (with texture
//! coordinates) and its 68-landmark vertex lookup as JSON.
//!
//! `cargo run --example export_template -- [out_dir]`

use densemark::template::{to_obj, FaceTemplate};

fn main() -> densemark::Result<()> {
    let dir = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    std::fs::create_dir_all(&dir).expect("create output directory");
    let template = FaceTemplate::reference();
    std::fs::write(dir.join("reference_template.obj"), to_obj(&template.mesh)).expect("write obj");
    let lookup = serde_json::json!({ "landmarkVertices68": template.landmarks68.indices() });
    std::fs::write(dir.join("landmarks68.json"), lookup.to_string()).expect("write lookup");
    println!("{} vertices -> {}", template.mesh.vertex_count(), dir.join("reference_template.obj").display());
    Ok(())
}
