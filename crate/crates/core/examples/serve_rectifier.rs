//! The rectification API: a scripted session against the in-process router
//! (fetch, move one keypoint, save, reject a duplicate), or a live server
//! with `--listen PORT`.

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request};
use densemark::geom::KeypointSet;
use densemark::sampler::{sample_keypoints, SamplerConfig};
use densemark::serve::{router, run, ServeState};
use densemark::template::FaceTemplate;
use http_body_util::BodyExt;
use tower::ServiceExt;

async fn call(app: &axum::Router, method: Method, uri: &str, body: String) -> (u16, String) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body))
        .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status().as_u16();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8_lossy(&bytes).into_owned())
}

#[tokio::main]
async fn main() -> densemark::Result<()> {
    let dir = std::env::temp_dir().join("densemark-serve-example");
    std::fs::create_dir_all(&dir).unwrap();
    let file = dir.join("keypoints520.json");
    let template = FaceTemplate::reference();
    sample_keypoints(&template, &SamplerConfig { fill_target: Some(520), ..Default::default() })?.save(&file)?;
    let state = Arc::new(ServeState::new(file.clone(), template.mesh.clone(), None, 10_000)?);

    let args: Vec<String> = std::env::args().collect();
    if let Some(port) = args.iter().position(|a| a == "--listen").and_then(|i| args.get(i + 1)) {
        let addr = std::net::SocketAddr::from(([127, 0, 0, 1], port.parse::<u16>().expect("port")));
        println!("serving {} on http://{addr}", file.display());
        return run(addr, state).await;
    }

    let app = router(state);
    let (status, body) = call(&app, Method::GET, "/api/keypointset", String::new()).await;
    let mut keys = KeypointSet::from_json(&body).unwrap();
    println!("GET /api/keypointset -> {status}, {} keypoints, version {}", keys.len(), keys.version);

    let (_, snapped) = call(&app, Method::POST, "/api/snap", r#"{"uv":[0.5,0.2]}"#.into()).await;
    let target: usize =
        serde_json::from_str::<serde_json::Value>(&snapped).unwrap()["index"].as_u64().unwrap() as usize;
    let mut v: serde_json::Value = serde_json::from_str(&body).unwrap();
    v["indices"][100] = target.into();
    let (status, saved) = call(&app, Method::PUT, "/api/keypointset", v.to_string()).await;
    keys = KeypointSet::from_json(&saved).unwrap();
    println!(
        "moved keypoint 100 to vertex {target}: {status}, version {}, provenance {}",
        keys.version,
        keys.provenance()[100]
    );

    let mut dup: serde_json::Value = serde_json::from_str(&saved).unwrap();
    dup["indices"][1] = dup["indices"][0].clone();
    let (status, err) = call(&app, Method::PUT, "/api/keypointset", dup.to_string()).await;
    println!("duplicate index: {status} {err}");
    let (status, err) = call(&app, Method::PUT, "/api/keypointset", body).await;
    println!("stale version: {status} {err}");
    Ok(())
}
