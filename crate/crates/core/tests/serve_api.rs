mod common;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request};
use axum::Router;
use densemark::dataset::DatasetManifest;
use densemark::geom::{KeypointSet, Provenance};
use densemark::kdtree::KdTree;
use densemark::serve::{router, ServeState};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

async fn call(app: &Router, method: Method, uri: &str, body: impl Into<String>) -> (u16, String) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.into()))
        .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status().as_u16();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

fn setup(dir: &Path, manifest: Option<DatasetManifest>) -> (Router, PathBuf) {
    let file = dir.join("keypoints520.json");
    common::keys520().save(&file).unwrap();
    let state = ServeState::new(file.clone(), common::template().mesh.clone(), manifest, 10_000).unwrap();
    (router(Arc::new(state)), file)
}

fn json(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

fn without_version(s: &str) -> String {
    let mut v = json(s);
    v["version"] = Value::Null;
    v.to_string()
}

fn backups(dir: &Path) -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().contains(".bak.v"))
        .collect();
    out.sort();
    out
}

#[tokio::test]
async fn unchanged_put_only_bumps_version() {
    let dir = tempfile::tempdir().unwrap();
    let (app, file) = setup(dir.path(), None);
    let before = std::fs::read_to_string(&file).unwrap();
    let (status, body) = call(&app, Method::GET, "/api/keypointset", "").await;
    assert_eq!(status, 200);
    assert_eq!(body, before);
    let (status, saved) = call(&app, Method::PUT, "/api/keypointset", body).await;
    assert_eq!(status, 200, "{saved}");
    let after = std::fs::read_to_string(&file).unwrap();
    assert_eq!(after, saved);
    assert_eq!(json(&after)["version"], json(&before)["version"].as_u64().unwrap() + 1);
    assert_eq!(without_version(&after), without_version(&before));
    let reindented = after.replace(
        &format!("\"version\": {}", json(&after)["version"]),
        &format!("\"version\": {}", json(&before)["version"]),
    );
    assert_eq!(reindented, before);
}

#[tokio::test]
async fn duplicate_index_is_rejected_with_ordinal() {
    let dir = tempfile::tempdir().unwrap();
    let (app, file) = setup(dir.path(), None);
    let before = std::fs::read_to_string(&file).unwrap();
    let mut v = json(&before);
    v["indices"][9] = v["indices"][3].clone();
    let (status, body) = call(&app, Method::PUT, "/api/keypointset", v.to_string()).await;
    assert_eq!(status, 422);
    let err = json(&body);
    assert_eq!(err["error"], "invariant");
    assert_eq!(err["invariant"], "indices unique");
    assert_eq!(err["ordinal"], 9);
    assert_eq!(std::fs::read_to_string(&file).unwrap(), before);
    assert!(backups(dir.path()).is_empty());
}

#[tokio::test]
async fn out_of_range_and_broken_mirror_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = setup(dir.path(), None);
    let (_, body) = call(&app, Method::GET, "/api/keypointset", "").await;
    let mut v = json(&body);
    v["indices"][4] = Value::from(10_000_000u64);
    let (status, err) = call(&app, Method::PUT, "/api/keypointset", v.to_string()).await;
    assert_eq!(status, 422);
    assert_eq!(json(&err)["invariant"], "index in range");
    assert_eq!(json(&err)["ordinal"], 4);

    let mut v = json(&body);
    let m0 = v["mirror"][0].as_u64().unwrap();
    v["mirror"][0] = Value::from(if m0 == 1 { 2 } else { 1 });
    let (status, err) = call(&app, Method::PUT, "/api/keypointset", v.to_string()).await;
    assert_eq!(status, 422);
    assert_eq!(json(&err)["invariant"], "mirror is an involution");
}

#[tokio::test]
async fn malformed_payload_is_400() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = setup(dir.path(), None);
    let (status, body) = call(&app, Method::PUT, "/api/keypointset", "{not json").await;
    assert_eq!(status, 400);
    assert_eq!(json(&body)["error"], "parse");
}

#[tokio::test]
async fn moved_point_becomes_manual_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = setup(dir.path(), None);
    let (_, body) = call(&app, Method::GET, "/api/keypointset", "").await;
    let keys = KeypointSet::from_json(&body).unwrap();
    let (status, snapped) = call(&app, Method::POST, "/api/snap", r#"{"uv":[0.52,0.31]}"#).await;
    assert_eq!(status, 200);
    let target = json(&snapped)["index"].as_u64().unwrap() as usize;
    let (oracle, _) = KdTree::new(common::template().mesh.uv()).nearest([0.52, 0.31]);
    assert_eq!(target, oracle);
    assert!(!keys.indices().contains(&target));
    let ordinal = (0..keys.len()).find(|&i| !keys.provenance()[i].is_manual()).unwrap();

    let mut v = json(&body);
    v["indices"][ordinal] = target.into();
    v["provenance"][ordinal] = json(&serde_json::to_string(&keys.provenance()[ordinal]).unwrap());
    let (status, saved) = call(&app, Method::PUT, "/api/keypointset", v.to_string()).await;
    assert_eq!(status, 200, "{saved}");
    let saved = KeypointSet::from_json(&saved).unwrap();
    assert_eq!(saved.indices()[ordinal], target);
    assert_eq!(saved.provenance()[ordinal], Provenance::Manual);
    for i in (0..keys.len()).filter(|&i| i != ordinal) {
        assert_eq!(saved.provenance()[i], keys.provenance()[i]);
    }
    saved.validate().unwrap();

    let (_, reloaded) = call(&app, Method::GET, "/api/keypointset", "").await;
    assert_eq!(KeypointSet::from_json(&reloaded).unwrap(), saved);
    let (_, tpl) = call(&app, Method::GET, "/api/template", "").await;
    let uv = &json(&tpl)["keypointUv"][ordinal];
    let expect = common::template().mesh.uv()[target];
    assert_eq!([uv[0].as_f64().unwrap(), uv[1].as_f64().unwrap()], expect);
}

#[tokio::test]
async fn stale_version_is_409_and_leaves_file() {
    let dir = tempfile::tempdir().unwrap();
    let (app, file) = setup(dir.path(), None);
    let (_, v0) = call(&app, Method::GET, "/api/keypointset", "").await;
    let (status, _) = call(&app, Method::PUT, "/api/keypointset", v0.clone()).await;
    assert_eq!(status, 200);
    let current = std::fs::read_to_string(&file).unwrap();
    let (status, body) = call(&app, Method::PUT, "/api/keypointset", v0).await;
    assert_eq!(status, 409);
    assert_eq!(json(&body)["error"], "stale");
    assert_eq!(std::fs::read_to_string(&file).unwrap(), current);
}

#[tokio::test]
async fn backup_chain_reconstructs_every_version() {
    let dir = tempfile::tempdir().unwrap();
    let (app, file) = setup(dir.path(), None);
    let mut history = vec![std::fs::read_to_string(&file).unwrap()];
    let uv = common::template().mesh.uv();
    for step in 0..3 {
        let mut v = json(history.last().unwrap());
        let (target, _) = KdTree::new(uv).nearest([0.3 + 0.1 * step as f64, 0.6]);
        v["indices"][50 + step] = target.into();
        let (status, saved) = call(&app, Method::PUT, "/api/keypointset", v.to_string()).await;
        assert_eq!(status, 200, "{saved}");
        history.push(saved);
    }
    let baks = backups(dir.path());
    assert_eq!(baks.len(), 3);
    for (k, bak) in baks.iter().enumerate() {
        assert!(bak.file_name().unwrap().to_string_lossy().starts_with(&format!("keypoints520.json.bak.v{k}.")));
        assert_eq!(std::fs::read_to_string(bak).unwrap(), history[k]);
    }
    assert_eq!(std::fs::read_to_string(&file).unwrap(), history[3]);
}

#[tokio::test]
async fn template_view_is_decimated() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = setup(dir.path(), None);
    let (status, body) = call(&app, Method::GET, "/api/template", "").await;
    assert_eq!(status, 200);
    let v = json(&body);
    let n = common::template().mesh.vertex_count();
    assert_eq!(v["vertexCount"], n);
    let shown = v["uv"].as_array().unwrap().len();
    assert!(shown <= 10_000 && shown > 5_000, "{shown}");
    assert_eq!(v["vertices"].as_array().unwrap().len(), shown);
    assert_eq!(v["keypointUv"].as_array().unwrap().len(), 520);
}

#[tokio::test]
async fn preview_serves_manifest_landmarks() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = common::synthetic_dataset(dir.path(), 2, 7, 64);
    let id = manifest.records[0].id.clone();
    let (app, _) = setup(dir.path(), Some(manifest));
    let (status, body) = call(&app, Method::GET, &format!("/api/preview/{id}"), "").await;
    assert_eq!(status, 200, "{body}");
    let v = json(&body);
    assert_eq!(v["id"], id.as_str());
    assert_eq!(v["landmarks"]["520"].as_array().unwrap().len(), 520);
    assert_eq!(v["landmarks"]["68"].as_array().unwrap().len(), 68);
    let (status, body) = call(&app, Method::GET, "/api/preview/nope", "").await;
    assert_eq!(status, 404);
    assert_eq!(json(&body)["error"], "not-found");
}

#[tokio::test]
async fn preview_without_dataset_is_404() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = setup(dir.path(), None);
    let (status, _) = call(&app, Method::GET, "/api/preview/face_000", "").await;
    assert_eq!(status, 404);
}

#[tokio::test]
async fn snap_rejects_non_finite() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = setup(dir.path(), None);
    let (status, _) = call(&app, Method::POST, "/api/snap", r#"{"uv":[1e400,0.5]}"#).await;
    assert!(status == 400 || status == 422, "{status}");
}
