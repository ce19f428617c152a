//! HTTP/JSON API used by the keypoint rectification UI.
//!
//! | route | |
//! |---|---|
//! | `GET /api/template` | decimated vertex UVs plus the UVs of the current keypoints |
//! | `GET /api/keypointset` | the keypoint file as stored |
//! | `PUT /api/keypointset` | validated save with optimistic versioning and a backup |
//! | `POST /api/snap` | nearest template vertex to a UV |
//! | `GET /api/preview/:id` | landmarks of a manifest sample |

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Mutex;

use crate::dataset::DatasetManifest;
use crate::error::{Error, Result};
use crate::geom::{KeypointSet, Provenance, Schema, TemplateMesh, Uv};
use crate::kdtree::KdTree;
use crate::sampler::build_mirror_table;

pub struct ServeState {
    keypoint_file: PathBuf,
    mesh: TemplateMesh,
    manifest: Option<DatasetManifest>,
    max_template_points: usize,
    write_lock: Mutex<()>,
}

impl ServeState {
    /// Fails if the keypoint file is unreadable or does not fit the mesh.
    pub fn new(
        keypoint_file: PathBuf,
        mesh: TemplateMesh,
        manifest: Option<DatasetManifest>,
        max_template_points: usize,
    ) -> Result<Self> {
        let keys = KeypointSet::load(&keypoint_file)?;
        if keys.template_vertex_count != mesh.vertex_count() {
            return Err(Error::Domain(format!(
                "{} was built for a {}-vertex template, the loaded template has {}",
                keypoint_file.display(),
                keys.template_vertex_count,
                mesh.vertex_count()
            )));
        }
        Ok(Self {
            keypoint_file,
            mesh,
            manifest,
            max_template_points: max_template_points.max(1),
            write_lock: Mutex::new(()),
        })
    }
}

/// Structured error body: `{"error", "message", "invariant"?, "ordinal"?}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
    invariant: Option<String>,
    ordinal: Option<usize>,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        Self { status, kind, message: message.into(), invariant: None, ordinal: None }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match e {
            Error::Invariant(msg) => {
                let (name, ordinal) = invariant_parts(&msg);
                Self {
                    status: StatusCode::UNPROCESSABLE_ENTITY,
                    kind: "invariant",
                    invariant: Some(name),
                    ordinal,
                    message: msg,
                }
            }
            other => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.kind, "message": self.message });
        if let Some(i) = self.invariant {
            body["invariant"] = json!(i);
        }
        if let Some(o) = self.ordinal {
            body["ordinal"] = json!(o);
        }
        (self.status, Json(body)).into_response()
    }
}

/// Splits `"indices unique: vertex 3 repeated at keypoint 7"` into the
/// invariant name and the offending keypoint ordinal.
fn invariant_parts(msg: &str) -> (String, Option<usize>) {
    let (name, detail) = msg.split_once(':').unwrap_or((msg, ""));
    let ordinal = ["keypoint ", "mirror[", "point "].iter().find_map(|tag| {
        let rest = &detail[detail.find(tag)? + tag.len()..];
        let digits: String = rest.chars().take_while(char::is_ascii_digit).collect();
        digits.parse().ok()
    });
    (name.trim().to_owned(), ordinal)
}

type ApiResult<T> = std::result::Result<T, ApiError>;

pub fn router(state: Arc<ServeState>) -> Router {
    Router::new()
        .route("/api/template", get(get_template))
        .route("/api/keypointset", get(get_keypoints).put(put_keypoints))
        .route("/api/snap", post(snap))
        .route("/api/preview/:id", get(preview))
        .with_state(state)
}

/// Binds `addr` and serves until the process is stopped.
pub async fn run(addr: SocketAddr, state: Arc<ServeState>) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| Error::io(format!("bind {addr}"), e))?;
    log::info!("serving on http://{}", listener.local_addr().map_err(|e| Error::io("socket", e))?);
    axum::serve(listener, router(state)).await.map_err(|e| Error::io("http server", e))
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct TemplateView {
    vertex_count: usize,
    stride: usize,
    vertices: Vec<usize>,
    uv: Vec<Uv>,
    keypoint_uv: Vec<Uv>,
}

async fn get_template(State(s): State<Arc<ServeState>>) -> ApiResult<Json<TemplateView>> {
    let n = s.mesh.vertex_count();
    let stride = n.div_ceil(s.max_template_points).max(1);
    let vertices: Vec<usize> = (0..n).step_by(stride).collect();
    let uv = vertices.iter().map(|&i| s.mesh.uv()[i]).collect();
    let keys = KeypointSet::load(&s.keypoint_file)?;
    let keypoint_uv = keys.indices().iter().map(|&i| s.mesh.uv()[i]).collect();
    Ok(Json(TemplateView { vertex_count: n, stride, vertices, uv, keypoint_uv }))
}

async fn get_keypoints(State(s): State<Arc<ServeState>>) -> ApiResult<Response> {
    let text = std::fs::read_to_string(&s.keypoint_file).map_err(|e| Error::io(&s.keypoint_file, e))?;
    Ok(([(header::CONTENT_TYPE, "application/json")], text).into_response())
}

/// Applies a client edit to the stored set.
///
/// Provenance is decided here, not by the client: a vertex already present
/// keeps its tag and any other vertex becomes `manual`. When the index list
/// is unchanged the submitted mirror table is validated as sent; otherwise
/// it is recomputed from the template.
pub fn apply_edit(current: &KeypointSet, submitted: &KeypointSet, mesh: &TemplateMesh) -> Result<KeypointSet> {
    if submitted.template_vertex_count != mesh.vertex_count() {
        return Err(Error::Invariant(format!(
            "index in range: payload targets a {}-vertex template, server has {}",
            submitted.template_vertex_count,
            mesh.vertex_count()
        )));
    }
    let old: HashMap<usize, Provenance> =
        current.indices().iter().copied().zip(current.provenance().iter().copied()).collect();
    let indices = submitted.indices().to_vec();
    let provenance: Vec<Provenance> =
        indices.iter().map(|i| old.get(i).copied().unwrap_or(Provenance::Manual)).collect();
    let mut next = if indices == current.indices() {
        submitted.validate()?;
        KeypointSet::with_mirror(indices, submitted.mirror().to_vec(), provenance, mesh.vertex_count())?
    } else {
        if submitted.mirror().len() != indices.len() || submitted.provenance().len() != indices.len() {
            submitted.validate()?;
        }
        build_mirror_table(&KeypointSet::new(indices, provenance, mesh.vertex_count())?, mesh)?
    };
    next.format_version = current.format_version;
    next.version = current.version + 1;
    Ok(next)
}

/// Name of the backup file holding version `version` of `file`.
pub fn backup_path(file: &Path, version: u64) -> PathBuf {
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.6fZ");
    let name = file.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    file.with_file_name(format!("{name}.bak.v{version}.{stamp}.json"))
}

async fn put_keypoints(State(s): State<Arc<ServeState>>, body: String) -> ApiResult<Response> {
    let submitted = KeypointSet::from_json(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "parse", format!("malformed keypoint set: {e}")))?;
    let _guard = s.write_lock.lock().await;
    let path = &s.keypoint_file;
    let previous = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let current = KeypointSet::from_json(&previous).map_err(|e| Error::parse(path, e))?;
    if submitted.version != current.version {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "stale",
            format!("edit is based on version {}, server has version {}; reload", submitted.version, current.version),
        ));
    }
    let next = apply_edit(&current, &submitted, &s.mesh)?;
    let backup = backup_path(path, current.version);
    std::fs::write(&backup, &previous).map_err(|e| Error::io(&backup, e))?;
    let tmp = path.with_extension("json.tmp");
    let text = next.to_json();
    std::fs::write(&tmp, &text).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    log::info!("saved keypoint set version {} (backup {})", next.version, backup.display());
    Ok(([(header::CONTENT_TYPE, "application/json")], text).into_response())
}

#[derive(Deserialize)]
struct SnapRequest {
    uv: Uv,
}

async fn snap(State(s): State<Arc<ServeState>>, Json(req): Json<SnapRequest>) -> ApiResult<Json<serde_json::Value>> {
    if !req.uv.iter().all(|c| c.is_finite()) {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "parse", "uv must be finite"));
    }
    let (index, _) = KdTree::new(s.mesh.uv()).nearest(req.uv);
    Ok(Json(json!({ "index": index, "uv": s.mesh.uv()[index] })))
}

async fn preview(State(s): State<Arc<ServeState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<serde_json::Value>> {
    let not_found = || ApiError::new(StatusCode::NOT_FOUND, "not-found", format!("no sample with id {id:?}"));
    let manifest = s.manifest.as_ref().ok_or_else(not_found)?;
    let record = manifest.get(&id).ok_or_else(not_found)?;
    let mut landmarks = serde_json::Map::new();
    for key in record.landmarks.keys() {
        let schema: Schema = key.parse()?;
        landmarks.insert(key.clone(), json!(manifest.load_landmarks(record, schema)?.points()));
    }
    Ok(Json(json!({
        "id": record.id,
        "yaw": record.yaw,
        "flipped": record.flipped,
        "landmarks": landmarks,
    })))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invariant_messages_split() {
        assert_eq!(
            invariant_parts("indices unique: vertex 3 repeated at keypoint 7"),
            ("indices unique".to_owned(), Some(7))
        );
        assert_eq!(
            invariant_parts("mirror is an involution: mirror[12] = 4 does not map back"),
            ("mirror is an involution".to_owned(), Some(12))
        );
        assert_eq!(invariant_parts("lengths agree: 3 indices"), ("lengths agree".to_owned(), None));
    }
}
