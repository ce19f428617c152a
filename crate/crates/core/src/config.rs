//! JSON application config with dotted `key=value` overrides.

use std::net::{IpAddr, Ipv4Addr};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::loss::LossConfig;
use crate::sampler::SamplerConfig;
use crate::trainer::{RegressorSpec, TaskSpec};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct Paths {
    /// Template mesh (OBJ or a directory with `vertices.npy` + `uvs.npy`);
    /// the built-in reference template when absent.
    pub template: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct ServeConfig {
    pub bind: IpAddr,
    pub port: u16,
    pub dataset_dir: Option<PathBuf>,
    pub keypoint_file: PathBuf,
    /// Upper bound on vertex UVs sent by `GET /api/template`.
    pub max_template_points: usize,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            bind: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: 8520,
            dataset_dir: None,
            keypoint_file: PathBuf::from("keypoints520.json"),
            max_template_points: 10_000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct TrainConfig {
    pub spec: RegressorSpec,
    pub task: TaskSpec,
    /// Coordinates sampled by the gradient check.
    pub grad_check_coords: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct AppConfig {
    pub paths: Paths,
    pub sampler: SamplerConfig,
    pub loss: LossConfig,
    pub eval: EvalConfig,
    pub train: TrainConfig,
    pub serve: ServeConfig,
}

impl AppConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: Value = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
        Self::from_value(value)
    }

    /// Loads `path` (or the defaults) and applies `KEY=VALUE` overrides in
    /// order.
    pub fn resolve(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                serde_json::from_str(&text).map_err(|e| Error::parse(p, e))?
            }
            None => serde_json::to_value(Self::default()).expect("default config serialises"),
        };
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        Self::from_value(value)
    }

    fn from_value(value: Value) -> Result<Self> {
        let cfg: Self = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.sampler.validate()?;
        self.loss.validate()?;
        self.eval.validate()?;
        self.train.spec.validate()?;
        if self.serve.port == 0 {
            return Err(Error::Config("serve.port must lie in [1, 65535]".into()));
        }
        Ok(())
    }
}

/// Sets `a.b.c=value` inside a JSON object. The value is parsed as JSON
/// and falls back to a plain string. Intermediate objects are created on
/// demand; unknown leaf names surface later as config errors.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) =
        assignment.split_once('=').ok_or_else(|| Error::Config(format!("override {assignment:?} is not KEY=VALUE")))?;
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override key {key:?} has an empty segment")));
    }
    let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));
    let mut cur = root;
    for part in &parts[..parts.len() - 1] {
        if cur.get(*part).is_none_or(Value::is_null) {
            cur[*part] = Value::Object(Default::default());
        }
        cur = cur
            .get_mut(*part)
            .filter(|v| v.is_object())
            .ok_or_else(|| Error::Config(format!("override key {key:?}: {part:?} is not an object")))?;
    }
    match cur {
        Value::Object(map) => {
            map.insert(parts[parts.len() - 1].to_owned(), parsed);
            Ok(())
        }
        _ => Err(Error::Config(format!("override key {key:?} does not address an object field"))),
    }
}
