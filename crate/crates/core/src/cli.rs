//! `densemark` command line. Exit codes: 0 success, 1 domain error, 2 usage
//! error. Diagnostics go to stderr; machine output to files or stdout.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::config::AppConfig;
use crate::dataset::{build_dataset, DatasetManifest};
use crate::error::{Error, Result};
use crate::eval::{evaluate_dataset, published_rows, render_table, EvalReport, Mode, TableLayout, TableRow};
use crate::geom::{KeypointSet, LandmarkSet, Schema};
use crate::npy;
use crate::sampler::{merge_preserving_manual, sample_keypoints};
use crate::serve::{self, ServeState};
use crate::template::{load_mesh, FaceTemplate};
use crate::trainer::{compare_hybrid_vs_l2, gradient_check, train_synthetic, Noise, TaskSpec};

/// Default keypoint count of the dense schema.
const DENSE_TARGET: usize = 520;

#[derive(Debug, Parser)]
#[command(name = "densemark", version, about = "Dense facial keypoint toolchain")]
struct Cli {
    /// JSON config file; defaults apply when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override a config value, e.g. `--set eval.mode="2d"`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct TemplateArg {
    /// Template mesh (OBJ, or a directory with vertices.npy and uvs.npy).
    /// Custom templates need `sampler.landmarkVertices68` in the config.
    #[arg(long, value_name = "PATH")]
    template: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample dense keypoints on the template and write the keypoint file.
    /// Manual entries of an existing file are preserved.
    Sample {
        #[command(flatten)]
        template: TemplateArg,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        #[arg(long)]
        iterations: Option<u32>,
        /// Complete the set to this many keypoints [default: 520].
        #[arg(long, conflicts_with = "raw")]
        target: Option<usize>,
        /// Write the centroid-sampling result without completion.
        #[arg(long)]
        raw: bool,
        /// Ignore an existing output file instead of merging with it.
        #[arg(long)]
        fresh: bool,
    },
    /// Build a landmark dataset from image/position-map pairs.
    Build {
        #[command(flatten)]
        template: TemplateArg,
        #[arg(long, value_name = "DIR")]
        input: PathBuf,
        #[arg(long, value_name = "FILE")]
        keypoints: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Skip the horizontal-flip augmentation.
        #[arg(long)]
        no_augment: bool,
    },
    /// Gradient check and synthetic training of the reference regressor.
    VerifyTrain {
        /// Write the JSON report here instead of stdout.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        /// Also compare hybrid and squared-error training on heavy-tailed
        /// noise (Student-t, dof 2, scale 5, unless `train.task.noise` is set).
        #[arg(long)]
        compare: bool,
    },
    /// Evaluate predictions against a dataset manifest.
    Eval {
        #[arg(long, value_name = "JSONL")]
        manifest: PathBuf,
        /// Directory of `<id>.npy` files, or one (images, points, 3) array.
        #[arg(long, value_name = "PATH")]
        pred: PathBuf,
        /// Id list (one per line) for a stacked prediction array; manifest
        /// order when omitted.
        #[arg(long, value_name = "FILE")]
        ids: Option<PathBuf>,
        #[arg(long, default_value = "68")]
        schema: Schema,
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Render evaluation reports as a fixed-width table.
    Report {
        /// Evaluation report(s); each becomes one row.
        #[arg(long = "report", value_name = "FILE")]
        reports: Vec<PathBuf>,
        /// Row labels, in report order [default: file stem].
        #[arg(long = "label")]
        labels: Vec<String>,
        /// JSON list of pre-formatted rows appended after the reports.
        #[arg(long, value_name = "FILE")]
        rows: Option<PathBuf>,
        #[arg(long, default_value = "aflw2000-68")]
        layout: TableLayout,
        /// Start with the published comparison rows of the layout.
        #[arg(long)]
        published: bool,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Serve the keypoint rectification API.
    Serve {
        #[command(flatten)]
        template: TemplateArg,
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        bind: Option<IpAddr>,
        #[arg(long, value_name = "DIR")]
        dataset: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        keypoints: Option<PathBuf>,
    },
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let cfg = AppConfig::resolve(cli.config.as_deref(), &cli.overrides)?;
    match cli.command {
        Command::Sample { template, out, iterations, target, raw, fresh } => {
            let template = load_template(&cfg, template.template.as_deref())?;
            let mut sampler = cfg.sampler.clone();
            if let Some(n) = iterations {
                sampler.iterations = n;
            }
            sampler.fill_target = if raw { None } else { target.or(sampler.fill_target).or(Some(DENSE_TARGET)) };
            let fresh_set = sample_keypoints(&template, &sampler)?;
            let keys = if out.exists() && !fresh {
                let existing = KeypointSet::load(&out)?;
                let merged = merge_preserving_manual(&existing, &fresh_set, &template.mesh)?;
                log::info!("merged with {}: kept manual entries", out.display());
                merged
            } else {
                fresh_set
            };
            keys.save(&out)?;
            let counts: BTreeMap<String, usize> =
                keys.provenance_counts().into_iter().map(|(p, n)| (p.to_string(), n)).collect();
            print_json(&json!({ "keypoints": keys.len(), "provenance": counts, "out": out }))
        }
        Command::Build { template, input, keypoints, out, no_augment } => {
            let template = load_template(&cfg, template.template.as_deref())?;
            let keys = KeypointSet::load(&keypoints)?;
            let manifest = build_dataset(&input, &template, &keys, !no_augment, &out)?;
            print_json(&serde_json::to_value(&manifest.summary).expect("summary serialises"))
        }
        Command::VerifyTrain { out, compare } => {
            let t = &cfg.train;
            let grad = gradient_check(&t.spec, &cfg.loss, t.grad_check_coords.max(100), t.spec.seed)?;
            let train = train_synthetic(&t.spec, &t.task, &cfg.loss)?;
            let monotone = train.smoothed_curve.windows(2).all(|w| w[1] <= w[0]);
            let mut report = json!({
                "gradientCheck": grad,
                "training": {
                    "finalLoss": train.final_loss,
                    "finalNme": train.final_nme,
                    "epochs": t.spec.epochs,
                    "smoothedMonotone": monotone,
                    "smoothedCurve": train.smoothed_curve,
                },
            });
            if compare {
                let noise = match t.task.noise {
                    Noise::None => Noise::StudentT { dof: 2.0, scale: 5.0 },
                    n => n,
                };
                let task = TaskSpec { noise, ..t.task };
                report["comparison"] = serde_json::to_value(compare_hybrid_vs_l2(&t.spec, &task, &cfg.loss)?)
                    .expect("comparison serialises");
            }
            write_or_print(out.as_deref(), &report)?;
            if !grad.passed {
                let w = grad.worst.as_ref().expect("failed check has a worst coordinate");
                return Err(Error::Domain(format!(
                    "gradient check failed at parameter {}: analytic {} vs numeric {} (relative error {:e})",
                    w.index, w.analytic, w.numeric, w.rel_error
                )));
            }
            Ok(())
        }
        Command::Eval { manifest, pred, ids, schema, mode, out } => {
            let manifest = DatasetManifest::load(&manifest)?;
            let predictions = load_predictions(&manifest, &pred, ids.as_deref())?;
            let mut eval = cfg.eval.clone();
            if let Some(m) = mode {
                eval.mode = m;
            }
            let report = evaluate_dataset(&manifest, &predictions, schema, &eval)?;
            std::fs::write(&out, report.to_json()).map_err(|e| Error::io(&out, e))?;
            print_json(&json!({
                "images": report.per_image.len(),
                "binMeans": report.bin_means(),
                "balancedMean": report.balanced_mean,
                "overallMean": report.overall_mean,
                "auc": report.auc,
            }))
        }
        Command::Report { reports, labels, rows, layout, published, out } => {
            let mut table = if published { published_rows(layout) } else { Vec::new() };
            for (k, path) in reports.iter().enumerate() {
                let report = EvalReport::load(path)?;
                let label = labels
                    .get(k)
                    .cloned()
                    .unwrap_or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
                table.push(TableRow::from_report(label, &report));
            }
            if let Some(p) = rows {
                let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                let extra: Vec<TableRow> = serde_json::from_str(&text).map_err(|e| Error::parse(&p, e))?;
                table.extend(extra);
            }
            let text = render_table(layout, &table);
            match out {
                Some(p) => std::fs::write(&p, text).map_err(|e| Error::io(&p, e)),
                None => write_stdout(text.as_bytes()),
            }
        }
        Command::Serve { template, port, bind, dataset, keypoints } => {
            let mut s = cfg.serve.clone();
            s.port = port.unwrap_or(s.port);
            s.bind = bind.unwrap_or(s.bind);
            s.dataset_dir = dataset.or(s.dataset_dir);
            s.keypoint_file = keypoints.unwrap_or(s.keypoint_file);
            if s.port == 0 {
                return Err(Error::Config("port must lie in [1, 65535]".into()));
            }
            let template = load_template(&cfg, template.template.as_deref())?;
            let manifest = s.dataset_dir.as_deref().map(DatasetManifest::load).transpose()?;
            let state = ServeState::new(s.keypoint_file.clone(), template.mesh, manifest, s.max_template_points)?;
            let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::io("tokio runtime", e))?;
            runtime.block_on(serve::run(SocketAddr::new(s.bind, s.port), Arc::new(state)))
        }
    }
}

/// The `--template` flag, then `paths.template`, then the built-in template.
fn load_template(cfg: &AppConfig, flag: Option<&Path>) -> Result<FaceTemplate> {
    let Some(path) = flag.or(cfg.paths.template.as_deref()) else {
        return Ok(FaceTemplate::reference());
    };
    if !path.exists() {
        return Err(Error::Domain(format!("template not found: {}", path.display())));
    }
    let mesh = load_mesh(path)?;
    let lookup = cfg.sampler.landmark_vertices_68.clone().ok_or_else(|| {
        Error::Config(format!("template {} needs sampler.landmarkVertices68 (68 vertex indices)", path.display()))
    })?;
    FaceTemplate::new(mesh, lookup)
}

fn load_predictions(
    manifest: &DatasetManifest,
    pred: &Path,
    ids: Option<&Path>,
) -> Result<BTreeMap<String, LandmarkSet>> {
    if pred.is_dir() {
        let mut out = BTreeMap::new();
        for r in &manifest.records {
            let p = pred.join(format!("{}.npy", r.id));
            if p.exists() {
                out.insert(r.id.clone(), npy::read_landmarks(&p)?);
            }
        }
        return Ok(out);
    }
    let stack = npy::read_landmark_stack(pred)?;
    let ids: Vec<String> = match ids {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| Error::io(p, e))?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_owned)
            .collect(),
        None => manifest.records.iter().map(|r| r.id.clone()).collect(),
    };
    if ids.len() != stack.len() {
        return Err(Error::Shape(format!(
            "{} holds {} prediction sets but {} ids were given",
            pred.display(),
            stack.len(),
            ids.len()
        )));
    }
    Ok(ids.into_iter().zip(stack).collect())
}

fn print_json(v: &serde_json::Value) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v).expect("json serialises");
    s.push('\n');
    write_stdout(s.as_bytes())
}

fn write_or_print(path: Option<&Path>, v: &serde_json::Value) -> Result<()> {
    match path {
        Some(p) => {
            let mut s = serde_json::to_string_pretty(v).expect("json serialises");
            s.push('\n');
            std::fs::write(p, s).map_err(|e| Error::io(p, e))
        }
        None => print_json(v),
    }
}

fn write_stdout(bytes: &[u8]) -> Result<()> {
    std::io::stdout().lock().write_all(bytes).map_err(|e| Error::io("stdout", e))
}
