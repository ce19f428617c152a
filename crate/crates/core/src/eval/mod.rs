//! Landmark evaluation: NME, yaw-binned aggregation with a balanced
//! subset, CED curves with AUC, and fixed-width table rendering.

mod ced;
mod render;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::DatasetManifest;
use crate::error::{Error, Result};
use crate::geom::{landmark_bounding_box, BoundingBox, LandmarkSet, Schema};

pub use ced::{ced_curve, Ced, CED_GRID_POINTS};
pub use render::{format_cell, published_rows, render_table, Cell, TableLayout, TableRow};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Distances over `(x, y)`.
    #[serde(rename = "2d", alias = "2D")]
    TwoD,
    /// Distances over `(x, y, z)`.
    #[default]
    #[serde(rename = "3d", alias = "3D")]
    ThreeD,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "2d" => Ok(Mode::TwoD),
            "3d" => Ok(Mode::ThreeD),
            _ => Err(Error::Config(format!("unknown mode {s:?}, expected 2d or 3d"))),
        }
    }
}

/// Source of the NME normalisation box.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Normalization {
    /// Tight `(x, y)` box of the ground-truth landmarks.
    #[default]
    GtLandmarkBox,
    /// Box supplied with the sample.
    ProvidedBox,
}

/// Absolute-yaw strata: `[lo, hi)` intervals, the last one closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct YawBins(pub Vec<[f64; 2]>);

impl Default for YawBins {
    fn default() -> Self {
        Self(vec![[0.0, 30.0], [30.0, 60.0], [60.0, 90.0]])
    }
}

impl YawBins {
    pub fn validate(&self) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::Config("at least one yaw bin is required".into()));
        }
        for (i, b) in self.0.iter().enumerate() {
            if b[0].is_nan() || b[1].is_nan() || b[0] >= b[1] || b[0] < 0.0 {
                return Err(Error::Config(format!("yaw bin {i} {b:?} is empty or negative")));
            }
            if i > 0 && self.0[i - 1][1] > b[0] {
                return Err(Error::Config(format!("yaw bins {} and {i} overlap or are unsorted", i - 1)));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Bin of `|yaw|`.
    pub fn bin_of(&self, yaw: f64) -> Option<usize> {
        let a = yaw.abs();
        let last = self.0.len() - 1;
        self.0.iter().position(|b| b[0] <= a && a < b[1]).or_else(|| (a == self.0[last][1]).then_some(last))
    }

    pub fn label(&self, i: usize) -> String {
        let [lo, hi] = self.0[i];
        format!("{lo}-{hi}")
    }

    pub fn labels(&self) -> Vec<String> {
        (0..self.0.len()).map(|i| self.label(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct EvalConfig {
    pub mode: Mode,
    pub normalization: Normalization,
    pub bins: YawBins,
    pub ced_max_threshold: f64,
    pub balanced_seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            mode: Mode::ThreeD,
            normalization: Normalization::GtLandmarkBox,
            bins: YawBins::default(),
            ced_max_threshold: 0.05,
            balanced_seed: 0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        self.bins.validate()?;
        if self.ced_max_threshold.is_nan() || self.ced_max_threshold <= 0.0 {
            return Err(Error::Config("eval.cedMaxThreshold must be positive".into()));
        }
        Ok(())
    }
}

/// Normalised mean error: mean landmark distance divided by `sqrt(h·w)`
/// of the normalisation box (the ground-truth box unless one is given).
pub fn nme(pred: &LandmarkSet, gt: &LandmarkSet, mode: Mode, bbox: Option<&BoundingBox>) -> Result<f64> {
    pred.ensure_same_schema(gt)?;
    let b = match bbox {
        Some(b) => {
            b.validate()?;
            *b
        }
        None => landmark_bounding_box(gt)?,
    };
    let d = b.diagonal_scale();
    let dims = match mode {
        Mode::TwoD => 2,
        Mode::ThreeD => 3,
    };
    let total: f64 = pred
        .points()
        .iter()
        .zip(gt.points())
        .map(|(p, g)| (0..dims).map(|k| (p[k] - g[k]).powi(2)).sum::<f64>().sqrt())
        .sum();
    Ok(total / pred.len() as f64 / d)
}

/// One image to score.
#[derive(Debug, Clone)]
pub struct EvalItem {
    pub id: String,
    pub yaw: Option<f64>,
    pub pred: LandmarkSet,
    pub gt: LandmarkSet,
    pub bbox: Option<BoundingBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerImage {
    pub id: String,
    pub yaw: Option<f64>,
    pub nme: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSummary {
    pub label: String,
    pub range: [f64; 2],
    pub count: usize,
    pub mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvalReport {
    pub mode: Mode,
    pub per_image: Vec<PerImage>,
    pub bins: Vec<BinSummary>,
    /// Mean over the balanced subset (equal draws per bin); `None` when a
    /// bin is empty.
    pub balanced_mean: Option<f64>,
    pub balanced_per_bin: usize,
    /// Plain mean over every image, including those without yaw.
    pub overall_mean: f64,
    pub ced_max_threshold: f64,
    pub ced: Vec<[f64; 2]>,
    pub auc: f64,
}

impl EvalReport {
    pub fn bin_means(&self) -> Vec<Option<f64>> {
        self.bins.iter().map(|b| b.mean).collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
    }
}

/// Scores each item and aggregates.
pub fn evaluate(items: &[EvalItem], cfg: &EvalConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let box_for = |it: &EvalItem| -> Result<Option<BoundingBox>> {
        match cfg.normalization {
            Normalization::GtLandmarkBox => Ok(None),
            Normalization::ProvidedBox => {
                it.bbox.map(Some).ok_or_else(|| Error::Domain(format!("image {} has no bounding box", it.id)))
            }
        }
    };
    let per_image = items
        .par_iter()
        .map(|it| {
            let bbox = box_for(it)?;
            let value = nme(&it.pred, &it.gt, cfg.mode, bbox.as_ref())
                .map_err(|e| Error::Domain(format!("image {}: {e}", it.id)))?;
            Ok(PerImage { id: it.id.clone(), yaw: it.yaw, nme: value })
        })
        .collect::<Result<Vec<_>>>()?;
    aggregate(per_image, cfg)
}

/// Groups per-image NMEs into yaw bins, draws the balanced subset and
/// computes the CED curve.
pub fn aggregate(per_image: Vec<PerImage>, cfg: &EvalConfig) -> Result<EvalReport> {
    cfg.validate()?;
    if per_image.is_empty() {
        return Err(Error::Domain("nothing to evaluate".into()));
    }
    let mut members: Vec<Vec<f64>> = vec![Vec::new(); cfg.bins.len()];
    for p in &per_image {
        if let Some(b) = p.yaw.and_then(|y| cfg.bins.bin_of(y)) {
            members[b].push(p.nme);
        }
    }
    let bins = members
        .iter()
        .enumerate()
        .map(|(i, m)| BinSummary { label: cfg.bins.label(i), range: cfg.bins.0[i], count: m.len(), mean: mean(m) })
        .collect();

    let per_bin = members.iter().map(Vec::len).min().unwrap_or(0);
    let balanced_mean = if per_bin == 0 {
        None
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.balanced_seed);
        let drawn: Vec<f64> = members
            .iter()
            .flat_map(|m| {
                let mut picks = rand::seq::index::sample(&mut rng, m.len(), per_bin).into_vec();
                picks.sort_unstable();
                picks.into_iter().map(|i| m[i]).collect::<Vec<_>>()
            })
            .collect();
        mean(&drawn)
    };

    let nmes: Vec<f64> = per_image.iter().map(|p| p.nme).collect();
    let overall_mean = mean(&nmes).expect("non-empty");
    let curve = ced_curve(&nmes, cfg.ced_max_threshold)?;
    Ok(EvalReport {
        mode: cfg.mode,
        per_image,
        bins,
        balanced_mean,
        balanced_per_bin: per_bin,
        overall_mean,
        ced_max_threshold: cfg.ced_max_threshold,
        ced: curve.points,
        auc: curve.auc,
    })
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Scores predictions against a manifest's ground truth. Every manifest id
/// needs a prediction; extra predictions are ignored.
pub fn evaluate_dataset(
    manifest: &DatasetManifest,
    predictions: &BTreeMap<String, LandmarkSet>,
    schema: Schema,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    let missing: Vec<String> =
        manifest.records.iter().filter(|r| !predictions.contains_key(&r.id)).map(|r| r.id.clone()).collect();
    if !missing.is_empty() {
        return Err(Error::MissingPredictions(missing));
    }
    let items = manifest
        .records
        .par_iter()
        .map(|r| {
            let pred = predictions[&r.id].clone();
            if pred.schema() != schema {
                return Err(Error::Shape(format!(
                    "prediction for {} has {} points, expected {schema}",
                    r.id,
                    pred.len()
                )));
            }
            Ok(EvalItem { id: r.id.clone(), yaw: r.yaw, gt: manifest.load_landmarks(r, schema)?, pred, bbox: r.bbox })
        })
        .collect::<Result<Vec<_>>>()?;
    evaluate(&items, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(p: [f64; 3]) -> LandmarkSet {
        LandmarkSet::for_count(vec![p]).unwrap()
    }

    #[test]
    fn single_landmark_hand_value() {
        let b = BoundingBox::new(0.0, 0.0, 10.0, 10.0).unwrap();
        let v = nme(&one([3.0, 4.0, 0.0]), &one([0.0, 0.0, 0.0]), Mode::TwoD, Some(&b)).unwrap();
        assert_eq!(v, 0.5);
    }

    #[test]
    fn modes_separate_depth() {
        let b = BoundingBox::new(0.0, 0.0, 4.0, 4.0).unwrap();
        let (p, g) = (one([1.0, 1.0, 5.0]), one([1.0, 1.0, 0.0]));
        assert_eq!(nme(&p, &g, Mode::TwoD, Some(&b)).unwrap(), 0.0);
        assert_eq!(nme(&p, &g, Mode::ThreeD, Some(&b)).unwrap(), 5.0 / 4.0);
    }

    #[test]
    fn degenerate_gt_box_is_an_error() {
        let g = one([1.0, 1.0, 0.0]);
        assert!(matches!(nme(&g, &g, Mode::TwoD, None), Err(Error::DegenerateBox { .. })));
    }

    #[test]
    fn bins_are_lower_inclusive_with_closed_last_bin() {
        let b = YawBins::default();
        assert_eq!(b.bin_of(0.0), Some(0));
        assert_eq!(b.bin_of(-29.9), Some(0));
        assert_eq!(b.bin_of(30.0), Some(1));
        assert_eq!(b.bin_of(-60.0), Some(2));
        assert_eq!(b.bin_of(90.0), Some(2));
        assert_eq!(b.bin_of(90.5), None);
        assert_eq!(b.labels(), ["0-30", "30-60", "60-90"]);
    }

    #[test]
    fn bin_config_validation() {
        assert!(YawBins(vec![[0.0, 30.0], [20.0, 40.0]]).validate().is_err());
        assert!(YawBins(vec![[30.0, 30.0]]).validate().is_err());
        assert!(YawBins(vec![]).validate().is_err());
    }

    #[test]
    fn crafted_bin_means() {
        let nmes = [(10.0, 0.02), (-20.0, 0.04), (40.0, 0.03), (50.0, 0.05), (70.0, 0.06), (-80.0, 0.08)];
        let per_image = nmes
            .iter()
            .enumerate()
            .map(|(i, &(yaw, nme))| PerImage { id: format!("s{i}"), yaw: Some(yaw), nme })
            .collect();
        let r = aggregate(per_image, &EvalConfig::default()).unwrap();
        let means: Vec<f64> = r.bin_means().into_iter().map(Option::unwrap).collect();
        for (m, e) in means.iter().zip([0.03, 0.04, 0.07]) {
            assert!((m - e).abs() < 1e-15, "{m} vs {e}");
        }
        assert_eq!(r.balanced_per_bin, 2);
        // all images drawn when bins are equally sized
        assert!((r.balanced_mean.unwrap() - r.overall_mean).abs() < 1e-15);
    }

    #[test]
    fn null_yaw_counts_only_in_overall_mean() {
        let per_image = vec![
            PerImage { id: "a".into(), yaw: None, nme: 0.1 },
            PerImage { id: "b".into(), yaw: Some(5.0), nme: 0.02 },
        ];
        let r = aggregate(per_image, &EvalConfig::default()).unwrap();
        assert_eq!(r.bins[0].count, 1);
        assert!((r.overall_mean - 0.06).abs() < 1e-15);
        assert_eq!(r.balanced_mean, None);
        assert_eq!(r.bins[1].mean, None);
    }
}
