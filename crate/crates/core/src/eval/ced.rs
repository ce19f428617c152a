use crate::error::{Error, Result};

/// Number of thresholds the CED curve is sampled at.
pub const CED_GRID_POINTS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct Ced {
    /// `(threshold, fraction of images with NME <= threshold)` on a uniform
    /// grid over `[0, max_threshold]`.
    pub points: Vec<[f64; 2]>,
    /// Area under the empirical step curve over `[0, max_threshold]`,
    /// divided by `max_threshold`.
    pub auc: f64,
}

/// Cumulative error distribution of per-image NMEs.
///
/// The AUC integrates the exact step function rather than the sampled grid:
/// each image contributes `(T - nme) / T` when its NME is below `T`.
pub fn ced_curve(nmes: &[f64], max_threshold: f64) -> Result<Ced> {
    if nmes.is_empty() {
        return Err(Error::Domain("CED of an empty NME list".into()));
    }
    if max_threshold.is_nan() || max_threshold <= 0.0 {
        return Err(Error::Config(format!("CED threshold cap must be positive, got {max_threshold}")));
    }
    if let Some(v) = nmes.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::Domain(format!("invalid NME value {v}")));
    }
    let mut sorted = nmes.to_vec();
    sorted.sort_by(f64::total_cmp);
    let total = sorted.len() as f64;
    let last = (CED_GRID_POINTS - 1) as f64;
    let points = (0..CED_GRID_POINTS)
        .map(|k| {
            let t = max_threshold * k as f64 / last;
            let below = sorted.partition_point(|&v| v <= t);
            [t, below as f64 / total]
        })
        .collect();
    let share: f64 = sorted.iter().map(|&v| ((max_threshold - v) / max_threshold).max(0.0)).sum();
    Ok(Ced { points, auc: share / total })
}
