//! Landmark regression losses.
//!
//! All tensor-level losses reduce by the mean over every coordinate of
//! every landmark (`3N` terms), so the hybrid weights do not depend on `N`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::LandmarkSet;

/// How the squared-error term of the hybrid loss is scaled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MseForm {
    /// `x²`
    #[default]
    Square,
    /// `x² / 2`
    HalfSquare,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    /// Width of the logarithmic region.
    pub w: f64,
    /// Curvature of the logarithmic region.
    pub epsilon: f64,
    /// Weight of the wing term in the hybrid loss.
    pub w1: f64,
    /// Weight of the squared-error term in the hybrid loss.
    pub w2: f64,
    pub mse: MseForm,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { w: 15.0, epsilon: 3.0, w1: 1.5, w2: 0.5, mse: MseForm::Square }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.w > 0.0 && self.epsilon > 0.0) {
            return Err(Error::Config(format!(
                "loss.w and loss.epsilon must be positive (w={}, epsilon={})",
                self.w, self.epsilon
            )));
        }
        if !(self.w1 >= 0.0 && self.w2 >= 0.0) {
            return Err(Error::Config(format!("hybrid weights must be non-negative (w1={}, w2={})", self.w1, self.w2)));
        }
        Ok(())
    }

    /// Offset joining the two wing branches: `w - w·ln(1 + w/ε)`.
    pub fn c(&self) -> f64 {
        self.w - self.w * (self.w / self.epsilon).ln_1p()
    }
}

pub fn wing(x: f64, cfg: &LossConfig) -> f64 {
    let a = x.abs();
    if a < cfg.w {
        cfg.w * (a / cfg.epsilon).ln_1p()
    } else {
        a - cfg.c()
    }
}

/// Derivative of [`wing`]; 0 at the origin.
pub fn wing_grad(x: f64, cfg: &LossConfig) -> f64 {
    let a = x.abs();
    if x == 0.0 {
        0.0
    } else if a < cfg.w {
        x.signum() * cfg.w / (cfg.epsilon + a)
    } else {
        x.signum()
    }
}

fn mse_term(x: f64, form: MseForm) -> f64 {
    match form {
        MseForm::Square => x * x,
        MseForm::HalfSquare => 0.5 * x * x,
    }
}

fn mse_grad(x: f64, form: MseForm) -> f64 {
    match form {
        MseForm::Square => 2.0 * x,
        MseForm::HalfSquare => x,
    }
}

/// Unnormalised per-coordinate hybrid term `w1·wing(r) + w2·mse(r)`.
pub fn hybrid_term(r: f64, cfg: &LossConfig) -> f64 {
    cfg.w1 * wing(r, cfg) + cfg.w2 * mse_term(r, cfg.mse)
}

/// `w1·mean(wing(r)) + w2·mean(mse(r))` over a flat residual vector.
pub fn hybrid_loss_residuals(residuals: &[f64], cfg: &LossConfig) -> f64 {
    if residuals.is_empty() {
        return 0.0;
    }
    let n = residuals.len() as f64;
    let (wing_sum, sq_sum) =
        residuals.iter().fold((0.0, 0.0), |(a, b), &r| (a + wing(r, cfg), b + mse_term(r, cfg.mse)));
    cfg.w1 * wing_sum / n + cfg.w2 * sq_sum / n
}

/// Gradient of [`hybrid_loss_residuals`] with respect to each residual.
pub fn hybrid_grad_residuals(residuals: &[f64], cfg: &LossConfig) -> Vec<f64> {
    let n = residuals.len() as f64;
    residuals.iter().map(|&r| (cfg.w1 * wing_grad(r, cfg) + cfg.w2 * mse_grad(r, cfg.mse)) / n).collect()
}

fn residuals(pred: &LandmarkSet, gt: &LandmarkSet) -> Result<Vec<f64>> {
    pred.ensure_same_schema(gt)?;
    Ok(pred.flat().zip(gt.flat()).map(|(p, g)| p - g).collect())
}

/// Hybrid wing + squared-error loss between two landmark sets.
pub fn hybrid_loss(pred: &LandmarkSet, gt: &LandmarkSet, cfg: &LossConfig) -> Result<f64> {
    Ok(hybrid_loss_residuals(&residuals(pred, gt)?, cfg))
}

pub fn l1(x: f64) -> f64 {
    x.abs()
}

pub fn l2(x: f64) -> f64 {
    0.5 * x * x
}

pub fn smooth_l1(x: f64) -> f64 {
    let a = x.abs();
    if a < 1.0 {
        0.5 * x * x
    } else {
        a - 0.5
    }
}

pub fn smooth_l1_grad(x: f64) -> f64 {
    if x.abs() < 1.0 {
        x
    } else {
        x.signum()
    }
}

/// Comparator losses, each the coordinate mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuxiliaryLosses {
    pub l1: f64,
    pub l2: f64,
    pub smooth_l1: f64,
}

pub fn auxiliary_losses_residuals(residuals: &[f64]) -> AuxiliaryLosses {
    let n = residuals.len().max(1) as f64;
    let mut out = AuxiliaryLosses { l1: 0.0, l2: 0.0, smooth_l1: 0.0 };
    for &r in residuals {
        out.l1 += l1(r);
        out.l2 += l2(r);
        out.smooth_l1 += smooth_l1(r);
    }
    out.l1 /= n;
    out.l2 /= n;
    out.smooth_l1 /= n;
    out
}

pub fn auxiliary_losses(pred: &LandmarkSet, gt: &LandmarkSet) -> Result<AuxiliaryLosses> {
    Ok(auxiliary_losses_residuals(&residuals(pred, gt)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Schema;

    const DEFAULTS: LossConfig = LossConfig { w: 15.0, epsilon: 3.0, w1: 1.5, w2: 0.5, mse: MseForm::Square };

    #[test]
    fn wing_reference_values() {
        assert_eq!(wing(0.0, &DEFAULTS), 0.0);
        let at_w = 15.0 * 6f64.ln();
        assert!((wing(15.0, &DEFAULTS) - at_w).abs() < 1e-12);
        assert!((wing(15.0 - 1e-12, &DEFAULTS) - at_w).abs() < 1e-9);
        assert!((DEFAULTS.c() - (15.0 - 15.0 * 6f64.ln())).abs() < 1e-12);
        assert!((wing(100.0, &DEFAULTS) - (100.0 - DEFAULTS.c())).abs() < 1e-12);
        assert!((wing(100.0, &DEFAULTS) - 111.8764).abs() < 1e-4);
    }

    #[test]
    fn wing_grad_reference_values() {
        assert_eq!(wing_grad(0.0, &DEFAULTS), 0.0);
        assert_eq!(wing_grad(3.0, &DEFAULTS), 2.5);
        assert_eq!(wing_grad(-3.0, &DEFAULTS), -2.5);
        assert_eq!(wing_grad(15.0, &DEFAULTS), 1.0);
        assert_eq!(wing_grad(-40.0, &DEFAULTS), -1.0);
    }

    #[test]
    fn hybrid_single_residual() {
        let expect = 1.5 * 15.0 * (4.0f64 / 3.0).ln() + 0.5;
        assert!((hybrid_loss_residuals(&[1.0], &DEFAULTS) - expect).abs() < 1e-12);
        assert!((expect - 6.9728).abs() < 1e-4);
        let half = LossConfig { mse: MseForm::HalfSquare, ..DEFAULTS };
        assert!((hybrid_loss_residuals(&[1.0], &half) - (expect - 0.25)).abs() < 1e-12);
    }

    #[test]
    fn hybrid_is_linear_in_weights() {
        let r = [0.3, -2.0, 17.0, 4.5];
        let double = LossConfig { w1: 3.0, w2: 1.0, ..DEFAULTS };
        let a = hybrid_loss_residuals(&r, &DEFAULTS);
        assert!((hybrid_loss_residuals(&r, &double) - 2.0 * a).abs() < 1e-12);
    }

    #[test]
    fn hybrid_on_landmarks_checks_schema() {
        let a = LandmarkSet::new(vec![[1.0, 2.0, 3.0]; 68], Schema::L68).unwrap();
        let b = LandmarkSet::new(vec![[1.0, 2.0, 3.0]; 21], Schema::L21).unwrap();
        assert_eq!(hybrid_loss(&a, &a, &DEFAULTS).unwrap(), 0.0);
        assert!(matches!(hybrid_loss(&a, &b, &DEFAULTS), Err(Error::Shape(_))));
        assert!(auxiliary_losses(&a, &b).is_err());
    }

    #[test]
    fn auxiliary_reference_values() {
        let z = auxiliary_losses_residuals(&[0.0]);
        assert_eq!((z.l1, z.l2, z.smooth_l1), (0.0, 0.0, 0.0));
        let one = auxiliary_losses_residuals(&[1.0]);
        assert_eq!((one.l1, one.l2, one.smooth_l1), (1.0, 0.5, 0.5));
        assert_eq!(auxiliary_losses_residuals(&[4.0]).smooth_l1, 3.5);
        assert_eq!(auxiliary_losses_residuals(&[-4.0]).smooth_l1, 3.5);
    }

    #[test]
    fn config_validation() {
        assert!(DEFAULTS.validate().is_ok());
        assert!(LossConfig { w: 0.0, ..DEFAULTS }.validate().is_err());
        assert!(LossConfig { epsilon: -1.0, ..DEFAULTS }.validate().is_err());
        assert!(LossConfig { w2: -0.1, ..DEFAULTS }.validate().is_err());
    }
}
