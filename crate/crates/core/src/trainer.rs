//! Reference regressor: a linear or one-hidden-layer (tanh) model mapping a
//! feature vector to `3 × keypoints` outputs, trained by full-batch gradient
//! descent on synthetic, realizable tasks with the hybrid loss.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{nme, Mode};
use crate::geom::LandmarkSet;
use crate::loss::{hybrid_grad_residuals, hybrid_loss_residuals, hybrid_term, wing, LossConfig};

/// Loss above which training is declared divergent.
pub const DIVERGENCE_LOSS: f64 = 1e6;
/// Window used for the smoothed loss curve.
pub const SMOOTHING_WINDOW: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct RegressorSpec {
    pub input_dim: usize,
    pub hidden: Option<usize>,
    pub keypoints: usize,
    /// Must equal `3 × keypoints`.
    pub output_dim: usize,
    /// Parameter initialisation seed.
    pub seed: u64,
    pub lr: f64,
    /// Multiplicative learning-rate factor applied after every epoch.
    pub lr_decay: f64,
    pub epochs: usize,
    /// Training samples per synthetic task.
    pub samples: usize,
}

impl Default for RegressorSpec {
    fn default() -> Self {
        Self {
            input_dim: 8,
            hidden: None,
            keypoints: 520,
            output_dim: 1560,
            seed: 0,
            lr: 60.0,
            lr_decay: 0.998,
            epochs: 1500,
            samples: 32,
        }
    }
}

impl RegressorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.output_dim != 3 * self.keypoints {
            return Err(Error::Config(format!(
                "outputDim {} must be 3 x keypoints ({})",
                self.output_dim,
                3 * self.keypoints
            )));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be a finite non-negative number, got {}", self.lr)));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::Config(format!("lrDecay must lie in (0, 1], got {}", self.lr_decay)));
        }
        if self.input_dim == 0 || self.keypoints == 0 || self.samples == 0 || self.hidden == Some(0) {
            return Err(Error::Config("inputDim, keypoints, samples and hidden must be positive".into()));
        }
        Ok(())
    }
}

/// Synthetic target family.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum TaskKind {
    /// `y = A·x + b` around a landmark layout; `x ~ N(0, I)`.
    #[default]
    Linear,
    /// `x` is the flattened target itself.
    Identity,
}

/// Additive target noise used for training (evaluation is always clean).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Noise {
    #[default]
    None,
    Gaussian {
        sigma: f64,
    },
    /// Student-t noise with `dof` degrees of freedom, scaled.
    StudentT {
        dof: f64,
        scale: f64,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub noise: Noise,
    pub seed: u64,
}

/// Inputs with clean and (possibly noisy) targets, one row per sample.
#[derive(Debug, Clone)]
pub struct SyntheticTask {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
    pub clean: Vec<Vec<f64>>,
}

fn landmark_layout(rng: &mut ChaCha8Rng, keypoints: usize) -> Vec<f64> {
    (0..keypoints)
        .flat_map(|_| [rng.gen_range(28.0..228.0), rng.gen_range(28.0..228.0), rng.gen_range(-20.0..20.0)])
        .collect()
}

impl SyntheticTask {
    pub fn generate(spec: &RegressorSpec, task: &TaskSpec, samples: usize) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(task.seed);
        let out = spec.output_dim;
        let (inputs, clean): (Vec<Vec<f64>>, Vec<Vec<f64>>) = match task.kind {
            TaskKind::Linear => {
                let base = landmark_layout(&mut rng, spec.keypoints);
                let a: Vec<f64> =
                    (0..out * spec.input_dim).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect();
                let mut draw = rng.clone();
                let mut rows = (Vec::new(), Vec::new());
                for _ in 0..samples {
                    let x: Vec<f64> = (0..spec.input_dim).map(|_| draw.sample(StandardNormal)).collect();
                    let y =
                        (0..out).map(|k| base[k] + dot(&a[k * spec.input_dim..(k + 1) * spec.input_dim], &x)).collect();
                    rows.0.push(x);
                    rows.1.push(y);
                }
                rows
            }
            TaskKind::Identity => {
                if spec.input_dim != out {
                    return Err(Error::Config(format!(
                        "identity task needs inputDim == outputDim ({out}), got {}",
                        spec.input_dim
                    )));
                }
                let ys: Vec<Vec<f64>> =
                    (0..samples).map(|_| (0..out).map(|_| rng.gen_range(-4.0..4.0)).collect()).collect();
                (ys.clone(), ys)
            }
        };
        let mut noise_rng = ChaCha8Rng::seed_from_u64(task.seed ^ 0x9e37_79b9_7f4a_7c15);
        let targets = clean
            .iter()
            .map(|y| y.iter().map(|&v| Ok(v + sample_noise(&task.noise, &mut noise_rng)?)).collect::<Result<_>>())
            .collect::<Result<_>>()?;
        Ok(Self { inputs, targets, clean })
    }
}

fn sample_noise(noise: &Noise, rng: &mut ChaCha8Rng) -> Result<f64> {
    Ok(match *noise {
        Noise::None => 0.0,
        Noise::Gaussian { sigma } => sigma * rng.sample::<f64, _>(StandardNormal),
        Noise::StudentT { dof, scale } => {
            let t = StudentT::new(dof).map_err(|e| Error::Config(format!("student-t noise: {e}")))?;
            scale * t.sample(rng)
        }
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Flat parameter vector with the model's layer layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    input_dim: usize,
    hidden: Option<usize>,
    output_dim: usize,
    pub params: Vec<f64>,
}

impl Model {
    /// Linear layers start at zero; a hidden layer starts from small random
    /// weights so the tanh units are distinguishable.
    pub fn init(spec: &RegressorSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut m =
            Self { input_dim: spec.input_dim, hidden: spec.hidden, output_dim: spec.output_dim, params: Vec::new() };
        m.params = vec![0.0; m.param_count()];
        if let Some(h) = spec.hidden {
            let scale = 1.0 / (spec.input_dim as f64).sqrt();
            for p in &mut m.params[..h * spec.input_dim] {
                *p = scale * rng.sample::<f64, _>(StandardNormal);
            }
            let w2 = h * spec.input_dim + h;
            for p in &mut m.params[w2..w2 + spec.output_dim * h] {
                *p = 0.1 * rng.sample::<f64, _>(StandardNormal);
            }
        }
        m
    }

    pub fn param_count(&self) -> usize {
        match self.hidden {
            None => self.output_dim * self.input_dim + self.output_dim,
            Some(h) => h * self.input_dim + h + self.output_dim * h + self.output_dim,
        }
    }

    /// Dense weight of the linear model, row-major `(output, input)`.
    pub fn linear_weight(&self) -> Option<&[f64]> {
        self.hidden.is_none().then(|| &self.params[..self.output_dim * self.input_dim])
    }

    fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
        let n_in = x.len();
        for (k, o) in out.iter_mut().enumerate() {
            *o = b[k] + dot(&w[k * n_in..(k + 1) * n_in], x);
        }
    }

    /// Returns the output and, for the hidden model, the hidden activations.
    fn forward_full(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (i, o) = (self.input_dim, self.output_dim);
        let mut y = vec![0.0; o];
        match self.hidden {
            None => {
                let (w, b) = self.params.split_at(o * i);
                Self::affine(w, b, x, &mut y);
                (y, Vec::new())
            }
            Some(h) => {
                let (w1, rest) = self.params.split_at(h * i);
                let (b1, rest) = rest.split_at(h);
                let (w2, b2) = rest.split_at(o * h);
                let mut a = vec![0.0; h];
                Self::affine(w1, b1, x, &mut a);
                a.iter_mut().for_each(|v| *v = v.tanh());
                Self::affine(w2, b2, &a, &mut y);
                (y, a)
            }
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_full(x).0
    }

    /// Residuals `f(x) − y` of every sample, concatenated.
    pub fn residuals(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Vec<f64> {
        inputs
            .iter()
            .zip(targets)
            .flat_map(|(x, y)| self.forward(x).into_iter().zip(y).map(|(p, t)| p - t).collect::<Vec<_>>())
            .collect()
    }

    /// Batch-mean hybrid loss.
    pub fn loss(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>], cfg: &LossConfig) -> f64 {
        let s = inputs.len() as f64;
        inputs
            .iter()
            .zip(targets)
            .map(|(x, y)| {
                let r: Vec<f64> = self.forward(x).iter().zip(y).map(|(p, t)| p - t).collect();
                hybrid_loss_residuals(&r, cfg) / s
            })
            .sum::<f64>()
    }

    /// Loss and its gradient with respect to `params`.
    pub fn loss_and_grad(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>], cfg: &LossConfig) -> (f64, Vec<f64>) {
        let (i, o) = (self.input_dim, self.output_dim);
        let s = inputs.len() as f64;
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        for (x, y) in inputs.iter().zip(targets) {
            let (pred, act) = self.forward_full(x);
            let r: Vec<f64> = pred.iter().zip(y).map(|(p, t)| p - t).collect();
            loss += hybrid_loss_residuals(&r, cfg) / s;
            let g: Vec<f64> = hybrid_grad_residuals(&r, cfg).into_iter().map(|v| v / s).collect();
            match self.hidden {
                None => {
                    let (gw, gb) = grad.split_at_mut(o * i);
                    accumulate_outer(gw, &g, x);
                    gb.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
                }
                Some(h) => {
                    let w2 = &self.params[h * i + h..h * i + h + o * h];
                    let (gw1, rest) = grad.split_at_mut(h * i);
                    let (gb1, rest) = rest.split_at_mut(h);
                    let (gw2, gb2) = rest.split_at_mut(o * h);
                    accumulate_outer(gw2, &g, &act);
                    gb2.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
                    let delta: Vec<f64> = (0..h)
                        .map(|j| {
                            let back: f64 = (0..o).map(|k| w2[k * h + j] * g[k]).sum();
                            back * (1.0 - act[j] * act[j])
                        })
                        .collect();
                    accumulate_outer(gw1, &delta, x);
                    gb1.iter_mut().zip(&delta).for_each(|(a, b)| *a += b);
                }
            }
        }
        (loss, grad)
    }
}

fn accumulate_outer(w: &mut [f64], g: &[f64], x: &[f64]) {
    let n = x.len();
    for (k, &gk) in g.iter().enumerate() {
        if gk == 0.0 {
            continue;
        }
        for (wv, &xv) in w[k * n..(k + 1) * n].iter_mut().zip(x) {
            *wv += gk * xv;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TrainReport {
    pub final_loss: f64,
    /// Mean 3-D NME of the trained model against clean targets.
    pub final_nme: f64,
    pub loss_curve: Vec<f64>,
    /// Means over consecutive windows of [`SMOOTHING_WINDOW`] epochs.
    pub smoothed_curve: Vec<f64>,
    #[serde(skip)]
    pub model: Model,
}

/// Trains on a freshly generated synthetic task.
pub fn train_synthetic(spec: &RegressorSpec, task: &TaskSpec, loss: &LossConfig) -> Result<TrainReport> {
    spec.validate()?;
    loss.validate()?;
    let data = SyntheticTask::generate(spec, task, spec.samples)?;
    train_on(spec, &data, loss)
}

pub fn train_on(spec: &RegressorSpec, data: &SyntheticTask, loss: &LossConfig) -> Result<TrainReport> {
    let mut model = Model::init(spec);
    let mut curve = Vec::with_capacity(spec.epochs + 1);
    let mut lr = spec.lr;
    for epoch in 0..spec.epochs {
        let (l, g) = model.loss_and_grad(&data.inputs, &data.targets, loss);
        if !l.is_finite() || l > DIVERGENCE_LOSS {
            return Err(Error::Divergence { lr: spec.lr, loss: l, epoch });
        }
        curve.push(l);
        for (p, gv) in model.params.iter_mut().zip(&g) {
            *p -= lr * gv;
        }
        lr *= spec.lr_decay;
    }
    let final_loss = model.loss(&data.inputs, &data.targets, loss);
    if !final_loss.is_finite() || final_loss > DIVERGENCE_LOSS {
        return Err(Error::Divergence { lr: spec.lr, loss: final_loss, epoch: spec.epochs });
    }
    curve.push(final_loss);
    let final_nme = mean_nme(&model, &data.inputs, &data.clean)?;
    let smoothed_curve = curve.chunks(SMOOTHING_WINDOW).map(|w| w.iter().sum::<f64>() / w.len() as f64).collect();
    Ok(TrainReport { final_loss, final_nme, loss_curve: curve, smoothed_curve, model })
}

fn as_landmarks(v: &[f64]) -> Result<LandmarkSet> {
    LandmarkSet::for_count(v.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
}

/// Mean 3-D NME over samples, normalised by each target's landmark box.
pub fn mean_nme(model: &Model, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
    let mut total = 0.0;
    for (x, y) in inputs.iter().zip(targets) {
        total += nme(&as_landmarks(&model.forward(x))?, &as_landmarks(y)?, Mode::ThreeD, None)?;
    }
    Ok(total / inputs.len() as f64)
}

/// Mean wing loss of the model against clean targets.
pub fn mean_wing_error(model: &Model, inputs: &[Vec<f64>], targets: &[Vec<f64>], cfg: &LossConfig) -> f64 {
    let mut total = 0.0;
    let mut n = 0usize;
    for (x, y) in inputs.iter().zip(targets) {
        for (p, t) in model.forward(x).iter().zip(y) {
            total += wing(p - t, cfg);
            n += 1;
        }
    }
    total / n as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LossComparison {
    pub hybrid_wing_error: f64,
    pub l2_wing_error: f64,
    pub hybrid_nme: f64,
    pub l2_nme: f64,
    /// Always set: this is a small synthetic proxy, not a CNN benchmark.
    pub note: &'static str,
}

/// Trains the same spec on noisy targets twice, with the hybrid loss and
/// with plain squared error, and scores both on held-out clean data.
pub fn compare_hybrid_vs_l2(spec: &RegressorSpec, task: &TaskSpec, hybrid: &LossConfig) -> Result<LossComparison> {
    spec.validate()?;
    let train = SyntheticTask::generate(spec, task, spec.samples)?;
    let held_out = SyntheticTask::generate(spec, &TaskSpec { noise: Noise::None, ..*task }, 2 * spec.samples)?;
    let l2 = LossConfig { w1: 0.0, w2: 1.0, ..*hybrid };
    let h = train_on(spec, &train, hybrid)?;
    let p = train_on(spec, &train, &l2)?;
    let (xs, ys) = (&held_out.inputs[spec.samples..], &held_out.clean[spec.samples..]);
    Ok(LossComparison {
        hybrid_wing_error: mean_wing_error(&h.model, xs, ys, hybrid),
        l2_wing_error: mean_wing_error(&p.model, xs, ys, hybrid),
        hybrid_nme: mean_nme(&h.model, xs, ys)?,
        l2_nme: mean_nme(&p.model, xs, ys)?,
        note: "desk-scale synthetic proxy for the loss ordering; not a reproduction of CNN results",
    })
}

/// One checked parameter coordinate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradSample {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GradCheckReport {
    pub checked: usize,
    pub tolerance: f64,
    pub max_rel_error: f64,
    pub worst: Option<GradSample>,
    pub passed: bool,
}

/// Relative tolerance for analytic vs central-difference gradients.
pub const GRAD_CHECK_TOLERANCE: f64 = 1e-4;
const FD_STEP: f64 = 1e-6;

/// Relative error with an absolute floor so that two near-zero values agree.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Compares analytic gradients of the hybrid loss through the model with
/// central differences on `coords` random parameters, at random parameters
/// and a random linear task.
pub fn gradient_check(spec: &RegressorSpec, loss: &LossConfig, coords: usize, seed: u64) -> Result<GradCheckReport> {
    gradient_check_with(spec, loss, coords, seed, |_| {})
}

/// [`gradient_check`] with a hook applied to the analytic gradient before
/// comparison.
pub fn gradient_check_with(
    spec: &RegressorSpec,
    loss: &LossConfig,
    coords: usize,
    seed: u64,
    hook: impl FnOnce(&mut [f64]),
) -> Result<GradCheckReport> {
    spec.validate()?;
    let data = SyntheticTask::generate(spec, &TaskSpec { seed, ..Default::default() }, spec.samples)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut model = Model::init(spec);
    for p in &mut model.params {
        *p += rng.gen_range(-1.0..1.0);
    }
    let (_, mut grad) = model.loss_and_grad(&data.inputs, &data.targets, loss);
    hook(&mut grad);
    let n = model.params.len();
    let picks = rand::seq::index::sample(&mut rng, n, coords.min(n)).into_vec();
    let mut worst: Option<GradSample> = None;
    for index in picks {
        let orig = model.params[index];
        model.params[index] = orig + FD_STEP;
        let up = model.residuals(&data.inputs, &data.targets);
        model.params[index] = orig - FD_STEP;
        let down = model.residuals(&data.inputs, &data.targets);
        model.params[index] = orig;
        // L(θ+h) − L(θ−h) summed term by term so unaffected terms cancel exactly
        let diff: f64 = up.iter().zip(&down).map(|(&a, &b)| hybrid_term(a, loss) - hybrid_term(b, loss)).sum();
        let numeric = diff / up.len() as f64 / (2.0 * FD_STEP);
        let sample =
            GradSample { index, analytic: grad[index], numeric, rel_error: relative_error(grad[index], numeric) };
        if worst.as_ref().is_none_or(|w| sample.rel_error > w.rel_error) {
            worst = Some(sample);
        }
    }
    let max_rel_error = worst.as_ref().map_or(0.0, |w| w.rel_error);
    Ok(GradCheckReport {
        checked: coords.min(n),
        tolerance: GRAD_CHECK_TOLERANCE,
        max_rel_error,
        worst,
        passed: max_rel_error <= GRAD_CHECK_TOLERANCE,
    })
}
