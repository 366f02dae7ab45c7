//! Losses, gradients, the bounded quasi-Newton optimizer, datasets and the
//! benchmark protocols.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::time::Instant;

use num_complex::Complex;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, QonnError, Result};
use crate::fock::{cubic_phase_targets, SYNTHESIS_CUTOFF};
use crate::gaussian::SQUEEZING_BOUND;
use crate::model::{init_params, param_bounds, squeezing_indices, Qonn, QonnArchitecture, Readout, Rescaler};
use crate::model::{INPUT_RANGE, OUTPUT_RANGE};
use crate::scalar::{Dual, Real, C64};
use crate::wick::Reduction;

// ---------------------------------------------------------------------------
// losses

/// Mean of squared differences over all entries.
pub fn loss_mse<T: Real>(preds: &[T], targets: &[f64]) -> Result<T> {
    if preds.len() != targets.len() {
        return Err(invalid(format!("{} predictions for {} targets", preds.len(), targets.len())));
    }
    if preds.is_empty() {
        return Err(invalid("empty loss input"));
    }
    let mut acc = T::zero();
    for (p, &t) in preds.iter().zip(targets) {
        let d = *p - T::from_f64(t);
        acc += d * d;
    }
    Ok(acc / T::from_f64(preds.len() as f64))
}

/// `log Σ_k e^{z_k}`, shifted by the largest entry.
fn log_sum_exp<T: Real>(z: &[T]) -> T {
    let m = z.iter().copied().fold(z[0], |a, b| if b.value() > a.value() { b } else { a });
    let mut s = T::zero();
    for &v in z {
        s += (v - m).exp();
    }
    m + s.ln()
}

/// Softmax cross-entropy averaged over samples.
pub fn softmax_cross_entropy<T: Real>(raw: &[Vec<T>], onehot: &[Vec<f64>]) -> Result<T> {
    if raw.len() != onehot.len() {
        return Err(invalid(format!("{} outputs for {} targets", raw.len(), onehot.len())));
    }
    if raw.is_empty() {
        return Err(invalid("empty loss input"));
    }
    let mut acc = T::zero();
    for (z, y) in raw.iter().zip(onehot) {
        if z.len() != y.len() || z.len() < 2 {
            return Err(invalid("cross-entropy needs at least two classes and matching widths"));
        }
        let lse = log_sum_exp(z);
        for (&zj, &yj) in z.iter().zip(y) {
            if yj != 0.0 {
                acc -= T::from_f64(yj) * (zj - lse);
            }
        }
    }
    Ok(acc / T::from_f64(raw.len() as f64))
}

/// Cross-entropy with integer labels.
pub fn softmax_cross_entropy_labels<T: Real>(raw: &[Vec<T>], labels: &[usize]) -> Result<T> {
    let width = raw.first().map_or(0, Vec::len);
    let onehot: Vec<Vec<f64>> = labels.iter().map(|&l| one_hot(l, width, 0.0, 1.0)).collect();
    softmax_cross_entropy(raw, &onehot)
}

/// `(1/M) Σ_samples Σ_moments |pred − target|²`.
pub fn loss_moment_mse<T: Real>(pred: &[Vec<Complex<T>>], target: &[Vec<C64>]) -> Result<T> {
    if pred.len() != target.len() {
        return Err(invalid(format!("{} predicted moment sets for {} targets", pred.len(), target.len())));
    }
    if pred.is_empty() {
        return Err(invalid("empty loss input"));
    }
    let mut acc = T::zero();
    for (p, t) in pred.iter().zip(target) {
        if p.len() != t.len() {
            return Err(invalid(format!("moment set of size {} compared with {}", p.len(), t.len())));
        }
        for (a, b) in p.iter().zip(t) {
            let dr = a.re - T::from_f64(b.re);
            let di = a.im - T::from_f64(b.im);
            acc += dr * dr + di * di;
        }
    }
    Ok(acc / T::from_f64(pred.len() as f64))
}

fn one_hot(label: usize, width: usize, off: f64, on: f64) -> Vec<f64> {
    (0..width).map(|k| if k == label { on } else { off }).collect()
}

fn argmax(v: &[f64]) -> usize {
    v.iter().enumerate().fold((0, f64::NEG_INFINITY), |best, (i, &x)| if x > best.1 { (i, x) } else { best }).0
}

// ---------------------------------------------------------------------------
// objectives and gradients

/// A scalar function of a real parameter vector, evaluable on any [`Real`].
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn loss<T: Real>(&self, params: &[T]) -> Result<T>;

    /// Box bounds; unbounded by default.
    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![f64::NEG_INFINITY; self.dim()], vec![f64::INFINITY; self.dim()])
    }
}

/// Derivative directions carried per forward-mode pass.
pub const DUAL_WIDTH: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    /// Forward-mode dual numbers, exact up to rounding.
    #[default]
    Dual,
    /// Central differences.
    FiniteDifference,
}

/// Loss and exact gradient by forward-mode differentiation.
pub fn dual_gradient<O: Objective>(obj: &O, params: &[f64]) -> Result<(f64, Vec<f64>)> {
    let dim = params.len();
    let mut grad = vec![0.0; dim];
    let mut value = f64::NAN;
    if dim == 0 {
        return Ok((obj.loss(params)?, grad));
    }
    for start in (0..dim).step_by(DUAL_WIDTH) {
        let end = (start + DUAL_WIDTH).min(dim);
        let x: Vec<Dual<DUAL_WIDTH>> = params
            .iter()
            .enumerate()
            .map(|(i, &p)| if (start..end).contains(&i) { Dual::variable(p, i - start) } else { Dual::constant(p) })
            .collect();
        let f = obj.loss(&x)?;
        if !f.v.is_finite() {
            return Err(QonnError::NonFiniteLoss { coordinate: start });
        }
        value = f.v;
        for i in start..end {
            grad[i] = f.d[i - start];
            if !grad[i].is_finite() {
                return Err(QonnError::NonFiniteLoss { coordinate: i });
            }
        }
    }
    Ok((value, grad))
}

/// Central differences with relative step `h·max(1, |p_i|)`. Coordinates
/// whose stencil would leave the box fall back to a one-sided difference.
pub fn central_difference<O: Objective>(obj: &O, params: &[f64], h: f64) -> Result<Vec<f64>> {
    let (lo, hi) = obj.bounds();
    let f0 = obj.loss(params)?;
    if !f0.is_finite() {
        return Err(QonnError::NonFiniteLoss { coordinate: 0 });
    }
    (0..params.len())
        .into_par_iter()
        .map(|i| {
            let step = h * params[i].abs().max(1.0);
            let at = |x: f64| -> Result<f64> {
                let mut p = params.to_vec();
                p[i] = x;
                let f = obj.loss(&p).map_err(|e| match e {
                    QonnError::DegenerateState { .. } => QonnError::NonFiniteLoss { coordinate: i },
                    other => other,
                })?;
                if f.is_finite() {
                    Ok(f)
                } else {
                    Err(QonnError::NonFiniteLoss { coordinate: i })
                }
            };
            let up = params[i] + step <= hi[i];
            let down = params[i] - step >= lo[i];
            match (up, down) {
                (true, true) => Ok((at(params[i] + step)? - at(params[i] - step)?) / (2.0 * step)),
                (true, false) => Ok((at(params[i] + step)? - f0) / step),
                (false, true) => Ok((f0 - at(params[i] - step)?) / step),
                (false, false) => Err(invalid(format!("box around parameter {i} is narrower than the step"))),
            }
        })
        .collect()
}

fn value_and_gradient<O: Objective>(obj: &O, x: &[f64], mode: GradientMode, h: f64) -> Result<(f64, Vec<f64>)> {
    match mode {
        GradientMode::Dual => dual_gradient(obj, x),
        GradientMode::FiniteDifference => Ok((obj.loss(x)?, central_difference(obj, x, h)?)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    CrossEntropy,
    MomentMse,
}

/// Supervision attached to a split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Targets {
    Values(Vec<Vec<f64>>),
    Labels { labels: Vec<usize>, n_classes: usize },
    Moments(Vec<Vec<C64>>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Values(v) => v.len(),
            Targets::Labels { labels, .. } => labels.len(),
            Targets::Moments(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn subset(&self, idx: &[usize]) -> Targets {
        match self {
            Targets::Values(v) => Targets::Values(idx.iter().map(|&i| v[i].clone()).collect()),
            Targets::Labels { labels, n_classes } => {
                Targets::Labels { labels: idx.iter().map(|&i| labels[i]).collect(), n_classes: *n_classes }
            }
            Targets::Moments(m) => Targets::Moments(idx.iter().map(|&i| m[i].clone()).collect()),
        }
    }
}

/// Training loss of a network over one split.
pub struct QonnObjective<'a> {
    qonn: &'a Qonn,
    inputs: &'a [Vec<f64>],
    targets: &'a Targets,
    kind: LossKind,
    reduction: Reduction,
}

impl<'a> QonnObjective<'a> {
    pub fn new(qonn: &'a Qonn, split: &'a Split, kind: LossKind) -> Result<Self> {
        check_loss(qonn.architecture(), &split.targets, kind)?;
        if split.inputs.len() != split.targets.len() || split.inputs.is_empty() {
            return Err(invalid("split needs the same positive number of inputs and targets"));
        }
        Ok(QonnObjective {
            qonn,
            inputs: &split.inputs,
            targets: &split.targets,
            kind,
            reduction: Reduction::Sequential,
        })
    }

    pub fn with_reduction(mut self, reduction: Reduction) -> Self {
        self.reduction = reduction;
        self
    }
}

fn check_loss(arch: &QonnArchitecture, targets: &Targets, kind: LossKind) -> Result<()> {
    let outs = arch.n_outputs();
    let ok = match (kind, targets, &arch.readout) {
        (LossKind::Mse, Targets::Values(v), Readout::Quadratures(_)) => v.iter().all(|t| t.len() == outs),
        (LossKind::Mse | LossKind::CrossEntropy, Targets::Labels { n_classes, .. }, Readout::Quadratures(_)) => {
            *n_classes == outs && outs >= 2
        }
        (LossKind::MomentMse, Targets::Moments(m), Readout::Moments(_)) => m.iter().all(|t| t.len() == outs),
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(invalid(format!("loss {kind:?} does not fit the readout {:?} and the dataset targets", arch.readout)))
    }
}

impl Objective for QonnObjective<'_> {
    fn dim(&self) -> usize {
        self.qonn.architecture().param_count()
    }

    fn loss<T: Real>(&self, params: &[T]) -> Result<T> {
        let prep = self.qonn.prepare(params)?.with_reduction(self.reduction);
        let fw = prep.eval_batch(self.inputs)?;
        match (self.kind, self.targets) {
            (LossKind::Mse, Targets::Values(v)) => {
                let p: Vec<T> = fw.iter().flat_map(|f| f.quadratures()).collect();
                let t: Vec<f64> = v.iter().flatten().copied().collect();
                loss_mse(&p, &t)
            }
            (LossKind::Mse, Targets::Labels { labels, n_classes }) => {
                let p: Vec<T> = fw.iter().flat_map(|f| f.quadratures()).collect();
                let t: Vec<f64> =
                    labels.iter().flat_map(|&l| one_hot(l, *n_classes, OUTPUT_RANGE.0, OUTPUT_RANGE.1)).collect();
                loss_mse(&p, &t)
            }
            (LossKind::CrossEntropy, Targets::Labels { labels, .. }) => {
                let z: Vec<Vec<T>> = fw.iter().map(|f| f.quadratures()).collect();
                softmax_cross_entropy_labels(&z, labels)
            }
            (LossKind::MomentMse, Targets::Moments(m)) => {
                let p: Vec<Vec<Complex<T>>> = fw.into_iter().map(|f| f.expectations).collect();
                loss_moment_mse(&p, m)
            }
            _ => Err(invalid("loss kind does not match the targets")),
        }
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let a = self.qonn.architecture();
        param_bounds(a.n_modes, a.n_layers())
    }
}

// ---------------------------------------------------------------------------
// optimizer

#[derive(Clone, Copy, Debug)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iters: usize,
    /// Relative reduction `(f_k − f_{k+1}) / max(|f_k|, |f_{k+1}|, 1)`.
    pub ftol: f64,
    /// Infinity norm of the projected gradient.
    pub pgtol: f64,
    pub gradient: GradientMode,
    pub fd_step: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            memory: 10,
            max_iters: 500,
            ftol: 2.2e-9,
            pgtol: 1e-5,
            gradient: GradientMode::Dual,
            fd_step: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
    pub message: String,
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, &l), &h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(l, h);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn projected_gradient_norm(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .zip(lo.iter().zip(hi))
        .map(|((&xi, &gi), (&l, &h))| (xi - (xi - gi).clamp(l, h)).abs())
        .fold(0.0, f64::max)
}

/// Trial-point loss; a degenerate herald norm counts as an infinitely bad
/// point so the line search backs off.
fn trial_loss<O: Objective>(obj: &O, x: &[f64]) -> Result<f64> {
    match obj.loss(x) {
        Ok(f) if f.is_finite() => Ok(f),
        Ok(_) | Err(QonnError::DegenerateState { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// Projected limited-memory BFGS on a box. `on_iter(k, x, f)` runs after
/// every accepted step.
pub fn minimize_lbfgs<O: Objective>(
    obj: &O,
    x0: &[f64],
    opts: &LbfgsOptions,
    mut on_iter: impl FnMut(usize, &[f64], f64),
) -> Result<LbfgsOutcome> {
    let (lo, hi) = obj.bounds();
    let mut x = x0.to_vec();
    project(&mut x, &lo, &hi);
    let (mut f, mut g) = value_and_gradient(obj, &x, opts.gradient, opts.fd_step)?;
    let mut mem: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
    let n = x.len();

    for k in 0..opts.max_iters {
        if projected_gradient_norm(&x, &g, &lo, &hi) <= opts.pgtol {
            return Ok(LbfgsOutcome {
                x,
                f,
                iterations: k,
                converged: true,
                message: "projected gradient below tolerance".into(),
            });
        }
        let fixed: Vec<bool> = (0..n).map(|i| (x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0)).collect();
        let masked = |v: &[f64]| -> Vec<f64> { v.iter().zip(&fixed).map(|(&a, &b)| if b { 0.0 } else { a }).collect() };

        let mut accepted = None;
        for attempt in 0..2 {
            let q0 = masked(&g);
            let mut d = if attempt == 0 && !mem.is_empty() { two_loop(&q0, &mem) } else { q0.clone() };
            for v in d.iter_mut() {
                *v = -*v;
            }
            d = masked(&d);
            if dot(&d, &g) >= 0.0 {
                d = q0.iter().map(|v| -v).collect();
            }
            let dnorm = d.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if dnorm == 0.0 {
                break;
            }
            let mut t = if mem.is_empty() { (1.0 / dnorm).min(1.0) } else { 1.0 };
            for _ in 0..40 {
                let mut xt: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
                project(&mut xt, &lo, &hi);
                let step: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
                let slope = dot(&g, &step);
                let ft = trial_loss(obj, &xt)?;
                if ft.is_finite() && ft <= f + 1e-4 * slope && slope < 0.0 {
                    accepted = Some((xt, ft));
                    break;
                }
                t *= 0.5;
            }
            if accepted.is_some() {
                break;
            }
            mem.clear();
        }
        let Some((xn, fnew)) = accepted else {
            return Ok(LbfgsOutcome { x, f, iterations: k, converged: false, message: "line search failed".into() });
        };
        let (fn2, gn) = value_and_gradient(obj, &xn, opts.gradient, opts.fd_step)?;
        debug_assert!((fn2 - fnew).abs() <= 1e-9 * fnew.abs().max(1.0));
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() && sy > 0.0 {
            if mem.len() == opts.memory {
                mem.remove(0);
            }
            mem.push((s, y, 1.0 / sy));
        }
        let rel = (f - fn2) / f.abs().max(fn2.abs()).max(1.0);
        x = xn;
        f = fn2;
        g = gn;
        on_iter(k + 1, &x, f);
        if rel <= opts.ftol {
            return Ok(LbfgsOutcome {
                x,
                f,
                iterations: k + 1,
                converged: true,
                message: "relative reduction below tolerance".into(),
            });
        }
    }
    Ok(LbfgsOutcome { x, f, iterations: opts.max_iters, converged: false, message: "iteration limit reached".into() })
}

/// `H q` for the stored curvature pairs.
fn two_loop(q: &[f64], mem: &[(Vec<f64>, Vec<f64>, f64)]) -> Vec<f64> {
    let mut q = q.to_vec();
    let mut alphas = vec![0.0; mem.len()];
    for (i, (s, y, rho)) in mem.iter().enumerate().rev() {
        let a = rho * dot(s, &q);
        alphas[i] = a;
        for (qj, yj) in q.iter_mut().zip(y) {
            *qj -= a * yj;
        }
    }
    let (s, y, _) = mem.last().expect("non-empty memory");
    let gamma = dot(s, y) / dot(y, y);
    for v in q.iter_mut() {
        *v *= gamma;
    }
    for (i, (s, y, rho)) in mem.iter().enumerate() {
        let b = rho * dot(y, &q);
        for (qj, sj) in q.iter_mut().zip(s) {
            *qj += (alphas[i] - b) * sj;
        }
    }
    q
}

// ---------------------------------------------------------------------------
// training driver

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub seed: u64,
    pub restarts: usize,
    pub max_iters: usize,
    /// Relative finite-difference step.
    pub fd_step: f64,
    /// Relative loss-reduction tolerance.
    pub tolerance: f64,
    pub pg_tolerance: f64,
    pub loss: Option<LossKind>,
    /// Squeezing box `[-r_bound, r_bound]`, at most 1.7.
    pub r_bound: f64,
    pub gradient: GradientMode,
    pub memory: usize,
    /// Run restarts on separate threads.
    pub parallel_restarts: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 0,
            restarts: 8,
            max_iters: 500,
            fd_step: 1e-6,
            tolerance: 2.2e-9,
            pg_tolerance: 1e-5,
            loss: None,
            r_bound: SQUEEZING_BOUND,
            gradient: GradientMode::Dual,
            memory: 10,
            parallel_restarts: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(invalid("restarts must be at least 1"));
        }
        if !(1e-8..=1e-4).contains(&self.fd_step) {
            return Err(invalid(format!("finite-difference step {} outside [1e-8, 1e-4]", self.fd_step)));
        }
        if !(self.r_bound > 0.0 && self.r_bound <= SQUEEZING_BOUND) {
            return Err(invalid(format!("r_bound {} outside (0, {SQUEEZING_BOUND}]", self.r_bound)));
        }
        if self.memory == 0 || self.max_iters == 0 {
            return Err(invalid("memory and max_iters must be positive"));
        }
        if !(self.tolerance >= 0.0 && self.pg_tolerance >= 0.0) {
            return Err(invalid("tolerances must be non-negative"));
        }
        Ok(())
    }

    fn lbfgs(&self) -> LbfgsOptions {
        LbfgsOptions {
            memory: self.memory,
            max_iters: self.max_iters,
            ftol: self.tolerance,
            pgtol: self.pg_tolerance,
            gradient: self.gradient,
            fd_step: self.fd_step,
        }
    }
}

/// Default loss for a target type.
pub fn default_loss(targets: &Targets) -> LossKind {
    match targets {
        Targets::Values(_) => LossKind::Mse,
        Targets::Labels { .. } => LossKind::CrossEntropy,
        Targets::Moments(_) => LossKind::MomentMse,
    }
}

/// Objective wrapper that tightens the squeezing box.
struct Boxed<'a, O> {
    inner: &'a O,
    r_idx: Vec<usize>,
    r_bound: f64,
}

impl<O: Objective> Objective for Boxed<'_, O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn loss<T: Real>(&self, params: &[T]) -> Result<T> {
        self.inner.loss(params)
    }
    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let (mut lo, mut hi) = self.inner.bounds();
        for &i in &self.r_idx {
            lo[i] = lo[i].max(-self.r_bound);
            hi[i] = hi[i].min(self.r_bound);
        }
        (lo, hi)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub restart: usize,
    pub iter: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub wall_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub restart: usize,
    pub train_loss: Option<f64>,
    pub val_loss: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub message: String,
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub params: Vec<f64>,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub best_restart: usize,
    pub restarts: Vec<RestartSummary>,
    pub trace: Vec<TraceRecord>,
    pub loss: LossKind,
}

/// Seed of restart `k` derived from the run seed.
fn restart_seed(seed: u64, k: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64 + 1);
    rng.random()
}

/// Trains from `restarts` random starting points and keeps the one with
/// the lowest validation loss (training loss when there is no validation
/// split).
pub fn fit(qonn: &Qonn, data: &Dataset, cfg: &TrainConfig) -> Result<FitResult> {
    cfg.validate()?;
    if data.train.is_empty() {
        return Err(invalid("training split is empty"));
    }
    let kind = cfg.loss.unwrap_or_else(|| default_loss(&data.train.targets));
    let arch = qonn.architecture();
    let train_obj = QonnObjective::new(qonn, &data.train, kind)?;
    let val_obj = if data.val.is_empty() { None } else { Some(QonnObjective::new(qonn, &data.val, kind)?) };
    let boxed =
        Boxed { inner: &train_obj, r_idx: squeezing_indices(arch.n_modes, arch.n_layers()), r_bound: cfg.r_bound };
    let opts = cfg.lbfgs();
    let start = Instant::now();

    let run = |k: usize| -> (RestartSummary, Vec<TraceRecord>, Option<Vec<f64>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(restart_seed(cfg.seed, k));
        let x0 = init_params(arch.n_modes, arch.n_layers(), &mut rng);
        let val_at = |x: &[f64]| val_obj.as_ref().and_then(|v| v.loss(x).ok());
        let mut trace = Vec::new();
        let outcome = minimize_lbfgs(&boxed, &x0, &opts, |iter, x, f| {
            trace.push(TraceRecord {
                restart: k,
                iter,
                train_loss: f,
                val_loss: val_at(x),
                wall_time: start.elapsed().as_secs_f64(),
            });
        });
        match outcome {
            Ok(o) if o.f.is_finite() => {
                let val = val_at(&o.x);
                let summary = RestartSummary {
                    restart: k,
                    train_loss: Some(o.f),
                    val_loss: val,
                    iterations: o.iterations,
                    converged: o.converged,
                    message: o.message,
                };
                (summary, trace, Some(o.x))
            }
            Ok(o) => {
                let summary = RestartSummary {
                    restart: k,
                    train_loss: None,
                    val_loss: None,
                    iterations: o.iterations,
                    converged: false,
                    message: "non-finite loss".into(),
                };
                (summary, trace, None)
            }
            Err(e) => {
                let summary = RestartSummary {
                    restart: k,
                    train_loss: None,
                    val_loss: None,
                    iterations: 0,
                    converged: false,
                    message: e.to_string(),
                };
                (summary, trace, None)
            }
        }
    };

    let runs: Vec<_> = if cfg.parallel_restarts {
        (0..cfg.restarts).into_par_iter().map(run).collect()
    } else {
        (0..cfg.restarts).map(run).collect()
    };

    let mut restarts = Vec::new();
    let mut trace = Vec::new();
    // (score, restart, params, train loss, val loss)
    type Candidate = (f64, usize, Vec<f64>, f64, Option<f64>);
    let mut best: Option<Candidate> = None;
    for (summary, t, x) in runs {
        trace.extend(t);
        if let (Some(x), Some(train)) = (x, summary.train_loss) {
            let score = if val_obj.is_some() { summary.val_loss.unwrap_or(f64::INFINITY) } else { train };
            if best.as_ref().is_none_or(|b| score < b.0) {
                best = Some((score, summary.restart, x, train, summary.val_loss));
            }
        }
        restarts.push(summary);
    }
    let Some((_, best_restart, params, train_loss, val_loss)) = best else {
        let reasons: Vec<String> = restarts.iter().map(|r| format!("restart {}: {}", r.restart, r.message)).collect();
        return Err(QonnError::OptimizationFailure(format!("all restarts diverged ({})", reasons.join("; "))));
    };
    Ok(FitResult { params, train_loss, val_loss, best_restart, restarts, trace, loss: kind })
}

/// Loss and, for labelled data, accuracy of `params` on one split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub loss: f64,
    pub accuracy: Option<f64>,
    pub mean_herald_norm: f64,
    pub min_herald_norm: f64,
}

pub fn evaluate_split(qonn: &Qonn, params: &[f64], split: &Split, kind: LossKind) -> Result<SplitMetrics> {
    let loss = QonnObjective::new(qonn, split, kind)?.loss(params)?;
    let fw = qonn.forward_batch(params, &split.inputs)?;
    let norms: Vec<f64> = fw.iter().map(|f| f.norm).collect();
    let accuracy = match &split.targets {
        Targets::Labels { labels, .. } => {
            let hits = fw.iter().zip(labels).filter(|(f, &l)| argmax(&f.quadratures()) == l).count();
            Some(hits as f64 / labels.len() as f64)
        }
        _ => None,
    };
    Ok(SplitMetrics {
        loss,
        accuracy,
        mean_herald_norm: norms.iter().sum::<f64>() / norms.len() as f64,
        min_herald_norm: norms.iter().copied().fold(f64::INFINITY, f64::min),
    })
}

// ---------------------------------------------------------------------------
// datasets

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Targets,
}

impl Split {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    fn subset(&self, idx: &[usize]) -> Split {
        Split { inputs: idx.iter().map(|&i| self.inputs[i].clone()).collect(), targets: self.targets.subset(idx) }
    }
}

/// Inputs and targets are stored already rescaled; the rescalers map them
/// back to raw units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub train: Split,
    pub val: Split,
    pub test: Split,
    pub input_scale: Rescaler,
    /// Present for regression targets.
    pub output_scale: Option<Rescaler>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveFunction {
    /// `x⁵`
    Quintic,
    /// `2 cosh x`
    Cosh,
    /// `sin 3x + cos 5x`
    SinCos,
    /// `2x + 1`
    Linear,
}

impl CurveFunction {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            CurveFunction::Quintic => x.powi(5),
            CurveFunction::Cosh => 2.0 * x.cosh(),
            CurveFunction::SinCos => (3.0 * x).sin() + (5.0 * x).cos(),
            CurveFunction::Linear => 2.0 * x + 1.0,
        }
    }

    /// Benchmark range and noise level.
    pub fn defaults(self) -> ((f64, f64), f64) {
        match self {
            CurveFunction::Quintic => ((-3.0, 3.0), 5.0),
            CurveFunction::Cosh => ((-5.0, 5.0), 3.0),
            CurveFunction::SinCos => ((-1.0, 2.5), 0.1),
            CurveFunction::Linear => ((-1.0, 1.0), 0.0),
        }
    }
}

fn d_train() -> usize {
    100
}
fn d_val() -> usize {
    50
}
fn d_test() -> usize {
    200
}
fn d_samples() -> usize {
    500
}
fn d_moons_noise() -> f64 {
    0.1
}
fn d_circles_noise() -> f64 {
    0.05
}
fn d_factor() -> f64 {
    0.5
}
fn d_gamma() -> f64 {
    0.2
}
fn d_synth_samples() -> usize {
    20
}
fn d_synth_cutoff() -> usize {
    SYNTHESIS_CUTOFF
}
fn d_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetKind {
    /// Noisy uniform training samples, noiseless uniform validation and a
    /// noiseless linear test grid.
    Curve {
        function: CurveFunction,
        #[serde(default)]
        range: Option<(f64, f64)>,
        #[serde(default)]
        noise: Option<f64>,
        #[serde(default = "d_train")]
        train: usize,
        #[serde(default = "d_val")]
        val: usize,
        #[serde(default = "d_test")]
        test: usize,
    },
    Moons {
        #[serde(default = "d_samples")]
        samples: usize,
        #[serde(default = "d_moons_noise")]
        noise: f64,
        #[serde(default = "d_train")]
        train: usize,
        #[serde(default = "d_val")]
        val: usize,
    },
    Circles {
        #[serde(default = "d_samples")]
        samples: usize,
        #[serde(default = "d_circles_noise")]
        noise: f64,
        #[serde(default = "d_factor")]
        factor: f64,
        #[serde(default = "d_train")]
        train: usize,
        #[serde(default = "d_val")]
        val: usize,
    },
    /// Feature columns followed by one target column. With `n_classes` the
    /// target is an integer label, otherwise a real value.
    Csv {
        path: PathBuf,
        #[serde(default)]
        n_classes: Option<usize>,
        #[serde(default = "d_true")]
        has_header: bool,
        train: usize,
        val: usize,
    },
    /// Order-4 moments of `V(γ)|α⟩`, `α` on a linear grid inside (−2, 2).
    CubicPhase {
        #[serde(default = "d_gamma")]
        gamma: f64,
        #[serde(default = "d_synth_samples")]
        samples: usize,
        #[serde(default = "d_synth_cutoff")]
        cutoff: usize,
    },
}

pub fn make_dataset(kind: &DatasetKind, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        DatasetKind::Curve { function, range, noise, train, val, test } => {
            let (drange, dnoise) = function.defaults();
            curve_dataset(*function, range.unwrap_or(drange), noise.unwrap_or(dnoise), *train, *val, *test, &mut rng)
        }
        DatasetKind::Moons { samples, noise, train, val } => {
            let (x, y) = make_moons(*samples, *noise, &mut rng)?;
            classification_dataset(x, y, 2, *train, *val, &mut rng)
        }
        DatasetKind::Circles { samples, noise, factor, train, val } => {
            let (x, y) = make_circles(*samples, *noise, *factor, &mut rng)?;
            classification_dataset(x, y, 2, *train, *val, &mut rng)
        }
        DatasetKind::Csv { path, n_classes, has_header, train, val } => {
            let (x, t) = read_csv(path, *has_header)?;
            match n_classes {
                Some(c) => {
                    let labels = t
                        .iter()
                        .enumerate()
                        .map(|(row, &v)| {
                            if v >= 0.0 && v.fract() == 0.0 && (v as usize) < *c {
                                Ok(v as usize)
                            } else {
                                Err(QonnError::Dataset {
                                    row: row + 1,
                                    message: format!("label {v} is not a class in 0..{c}"),
                                })
                            }
                        })
                        .collect::<Result<Vec<_>>>()?;
                    classification_dataset(x, labels, *c, *train, *val, &mut rng)
                }
                None => regression_from_rows(x, t, *train, *val, &mut rng),
            }
        }
        DatasetKind::CubicPhase { gamma, samples, cutoff } => synthesis_dataset(*gamma, *samples, *cutoff),
    }
}

fn curve_dataset(
    f: CurveFunction,
    range: (f64, f64),
    noise: f64,
    n_train: usize,
    n_val: usize,
    n_test: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Dataset> {
    let (a, b) = range;
    if !(a < b) || n_train == 0 || n_test == 0 || !(noise >= 0.0) {
        return Err(invalid("curve dataset needs a < b, positive sizes and non-negative noise"));
    }
    let gauss = Normal::new(0.0, noise).map_err(|e| invalid(e.to_string()))?;
    let train_x: Vec<f64> = (0..n_train).map(|_| rng.random_range(a..b)).collect();
    let train_y: Vec<f64> = train_x.iter().map(|&x| f.eval(x) + gauss.sample(rng)).collect();
    let val_x: Vec<f64> = (0..n_val).map(|_| rng.random_range(a..b)).collect();
    let val_y: Vec<f64> = val_x.iter().map(|&x| f.eval(x)).collect();
    let step = if n_test > 1 { (b - a) / (n_test - 1) as f64 } else { 0.0 };
    let test_x: Vec<f64> = (0..n_test).map(|i| a + step * i as f64).collect();
    let test_y: Vec<f64> = test_x.iter().map(|&x| f.eval(x)).collect();

    let input_scale = Rescaler::fit(&[vec![a], vec![b]], INPUT_RANGE.0, INPUT_RANGE.1)?;
    let rows = |v: &[f64]| v.iter().map(|&x| vec![x]).collect::<Vec<_>>();
    let output_scale = Rescaler::fit(&rows(&train_y), OUTPUT_RANGE.0, OUTPUT_RANGE.1)?;
    let split = |x: &[f64], y: &[f64]| Split {
        inputs: input_scale.apply_all(&rows(x)),
        targets: Targets::Values(output_scale.apply_all(&rows(y))),
    };
    Ok(Dataset {
        train: split(&train_x, &train_y),
        val: split(&val_x, &val_y),
        test: split(&test_x, &test_y),
        input_scale: input_scale.clone(),
        output_scale: Some(output_scale.clone()),
    })
}

/// Two interleaving half circles with Gaussian coordinate noise.
pub fn make_moons(samples: usize, noise: f64, rng: &mut ChaCha8Rng) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    if samples < 2 || !(noise >= 0.0) {
        return Err(invalid("moons needs at least two samples and non-negative noise"));
    }
    let n_out = samples / 2;
    let n_in = samples - n_out;
    let lin = |k: usize, i: usize| if k > 1 { PI * i as f64 / (k - 1) as f64 } else { 0.0 };
    let mut x = Vec::with_capacity(samples);
    let mut y = Vec::with_capacity(samples);
    for i in 0..n_out {
        let t = lin(n_out, i);
        x.push(vec![t.cos(), t.sin()]);
        y.push(0);
    }
    for i in 0..n_in {
        let t = lin(n_in, i);
        x.push(vec![1.0 - t.cos(), 1.0 - t.sin() - 0.5]);
        y.push(1);
    }
    add_noise(&mut x, noise, rng)?;
    Ok((x, y))
}

/// A large circle containing a smaller one scaled by `factor`.
pub fn make_circles(
    samples: usize,
    noise: f64,
    factor: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    if samples < 2 || !(noise >= 0.0) || !(0.0..1.0).contains(&factor) {
        return Err(invalid("circles needs at least two samples, non-negative noise and factor in [0, 1)"));
    }
    let n_out = samples / 2;
    let n_in = samples - n_out;
    let mut x = Vec::with_capacity(samples);
    let mut y = Vec::with_capacity(samples);
    for i in 0..n_out {
        let t = 2.0 * PI * i as f64 / n_out as f64;
        x.push(vec![t.cos(), t.sin()]);
        y.push(0);
    }
    for i in 0..n_in {
        let t = 2.0 * PI * i as f64 / n_in as f64;
        x.push(vec![factor * t.cos(), factor * t.sin()]);
        y.push(1);
    }
    add_noise(&mut x, noise, rng)?;
    Ok((x, y))
}

fn add_noise(x: &mut [Vec<f64>], noise: f64, rng: &mut ChaCha8Rng) -> Result<()> {
    let gauss = Normal::new(0.0, noise).map_err(|e| invalid(e.to_string()))?;
    for row in x.iter_mut() {
        for v in row.iter_mut() {
            *v += gauss.sample(rng);
        }
    }
    Ok(())
}

/// Balanced train/validation draws per class; the test split is the full
/// dataset.
fn classification_dataset(
    x: Vec<Vec<f64>>,
    labels: Vec<usize>,
    n_classes: usize,
    n_train: usize,
    n_val: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Dataset> {
    if n_classes < 2 {
        return Err(invalid("classification needs at least two classes"));
    }
    if !n_train.is_multiple_of(n_classes) || !n_val.is_multiple_of(n_classes) {
        return Err(invalid(format!(
            "train ({n_train}) and val ({n_val}) sizes must divide evenly into {n_classes} classes"
        )));
    }
    let mut train_idx = Vec::new();
    let mut val_idx = Vec::new();
    for c in 0..n_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        let (nt, nv) = (n_train / n_classes, n_val / n_classes);
        if members.len() < nt + nv {
            return Err(invalid(format!("class {c} has {} samples, {} requested", members.len(), nt + nv)));
        }
        members.shuffle(rng);
        train_idx.extend_from_slice(&members[..nt]);
        val_idx.extend_from_slice(&members[nt..nt + nv]);
    }
    train_idx.shuffle(rng);
    val_idx.shuffle(rng);
    let input_scale = Rescaler::fit(&x, INPUT_RANGE.0, INPUT_RANGE.1)?;
    let all = Split { inputs: input_scale.apply_all(&x), targets: Targets::Labels { labels, n_classes } };
    Ok(Dataset { train: all.subset(&train_idx), val: all.subset(&val_idx), test: all, input_scale, output_scale: None })
}

fn regression_from_rows(
    x: Vec<Vec<f64>>,
    t: Vec<f64>,
    n_train: usize,
    n_val: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Dataset> {
    if n_train + n_val > x.len() || n_train == 0 {
        return Err(invalid(format!("{} rows cannot supply {n_train} train and {n_val} val samples", x.len())));
    }
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.shuffle(rng);
    let input_scale = Rescaler::fit(&x, INPUT_RANGE.0, INPUT_RANGE.1)?;
    let rows: Vec<Vec<f64>> = t.iter().map(|&v| vec![v]).collect();
    let output_scale = Rescaler::fit(&rows, OUTPUT_RANGE.0, OUTPUT_RANGE.1)?;
    let all = Split { inputs: input_scale.apply_all(&x), targets: Targets::Values(output_scale.apply_all(&rows)) };
    let rest: Vec<usize> = idx[n_train + n_val..].to_vec();
    let test = if rest.is_empty() { all.clone() } else { all.subset(&rest) };
    Ok(Dataset {
        train: all.subset(&idx[..n_train]),
        val: all.subset(&idx[n_train..n_train + n_val]),
        test,
        input_scale,
        output_scale: Some(output_scale),
    })
}

/// Numeric CSV: every column but the last is a feature.
pub fn read_csv(path: &std::path::Path, has_header: bool) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let file = std::fs::File::open(path)?;
    let mut reader = csv::ReaderBuilder::new().has_headers(has_header).from_reader(file);
    let mut x = Vec::new();
    let mut t = Vec::new();
    let offset = usize::from(has_header) + 1;
    for (i, rec) in reader.records().enumerate() {
        let row = i + offset;
        let rec = rec.map_err(|e| QonnError::Dataset { row, message: e.to_string() })?;
        let vals = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|e| QonnError::Dataset { row, message: format!("{s:?}: {e}") }))
            .collect::<Result<Vec<f64>>>()?;
        if vals.len() < 2 {
            return Err(QonnError::Dataset { row, message: "need at least one feature and one target".into() });
        }
        if let Some(w) = x.first().map(Vec::len) {
            if vals.len() - 1 != w {
                return Err(QonnError::Dataset {
                    row,
                    message: format!("expected {} columns, found {}", w + 1, vals.len()),
                });
            }
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(QonnError::Dataset { row, message: "non-finite value".into() });
        }
        t.push(*vals.last().expect("non-empty row"));
        x.push(vals[..vals.len() - 1].to_vec());
    }
    if x.is_empty() {
        return Err(QonnError::Dataset { row: offset, message: "no data rows".into() });
    }
    Ok((x, t))
}

/// Input displacements for the synthesis task: midpoints of `samples`
/// equal cells of (−2, 2).
pub fn synthesis_alphas(samples: usize) -> Vec<f64> {
    (0..samples).map(|j| -2.0 + 4.0 * (j as f64 + 0.5) / samples as f64).collect()
}

fn synthesis_dataset(gamma: f64, samples: usize, cutoff: usize) -> Result<Dataset> {
    if samples == 0 {
        return Err(invalid("synthesis needs at least one sample"));
    }
    let alphas = synthesis_alphas(samples);
    let targets = cubic_phase_targets(gamma, &alphas, cutoff)?;
    let split = Split {
        inputs: alphas.iter().map(|&a| vec![a]).collect(),
        targets: Targets::Moments(targets.into_iter().map(|m| m.to_vec()).collect()),
    };
    Ok(Dataset {
        train: split.clone(),
        val: Split { inputs: vec![], targets: Targets::Moments(vec![]) },
        test: split,
        input_scale: Rescaler::identity(1),
        output_scale: None,
    })
}

// ---------------------------------------------------------------------------
// benchmark architectures

/// Single-layer curve fitter: `neurons` subtracted modes, readout on mode 0.
/// With zero neurons the network is purely Gaussian.
pub fn curve_architecture(neurons: usize, n_modes: usize) -> Result<QonnArchitecture> {
    if neurons > n_modes {
        return Err(invalid(format!("{neurons} neurons need at least as many modes")));
    }
    QonnArchitecture::quadratures(n_modes, vec![(0..neurons).collect()], vec![0])
}

/// Single-layer classifier with one output mode per class.
pub fn classifier_architecture(
    n_classes: usize,
    n_inputs: usize,
    subtractions: Vec<usize>,
) -> Result<QonnArchitecture> {
    let n = n_classes.max(n_inputs).max(subtractions.iter().map(|m| m + 1).max().unwrap_or(0));
    QonnArchitecture::quadratures(n, vec![subtractions], (0..n_classes).collect())
}

/// Single-layer moment synthesizer: every mode subtracted, moments of mode 0.
pub fn synthesis_architecture(neurons: usize) -> Result<QonnArchitecture> {
    if neurons == 0 {
        return Err(invalid("synthesis needs at least one neuron"));
    }
    QonnArchitecture::new(neurons, vec![(0..neurons).collect()], Readout::Moments(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activations::phi_subtraction;

    struct Quadratic(usize);

    impl Objective for Quadratic {
        fn dim(&self) -> usize {
            self.0
        }
        fn loss<T: Real>(&self, p: &[T]) -> Result<T> {
            let mut acc = T::zero();
            for &v in p {
                acc += v * v;
            }
            Ok(acc)
        }
    }

    struct Rosenbrock;

    impl Objective for Rosenbrock {
        fn dim(&self) -> usize {
            2
        }
        fn loss<T: Real>(&self, p: &[T]) -> Result<T> {
            let one = T::one();
            let a = one - p[0];
            let b = p[1] - p[0] * p[0];
            Ok(a * a + T::from_f64(100.0) * b * b)
        }
    }

    #[test]
    fn mse_examples() {
        assert_eq!(loss_mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(loss_mse(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(loss_mse(&[3.0], &[1.0]).unwrap(), 4.0);
        assert!(loss_mse::<f64>(&[], &[]).is_err());
        assert!(loss_mse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn cross_entropy_examples() {
        let uniform =
            softmax_cross_entropy(&[vec![0.3, 0.3], vec![-1.0, -1.0]], &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!((uniform - 2f64.ln()).abs() < 1e-15);
        let sat = softmax_cross_entropy(&[vec![800.0, 0.0]], &[vec![1.0, 0.0]]).unwrap();
        assert!(sat.abs() < 1e-300 + 1e-15 && sat.is_finite());
        let e = std::f64::consts::E;
        let v = softmax_cross_entropy(&[vec![1.0, 0.0]], &[vec![1.0, 0.0]]).unwrap();
        assert!((v - (-(e / (e + 1.0)).ln())).abs() < 1e-15);
        assert!((v - 0.3133).abs() < 1e-4);
        let l = softmax_cross_entropy_labels(&[vec![1.0, 0.0]], &[0]).unwrap();
        assert_eq!(l, v);
    }

    #[test]
    fn moment_mse_examples() {
        let c = |re: f64, im: f64| C64::new(re, im);
        let t = vec![vec![c(1.0, 0.5), c(0.0, 1.0)], vec![c(2.0, 0.0), c(0.0, 0.0)]];
        assert_eq!(loss_moment_mse(&t, &t).unwrap(), 0.0);
        let mut p = t.clone();
        p[1][0] += c(1.0, 0.0);
        assert!((loss_moment_mse(&p, &t).unwrap() - 0.5).abs() < 1e-15);
        let mut q = t.clone();
        q[0][1] = c(0.0, -1.0);
        assert!((loss_moment_mse(&q, &t).unwrap() - 2.0).abs() < 1e-15);
        assert!(loss_moment_mse(&[vec![c(0.0, 0.0)]], &t[..1]).is_err());
    }

    #[test]
    fn quadratic_gradient() {
        let p = [0.3, -1.2, 2.5, 0.0, 7.0];
        let (f, g) = dual_gradient(&Quadratic(5), &p).unwrap();
        let fd = central_difference(&Quadratic(5), &p, 1e-6).unwrap();
        assert!((f - p.iter().map(|v| v * v).sum::<f64>()).abs() < 1e-14);
        for i in 0..5 {
            assert!((g[i] - 2.0 * p[i]).abs() < 1e-12);
            assert!((fd[i] - 2.0 * p[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn dual_gradient_spans_chunks() {
        let p: Vec<f64> = (0..37).map(|i| 0.1 * i as f64 - 1.0).collect();
        let (_, g) = dual_gradient(&Quadratic(37), &p).unwrap();
        for i in 0..37 {
            assert!((g[i] - 2.0 * p[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn phi_derivative_in_r() {
        let (alpha, r) = (1.0f64, 0.5f64);
        let arch = QonnArchitecture::quadratures(1, vec![vec![0]], vec![0]).unwrap();
        let qonn = Qonn::new(arch).unwrap();
        struct PhiOfR<'a>(&'a Qonn, f64);
        impl Objective for PhiOfR<'_> {
            fn dim(&self) -> usize {
                1
            }
            fn loss<T: Real>(&self, p: &[T]) -> Result<T> {
                let z = T::zero();
                let params = [z, p[0], z, z, z];
                let fw = self.0.prepare(&params)?.eval(&[self.1])?;
                Ok(fw.quadratures()[0])
            }
        }
        let obj = PhiOfR(&qonn, alpha);
        let (v, g) = dual_gradient(&obj, &[r]).unwrap();
        assert!((v - phi_subtraction(alpha, r)).abs() < 1e-10);

        // d/dr of √2 (e^r α + α e^{2r} sinh r / (α² e^{2r} + sinh² r))
        let (e2, sh, ch) = ((2.0 * r).exp(), r.sinh(), r.cosh());
        let num = alpha * e2 * sh;
        let den = alpha * alpha * e2 + sh * sh;
        let dnum = alpha * (2.0 * e2 * sh + e2 * ch);
        let dden = 2.0 * alpha * alpha * e2 + 2.0 * sh * ch;
        let exact = 2f64.sqrt() * (r.exp() * alpha + (dnum * den - num * dden) / (den * den));
        assert!((g[0] - exact).abs() < 1e-6, "{} vs {exact}", g[0]);
    }

    #[test]
    fn nonfinite_loss_reports_coordinate() {
        struct Blowup;
        impl Objective for Blowup {
            fn dim(&self) -> usize {
                3
            }
            fn loss<T: Real>(&self, p: &[T]) -> Result<T> {
                Ok(p[0] + T::one() / (p[2] - T::from_f64(1.0 + 1e-6)))
            }
        }
        let err = central_difference(&Blowup, &[0.0, 0.0, 1.0], 1e-6).unwrap_err();
        assert!(matches!(err, QonnError::NonFiniteLoss { coordinate: 2 }), "{err}");
    }

    #[test]
    fn lbfgs_minimizes_rosenbrock() {
        let opts = LbfgsOptions { max_iters: 2000, ftol: 0.0, pgtol: 1e-9, ..Default::default() };
        let out = minimize_lbfgs(&Rosenbrock, &[-1.2, 1.0], &opts, |_, _, _| {}).unwrap();
        assert!(out.converged, "{}", out.message);
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6, "{:?}", out.x);
    }

    #[test]
    fn lbfgs_respects_box() {
        struct Shifted;
        impl Objective for Shifted {
            fn dim(&self) -> usize {
                2
            }
            fn loss<T: Real>(&self, p: &[T]) -> Result<T> {
                let a = p[0] - T::from_f64(3.0);
                let b = p[1] + T::from_f64(0.5);
                Ok(a * a + b * b)
            }
            fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
                (vec![-1.0, -1.0], vec![1.0, 1.0])
            }
        }
        let out = minimize_lbfgs(&Shifted, &[0.0, 0.0], &LbfgsOptions::default(), |_, _, _| {}).unwrap();
        assert!((out.x[0] - 1.0).abs() < 1e-12);
        assert!((out.x[1] + 0.5).abs() < 1e-6);
    }

    #[test]
    fn datasets_are_reproducible() {
        let kinds = [
            DatasetKind::Curve {
                function: CurveFunction::Quintic,
                range: None,
                noise: None,
                train: 100,
                val: 50,
                test: 200,
            },
            DatasetKind::Moons { samples: 500, noise: 0.1, train: 100, val: 50 },
            DatasetKind::Circles { samples: 500, noise: 0.05, factor: 0.5, train: 100, val: 50 },
        ];
        for k in &kinds {
            assert_eq!(make_dataset(k, 9).unwrap(), make_dataset(k, 9).unwrap());
            assert_ne!(make_dataset(k, 9).unwrap(), make_dataset(k, 10).unwrap());
        }
    }

    #[test]
    fn curve_split_sizes_and_grid() {
        let k = DatasetKind::Curve {
            function: CurveFunction::Quintic,
            range: None,
            noise: None,
            train: 100,
            val: 50,
            test: 200,
        };
        let d = make_dataset(&k, 1).unwrap();
        assert_eq!((d.train.len(), d.val.len(), d.test.len()), (100, 50, 200));
        assert!((d.test.inputs[0][0] + 3.0).abs() < 1e-12 && (d.test.inputs[199][0] - 3.0).abs() < 1e-12);
        let Targets::Values(v) = &d.val.targets else { panic!() };
        let scale = d.output_scale.as_ref().unwrap();
        for (x, y) in d.val.inputs.iter().zip(v) {
            let raw_x = d.input_scale.invert(x)[0];
            assert!((scale.invert(y)[0] - raw_x.powi(5)).abs() < 1e-9);
        }
    }

    #[test]
    fn circles_are_balanced_and_concentric() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (x, y) = make_circles(500, 0.0, 0.5, &mut rng).unwrap();
        assert_eq!(y.iter().filter(|&&l| l == 0).count(), 250);
        for (p, &l) in x.iter().zip(&y) {
            let rad = p[0].hypot(p[1]);
            assert!((rad - if l == 0 { 1.0 } else { 0.5 }).abs() < 1e-12);
        }
        let k = DatasetKind::Circles { samples: 500, noise: 0.05, factor: 0.5, train: 100, val: 50 };
        let d = make_dataset(&k, 2).unwrap();
        let Targets::Labels { labels, .. } = &d.train.targets else { panic!() };
        assert_eq!(labels.iter().filter(|&&l| l == 1).count(), 50);
        assert_eq!(d.test.len(), 500);
    }

    #[test]
    fn moons_match_reference_construction() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (x, y) = make_moons(4, 0.0, &mut rng).unwrap();
        let want = [[1.0, 0.0], [-1.0, 0.0], [0.0, 0.5], [2.0, 0.5]];
        for (p, w) in x.iter().zip(want) {
            assert!((p[0] - w[0]).abs() < 1e-12 && (p[1] - w[1]).abs() < 1e-12, "{p:?}");
        }
        assert_eq!(y, vec![0, 0, 1, 1]);
    }

    #[test]
    fn gaussian_model_fits_affine_data() {
        let k = DatasetKind::Curve {
            function: CurveFunction::Linear,
            range: None,
            noise: Some(0.0),
            train: 30,
            val: 20,
            test: 20,
        };
        let data = make_dataset(&k, 3).unwrap();
        let qonn = Qonn::new(curve_architecture(0, 1).unwrap()).unwrap();
        let cfg = TrainConfig { restarts: 2, ..Default::default() };
        let res = fit(&qonn, &data, &cfg).unwrap();
        assert!(res.val_loss.unwrap() < 1e-8, "{:?}", res.val_loss);
    }

    #[test]
    fn fit_is_deterministic() {
        let k = DatasetKind::Curve {
            function: CurveFunction::SinCos,
            range: None,
            noise: None,
            train: 20,
            val: 10,
            test: 10,
        };
        let data = make_dataset(&k, 5).unwrap();
        let qonn = Qonn::new(curve_architecture(1, 1).unwrap()).unwrap();
        let cfg = TrainConfig { restarts: 3, max_iters: 30, ..Default::default() };
        let a = fit(&qonn, &data, &cfg).unwrap();
        let b = fit(&qonn, &data, &cfg).unwrap();
        let losses =
            |r: &FitResult| r.trace.iter().map(|t| (t.restart, t.iter, t.train_loss, t.val_loss)).collect::<Vec<_>>();
        assert_eq!(losses(&a), losses(&b));
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig { restarts: 0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { fd_step: 1e-3, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { r_bound: 2.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig::default().validate().is_ok());
        let bad: std::result::Result<TrainConfig, _> = serde_json::from_str(r#"{"restart": 3}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn csv_errors_carry_row() {
        let dir = std::env::temp_dir().join(format!("qonn-csv-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("bad.csv");
        std::fs::write(&p, "a,b,label\n0.1,0.2,0\n0.3,x,1\n").unwrap();
        match read_csv(&p, true) {
            Err(QonnError::Dataset { row, .. }) => assert_eq!(row, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(read_csv(&dir.join("missing.csv"), true), Err(QonnError::Io(_))));
        std::fs::remove_dir_all(&dir).ok();
    }
}
