//! Network architectures, parameter layout and the forward pass.

use num_complex::Complex;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fock::moment_set;
use crate::gaussian::{bogoliubov_from_layer, GaussianLayerParams, GaussianOp, GaussianState, SQUEEZING_BOUND};
use crate::ladder::{ExpectationPlan, LadderOp, LayerOps, PlanCoefficients, PlanStats};
use crate::matrix::CMat;
use crate::scalar::{cr, Real};
use crate::wick::{evaluate_plan, Reduction};

/// What the network reports for every input.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    /// Homodyne `⟨x_j⟩` on each listed mode.
    Quadratures(Vec<usize>),
    /// Order-4 moment set `{a, a², N, a³, a² a^†, N²}` of one mode.
    Moments(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QonnArchitecture {
    pub n_modes: usize,
    /// Subtracted modes of each layer, in application order.
    pub subtractions: Vec<Vec<usize>>,
    pub readout: Readout,
}

impl QonnArchitecture {
    pub fn new(n_modes: usize, subtractions: Vec<Vec<usize>>, readout: Readout) -> Result<Self> {
        let arch = QonnArchitecture { n_modes, subtractions, readout };
        arch.validate()?;
        Ok(arch)
    }

    pub fn quadratures(n_modes: usize, subtractions: Vec<Vec<usize>>, outputs: Vec<usize>) -> Result<Self> {
        Self::new(n_modes, subtractions, Readout::Quadratures(outputs))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_modes == 0 {
            return Err(invalid("architecture has no modes"));
        }
        if self.subtractions.is_empty() {
            return Err(invalid("architecture has no layers"));
        }
        let n = self.n_modes;
        for (l, k) in self.subtractions.iter().enumerate() {
            if let Some(m) = k.iter().find(|&&m| m >= n) {
                return Err(invalid(format!("layer {l} subtracts mode {m} of a {n}-mode network")));
            }
        }
        match &self.readout {
            Readout::Quadratures(outs) => {
                if outs.is_empty() {
                    return Err(invalid("no output modes"));
                }
                if let Some(m) = outs.iter().find(|&&m| m >= n) {
                    return Err(invalid(format!("output mode {m} of a {n}-mode network")));
                }
            }
            Readout::Moments(m) if *m >= n => return Err(invalid(format!("moment mode {m} of a {n}-mode network"))),
            Readout::Moments(_) => {}
        }
        Ok(())
    }

    pub fn n_layers(&self) -> usize {
        self.subtractions.len()
    }

    pub fn param_count(&self) -> usize {
        param_count(self.n_modes, self.n_layers())
    }

    pub fn observables(&self) -> Vec<Vec<LadderOp>> {
        match &self.readout {
            Readout::Quadratures(outs) => outs.iter().map(|&j| vec![LadderOp::annihilate(j)]).collect(),
            Readout::Moments(m) => moment_set(*m),
        }
    }

    pub fn n_outputs(&self) -> usize {
        self.observables().len()
    }

    fn layer_ops(&self) -> Vec<LayerOps> {
        self.subtractions.iter().map(|k| LayerOps::subtractions(k)).collect()
    }
}

/// `L (2N² + 3N)`.
pub fn param_count(n: usize, layers: usize) -> usize {
    crate::gaussian::param_count(n, layers)
}

/// Flat positions of every squeezing parameter.
pub fn squeezing_indices(n: usize, layers: usize) -> Vec<usize> {
    let per = GaussianLayerParams::<f64>::count(n);
    (0..layers).flat_map(|l| (0..n).map(move |k| l * per + n * n + k)).collect()
}

/// Box bounds: squeezing in `[-1.7, 1.7]`, everything else free.
pub fn param_bounds(n: usize, layers: usize) -> (Vec<f64>, Vec<f64>) {
    let len = param_count(n, layers);
    let mut lo = vec![f64::NEG_INFINITY; len];
    let mut hi = vec![f64::INFINITY; len];
    for i in squeezing_indices(n, layers) {
        lo[i] = -SQUEEZING_BOUND;
        hi[i] = SQUEEZING_BOUND;
    }
    (lo, hi)
}

pub fn clamp_squeezing(params: &mut [f64], n: usize, layers: usize) {
    for i in squeezing_indices(n, layers) {
        params[i] = params[i].clamp(-SQUEEZING_BOUND, SQUEEZING_BOUND);
    }
}

/// Uniform `[-0.5, 0.5]` start, squeezing uniform `[-1, 1]`.
pub fn init_params(n: usize, layers: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut p: Vec<f64> = (0..param_count(n, layers)).map(|_| rng.random_range(-0.5..=0.5)).collect();
    for i in squeezing_indices(n, layers) {
        p[i] = rng.random_range(-1.0..=1.0);
    }
    p
}

/// A compiled network.
#[derive(Clone, Debug)]
pub struct Qonn {
    arch: QonnArchitecture,
    plan: ExpectationPlan,
}

impl Qonn {
    pub fn new(arch: QonnArchitecture) -> Result<Self> {
        arch.validate()?;
        let plan = ExpectationPlan::compile(arch.n_modes, &arch.layer_ops(), arch.observables())?;
        Ok(Qonn { arch, plan })
    }

    pub fn architecture(&self) -> &QonnArchitecture {
        &self.arch
    }

    pub fn plan(&self) -> &ExpectationPlan {
        &self.plan
    }

    pub fn plan_stats(&self) -> PlanStats {
        self.plan.stats()
    }

    pub fn layer_ops<T: Real>(&self, params: &[T]) -> Result<Vec<GaussianOp<T>>> {
        let n = self.arch.n_modes;
        if params.len() != self.arch.param_count() {
            return Err(invalid(format!("expected {} parameters, got {}", self.arch.param_count(), params.len())));
        }
        params
            .chunks_exact(GaussianLayerParams::<T>::count(n))
            .map(|c| bogoliubov_from_layer(&GaussianLayerParams::from_slice(c, n)?))
            .collect()
    }

    /// Everything that depends only on the parameters: the merged Gaussian,
    /// its covariance and the conjugation weights.
    pub fn prepare<T: Real>(&self, params: &[T]) -> Result<Prepared<'_, T>> {
        let ops = self.layer_ops(params)?;
        let n = self.arch.n_modes;
        let mut total = GaussianOp::identity(n);
        for g in &ops {
            total = g.after(&total);
        }
        let coeffs = self.plan.coefficients(&ops)?;
        let base = GaussianState::vacuum(n)?.apply(&total)?;
        Ok(Prepared { qonn: self, b: total.bogoliubov.assemble(), base, coeffs, reduction: Reduction::Sequential })
    }

    pub fn forward(&self, params: &[f64], alpha: &[f64]) -> Result<Forward<f64>> {
        self.prepare(params)?.eval(alpha)
    }

    pub fn forward_batch(&self, params: &[f64], inputs: &[Vec<f64>]) -> Result<Vec<Forward<f64>>> {
        self.prepare(params)?.eval_batch(inputs)
    }
}

pub struct Prepared<'a, T: Real> {
    qonn: &'a Qonn,
    b: CMat<T>,
    base: GaussianState<T>,
    coeffs: PlanCoefficients<T>,
    reduction: Reduction,
}

impl<T: Real> Prepared<'_, T> {
    pub fn with_reduction(mut self, reduction: Reduction) -> Self {
        self.reduction = reduction;
        self
    }

    /// Pre-subtraction Gaussian state `G_tot |α⟩`.
    pub fn state(&self, alpha: &[f64]) -> Result<GaussianState<T>> {
        let n = self.qonn.arch.n_modes;
        if alpha.len() > n {
            return Err(invalid(format!("{} inputs do not fit into {n} modes", alpha.len())));
        }
        let mut input = vec![Complex::new(T::zero(), T::zero()); 2 * n];
        for (k, &a) in alpha.iter().enumerate() {
            input[k] = cr(T::from_f64(a));
            input[n + k] = input[k];
        }
        let shift = self.b.mul_vec(&input);
        let means = self.base.means().iter().zip(shift).map(|(m, s)| *m + s).collect();
        GaussianState::from_moments(means, self.base.cov().clone())
    }

    pub fn eval(&self, alpha: &[f64]) -> Result<Forward<T>> {
        let st = self.state(alpha)?;
        let ev = evaluate_plan(&self.qonn.plan, &self.coeffs, &st, self.reduction)?;
        Ok(Forward { expectations: ev.expectations(), norm: ev.norm })
    }

    /// Parallel over inputs; results keep input order.
    pub fn eval_batch(&self, inputs: &[Vec<f64>]) -> Result<Vec<Forward<T>>> {
        inputs.par_iter().map(|a| self.eval(a)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct Forward<T: Real = f64> {
    /// Normalised expectation of each observable.
    pub expectations: Vec<Complex<T>>,
    /// `⟨Â^† Â⟩` on the pre-subtraction state.
    pub norm: T,
}

impl<T: Real> Forward<T> {
    /// `⟨x_j⟩ = √2 Re⟨a_j⟩` for quadrature readouts.
    pub fn quadratures(&self) -> Vec<T> {
        let s = T::from_f64(std::f64::consts::SQRT_2);
        self.expectations.iter().map(|z| s * z.re).collect()
    }
}

/// One layer of a general network: a Gaussian followed by an ordered
/// product of ladder operators (creators allowed).
#[derive(Clone, Debug)]
pub struct NetworkLayer {
    pub params: GaussianLayerParams<f64>,
    pub ops: LayerOps,
}

/// Normalised expectations of arbitrary operator strings on a general
/// network output, with the state norm `⟨ψ|ψ⟩`.
pub fn evaluate_network(
    n_modes: usize,
    layers: &[NetworkLayer],
    alpha: &[f64],
    observables: Vec<Vec<LadderOp>>,
) -> Result<(Vec<Complex<f64>>, f64)> {
    let layer_ops: Vec<LayerOps> = layers.iter().map(|l| l.ops.clone()).collect();
    let plan = ExpectationPlan::compile(n_modes, &layer_ops, observables)?;
    let gs = layers.iter().map(|l| bogoliubov_from_layer(&l.params)).collect::<Result<Vec<_>>>()?;
    let mut total = GaussianOp::identity(n_modes);
    for g in &gs {
        total = g.after(&total);
    }
    let st = GaussianState::vacuum(n_modes)?.load_inputs(alpha)?.apply(&total)?;
    let ev = evaluate_plan(&plan, &plan.coefficients(&gs)?, &st, Reduction::Deterministic)?;
    Ok((ev.expectations(), ev.norm))
}

/// Per-feature affine map of `[min, max]` onto `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rescaler {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
}

pub const INPUT_RANGE: (f64, f64) = (-3.0, 3.0);
pub const OUTPUT_RANGE: (f64, f64) = (1.0, 5.0);

impl Rescaler {
    pub fn fit(rows: &[Vec<f64>], lo: f64, hi: f64) -> Result<Self> {
        let first = rows.first().ok_or_else(|| invalid("cannot fit a rescaler on no data"))?;
        let dim = first.len();
        let mut mins = vec![f64::INFINITY; dim];
        let mut maxs = vec![f64::NEG_INFINITY; dim];
        for r in rows {
            if r.len() != dim {
                return Err(invalid("ragged rows"));
            }
            for (k, &v) in r.iter().enumerate() {
                mins[k] = mins[k].min(v);
                maxs[k] = maxs[k].max(v);
            }
        }
        Ok(Rescaler { mins, maxs, lo, hi })
    }

    pub fn identity(dim: usize) -> Self {
        Rescaler { mins: vec![0.0; dim], maxs: vec![1.0; dim], lo: 0.0, hi: 1.0 }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(k, &v)| {
                let span = self.maxs[k] - self.mins[k];
                if span == 0.0 {
                    0.5 * (self.lo + self.hi)
                } else {
                    self.lo + (v - self.mins[k]) / span * (self.hi - self.lo)
                }
            })
            .collect()
    }

    pub fn invert(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(k, &v)| self.mins[k] + (v - self.lo) / (self.hi - self.lo) * (self.maxs[k] - self.mins[k]))
            .collect()
    }

    pub fn apply_all(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.apply(r)).collect()
    }
}
