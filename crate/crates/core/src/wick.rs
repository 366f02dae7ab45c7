//! Wick–Isserlis evaluation of ordered ladder monomials on Gaussian states.
//!
//! With non-zero means the moment of an ordered string splits into a sum
//! over loop perfect matchings: unmatched positions contribute a mean, and
//! each pair `(i, j)` with `i < j` contributes the centred contraction
//! `⟨δp_i δp_j⟩` with the operators in their original order.

use num_complex::Complex;
use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::error::{QonnError, Result};
use crate::gaussian::GaussianState;
use crate::ladder::{ExpectationPlan, LadderMonomial, LadderOp, PlanCoefficients, PlanExpression, PRUNE_TOL};
use crate::scalar::{cr, cvalue, Real};

pub const DEFAULT_MATCHING_CAP: usize = 16;

/// Norm below which a heralded state is considered unphysical.
pub const NORM_THRESHOLD: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoopPerfectMatching {
    pub singles: Vec<usize>,
    pub pairs: Vec<(usize, usize)>,
}

/// All loop perfect matchings of a sequence of length `len`.
///
/// Stored as partner arrays: entry `i` is `i` itself for a self-loop and
/// the partner position otherwise.
#[derive(Clone, Debug)]
pub struct MatchingSet {
    len: usize,
    partners: Vec<u8>,
}

impl MatchingSet {
    pub fn seq_len(&self) -> usize {
        self.len
    }

    /// Number of matchings.
    pub fn len(&self) -> usize {
        self.partners.len().checked_div(self.len).unwrap_or(1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn partner_rows(&self) -> impl Iterator<Item = &[u8]> {
        // zero-length sequences have exactly one (empty) matching
        let n = self.len();
        (0..n).map(move |k| &self.partners[k * self.len..(k + 1) * self.len])
    }

    pub fn matchings(&self) -> impl Iterator<Item = LoopPerfectMatching> + '_ {
        self.partner_rows().map(|row| {
            let mut singles = Vec::new();
            let mut pairs = Vec::new();
            for (i, &p) in row.iter().enumerate() {
                let p = p as usize;
                if p == i {
                    singles.push(i);
                } else if p > i {
                    pairs.push((i, p));
                }
            }
            LoopPerfectMatching { singles, pairs }
        })
    }
}

/// Closed-form count `Σ_k M! / (2^k k! (M-2k)!)` (telephone numbers).
pub fn matching_count(m: usize) -> u128 {
    // T(m) = T(m-1) + (m-1) T(m-2)
    let (mut a, mut b) = (1u128, 1u128);
    for k in 2..=m {
        let c = b.saturating_add((k as u128 - 1).saturating_mul(a));
        a = b;
        b = c;
    }
    b
}

pub fn enumerate_matchings(m: usize) -> Result<MatchingSet> {
    enumerate_matchings_capped(m, DEFAULT_MATCHING_CAP)
}

pub fn enumerate_matchings_capped(m: usize, cap: usize) -> Result<MatchingSet> {
    if m > cap || m > u8::MAX as usize {
        return Err(QonnError::ResourceLimit { length: m, cap, predicted: matching_count(m) });
    }
    let mut partners = Vec::with_capacity(matching_count(m) as usize * m);
    let mut cur = vec![u8::MAX; m];
    fn rec(cur: &mut [u8], out: &mut Vec<u8>) {
        let Some(i) = cur.iter().position(|&p| p == u8::MAX) else {
            out.extend_from_slice(cur);
            return;
        };
        cur[i] = i as u8;
        rec(cur, out);
        for j in i + 1..cur.len() {
            if cur[j] == u8::MAX {
                cur[i] = j as u8;
                cur[j] = i as u8;
                rec(cur, out);
                cur[j] = u8::MAX;
            }
        }
        cur[i] = u8::MAX;
    }
    rec(&mut cur, &mut partners);
    Ok(MatchingSet { len: m, partners })
}

/// Centred contraction `⟨δp1 δp2⟩` with `p1` to the left of `p2`.
#[inline]
pub fn pair_value<T: Real>(p1: LadderOp, p2: LadderOp, state: &GaussianState<T>) -> Complex<T> {
    let n = state.n_modes();
    state.cov()[(p1.ladder_index(n), p2.adjoint().ladder_index(n))]
}

#[inline]
pub fn mean_value<T: Real>(op: LadderOp, state: &GaussianState<T>) -> Complex<T> {
    state.means()[op.ladder_index(state.n_modes())]
}

/// `Tr[ops · ρ]` summed over the given matchings (without a coefficient).
pub fn evaluate_ops<T: Real>(ops: &[LadderOp], state: &GaussianState<T>, matchings: &MatchingSet) -> Complex<T> {
    let m = ops.len();
    debug_assert_eq!(m, matchings.seq_len());
    if m == 0 {
        return Complex::one();
    }
    let means: Vec<Complex<T>> = ops.iter().map(|&op| mean_value(op, state)).collect();
    let mut pairs = vec![Complex::zero(); m * m];
    for i in 0..m {
        for j in i + 1..m {
            pairs[i * m + j] = pair_value(ops[i], ops[j], state);
        }
    }
    let mut total = Complex::zero();
    for row in matchings.partner_rows() {
        let mut prod: Complex<T> = Complex::one();
        for (i, &p) in row.iter().enumerate() {
            let p = p as usize;
            if p == i {
                prod *= means[i];
            } else if p > i {
                prod *= pairs[i * m + p];
            }
        }
        total += prod;
    }
    total
}

/// Exact expectation of a single monomial on a Gaussian state.
pub fn evaluate_monomial<T: Real>(mono: &LadderMonomial<T>, state: &GaussianState<T>) -> Result<Complex<T>> {
    let n = state.n_modes();
    if let Some(op) = mono.ops.iter().find(|op| op.mode >= n) {
        return Err(crate::error::invalid(format!("operator {op} acts outside {n} modes")));
    }
    let set = enumerate_matchings(mono.ops.len())?;
    Ok(mono.coeff * evaluate_ops(&mono.ops, state, &set))
}

/// How term contributions are summed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Reduction {
    /// Terms evaluated in parallel, summed in plan order: bit-stable.
    #[default]
    Deterministic,
    /// Work-stealing tree reduction; order may vary between runs.
    Parallel,
    /// Single-threaded, plan order.
    Sequential,
}

const PAR_MIN_TERMS: usize = 64;

fn evaluate_expression<T: Real>(
    plan: &ExpectationPlan,
    expr: &PlanExpression,
    coeffs: &PlanCoefficients<T>,
    state: &GaussianState<T>,
    reduction: Reduction,
) -> Complex<T> {
    let term_value = |t: &crate::ladder::PlanTerm| -> Complex<T> {
        let c = coeffs.term_coeff(t);
        if cvalue(c).norm() < PRUNE_TOL {
            return Complex::zero();
        }
        c * evaluate_ops(&t.ops, state, plan.matchings(t.ops.len()))
    };
    let terms = &expr.terms;
    match reduction {
        Reduction::Parallel if terms.len() >= PAR_MIN_TERMS => {
            terms.par_iter().map(term_value).reduce(Complex::zero, |a, b| a + b)
        }
        Reduction::Deterministic if terms.len() >= PAR_MIN_TERMS => {
            let vals: Vec<Complex<T>> = terms.par_iter().map(term_value).collect();
            vals.into_iter().fold(Complex::zero(), |a, b| a + b)
        }
        _ => terms.iter().map(term_value).fold(Complex::zero(), |a, b| a + b),
    }
}

#[derive(Clone, Debug)]
pub struct PlanEvaluation<T: Real = f64> {
    /// Unnormalised `⟨ψ|O_j|ψ⟩` for every observable.
    pub numerators: Vec<Complex<T>>,
    /// `⟨ψ|ψ⟩`, proportional to the herald success weight.
    pub norm: T,
}

impl<T: Real> PlanEvaluation<T> {
    /// Normalised observable expectations.
    pub fn expectations(&self) -> Vec<Complex<T>> {
        self.numerators.iter().map(|z| *z / cr(self.norm)).collect()
    }

    /// Homodyne readouts `√2 Re⟨O_j⟩ / norm`, meaningful when each
    /// observable is a single annihilator.
    pub fn x_outputs(&self) -> Vec<T> {
        let s = T::from_f64(std::f64::consts::SQRT_2);
        self.numerators.iter().map(|z| s * z.re / self.norm).collect()
    }
}

/// Evaluate every numerator and the shared denominator of a plan.
pub fn evaluate_plan<T: Real>(
    plan: &ExpectationPlan,
    coeffs: &PlanCoefficients<T>,
    state: &GaussianState<T>,
    reduction: Reduction,
) -> Result<PlanEvaluation<T>> {
    if state.n_modes() != plan.n_modes() {
        return Err(crate::error::invalid(format!(
            "plan compiled for {} modes, state has {}",
            plan.n_modes(),
            state.n_modes()
        )));
    }
    let den = evaluate_expression(plan, plan.denominator(), coeffs, state, reduction);
    let norm = den.re;
    if !(norm.value() >= NORM_THRESHOLD) {
        return Err(QonnError::DegenerateState { norm: norm.value(), threshold: NORM_THRESHOLD });
    }
    let numerators = plan.numerators().iter().map(|e| evaluate_expression(plan, e, coeffs, state, reduction)).collect();
    Ok(PlanEvaluation { numerators, norm })
}
