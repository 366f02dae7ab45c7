//! Closed-form activation functions of subtraction and addition layers.
//!
//! All functions here are exact expressions for single-layer networks with
//! real inputs and squeezing phase 0. They serve both as documentation of
//! the nonlinearity and as independent checks of the generic engine.

use std::f64::consts::SQRT_2;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, QonnError, Result};
use crate::gaussian::GaussianState;
use crate::ladder::{adjoint_ops, LadderMonomial, LadderOp};
use crate::wick::{evaluate_monomial, NORM_THRESHOLD};

pub const DEFAULT_EPSILON: f64 = 0.1;

/// `⟨x⟩` after one photon subtraction on `S(r) D(α) |0⟩`:
/// `√2 (e^r α + α e^{2r} sinh r / (α² e^{2r} + sinh² r))`.
///
/// At `(α, r) = (0, 0)` the value is the continuous limit 0; the herald
/// never fires there since the vacuum has no photon to lose.
pub fn phi_subtraction(alpha: f64, r: f64) -> f64 {
    let linear = r.exp() * alpha;
    SQRT_2 * (linear + subtraction_bump(alpha, r))
}

fn subtraction_bump(alpha: f64, r: f64) -> f64 {
    let e2r = (2.0 * r).exp();
    let sh = r.sinh();
    let den = alpha * alpha * e2r + sh * sh;
    if den == 0.0 {
        return 0.0;
    }
    alpha * e2r * sh / den
}

/// Relative size `|R_r(α) / L_r(α)| = e^r |sinh r| / (α² e^{2r} + sinh² r)`.
pub fn tau(alpha: f64, r: f64) -> f64 {
    let sh = r.sinh();
    let den = alpha * alpha * (2.0 * r).exp() + sh * sh;
    if den == 0.0 {
        return 0.0;
    }
    r.exp() * sh.abs() / den
}

/// Half-width of the input interval on which `tau >= eps`.
pub fn alpha_max(r: f64, eps: f64) -> Result<f64> {
    if r == 0.0 {
        return Err(QonnError::LinearActivation);
    }
    let tau0 = tau(0.0, r);
    if !(eps > 0.0 && eps < tau0) {
        return Err(QonnError::NoNonlinearRange { eps, tau0 });
    }
    let sh = r.sinh();
    Ok((-r).exp() * (r.exp() * sh.abs() / eps - sh * sh).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonlinearityReport {
    pub alpha: f64,
    pub r: f64,
    pub eps: f64,
    /// `√2 e^r α`
    pub linear_part: f64,
    /// `√2 R_r(α)`
    pub bump: f64,
    pub tau: f64,
    pub alpha_max: f64,
}

pub fn nonlinearity_report(alpha: f64, r: f64, eps: f64) -> Result<NonlinearityReport> {
    let am = alpha_max(r, eps)?;
    Ok(NonlinearityReport {
        alpha,
        r,
        eps,
        linear_part: SQRT_2 * r.exp() * alpha,
        bump: SQRT_2 * subtraction_bump(alpha, r),
        tau: tau(alpha, r),
        alpha_max: am,
    })
}

/// `⟨x⟩` after `n` photon additions on a real coherent state `|α⟩`.
pub fn phi_addition_n(alpha: f64, n: u32) -> Result<f64> {
    if n == 0 {
        return Err(invalid("photon addition count must be at least 1"));
    }
    let fact = |k: u32| (1..=k).map(f64::from).product::<f64>();
    let a2 = alpha * alpha;
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..=n {
        let w = a2.powi(k as i32) / (fact(n - k) * fact(k).powi(2));
        num += w / f64::from(k + 1);
        den += w;
    }
    Ok(SQRT_2 * alpha * f64::from(n + 1) * num / den)
}

/// `⟨x⟩` after one photon addition on `S(r) D(α) |0⟩`.
pub fn phi_addition_squeezed(alpha: f64, r: f64) -> f64 {
    let er = r.exp();
    let bump = er * alpha * (1.0 + er * r.sinh()) / (alpha * alpha * er * er + r.cosh().powi(2));
    SQRT_2 * (er * alpha + bump)
}

/// Closed-form readout after subtracting one photon in each of modes `p`
/// and `q`, split into its Wick groups.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TwoSubtractionReadout {
    pub x: f64,
    pub numerator: Complex64,
    pub denominator: f64,
    /// `b̄_j · D` (10 terms)
    pub mean_part: Complex64,
    /// `δa_j` paired, three means (4 terms)
    pub s2: Complex64,
    /// `δa_j` paired, one more pair, one mean (12 terms)
    pub s4: Complex64,
}

/// `⟨x_j⟩` of `a_p a_q |G⟩` normalised, from the means and covariance alone.
pub fn x_readout_two_subtractions(
    state: &GaussianState,
    p: usize,
    q: usize,
    j: usize,
) -> Result<TwoSubtractionReadout> {
    let n = state.n_modes();
    if p >= n || q >= n || j >= n {
        return Err(invalid(format!("modes ({p}, {q}, {j}) out of range for {n} modes")));
    }
    let cov = state.cov();
    // centred contractions in operator order
    let nn = |r: usize, s: usize| cov[(n + r, n + s)]; // ⟨δa_r† δa_s⟩
    let mm = |r: usize, s: usize| cov[(r, n + s)]; // ⟨δa_r δa_s⟩
    let dd = |r: usize, s: usize| cov[(n + r, s)]; // ⟨δa_r† δa_s†⟩
    let b = |k: usize| state.mean(k);
    let (bp, bq, bj) = (b(p), b(q), b(j));
    let (bpc, bqc) = (bp.conj(), bq.conj());

    let d = bqc * bpc * bp * bq
        + dd(q, p) * bp * bq
        + nn(q, p) * bpc * bq
        + nn(q, q) * bpc * bp
        + nn(p, p) * bqc * bq
        + nn(p, q) * bqc * bp
        + mm(p, q) * bqc * bpc
        + dd(q, p) * mm(p, q)
        + nn(q, p) * nn(p, q)
        + nn(q, q) * nn(p, p);

    let s2 =
        nn(p, j) * bqc * bp * bq + nn(q, j) * bpc * bp * bq + mm(j, p) * bqc * bpc * bq + mm(j, q) * bqc * bpc * bp;

    let s4 = bqc * (nn(p, j) * mm(p, q) + mm(j, p) * nn(p, q) + mm(j, q) * nn(p, p))
        + bpc * (nn(q, j) * mm(p, q) + mm(j, p) * nn(q, q) + mm(j, q) * nn(q, p))
        + bp * (nn(q, j) * nn(p, q) + nn(p, j) * nn(q, q) + mm(j, q) * dd(q, p))
        + bq * (nn(q, j) * nn(p, p) + nn(p, j) * nn(q, p) + mm(j, p) * dd(q, p));

    let den = d.re;
    if !(den > NORM_THRESHOLD) {
        return Err(QonnError::DegenerateState { norm: den, threshold: NORM_THRESHOLD });
    }
    let mean_part = bj * d;
    let numerator = mean_part + s2 + s4;
    Ok(TwoSubtractionReadout { x: SQRT_2 * numerator.re / den, numerator, denominator: den, mean_part, s2, s4 })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HeraldingProbability {
    /// `(Π η_k) ⟨A_K^† A_K⟩`
    pub exact: f64,
    /// `Π η_k ⟨a_k^† a_k⟩`
    pub weak_tap: f64,
}

/// Success probability of heralded subtraction on every mode of `modes`.
pub fn heralding_probability(state: &GaussianState, modes: &[usize], eta: &[f64]) -> Result<HeraldingProbability> {
    if modes.is_empty() {
        return Err(invalid("subtraction set is empty"));
    }
    if modes.len() != eta.len() {
        return Err(invalid(format!("{} modes but {} reflectivities", modes.len(), eta.len())));
    }
    if let Some(e) = eta.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
        return Err(invalid(format!("reflectivity {e} outside (0, 1]")));
    }
    let n = state.n_modes();
    if let Some(k) = modes.iter().find(|&&k| k >= n) {
        return Err(invalid(format!("mode {k} out of range for {n} modes")));
    }
    let a: Vec<LadderOp> = modes.iter().map(|&k| LadderOp::annihilate(k)).collect();
    let mut ops = adjoint_ops(&a);
    ops.extend_from_slice(&a);
    let norm = evaluate_monomial(&LadderMonomial::new(Complex64::new(1.0, 0.0), ops), state)?.re;
    if norm < -1e-12 {
        return Err(QonnError::InternalConsistency(format!("negative herald norm {norm:e}")));
    }
    let eta_prod: f64 = eta.iter().product();
    let mut weak = eta_prod;
    for &k in modes {
        let single = vec![LadderOp::create(k), LadderOp::annihilate(k)];
        weak *= evaluate_monomial(&LadderMonomial::new(Complex64::new(1.0, 0.0), single), state)?.re;
    }
    Ok(HeraldingProbability { exact: eta_prod * norm.max(0.0), weak_tap: weak })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{bogoliubov_from_layer, GaussianLayerParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(n: usize, rng: &mut ChaCha8Rng) -> GaussianState {
        let flat: Vec<f64> = (0..GaussianLayerParams::<f64>::count(n)).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = bogoliubov_from_layer(&GaussianLayerParams::from_slice(&flat, n).unwrap()).unwrap();
        GaussianState::vacuum(n).unwrap().apply(&g).unwrap()
    }

    fn generic_readout(state: &GaussianState, p: usize, q: usize, j: usize) -> (Complex64, f64) {
        let (ap, aq, aj) = (LadderOp::annihilate(p), LadderOp::annihilate(q), LadderOp::annihilate(j));
        let one = Complex64::new(1.0, 0.0);
        let num =
            evaluate_monomial(&LadderMonomial::new(one, vec![aq.adjoint(), ap.adjoint(), aj, ap, aq]), state).unwrap();
        let den =
            evaluate_monomial(&LadderMonomial::new(one, vec![aq.adjoint(), ap.adjoint(), ap, aq]), state).unwrap();
        (num, den.re)
    }

    #[test]
    fn subtraction_basic_properties() {
        assert_eq!(phi_subtraction(0.0, 0.0), 0.0);
        for (a, r) in [(0.3, 0.7), (1.2, -0.4), (2.5, 1.7)] {
            assert!((phi_subtraction(-a, r) + phi_subtraction(a, r)).abs() < 1e-14);
        }
        assert!((phi_subtraction(1.3, 0.0) - SQRT_2 * 1.3).abs() < 1e-15);
        assert!((phi_subtraction(10.0, 1.0) - SQRT_2 * std::f64::consts::E * 10.0).abs() < 0.2);
    }

    #[test]
    fn alpha_max_is_consistent() {
        for r in [0.5, -0.5, 1.0, -1.0, 1.7, -1.7] {
            let tau0 = tau(0.0, r);
            if DEFAULT_EPSILON >= tau0 {
                assert!(matches!(alpha_max(r, DEFAULT_EPSILON), Err(QonnError::NoNonlinearRange { .. })));
                continue;
            }
            let am = alpha_max(r, DEFAULT_EPSILON).unwrap();
            assert!((tau(am, r) - DEFAULT_EPSILON).abs() < 1e-9);
        }
        assert!(matches!(alpha_max(0.0, 0.1), Err(QonnError::LinearActivation)));
        assert!(matches!(alpha_max(1.0, 5.0), Err(QonnError::NoNonlinearRange { .. })));
    }

    #[test]
    fn report_fields() {
        let rep = nonlinearity_report(0.7, 0.9, 0.1).unwrap();
        assert!((rep.tau - (rep.bump / rep.linear_part).abs()).abs() < 1e-14);
        assert!((rep.linear_part + rep.bump - phi_subtraction(0.7, 0.9)).abs() < 1e-14);
    }

    #[test]
    fn tau_limits() {
        for a in [0.0, 0.5, 1.0, 3.0] {
            assert!((tau(a, 8.0) - 2.0 / (1.0 + 4.0 * a * a)).abs() < 1e-3);
        }
        assert!(tau(1.0, -8.0) < 1e-6);
    }

    #[test]
    fn addition_forms() {
        for a in [-1.5, 0.2, 2.0] {
            let n1 = phi_addition_n(a, 1).unwrap();
            assert!((n1 - SQRT_2 * (a + a / (1.0 + a * a))).abs() < 1e-14);
            assert!((phi_addition_squeezed(a, 0.0) - n1).abs() < 1e-14);
            assert!((phi_addition_squeezed(-a, 0.4) + phi_addition_squeezed(a, 0.4)).abs() < 1e-14);
        }
        assert_eq!(phi_addition_n(0.0, 3).unwrap(), 0.0);
        assert!(phi_addition_n(1.0, 0).is_err());
    }

    #[test]
    fn two_subtraction_matches_generic() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let st = random_state(3, &mut rng);
            for (p, q, j) in [(0, 1, 2), (0, 1, 0), (1, 1, 2), (2, 2, 2), (0, 2, 1)] {
                let cf = x_readout_two_subtractions(&st, p, q, j).unwrap();
                let (num, den) = generic_readout(&st, p, q, j);
                assert!((cf.numerator - num).norm() < 1e-10, "{p}{q}{j}");
                assert!((cf.denominator - den).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn two_subtraction_uncorrelated_denominator() {
        // product of two independent single-mode squeezed coherent states
        let st = {
            let p = GaussianLayerParams {
                u1: vec![0.0; 4],
                r: vec![0.4, -0.7],
                u2: vec![0.0; 4],
                delta: vec![Complex64::new(0.5, 0.2), Complex64::new(-0.3, 0.9)],
            };
            GaussianState::vacuum(2).unwrap().apply(&bogoliubov_from_layer(&p).unwrap()).unwrap()
        };
        let cf = x_readout_two_subtractions(&st, 0, 1, 0).unwrap();
        let single = |k: usize| st.mean(k).norm_sqr() + st.cov()[(2 + k, 2 + k)].re;
        assert!((cf.denominator - single(0) * single(1)).abs() < 1e-12);
    }

    #[test]
    fn two_subtraction_zero_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let flat: Vec<f64> = (0..GaussianLayerParams::<f64>::count(3)).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut p = GaussianLayerParams::from_slice(&flat, 3).unwrap();
        p.delta = vec![Complex64::new(0.0, 0.0); 3];
        let st = GaussianState::vacuum(3).unwrap().apply(&bogoliubov_from_layer(&p).unwrap()).unwrap();
        let cf = x_readout_two_subtractions(&st, 0, 1, 2).unwrap();
        assert_eq!(cf.s2, Complex64::new(0.0, 0.0));
        assert_eq!(cf.mean_part, Complex64::new(0.0, 0.0));
        assert!(cf.s4.norm() < 1e-14, "zero-mean odd moment");
    }

    #[test]
    fn heralding() {
        let c = GaussianState::vacuum(1).unwrap().load_inputs(&[1.5]).unwrap();
        let h = heralding_probability(&c, &[0], &[0.05]).unwrap();
        assert!((h.exact - 0.05 * 2.25).abs() < 1e-14);
        assert!((h.weak_tap - h.exact).abs() < 1e-14);

        let v = GaussianState::vacuum(2).unwrap();
        assert_eq!(heralding_probability(&v, &[0, 1], &[0.1, 0.1]).unwrap().exact, 0.0);

        let two = GaussianState::vacuum(2).unwrap().load_inputs(&[0.7, -1.1]).unwrap();
        let h2 = heralding_probability(&two, &[0, 1], &[0.1, 0.2]).unwrap();
        let h0 = heralding_probability(&two, &[0], &[0.1]).unwrap();
        let h1 = heralding_probability(&two, &[1], &[0.2]).unwrap();
        assert!((h2.exact - h0.exact * h1.exact).abs() < 1e-14);

        assert!(heralding_probability(&v, &[], &[]).is_err());
        assert!(heralding_probability(&v, &[0], &[0.0]).is_err());
    }
}
