//! Truncated Fock-space simulator for one or two modes.
//!
//! This is a brute-force reference: gates are exponentials of truncated
//! generators and ladder operators act as truncated matrices. It is used to
//! validate the exact engine and to produce gate-synthesis targets.
//!
//! Gate conventions match the engine: `D(α)^† a D(α) = a + α`,
//! `S(r)^† a S(r) = a cosh r + a^† sinh r`, and a passive unitary `P(W)`
//! satisfies `P^† a P = W a`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, QonnError, Result};
use crate::gaussian::{unitary_from_params, GaussianLayerParams};
use crate::ladder::LadderOp;
use crate::matrix::CMat;

pub const DEFAULT_LEAKAGE_THRESHOLD: f64 = 1e-8;
pub const VALIDATION_CUTOFF: usize = 40;
pub const SYNTHESIS_CUTOFF: usize = 120;

const C0: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Debug)]
pub enum Gate {
    Displace {
        mode: usize,
        alpha: Complex64,
    },
    Squeeze {
        mode: usize,
        r: f64,
    },
    /// Passive linear optics on all modes, `P^† a P = W a`.
    Passive(CMat<f64>),
    /// `exp(i γ x³ / 3)` with `x = (a + a^†)/√2`.
    CubicPhase {
        mode: usize,
        gamma: f64,
    },
    Annihilate(usize),
    Create(usize),
}

#[derive(Clone, Debug)]
pub struct FockState {
    n_modes: usize,
    cutoff: usize,
    amps: Vec<Complex64>,
    herald_weight: f64,
    leakage_threshold: f64,
}

impl FockState {
    pub fn vacuum(n_modes: usize, cutoff: usize) -> Result<Self> {
        if !(1..=2).contains(&n_modes) {
            return Err(invalid(format!("the Fock oracle supports 1 or 2 modes, got {n_modes}")));
        }
        if cutoff < 2 {
            return Err(invalid("Fock cutoff must be at least 2"));
        }
        let mut amps = vec![C0; cutoff.pow(n_modes as u32)];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(FockState { n_modes, cutoff, amps, herald_weight: 1.0, leakage_threshold: DEFAULT_LEAKAGE_THRESHOLD })
    }

    /// Coherent product state with real amplitudes on the leading modes.
    pub fn coherent(n_modes: usize, cutoff: usize, alpha: &[f64]) -> Result<Self> {
        if alpha.len() > n_modes {
            return Err(invalid(format!("{} inputs do not fit into {n_modes} modes", alpha.len())));
        }
        let mut s = Self::vacuum(n_modes, cutoff)?;
        for (mode, &a) in alpha.iter().enumerate() {
            s = s.apply(&Gate::Displace { mode, alpha: Complex64::new(a, 0.0) })?;
        }
        Ok(s)
    }

    pub fn with_leakage_threshold(mut self, threshold: f64) -> Self {
        self.leakage_threshold = threshold;
        self
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// Product of the squared norms removed by renormalising after each
    /// ladder-operator application.
    pub fn herald_weight(&self) -> f64 {
        self.herald_weight
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    fn levels(&self, idx: usize) -> (usize, usize) {
        if self.n_modes == 1 {
            (idx, 0)
        } else {
            (idx / self.cutoff, idx % self.cutoff)
        }
    }

    fn index(&self, n0: usize, n1: usize) -> usize {
        if self.n_modes == 1 {
            n0
        } else {
            n0 * self.cutoff + n1
        }
    }

    /// Largest per-mode probability in the top tenth of levels.
    pub fn leakage(&self) -> f64 {
        let top = self.cutoff - self.cutoff.div_ceil(10);
        let norm = self.norm_sqr();
        let mut mass = [0.0f64; 2];
        for (i, z) in self.amps.iter().enumerate() {
            let (n0, n1) = self.levels(i);
            if n0 >= top {
                mass[0] += z.norm_sqr();
            }
            if self.n_modes == 2 && n1 >= top {
                mass[1] += z.norm_sqr();
            }
        }
        mass[0].max(mass[1]) / norm
    }

    fn check_leakage(self) -> Result<Self> {
        let leakage = self.leakage();
        if !(leakage <= self.leakage_threshold) {
            return Err(QonnError::CutoffTooSmall {
                cutoff: self.cutoff,
                leakage,
                threshold: self.leakage_threshold,
                suggested: self.cutoff + self.cutoff / 2,
            });
        }
        Ok(self)
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.n_modes {
            return Err(invalid(format!("mode {mode} out of range for {} modes", self.n_modes)));
        }
        Ok(())
    }

    pub fn apply(&self, gate: &Gate) -> Result<Self> {
        let d = self.cutoff;
        let out = match gate {
            Gate::Displace { mode, alpha } => {
                self.check_mode(*mode)?;
                let ad = creation(d);
                let gen = ad.scale(*alpha).sub(&ad.adjoint().scale(alpha.conj()));
                self.apply_single(*mode, &gen.expm())
            }
            Gate::Squeeze { mode, r } => {
                self.check_mode(*mode)?;
                let ad = creation(d);
                let a = ad.adjoint();
                let gen = ad.matmul(&ad).sub(&a.matmul(&a)).scale(Complex64::new(0.5 * r, 0.0));
                self.apply_single(*mode, &gen.expm())
            }
            Gate::CubicPhase { mode, gamma } => {
                self.check_mode(*mode)?;
                let ad = creation(d);
                let x = ad.add(&ad.adjoint()).scale(Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0));
                let x3 = x.matmul(&x).matmul(&x);
                self.apply_single(*mode, &x3.scale(Complex64::new(0.0, gamma / 3.0)).expm())
            }
            Gate::Passive(w) => self.apply_passive(w)?,
            Gate::Annihilate(mode) | Gate::Create(mode) => {
                self.check_mode(*mode)?;
                let op = LadderOp { mode: *mode, dagger: matches!(gate, Gate::Create(_)) };
                let mut out = self.clone();
                out.amps = self.ladder(op, &self.amps);
                let w = out.norm_sqr();
                if !(w > 0.0) {
                    return Err(QonnError::DegenerateState { norm: w, threshold: 0.0 });
                }
                let s = Complex64::new(1.0 / w.sqrt(), 0.0);
                out.amps.iter_mut().for_each(|z| *z *= s);
                out.herald_weight *= w;
                out
            }
        };
        out.check_leakage()
    }

    /// Apply the Gaussian layer `D(δ) P(U_2) S(r) P(U_1^†)`, whose
    /// Heisenberg action is `U_2 cosh R U_1^† a + U_2 sinh R U_1^T a^† + δ`.
    pub fn apply_layer(&self, p: &GaussianLayerParams<f64>) -> Result<Self> {
        let n = p.n_modes();
        if n != self.n_modes {
            return Err(invalid(format!("{n}-mode layer on a {}-mode state", self.n_modes)));
        }
        let u1 = unitary_from_params(&p.u1, n)?;
        let u2 = unitary_from_params(&p.u2, n)?;
        let mut s = self.apply(&Gate::Passive(u1.adjoint()))?;
        for (mode, &r) in p.r.iter().enumerate() {
            s = s.apply(&Gate::Squeeze { mode, r })?;
        }
        s = s.apply(&Gate::Passive(u2))?;
        for (mode, &alpha) in p.delta.iter().enumerate() {
            s = s.apply(&Gate::Displace { mode, alpha })?;
        }
        Ok(s)
    }

    fn apply_single(&self, mode: usize, u: &CMat<f64>) -> Self {
        let d = self.cutoff;
        let mut out = self.clone();
        if self.n_modes == 1 {
            out.amps = u.mul_vec(&self.amps);
            return out;
        }
        let mut buf = vec![C0; d];
        for other in 0..d {
            for (k, b) in buf.iter_mut().enumerate() {
                *b = if mode == 0 { self.amps[self.index(k, other)] } else { self.amps[self.index(other, k)] };
            }
            let res = u.mul_vec(&buf);
            for (k, v) in res.into_iter().enumerate() {
                let idx = if mode == 0 { self.index(k, other) } else { self.index(other, k) };
                out.amps[idx] = v;
            }
        }
        out
    }

    /// `exp(a^† M a)` with `M = log W`, applied per total-photon-number block.
    fn apply_passive(&self, w: &CMat<f64>) -> Result<Self> {
        let n = self.n_modes;
        if w.rows() != n || w.cols() != n {
            return Err(invalid(format!("passive matrix is {}x{} on {n} modes", w.rows(), w.cols())));
        }
        let res = w.adjoint().matmul(w).max_abs_diff(&CMat::identity(n));
        if res > 1e-10 {
            return Err(invalid(format!("passive matrix is not unitary (residual {res:e})")));
        }
        let m = log_unitary(w);
        let d = self.cutoff;
        let mut out = self.clone();
        if n == 1 {
            for (k, z) in out.amps.iter_mut().enumerate() {
                *z *= (m[(0, 0)] * k as f64).exp();
            }
            return Ok(out);
        }
        for total in 0..=2 * (d - 1) {
            let lo = total.saturating_sub(d - 1);
            let hi = total.min(d - 1);
            let dim = hi - lo + 1;
            // basis |k, total - k⟩ for k in lo..=hi
            let gen = CMat::from_fn(dim, dim, |i, j| {
                let (ki, kj) = (lo + i, lo + j);
                let nj = total - kj;
                if ki == kj {
                    m[(0, 0)] * kj as f64 + m[(1, 1)] * nj as f64
                } else if ki == kj + 1 {
                    // a_0^† a_1
                    m[(0, 1)] * ((kj + 1) as f64 * nj as f64).sqrt()
                } else if ki + 1 == kj {
                    // a_1^† a_0
                    m[(1, 0)] * (kj as f64 * (nj + 1) as f64).sqrt()
                } else {
                    C0
                }
            });
            let u = gen.expm();
            let v: Vec<Complex64> = (lo..=hi).map(|k| self.amps[self.index(k, total - k)]).collect();
            for (i, z) in u.mul_vec(&v).into_iter().enumerate() {
                let k = lo + i;
                out.amps[self.index(k, total - k)] = z;
            }
        }
        Ok(out)
    }

    fn ladder(&self, op: LadderOp, amps: &[Complex64]) -> Vec<Complex64> {
        let d = self.cutoff;
        let mut out = vec![C0; amps.len()];
        for (i, z) in amps.iter().enumerate() {
            if *z == C0 {
                continue;
            }
            let (n0, n1) = self.levels(i);
            let level = if op.mode == 0 { n0 } else { n1 };
            let target = if op.dagger {
                if level + 1 >= d {
                    continue;
                }
                level + 1
            } else {
                if level == 0 {
                    continue;
                }
                level - 1
            };
            let amp = (level.max(target) as f64).sqrt();
            let j = if op.mode == 0 { self.index(target, n1) } else { self.index(n0, target) };
            out[j] += *z * amp;
        }
        out
    }

    /// Normalised expectation `⟨ψ| ops |ψ⟩ / ⟨ψ|ψ⟩` of an ordered string.
    pub fn expect(&self, ops: &[LadderOp]) -> Result<Complex64> {
        if let Some(op) = ops.iter().find(|op| op.mode >= self.n_modes) {
            return Err(invalid(format!("operator {op} acts outside {} modes", self.n_modes)));
        }
        let mut v = self.amps.clone();
        for op in ops.iter().rev() {
            v = self.ladder(*op, &v);
        }
        let inner: Complex64 = self.amps.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
        Ok(inner / self.norm_sqr())
    }

    /// `{⟨a⟩, ⟨a²⟩, ⟨N⟩, ⟨a³⟩, ⟨a² a^†⟩, ⟨N²⟩}` of one mode.
    pub fn moments_order4(&self, mode: usize) -> Result<[Complex64; 6]> {
        self.check_mode(mode)?;
        let mut out = [C0; 6];
        for (o, ops) in out.iter_mut().zip(moment_set(mode)) {
            *o = self.expect(&ops)?;
        }
        Ok(out)
    }
}

/// Fock-space counterpart of [`crate::model::evaluate_network`].
pub fn fock_network(
    n_modes: usize,
    cutoff: usize,
    layers: &[crate::model::NetworkLayer],
    alpha: &[f64],
    observables: &[Vec<LadderOp>],
    leakage_threshold: f64,
) -> Result<(Vec<Complex64>, f64)> {
    let mut s = FockState::vacuum(n_modes, cutoff)?.with_leakage_threshold(leakage_threshold);
    for (mode, &a) in alpha.iter().enumerate() {
        s = s.apply(&Gate::Displace { mode, alpha: Complex64::new(a, 0.0) })?;
    }
    for l in layers {
        s = s.apply_layer(&l.params)?;
        for op in l.ops.ops.iter().rev() {
            s = s.apply(&if op.dagger { Gate::Create(op.mode) } else { Gate::Annihilate(op.mode) })?;
        }
    }
    let vals = observables.iter().map(|o| s.expect(o)).collect::<Result<Vec<_>>>()?;
    Ok((vals, s.herald_weight()))
}

/// Operator strings of the order-4 moment set on `mode`.
pub fn moment_set(mode: usize) -> Vec<Vec<LadderOp>> {
    let a = LadderOp::annihilate(mode);
    let ad = LadderOp::create(mode);
    vec![vec![a], vec![a, a], vec![ad, a], vec![a, a, a], vec![a, a, ad], vec![ad, a, ad, a]]
}

pub const MOMENT_NAMES: [&str; 6] = ["a", "a2", "n", "a3", "a2ad", "n2"];

/// Moment targets of `V(γ) D(α) |0⟩` for every α.
pub fn cubic_phase_targets(gamma: f64, alphas: &[f64], cutoff: usize) -> Result<Vec<[Complex64; 6]>> {
    alphas
        .par_iter()
        .map(|&a| FockState::coherent(1, cutoff, &[a])?.apply(&Gate::CubicPhase { mode: 0, gamma })?.moments_order4(0))
        .collect()
}

fn creation(d: usize) -> CMat<f64> {
    CMat::from_fn(d, d, |i, j| if i == j + 1 { Complex64::new((i as f64).sqrt(), 0.0) } else { C0 })
}

/// Principal logarithm of a 1x1 or 2x2 unitary via its spectral
/// decomposition (unitaries are normal, so eigenvectors are orthogonal).
fn log_unitary(w: &CMat<f64>) -> CMat<f64> {
    if w.rows() == 1 {
        return CMat::from_fn(1, 1, |_, _| w[(0, 0)].ln());
    }
    let (a, b, c, d) = (w[(0, 0)], w[(0, 1)], w[(1, 0)], w[(1, 1)]);
    let tr = a + d;
    let det = a * d - b * c;
    let disc = (tr * tr - det * 4.0).sqrt();
    let l1 = (tr + disc) / 2.0;
    let l2 = (tr - disc) / 2.0;
    if (l1 - l2).norm() < 1e-12 {
        let ln = l1.ln();
        return CMat::from_fn(2, 2, |i, j| if i == j { ln } else { C0 });
    }
    // eigenvector of l1: a nonzero column of (W - l2 I)
    let col0 = [a - l2, c];
    let col1 = [b, d - l2];
    let v = if col0[0].norm() + col0[1].norm() >= col1[0].norm() + col1[1].norm() { col0 } else { col1 };
    let nv = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    let v = [v[0] / nv, v[1] / nv];
    let (ln1, ln2) = (l1.ln(), l2.ln());
    // P1 = v v^†, P2 = I - P1
    CMat::from_fn(2, 2, |i, j| {
        let p1 = v[i] * v[j].conj();
        let p2 = if i == j { Complex64::new(1.0, 0.0) - p1 } else { -p1 };
        ln1 * p1 + ln2 * p2
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn a(k: usize) -> LadderOp {
        LadderOp::annihilate(k)
    }

    fn ad(k: usize) -> LadderOp {
        LadderOp::create(k)
    }

    #[test]
    fn coherent_state_moments() {
        let s = FockState::coherent(1, 40, &[1.0]).unwrap();
        assert!((s.expect(&[a(0)]).unwrap() - 1.0).norm() < 1e-10);
        let m = s.moments_order4(0).unwrap();
        assert!((m[0] - 1.0).norm() < 1e-10);
        assert!((m[1] - 1.0).norm() < 1e-10);
        assert!((m[2] - 1.0).norm() < 1e-10);
        assert!((m[5] - 2.0).norm() < 1e-10);
    }

    #[test]
    fn vacuum_moments_vanish() {
        let m = FockState::vacuum(1, 10).unwrap().moments_order4(0).unwrap();
        assert!(m.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn squeezed_vacuum_photon_number() {
        let s = FockState::vacuum(1, 40).unwrap().apply(&Gate::Squeeze { mode: 0, r: 0.5 }).unwrap();
        assert!((s.expect(&[ad(0), a(0)]).unwrap().re - 0.5f64.sinh().powi(2)).abs() < 1e-8);
    }

    #[test]
    fn heisenberg_conventions() {
        let s = FockState::coherent(1, 40, &[0.6]).unwrap().apply(&Gate::Squeeze { mode: 0, r: 0.4 }).unwrap();
        // real α anti-squeezed by e^r
        assert!((s.expect(&[a(0)]).unwrap() - 0.6 * 0.4f64.exp()).norm() < 1e-10);

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let params: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w = unitary_from_params(&params, 2).unwrap();
        let s = FockState::coherent(2, 30, &[0.8, -0.5]).unwrap().apply(&Gate::Passive(w.clone())).unwrap();
        // means of a coherent state move as W α
        let moved = w.mul_vec(&[Complex64::new(0.8, 0.0), Complex64::new(-0.5, 0.0)]);
        for k in 0..2 {
            assert!((s.expect(&[a(k)]).unwrap() - moved[k]).norm() < 1e-10);
        }
        assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn log_unitary_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let params: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            let w = unitary_from_params(&params, 2).unwrap();
            assert!(log_unitary(&w).expm().max_abs_diff(&w) < 1e-12);
        }
    }

    #[test]
    fn subtraction_matches_closed_form() {
        let (alpha, r) = (0.9, 0.4);
        let s = FockState::coherent(1, 40, &[alpha])
            .unwrap()
            .apply(&Gate::Squeeze { mode: 0, r })
            .unwrap()
            .apply(&Gate::Annihilate(0))
            .unwrap();
        let x = std::f64::consts::SQRT_2 * s.expect(&[a(0)]).unwrap().re;
        assert!((x - crate::activations::phi_subtraction(alpha, r)).abs() < 1e-8);
        let expected_weight = r.sinh().powi(2) + (alpha * r.exp()).powi(2);
        assert!((s.herald_weight() - expected_weight).abs() < 1e-8);
    }

    #[test]
    fn leakage_is_reported() {
        let err = FockState::coherent(1, 12, &[3.0]).unwrap_err();
        assert!(matches!(err, QonnError::CutoffTooSmall { cutoff: 12, .. }));
    }

    #[test]
    fn unitary_gates_preserve_norm() {
        let s = FockState::coherent(1, 60, &[1.2]).unwrap().apply(&Gate::CubicPhase { mode: 0, gamma: 0.2 }).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(FockState::vacuum(3, 10).is_err());
        assert!(FockState::vacuum(1, 10).unwrap().apply(&Gate::Annihilate(1)).is_err());
    }
}
