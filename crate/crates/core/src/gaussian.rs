//! Gaussian states and Gaussian unitaries in the ladder basis.
//!
//! Modes are indexed from 0. The ladder vector is
//! `b = (a_0, .., a_{N-1}, a_0^†, .., a_{N-1}^†)` and the covariance matrix is
//! stored as `cov[i][j] = <δb_i δb_j^†>` with `δb = b - <b>`. In this layout the
//! vacuum is `[[I, 0], [0, 0]]`, and a quadratic unitary acts as
//! `cov -> B cov B^†`. Blockwise:
//!
//! * `cov[r][s]     = <δa_r δa_s^†>`
//! * `cov[r][N+s]   = <δa_r δa_s>`
//! * `cov[N+r][s]   = <δa_r^† δa_s^†>`
//! * `cov[N+r][N+s] = <δa_r^† δa_s>`
//!
//! A [`GaussianOp`] is stored through its Heisenberg action
//! `G^† b G = B b + d`, which is also how it moves the first moments:
//! `<b> -> B <b> + d`.

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{invalid, QonnError, Result};
use crate::matrix::CMat;
use crate::scalar::{cis, cr, Real};

/// Hardware squeezing ceiling used throughout the benchmarks.
pub const SQUEEZING_BOUND: f64 = 1.7;

const UNITARITY_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct GaussianState<T: Real = f64> {
    n_modes: usize,
    means: Vec<Complex<T>>,
    cov: CMat<T>,
}

impl<T: Real> GaussianState<T> {
    pub fn vacuum(n_modes: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(invalid("a Gaussian state needs at least one mode"));
        }
        let mut cov = CMat::zeros(2 * n_modes, 2 * n_modes);
        for k in 0..n_modes {
            cov[(k, k)] = Complex::one();
        }
        Ok(GaussianState { n_modes, means: vec![Complex::zero(); 2 * n_modes], cov })
    }

    /// Build a state from raw moments. The means must already be
    /// conjugate-symmetric.
    pub fn from_moments(means: Vec<Complex<T>>, cov: CMat<T>) -> Result<Self> {
        let dim = means.len();
        if dim == 0 || !dim.is_multiple_of(2) || cov.rows() != dim || cov.cols() != dim {
            return Err(invalid(format!(
                "moment shapes do not describe a ladder basis: means {dim}, cov {}x{}",
                cov.rows(),
                cov.cols()
            )));
        }
        Ok(GaussianState { n_modes: dim / 2, means, cov })
    }

    /// Load real coherent amplitudes onto the first `alpha.len()` modes.
    pub fn load_inputs(&self, alpha: &[T]) -> Result<Self> {
        if alpha.len() > self.n_modes {
            return Err(invalid(format!("{} inputs do not fit into {} modes", alpha.len(), self.n_modes)));
        }
        let mut out = self.clone();
        let n = self.n_modes;
        for (k, a) in alpha.iter().enumerate() {
            out.means[k] += cr(*a);
            out.means[n + k] += cr(*a);
        }
        Ok(out)
    }

    pub fn apply(&self, op: &GaussianOp<T>) -> Result<Self> {
        if op.n_modes() != self.n_modes {
            return Err(invalid(format!(
                "Gaussian operator on {} modes applied to a {}-mode state",
                op.n_modes(),
                self.n_modes
            )));
        }
        let b = op.bogoliubov.assemble();
        let mut means = b.mul_vec(&self.means);
        for (m, d) in means.iter_mut().zip(op.full_displacement()) {
            *m += d;
        }
        let cov = b.matmul(&self.cov).matmul(&b.adjoint());
        Ok(GaussianState { n_modes: self.n_modes, means, cov })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn means(&self) -> &[Complex<T>] {
        &self.means
    }

    pub fn cov(&self) -> &CMat<T> {
        &self.cov
    }

    /// `<a_k>`.
    pub fn mean(&self, k: usize) -> Complex<T> {
        self.means[k]
    }

    /// Largest violation of `means[N+k] = conj(means[k])` and of the
    /// Hermitian-pair symmetries of the covariance.
    pub fn symmetry_residual(&self) -> f64 {
        let n = self.n_modes;
        let mut worst = 0.0f64;
        let dist = |a: Complex<T>, b: Complex<T>| {
            let d = a - b;
            (d.re.value().powi(2) + d.im.value().powi(2)).sqrt()
        };
        for k in 0..n {
            worst = worst.max(dist(self.means[n + k], self.means[k].conj()));
        }
        for r in 0..n {
            for s in 0..n {
                // <δa_r δa_s^†> is Hermitian in (r, s)
                worst = worst.max(dist(self.cov[(r, s)], self.cov[(s, r)].conj()));
                // <δa_r^† δa_s> is Hermitian in (r, s)
                worst = worst.max(dist(self.cov[(n + r, n + s)], self.cov[(n + s, n + r)].conj()));
                // <δa_r^† δa_s^†> = conj(<δa_s δa_r>)
                worst = worst.max(dist(self.cov[(n + r, s)], self.cov[(s, n + r)].conj()));
                // <δa_r δa_s> is symmetric since the operators commute
                worst = worst.max(dist(self.cov[(r, n + s)], self.cov[(s, n + r)]));
                // CCR: <δa_r δa_s^†> - <δa_s^† δa_r> = δ_rs
                let ccr = if r == s { Complex::one() } else { Complex::zero() };
                worst = worst.max(dist(self.cov[(r, s)] - self.cov[(n + s, n + r)], ccr));
            }
        }
        worst
    }
}

/// Linear Bogoliubov map `B = [[U, V], [V*, U*]]`.
#[derive(Clone, Debug)]
pub struct BogoliubovMatrix<T: Real = f64> {
    pub u: CMat<T>,
    pub v: CMat<T>,
}

impl<T: Real> BogoliubovMatrix<T> {
    pub fn identity(n: usize) -> Self {
        BogoliubovMatrix { u: CMat::identity(n), v: CMat::zeros(n, n) }
    }

    pub fn n_modes(&self) -> usize {
        self.u.rows()
    }

    pub fn assemble(&self) -> CMat<T> {
        CMat::from_blocks(&self.u, &self.v, &self.v.conj(), &self.u.conj())
    }

    /// `max |B Ω B^† - Ω|` with `Ω = diag(I, -I)`.
    pub fn symplectic_residual(&self) -> f64 {
        let n = self.n_modes();
        let b = self.assemble();
        let omega = omega::<T>(n);
        b.matmul(&omega).matmul(&b.adjoint()).max_abs_diff(&omega)
    }

    /// `self · earlier`, i.e. `earlier` acts first.
    pub fn after(&self, earlier: &Self) -> Self {
        let u = self.u.matmul(&earlier.u).add(&self.v.matmul(&earlier.v.conj()));
        let v = self.u.matmul(&earlier.v).add(&self.v.matmul(&earlier.u.conj()));
        BogoliubovMatrix { u, v }
    }

    /// `B^{-1} = Ω B^† Ω`.
    pub fn inverse(&self) -> Self {
        let minus = Complex::new(-T::one(), T::zero());
        BogoliubovMatrix { u: self.u.adjoint(), v: self.v.transpose().scale(minus) }
    }
}

fn omega<T: Real>(n: usize) -> CMat<T> {
    let mut d = vec![Complex::one(); n];
    d.extend(std::iter::repeat_n(-Complex::<T>::one(), n));
    CMat::diagonal(&d)
}

/// General Gaussian unitary `D(δ) Q` in its Heisenberg form.
#[derive(Clone, Debug)]
pub struct GaussianOp<T: Real = f64> {
    pub bogoliubov: BogoliubovMatrix<T>,
    /// Displacement amplitudes δ (length N); the full shift is `(δ, δ*)`.
    pub delta: Vec<Complex<T>>,
}

impl<T: Real> GaussianOp<T> {
    pub fn identity(n: usize) -> Self {
        GaussianOp { bogoliubov: BogoliubovMatrix::identity(n), delta: vec![Complex::zero(); n] }
    }

    pub fn displacement(delta: Vec<Complex<T>>) -> Self {
        GaussianOp { bogoliubov: BogoliubovMatrix::identity(delta.len()), delta }
    }

    pub fn n_modes(&self) -> usize {
        self.delta.len()
    }

    pub fn full_displacement(&self) -> Vec<Complex<T>> {
        self.delta.iter().copied().chain(self.delta.iter().map(|z| z.conj())).collect()
    }

    /// The operator `self · earlier` (`earlier` is applied to the state first).
    pub fn after(&self, earlier: &Self) -> Self {
        let bogoliubov = self.bogoliubov.after(&earlier.bogoliubov);
        let shifted = self.bogoliubov.assemble().mul_vec(&earlier.full_displacement());
        let delta = (0..self.n_modes()).map(|k| shifted[k] + self.delta[k]).collect();
        GaussianOp { bogoliubov, delta }
    }

    /// Inverse unitary: Heisenberg map `b -> B^{-1} (b - d)`.
    pub fn inverse(&self) -> Self {
        let bogoliubov = self.bogoliubov.inverse();
        let shifted = bogoliubov.assemble().mul_vec(&self.full_displacement());
        let delta = (0..self.n_modes()).map(|k| -shifted[k]).collect();
        GaussianOp { bogoliubov, delta }
    }
}

/// Number of MZI cells in a rectangular mesh over `n` modes, with the mode
/// pair each one acts on, in application order.
pub fn mesh_layout(n: usize) -> Vec<(usize, usize)> {
    let mut cells = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for layer in 0..n {
        let mut k = layer % 2;
        while k + 1 < n {
            cells.push((k, k + 1));
            k += 2;
        }
    }
    cells
}

/// Interferometer from `n²` real parameters.
///
/// The first `n(n-1)` parameters drive a rectangular mesh of two-mode cells
/// `[[e^{iφ} cos θ, -sin θ], [e^{iφ} sin θ, cos θ]]`, read as `(θ, φ)` pairs
/// in [`mesh_layout`] order; the last `n` are output phases. All-zero
/// parameters give the identity.
pub fn unitary_from_params<T: Real>(params: &[T], n: usize) -> Result<CMat<T>> {
    if n == 0 || params.len() != n * n {
        return Err(invalid(format!(
            "an interferometer on {n} modes takes {} parameters, got {}",
            n * n,
            params.len()
        )));
    }
    let mut u = CMat::<T>::identity(n);
    for (cell, &(p, q)) in mesh_layout(n).iter().enumerate() {
        let theta = params[2 * cell];
        let phase = cis(params[2 * cell + 1]);
        let (c, s) = (cr(theta.cos()), cr(theta.sin()));
        // left-multiply by the cell acting on rows p, q
        for j in 0..n {
            let up = u[(p, j)];
            let uq = u[(q, j)];
            u[(p, j)] = phase * c * up - s * uq;
            u[(q, j)] = phase * s * up + c * uq;
        }
    }
    let phases = &params[n * (n - 1)..];
    for (i, phi) in phases.iter().enumerate() {
        let z = cis(*phi);
        for j in 0..n {
            u[(i, j)] = z * u[(i, j)];
        }
    }
    Ok(u)
}

fn unitarity_residual<T: Real>(u: &CMat<T>) -> f64 {
    u.adjoint().matmul(u).max_abs_diff(&CMat::identity(u.rows()))
}

/// Trainable parameters of one Gaussian layer `D(δ) U_2 S(r) U_1`.
#[derive(Clone, Debug)]
pub struct GaussianLayerParams<T: Real = f64> {
    pub u1: Vec<T>,
    pub r: Vec<T>,
    pub u2: Vec<T>,
    pub delta: Vec<Complex<T>>,
}

impl<T: Real> GaussianLayerParams<T> {
    /// Real parameters in one layer: `2N² + 3N`.
    pub fn count(n: usize) -> usize {
        2 * n * n + 3 * n
    }

    /// Split a flat slice laid out as `[u1 (N²), r (N), u2 (N²), δ (2N)]`,
    /// with δ stored as interleaved `(re, im)` pairs.
    pub fn from_slice(flat: &[T], n: usize) -> Result<Self> {
        if flat.len() != Self::count(n) {
            return Err(invalid(format!("a {n}-mode layer takes {} parameters, got {}", Self::count(n), flat.len())));
        }
        let n2 = n * n;
        let u1 = flat[..n2].to_vec();
        let r = flat[n2..n2 + n].to_vec();
        let u2 = flat[n2 + n..2 * n2 + n].to_vec();
        let delta = flat[2 * n2 + n..].chunks_exact(2).map(|p| Complex::new(p[0], p[1])).collect();
        Ok(GaussianLayerParams { u1, r, u2, delta })
    }

    pub fn n_modes(&self) -> usize {
        self.r.len()
    }
}

/// Bloch–Messiah assembly of a layer with squeezing phases fixed to zero.
///
/// `U = U_2 cosh(R) U_1^†`, `V = U_2 sinh(R) U_1^T`. The sign of `V` is chosen
/// so that a positive `r` anti-squeezes x̂: a real coherent amplitude α maps
/// to `e^r α`.
pub fn bogoliubov_from_layer<T: Real>(params: &GaussianLayerParams<T>) -> Result<GaussianOp<T>> {
    let n = params.n_modes();
    if params.delta.len() != n {
        return Err(invalid("displacement length does not match the squeezer count"));
    }
    for (mode, r) in params.r.iter().enumerate() {
        if r.value().abs() > SQUEEZING_BOUND + 1e-12 || !r.value().is_finite() {
            return Err(QonnError::BoundViolation { mode, value: r.value(), bound: SQUEEZING_BOUND });
        }
    }
    let u1 = unitary_from_params(&params.u1, n)?;
    let u2 = unitary_from_params(&params.u2, n)?;
    for (name, u) in [("U1", &u1), ("U2", &u2)] {
        let res = unitarity_residual(u);
        if !(res < UNITARITY_TOL) {
            return Err(QonnError::InternalConsistency(format!("{name} is not unitary (residual {res:e})")));
        }
    }
    let ch: Vec<_> = params.r.iter().map(|r| cr(r.cosh())).collect();
    let sh: Vec<_> = params.r.iter().map(|r| cr(r.sinh())).collect();
    let u = u2.matmul(&CMat::diagonal(&ch)).matmul(&u1.adjoint());
    let v = u2.matmul(&CMat::diagonal(&sh)).matmul(&u1.transpose());
    Ok(GaussianOp { bogoliubov: BogoliubovMatrix { u, v }, delta: params.delta.clone() })
}

/// Total trainable parameters of an `n`-mode, `layers`-deep network.
pub fn param_count(n: usize, layers: usize) -> usize {
    layers * GaussianLayerParams::<f64>::count(n)
}
