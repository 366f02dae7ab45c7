//! Ladder-operator polynomials and compiled expectation plans.
//!
//! A network `A_{L-1} G_{L-1} ... A_0 G_0 |α⟩` is rewritten so that every
//! Gaussian sits at the front: each non-Gaussian operator of layer ℓ is
//! conjugated through the Gaussians that originally followed it,
//! `X a_k X^†` with `X = G_{L-1} ... G_{ℓ+1}`, which turns it into a
//! `2N + 1` term superposition of ladder operators. All expectation values
//! then become traces of ordered monomials against a single Gaussian state.
//!
//! The shape of every monomial depends only on the architecture, so an
//! [`ExpectationPlan`] is compiled once and only its coefficients are
//! recomputed per parameter point.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{invalid, QonnError, Result};
use crate::gaussian::GaussianOp;
use crate::scalar::{cvalue, Real};
use crate::wick::{enumerate_matchings, matching_count, MatchingSet};

/// Drop threshold for expanded plan terms.
pub const PRUNE_TOL: f64 = 1e-15;

/// Upper bound on compiled trace expressions per observable.
pub const MAX_PLAN_TERMS: u128 = 5_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct LadderOp {
    pub mode: usize,
    pub dagger: bool,
}

impl LadderOp {
    pub const fn annihilate(mode: usize) -> Self {
        LadderOp { mode, dagger: false }
    }

    pub const fn create(mode: usize) -> Self {
        LadderOp { mode, dagger: true }
    }

    pub fn adjoint(self) -> Self {
        LadderOp { mode: self.mode, dagger: !self.dagger }
    }

    /// Position of this operator in the ladder vector `(a, a^†)`.
    #[inline]
    pub fn ladder_index(self, n_modes: usize) -> usize {
        if self.dagger {
            n_modes + self.mode
        } else {
            self.mode
        }
    }
}

impl std::fmt::Display for LadderOp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.dagger {
            write!(f, "a{}†", self.mode)
        } else {
            write!(f, "a{}", self.mode)
        }
    }
}

/// Adjoint of an operator string: reverse and toggle daggers.
pub fn adjoint_ops(ops: &[LadderOp]) -> Vec<LadderOp> {
    ops.iter().rev().map(|op| op.adjoint()).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct LadderMonomial<T: Real = f64> {
    pub coeff: Complex<T>,
    pub ops: Vec<LadderOp>,
}

impl<T: Real> LadderMonomial<T> {
    pub fn new(coeff: Complex<T>, ops: Vec<LadderOp>) -> Self {
        LadderMonomial { coeff, ops }
    }

    pub fn adjoint(&self) -> Self {
        LadderMonomial { coeff: self.coeff.conj(), ops: adjoint_ops(&self.ops) }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut ops = self.ops.clone();
        ops.extend_from_slice(&other.ops);
        LadderMonomial { coeff: self.coeff * other.coeff, ops }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LadderPolynomial<T: Real = f64> {
    pub terms: Vec<LadderMonomial<T>>,
}

impl<T: Real> Default for LadderPolynomial<T> {
    fn default() -> Self {
        LadderPolynomial { terms: Vec::new() }
    }
}

impl<T: Real> LadderPolynomial<T> {
    pub fn new(terms: Vec<LadderMonomial<T>>) -> Self {
        LadderPolynomial { terms }
    }

    pub fn one() -> Self {
        LadderPolynomial { terms: vec![LadderMonomial::new(Complex::one(), vec![])] }
    }

    pub fn op(op: LadderOp) -> Self {
        LadderPolynomial { terms: vec![LadderMonomial::new(Complex::one(), vec![op])] }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn adjoint(&self) -> Self {
        LadderPolynomial { terms: self.terms.iter().map(|t| t.adjoint()).collect() }
    }

    /// Distributive product, keeping the operator order of each factor.
    pub fn mul(&self, other: &Self) -> Self {
        let mut terms = Vec::with_capacity(self.len() * other.len());
        for a in &self.terms {
            for b in &other.terms {
                terms.push(a.mul(b));
            }
        }
        LadderPolynomial { terms }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        LadderPolynomial { terms }
    }

    /// Merge terms with identical operator strings and drop exact zeros.
    pub fn simplify(&self) -> Self {
        let mut index: BTreeMap<&[LadderOp], usize> = BTreeMap::new();
        let mut merged: Vec<LadderMonomial<T>> = Vec::new();
        for t in &self.terms {
            match index.get(t.ops.as_slice()) {
                Some(&i) => merged[i].coeff += t.coeff,
                None => {
                    index.insert(&t.ops, merged.len());
                    merged.push(t.clone());
                }
            }
        }
        merged.retain(|t| !(t.coeff.re.value() == 0.0 && t.coeff.im.value() == 0.0));
        LadderPolynomial { terms: merged }
    }

    /// Whether the polynomial equals its formal adjoint (after merging).
    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        let a = self.simplify();
        let b = self.adjoint().simplify();
        if a.len() != b.len() {
            return false;
        }
        let lookup: BTreeMap<&[LadderOp], Complex<T>> = b.terms.iter().map(|t| (t.ops.as_slice(), t.coeff)).collect();
        a.terms.iter().all(|t| match lookup.get(t.ops.as_slice()) {
            Some(c) => (cvalue(t.coeff) - cvalue(*c)).norm() <= tol,
            None => false,
        })
    }
}

/// Ladder operator for superposition choice `choice` of a conjugated slot:
/// 0 is the constant, `1..=N` annihilators, `N+1..=2N` creators.
fn choice_op(choice: usize, n: usize) -> Option<LadderOp> {
    match choice {
        0 => None,
        c if c <= n => Some(LadderOp::annihilate(c - 1)),
        c => Some(LadderOp::create(c - n - 1)),
    }
}

/// Coefficients `[δ_k, U_{k,0..N}, V_{k,0..N}]` of `G^† a_k G`.
fn heisenberg_row<T: Real>(g: &GaussianOp<T>, k: usize) -> Vec<Complex<T>> {
    let b = &g.bogoliubov;
    let n = g.n_modes();
    let mut row = Vec::with_capacity(2 * n + 1);
    row.push(g.delta[k]);
    row.extend((0..n).map(|j| b.u[(k, j)]));
    row.extend((0..n).map(|j| b.v[(k, j)]));
    row
}

/// Heisenberg image `G^† op G` of a single ladder operator.
///
/// For `a_k` this is `δ_k + Σ_j U_kj a_j + V_kj a_j^†` (always `2N + 1`
/// terms, zeros included); for `a_k^†` it is the adjoint polynomial.
pub fn conjugate_op<T: Real>(op: LadderOp, g: &GaussianOp<T>) -> Result<LadderPolynomial<T>> {
    let n = g.n_modes();
    if op.mode >= n {
        return Err(invalid(format!("mode {} out of range for {n} modes", op.mode)));
    }
    let row = heisenberg_row(g, op.mode);
    let terms = row
        .into_iter()
        .enumerate()
        .map(|(c, coeff)| {
            let ops: Vec<LadderOp> = choice_op(c, n).into_iter().collect();
            let m = LadderMonomial::new(coeff, ops);
            if op.dagger {
                m.adjoint()
            } else {
                m
            }
        })
        .collect();
    Ok(LadderPolynomial { terms })
}

/// Heisenberg image of a polynomial, term by term.
pub fn conjugate_polynomial<T: Real>(p: &LadderPolynomial<T>, g: &GaussianOp<T>) -> Result<LadderPolynomial<T>> {
    let mut out = LadderPolynomial::default();
    for t in &p.terms {
        let mut acc = LadderPolynomial::new(vec![LadderMonomial::new(t.coeff, vec![])]);
        for op in &t.ops {
            acc = acc.mul(&conjugate_op(*op, g)?);
        }
        out = out.add(&acc);
    }
    Ok(out)
}

/// One position of an operator string before expansion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    /// Operator that needs no conjugation (the last layer, or an observable).
    Fixed(LadderOp),
    /// Operator `op` of layer `layer` pushed through the later Gaussians.
    Conjugated { layer: usize, op: LadderOp },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CoeffRef {
    pub layer: usize,
    pub mode: usize,
    pub choice: usize,
    pub conj: bool,
}

/// One expanded trace expression: an ordered operator string whose
/// coefficient is the product of the referenced superposition weights.
#[derive(Clone, Debug)]
pub struct PlanTerm {
    pub ops: Vec<LadderOp>,
    pub coeff_refs: Vec<CoeffRef>,
}

#[derive(Clone, Debug)]
pub struct PlanExpression {
    pub slots: Vec<Slot>,
    pub terms: Vec<PlanTerm>,
}

impl PlanExpression {
    fn expand(slots: Vec<Slot>, n: usize) -> Result<Self> {
        let conjugated = slots.iter().filter(|s| matches!(s, Slot::Conjugated { .. })).count();
        let predicted = (2 * n as u128 + 1).pow(conjugated as u32);
        if predicted > MAX_PLAN_TERMS {
            return Err(QonnError::ResourceLimit { length: conjugated, cap: MAX_PLAN_TERMS as usize, predicted });
        }
        let mut terms = vec![PlanTerm { ops: Vec::new(), coeff_refs: Vec::new() }];
        for slot in &slots {
            match *slot {
                Slot::Fixed(op) => terms.iter_mut().for_each(|t| t.ops.push(op)),
                Slot::Conjugated { layer, op } => {
                    let mut next = Vec::with_capacity(terms.len() * (2 * n + 1));
                    for t in &terms {
                        for choice in 0..=2 * n {
                            let mut t2 = t.clone();
                            if let Some(o) = choice_op(choice, n) {
                                t2.ops.push(if op.dagger { o.adjoint() } else { o });
                            }
                            t2.coeff_refs.push(CoeffRef { layer, mode: op.mode, choice, conj: op.dagger });
                            next.push(t2);
                        }
                    }
                    terms = next;
                }
            }
        }
        Ok(PlanExpression { slots, terms })
    }

    /// Number of trace expressions before coefficient pruning.
    pub fn term_count(&self) -> usize {
        self.terms.len()
    }
}

/// Non-Gaussian content of one layer: the ordered product of `ops`
/// applied after the layer's Gaussian. Photon subtraction on a set `K` is
/// `ops = [a_k for k in K]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerOps {
    pub ops: Vec<LadderOp>,
}

impl LayerOps {
    pub fn subtractions(modes: &[usize]) -> Self {
        LayerOps { ops: modes.iter().map(|&k| LadderOp::annihilate(k)).collect() }
    }
}

/// Compiled, parameter-independent structure of all network expectations.
#[derive(Clone, Debug)]
pub struct ExpectationPlan {
    n_modes: usize,
    layers: Vec<LayerOps>,
    observables: Vec<Vec<LadderOp>>,
    numerators: Vec<PlanExpression>,
    denominator: PlanExpression,
    matchings: BTreeMap<usize, Arc<MatchingSet>>,
}

impl ExpectationPlan {
    /// Compile the expectation structure of `<ψ|O|ψ>` for every observable
    /// string `O`, plus the norm `<ψ|ψ>`.
    pub fn compile(n_modes: usize, layers: &[LayerOps], observables: Vec<Vec<LadderOp>>) -> Result<Self> {
        if n_modes == 0 {
            return Err(invalid("architecture has no modes"));
        }
        if layers.is_empty() {
            return Err(invalid("architecture has no layers"));
        }
        let all_ops = layers.iter().flat_map(|l| l.ops.iter()).chain(observables.iter().flatten());
        if let Some(op) = all_ops.into_iter().find(|op| op.mode >= n_modes) {
            return Err(invalid(format!("operator {op} acts outside {n_modes} modes")));
        }
        let last = layers.len() - 1;
        // ket string: layer L-1 operators first, layer 0 last
        let mut ket = Vec::new();
        for (layer, l) in layers.iter().enumerate().rev() {
            for &op in &l.ops {
                ket.push(if layer == last { Slot::Fixed(op) } else { Slot::Conjugated { layer, op } });
            }
        }
        let bra: Vec<Slot> = ket
            .iter()
            .rev()
            .map(|s| match *s {
                Slot::Fixed(op) => Slot::Fixed(op.adjoint()),
                Slot::Conjugated { layer, op } => Slot::Conjugated { layer, op: op.adjoint() },
            })
            .collect();

        let mut numerators = Vec::with_capacity(observables.len());
        for obs in &observables {
            let slots: Vec<Slot> =
                bra.iter().copied().chain(obs.iter().map(|&o| Slot::Fixed(o))).chain(ket.iter().copied()).collect();
            numerators.push(PlanExpression::expand(slots, n_modes)?);
        }
        let denominator = PlanExpression::expand(bra.iter().copied().chain(ket.iter().copied()).collect(), n_modes)?;

        let mut matchings = BTreeMap::new();
        for expr in numerators.iter().chain(std::iter::once(&denominator)) {
            for t in &expr.terms {
                let m = t.ops.len();
                if let std::collections::btree_map::Entry::Vacant(e) = matchings.entry(m) {
                    e.insert(Arc::new(enumerate_matchings(m)?));
                }
            }
        }
        Ok(ExpectationPlan { n_modes, layers: layers.to_vec(), observables, numerators, denominator, matchings })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[LayerOps] {
        &self.layers
    }

    pub fn observables(&self) -> &[Vec<LadderOp>] {
        &self.observables
    }

    pub fn numerators(&self) -> &[PlanExpression] {
        &self.numerators
    }

    pub fn denominator(&self) -> &PlanExpression {
        &self.denominator
    }

    pub fn matchings(&self, len: usize) -> &MatchingSet {
        &self.matchings[&len]
    }

    /// Superposition weights for the given per-layer Gaussians.
    pub fn coefficients<T: Real>(&self, layer_ops: &[GaussianOp<T>]) -> Result<PlanCoefficients<T>> {
        if layer_ops.len() != self.layers.len() {
            return Err(invalid(format!(
                "plan has {} layers but {} Gaussians were supplied",
                self.layers.len(),
                layer_ops.len()
            )));
        }
        let n = self.n_modes;
        if let Some(g) = layer_ops.iter().find(|g| g.n_modes() != n) {
            return Err(invalid(format!("Gaussian on {} modes in a {n}-mode plan", g.n_modes())));
        }
        let l = layer_ops.len();
        let mut table = vec![Vec::new(); l];
        // suffix holds G_{L-1} ... G_{ℓ+1}
        let mut suffix = GaussianOp::identity(n);
        for layer in (0..l.saturating_sub(1)).rev() {
            suffix = suffix.after(&layer_ops[layer + 1]);
            let pull = suffix.inverse();
            table[layer] = (0..n).map(|k| heisenberg_row(&pull, k)).collect();
        }
        Ok(PlanCoefficients { table })
    }

    /// Concrete polynomials for the given coefficients, before pruning.
    pub fn instantiate<T: Real>(
        &self,
        coeffs: &PlanCoefficients<T>,
    ) -> (Vec<LadderPolynomial<T>>, LadderPolynomial<T>) {
        let build = |e: &PlanExpression| LadderPolynomial {
            terms: e.terms.iter().map(|t| LadderMonomial::new(coeffs.term_coeff(t), t.ops.clone())).collect(),
        };
        (self.numerators.iter().map(build).collect(), build(&self.denominator))
    }

    pub fn stats(&self) -> PlanStats {
        let mut by_len: BTreeMap<usize, usize> = BTreeMap::new();
        let mut total_matchings: u128 = 0;
        let mut flops: u128 = 0;
        let exprs = self.numerators.iter().chain(std::iter::once(&self.denominator));
        for e in exprs {
            for t in &e.terms {
                let m = t.ops.len();
                *by_len.entry(m).or_default() += 1;
                let c = matching_count(m);
                total_matchings += c;
                // one complex multiply (6 flops) per factor, one add per matching
                flops += c * (6 * m as u128 + 2) + 6 * t.coeff_refs.len() as u128;
            }
        }
        PlanStats {
            n_modes: self.n_modes,
            n_layers: self.layers.len(),
            layer_op_counts: self.layers.iter().map(|l| l.ops.len()).collect(),
            n_observables: self.observables.len(),
            trace_expressions_per_observable: self.numerators.iter().map(|e| e.term_count()).collect(),
            denominator_trace_expressions: self.denominator.term_count(),
            monomials_by_length: by_len,
            total_matchings,
            estimated_flops: flops,
        }
    }
}

/// Trace-expression count `O · (2N+1)^{2K(L-1)}` for `O` observables on an
/// `N`-mode network with `K` non-Gaussian operators in each of `L` layers.
pub fn count_trace_expressions(observables: usize, n_modes: usize, per_layer: usize, layers: usize) -> u128 {
    if layers == 0 {
        return 0;
    }
    observables as u128 * (2 * n_modes as u128 + 1).pow((2 * per_layer * (layers - 1)) as u32)
}

#[derive(Clone, Debug, Serialize)]
pub struct PlanStats {
    pub n_modes: usize,
    pub n_layers: usize,
    pub layer_op_counts: Vec<usize>,
    pub n_observables: usize,
    pub trace_expressions_per_observable: Vec<usize>,
    pub denominator_trace_expressions: usize,
    pub monomials_by_length: BTreeMap<usize, usize>,
    pub total_matchings: u128,
    pub estimated_flops: u128,
}

impl PlanStats {
    pub fn total_trace_expressions(&self) -> usize {
        self.trace_expressions_per_observable.iter().sum()
    }
}

/// Per-parameter-point superposition weights: `table[layer][mode][choice]`.
#[derive(Clone, Debug)]
pub struct PlanCoefficients<T: Real> {
    table: Vec<Vec<Vec<Complex<T>>>>,
}

impl<T: Real> PlanCoefficients<T> {
    #[inline]
    pub fn weight(&self, r: &CoeffRef) -> Complex<T> {
        let w = self.table[r.layer][r.mode][r.choice];
        if r.conj {
            w.conj()
        } else {
            w
        }
    }

    pub fn term_coeff(&self, term: &PlanTerm) -> Complex<T> {
        term.coeff_refs.iter().fold(Complex::one(), |acc, r| acc * self.weight(r))
    }

    pub fn is_zero_term(&self, term: &PlanTerm) -> bool {
        let c = self.term_coeff(term);
        cvalue(c).norm() < PRUNE_TOL && !c.is_zero() || c.is_zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{bogoliubov_from_layer, GaussianLayerParams};
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_op(n: usize, rng: &mut ChaCha8Rng) -> GaussianOp<f64> {
        let flat: Vec<f64> = (0..GaussianLayerParams::<f64>::count(n)).map(|_| rng.random_range(-1.2..1.2)).collect();
        bogoliubov_from_layer(&GaussianLayerParams::from_slice(&flat, n).unwrap()).unwrap()
    }

    #[test]
    fn identity_conjugation() {
        let g = GaussianOp::<f64>::identity(1);
        let p = conjugate_op(LadderOp::annihilate(0), &g).unwrap().simplify();
        assert_eq!(p.terms, vec![LadderMonomial::new(Complex64::new(1.0, 0.0), vec![LadderOp::annihilate(0)])]);
    }

    #[test]
    fn displaced_conjugation() {
        let delta = Complex64::new(0.4, -0.2);
        let g = GaussianOp::displacement(vec![delta]);
        let p = conjugate_op(LadderOp::annihilate(0), &g).unwrap().simplify();
        assert_eq!(p.len(), 2);
        assert_eq!(p.terms[0], LadderMonomial::new(delta, vec![]));
        assert_eq!(p.terms[1], LadderMonomial::new(Complex64::new(1.0, 0.0), vec![LadderOp::annihilate(0)]));
    }

    #[test]
    fn generic_two_mode_conjugation_has_five_terms() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_op(2, &mut rng);
        let p = conjugate_op(LadderOp::annihilate(0), &g).unwrap();
        assert_eq!(p.len(), 5);
        let b = &g.bogoliubov;
        assert_eq!(p.terms[0].coeff, g.delta[0]);
        assert_eq!(p.terms[1].coeff, b.u[(0, 0)]);
        assert_eq!(p.terms[2].coeff, b.u[(0, 1)]);
        assert_eq!(p.terms[3].coeff, b.v[(0, 0)]);
        assert_eq!(p.terms[4].coeff, b.v[(0, 1)]);
        assert_eq!(p.terms[4].ops, vec![LadderOp::create(1)]);

        let pd = conjugate_op(LadderOp::create(0), &g).unwrap();
        assert_eq!(pd, p.adjoint());
        assert!(conjugate_op(LadderOp::annihilate(2), &g).is_err());
    }

    #[test]
    fn conjugation_composes() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g1 = random_op(2, &mut rng);
        let g2 = random_op(2, &mut rng);
        // (G2 G1)^† a (G2 G1) = G1^† (G2^† a G2) G1
        let op = LadderOp::create(1);
        let twice = conjugate_polynomial(&conjugate_op(op, &g2).unwrap(), &g1).unwrap().simplify();
        let once = conjugate_op(op, &g2.after(&g1)).unwrap().simplify();
        assert_eq!(twice.len(), once.len());
        for (a, b) in twice.terms.iter().zip(&once.terms) {
            assert_eq!(a.ops, b.ops);
            assert!((a.coeff - b.coeff).norm() < 1e-12);
        }
    }

    #[test]
    fn trace_expression_formula() {
        assert_eq!(count_trace_expressions(1, 2, 1, 2), 25);
        assert_eq!(count_trace_expressions(1, 7, 3, 1), 1);
        assert_eq!(count_trace_expressions(3, 1, 2, 2), 243);
    }

    #[test]
    fn compiled_counts_follow_formula() {
        for (o, n, k, l) in [(1, 2, 1, 2), (3, 1, 2, 2), (2, 2, 1, 1), (1, 1, 1, 3), (2, 3, 1, 2), (1, 2, 2, 2)] {
            let layers: Vec<LayerOps> = (0..l).map(|_| LayerOps::subtractions(&vec![0; k])).collect();
            let obs = (0..o).map(|j| vec![LadderOp::annihilate(j % n)]).collect();
            let plan = ExpectationPlan::compile(n, &layers, obs).unwrap();
            for e in plan.numerators() {
                assert_eq!(e.term_count() as u128 * o as u128, count_trace_expressions(o, n, k, l));
            }
            assert_eq!(plan.denominator().term_count() as u128, count_trace_expressions(1, n, k, l));
        }
    }

    #[test]
    fn single_layer_plan_structure() {
        let plan =
            ExpectationPlan::compile(1, &[LayerOps::subtractions(&[0])], vec![vec![LadderOp::annihilate(0)]]).unwrap();
        assert_eq!(plan.numerators()[0].terms.len(), 1);
        let (a, ad) = (LadderOp::annihilate(0), LadderOp::create(0));
        assert_eq!(plan.numerators()[0].terms[0].ops, vec![ad, a, a]);
        assert_eq!(plan.denominator().terms[0].ops, vec![ad, a]);
        assert_eq!(plan.matchings(3).len(), 4);
    }

    #[test]
    fn denominator_is_self_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let layers = vec![LayerOps::subtractions(&[0, 1]), LayerOps::subtractions(&[1])];
        let plan = ExpectationPlan::compile(2, &layers, vec![vec![LadderOp::annihilate(0)]]).unwrap();
        let ops = vec![random_op(2, &mut rng), random_op(2, &mut rng)];
        let coeffs = plan.coefficients(&ops).unwrap();
        let (_, den) = plan.instantiate(&coeffs);
        assert!(den.is_self_adjoint(1e-12));
    }

    #[test]
    fn rejects_bad_architectures() {
        assert!(ExpectationPlan::compile(2, &[], vec![]).is_err());
        assert!(ExpectationPlan::compile(2, &[LayerOps::subtractions(&[2])], vec![]).is_err());
        assert!(ExpectationPlan::compile(0, &[LayerOps::subtractions(&[])], vec![]).is_err());
    }

    #[test]
    fn simplify_merges_and_drops_zeros() {
        let a = LadderOp::annihilate(0);
        let p = LadderPolynomial::new(vec![
            LadderMonomial::new(Complex64::new(1.0, 0.0), vec![a]),
            LadderMonomial::new(Complex64::new(2.0, 1.0), vec![a.adjoint()]),
            LadderMonomial::new(Complex64::new(-1.0, 0.0), vec![a]),
        ]);
        let s = p.simplify();
        assert_eq!(s.len(), 1);
        assert_eq!(s.terms[0].ops, vec![a.adjoint()]);
    }
}
