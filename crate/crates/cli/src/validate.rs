//! Engine against Fock oracle on random one-layer circuits.

use num_complex::Complex64;
use qonn_core::fock::fock_network;
use qonn_core::gaussian::GaussianLayerParams;
use qonn_core::ladder::{LadderOp, LayerOps};
use qonn_core::model::{evaluate_network, NetworkLayer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::ValidateConfig;
use crate::error::{CliError, Result};
use crate::output::{ensure_dir, write_json};
use crate::Context;

#[derive(Debug, Serialize)]
struct CaseReport {
    n_modes: usize,
    ops: String,
    alpha: Vec<f64>,
    observables: usize,
    max_error: f64,
}

#[derive(Debug, Serialize)]
struct ValidationReport {
    seed: u64,
    config: ValidateConfig,
    max_error: f64,
    failing: usize,
    passed: bool,
    cases: Vec<CaseReport>,
}

/// Every operator string of length `1..=order` on `n` modes.
fn all_strings(n: usize, order: usize) -> Vec<Vec<LadderOp>> {
    let alphabet: Vec<LadderOp> = (0..n).flat_map(|m| [LadderOp::annihilate(m), LadderOp::create(m)]).collect();
    let mut out = Vec::new();
    let mut current: Vec<Vec<LadderOp>> = vec![vec![]];
    for _ in 0..order {
        current = current
            .iter()
            .flat_map(|s| {
                alphabet.iter().map(move |&o| {
                    let mut t = s.clone();
                    t.push(o);
                    t
                })
            })
            .collect();
        out.extend(current.iter().cloned());
    }
    out
}

fn random_layer(n: usize, v: &ValidateConfig, rng: &mut ChaCha8Rng) -> GaussianLayerParams<f64> {
    let sym = |rng: &mut ChaCha8Rng, m: f64| if m > 0.0 { rng.random_range(-m..=m) } else { 0.0 };
    GaussianLayerParams {
        u1: (0..n * n).map(|_| sym(rng, 3.0)).collect(),
        r: (0..n).map(|_| sym(rng, v.r_max)).collect(),
        u2: (0..n * n).map(|_| sym(rng, 3.0)).collect(),
        delta: (0..n).map(|_| Complex64::new(sym(rng, v.delta_max), sym(rng, v.delta_max))).collect(),
    }
}

/// Circuit `k` cycles through single subtraction on one and two modes,
/// single addition and a mixed addition-subtraction pair.
fn circuit_ops(k: usize) -> (usize, Vec<LadderOp>) {
    match k % 4 {
        0 => (1, vec![LadderOp::annihilate(0)]),
        1 => (2, vec![LadderOp::annihilate(0)]),
        2 => (1, vec![LadderOp::create(0)]),
        _ => (2, vec![LadderOp::annihilate(1), LadderOp::create(0)]),
    }
}

pub(crate) fn run(v: &ValidateConfig, ctx: &Context) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut cases = Vec::new();
    for k in 0..v.circuits {
        let (n, ops) = circuit_ops(k);
        let params = random_layer(n, v, &mut rng);
        let alpha: Vec<f64> = (0..n)
            .map(|_| if v.alpha_max > 0.0 { rng.random_range(-v.alpha_max..=v.alpha_max) } else { 0.0 })
            .collect();
        let label = ops.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ");
        let layers = [NetworkLayer { params, ops: LayerOps { ops } }];
        let obs = all_strings(n, v.order);
        let (eng, norm_e) = evaluate_network(n, &layers, &alpha, obs.clone())?;
        let (orc, norm_o) = fock_network(n, v.cutoff, &layers, &alpha, &obs, v.leakage_threshold)?;
        let mut err = (norm_e - norm_o).abs() / norm_o.max(1.0);
        for (e, o) in eng.iter().zip(&orc) {
            err = err.max((e - o).norm() / o.norm().max(1.0));
        }
        cases.push(CaseReport { n_modes: n, ops: label, alpha, observables: obs.len(), max_error: err });
    }
    let max_error = cases.iter().map(|c| c.max_error).fold(0.0, f64::max);
    let failing = cases.iter().filter(|c| !(c.max_error <= v.tolerance)).count();
    let report =
        ValidationReport { seed: ctx.seed, config: v.clone(), max_error, failing, passed: failing == 0, cases };
    ensure_dir(&ctx.out)?;
    write_json(&ctx.out, "validate.json", &report)?;
    println!(
        "validate: {} circuits, cutoff {}, max relative error {max_error:.3e} (tolerance {:.1e}), {failing} failing",
        v.circuits, v.cutoff, v.tolerance
    );
    if failing > 0 {
        return Err(CliError::OracleMismatch(format!(
            "{failing}/{} circuits exceed {:.1e} (max {max_error:.3e})",
            v.circuits, v.tolerance
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn string_count() {
        // (2n)^1 + ... + (2n)^order
        assert_eq!(all_strings(1, 3).len(), 2 + 4 + 8);
        assert_eq!(all_strings(2, 2).len(), 4 + 16);
    }
}
