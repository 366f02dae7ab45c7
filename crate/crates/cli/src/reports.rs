//! Plan statistics, activation sweeps and synthesis targets.

use qonn_core::activations::{phi_addition_squeezed, phi_subtraction, tau};
use qonn_core::fock::{cubic_phase_targets, MOMENT_NAMES};
use qonn_core::ladder::{count_trace_expressions, PlanStats};
use qonn_core::model::{Qonn, QonnArchitecture};
use qonn_core::training::synthesis_alphas;
use serde::Serialize;

use crate::config::{ActivationConfig, ActivationKind, SynthTargets};
use crate::error::{config, io_at, Result};
use crate::output::{csv_writer, ensure_dir, num, write_json};
use crate::{Context, PlanStatsArgs};

/// Subtractions on modes `0, 1, ...` wrapping around `modes`, readout on
/// modes `0, 1, ...` likewise.
pub(crate) fn arch_from_flags(a: &PlanStatsArgs) -> Result<QonnArchitecture> {
    let n = a.modes.ok_or_else(|| config("--modes is required"))?;
    if n == 0 {
        return Err(config("--modes must be positive"));
    }
    let layers = a.layers.unwrap_or(1);
    let k = a.per_layer.unwrap_or(1);
    let o = a.observables.unwrap_or(1);
    let subs: Vec<Vec<usize>> = (0..layers).map(|_| (0..k).map(|i| i % n).collect()).collect();
    QonnArchitecture::quadratures(n, subs, (0..o).map(|j| j % n).collect()).map_err(|e| config(e.to_string()))
}

#[derive(Debug, Serialize)]
struct PlanReport {
    architecture: QonnArchitecture,
    /// `O (2N+1)^{2K(L−1)}`, defined when every layer has the same `K`.
    predicted_trace_expressions: Option<u128>,
    total_trace_expressions: usize,
    #[serde(flatten)]
    stats: PlanStats,
}

pub(crate) fn plan_stats(arch: &QonnArchitecture, ctx: &Context) -> Result<()> {
    let qonn = Qonn::new(arch.clone())?;
    let stats = qonn.plan_stats();
    let k = arch.subtractions[0].len();
    let uniform = arch.subtractions.iter().all(|s| s.len() == k);
    let report = PlanReport {
        architecture: arch.clone(),
        predicted_trace_expressions: uniform
            .then(|| count_trace_expressions(arch.n_outputs(), arch.n_modes, k, arch.n_layers())),
        total_trace_expressions: stats.total_trace_expressions(),
        stats,
    };
    ensure_dir(&ctx.out)?;
    write_json(&ctx.out, "plan_stats.json", &report)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

/// `alpha` then one `phi_r=…` column per r; subtraction sweeps add the
/// relative nonlinearity `tau_r=…`.
pub(crate) fn activation(a: &ActivationConfig, ctx: &Context) -> Result<()> {
    a.validate()?;
    ensure_dir(&ctx.out)?;
    let (mut w, path) = csv_writer(&ctx.out, "activation.csv")?;
    let mut header = vec!["alpha".to_string()];
    header.extend(a.r_values.iter().map(|r| format!("phi_r={r}")));
    if a.kind == ActivationKind::Subtraction {
        header.extend(a.r_values.iter().map(|r| format!("tau_r={r}")));
    }
    w.write_record(&header)?;
    let (lo, hi) = a.alpha_range;
    for i in 0..a.points {
        let x = lo + (hi - lo) * i as f64 / (a.points - 1) as f64;
        let mut row = vec![num(x)];
        match a.kind {
            ActivationKind::Subtraction => {
                row.extend(a.r_values.iter().map(|&r| num(phi_subtraction(x, r))));
                row.extend(a.r_values.iter().map(|&r| num(tau(x, r))));
            }
            ActivationKind::Addition => row.extend(a.r_values.iter().map(|&r| num(phi_addition_squeezed(x, r)))),
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(io_at(path))?;
    Ok(())
}

pub(crate) fn synth_targets(t: &SynthTargets, ctx: &Context) -> Result<()> {
    if t.samples == 0 {
        return Err(config("synth-targets needs at least one sample"));
    }
    let alphas = synthesis_alphas(t.samples);
    let moments = cubic_phase_targets(t.gamma, &alphas, t.cutoff)?;
    ensure_dir(&ctx.out)?;
    let (mut w, path) = csv_writer(&ctx.out, "synth_targets.csv")?;
    let mut header = vec!["alpha".to_string()];
    for m in MOMENT_NAMES {
        header.push(format!("{m}_re"));
        header.push(format!("{m}_im"));
    }
    w.write_record(&header)?;
    for (a, ms) in alphas.iter().zip(&moments) {
        let mut row = vec![num(*a)];
        for z in ms {
            row.push(num(z.re));
            row.push(num(z.im));
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(io_at(path))?;
    Ok(())
}
