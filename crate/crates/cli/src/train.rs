//! `run` for the curvefit, classify and synth tasks.

use std::time::Instant;

use qonn_core::fock::MOMENT_NAMES;
use qonn_core::model::{Forward, Qonn, QonnArchitecture};
use qonn_core::training::{
    evaluate_split, fit, make_dataset, Dataset, DatasetKind, FitResult, LossKind, QonnObjective, Split, SplitMetrics,
    Targets,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{config, Result};
use crate::output::{csv_writer, ensure_dir, num, write_json, write_jsonl};
use crate::Context;

#[derive(Debug, Serialize)]
struct Metrics {
    task: &'static str,
    seed: u64,
    loss: LossKind,
    param_count: usize,
    best_restart: usize,
    train: SplitMetrics,
    val: Option<SplitMetrics>,
    test: SplitMetrics,
    restarts: Vec<qonn_core::training::RestartSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_time: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Timing {
    dataset: f64,
    fit: f64,
    evaluation: f64,
    total: f64,
    threads: usize,
}

#[derive(Debug, Serialize)]
struct SavedParams<'a> {
    architecture: &'a QonnArchitecture,
    loss: LossKind,
    train_loss: f64,
    val_loss: Option<f64>,
    params: &'a [f64],
}

pub(crate) fn run(cfg: &RunConfig, kind: &DatasetKind, ctx: &Context) -> Result<()> {
    let t0 = Instant::now();
    let arch = cfg.architecture()?;
    let data = make_dataset(kind, ctx.seed)?;
    let t_data = t0.elapsed().as_secs_f64();

    let qonn = Qonn::new(arch)?;
    let mut train_cfg = cfg.training.clone();
    train_cfg.seed = ctx.seed;
    let loss = train_cfg.loss.unwrap_or_else(|| qonn_core::training::default_loss(&data.train.targets));
    QonnObjective::new(&qonn, &data.train, loss)
        .map_err(|e| config(format!("architecture and dataset do not fit together: {e}")))?;

    let t1 = Instant::now();
    let result = fit(&qonn, &data, &train_cfg)?;
    let t_fit = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let train = evaluate_split(&qonn, &result.params, &data.train, loss)?;
    let val = if data.val.is_empty() { None } else { Some(evaluate_split(&qonn, &result.params, &data.val, loss)?) };
    let test = evaluate_split(&qonn, &result.params, &data.test, loss)?;
    let test_forward = qonn.forward_batch(&result.params, &data.test.inputs)?;

    ensure_dir(&ctx.out)?;
    write_predictions(ctx, &data, &test_forward)?;
    if let Targets::Moments(_) = data.test.targets {
        write_moment_table(ctx, &data.test, &test_forward)?;
    }
    write_jsonl(&ctx.out, "trace.jsonl", &result.trace)?;
    write_params(ctx, &qonn, &result)?;
    let t_eval = t2.elapsed().as_secs_f64();

    let total = t0.elapsed().as_secs_f64();
    let metrics = Metrics {
        task: cfg.task.name(),
        seed: ctx.seed,
        loss,
        param_count: qonn.architecture().param_count(),
        best_restart: result.best_restart,
        train,
        val,
        test,
        restarts: result.restarts.clone(),
        wall_time: (!ctx.deterministic).then_some(total),
    };
    write_json(&ctx.out, "metrics.json", &metrics)?;
    let timing =
        Timing { dataset: t_data, fit: t_fit, evaluation: t_eval, total, threads: rayon::current_num_threads() };
    write_json(&ctx.out, "timing.json", &timing)?;
    Ok(())
}

fn write_params(ctx: &Context, qonn: &Qonn, result: &FitResult) -> Result<()> {
    let saved = SavedParams {
        architecture: qonn.architecture(),
        loss: result.loss,
        train_loss: result.train_loss,
        val_loss: result.val_loss,
        params: &result.params,
    };
    write_json(&ctx.out, "params.json", &saved)?;
    Ok(())
}

/// Test-split predictions. Regression and classification rows are in raw
/// input units; regression targets and predictions are mapped back through
/// the output rescaler.
fn write_predictions(ctx: &Context, data: &Dataset, fw: &[Forward]) -> Result<()> {
    let (mut w, _) = csv_writer(&ctx.out, "predictions.csv")?;
    let split = &data.test;
    let dim = split.inputs.first().map_or(0, Vec::len);
    let xs: Vec<String> = if dim == 1 { vec!["x".into()] } else { (0..dim).map(|k| format!("x{k}")).collect() };
    match &split.targets {
        Targets::Values(targets) => {
            let outs = targets.first().map_or(0, Vec::len);
            let mut header = xs.clone();
            for k in 0..outs {
                let sfx = if outs == 1 { String::new() } else { k.to_string() };
                header.push(format!("target{sfx}"));
                header.push(format!("prediction{sfx}"));
            }
            header.push("herald_norm".into());
            w.write_record(&header)?;
            for ((x, t), f) in split.inputs.iter().zip(targets).zip(fw) {
                let pred = f.quadratures();
                let (t, pred) = match &data.output_scale {
                    Some(s) => (s.invert(t), s.invert(&pred)),
                    None => (t.clone(), pred),
                };
                let mut row: Vec<String> = data.input_scale.invert(x).into_iter().map(num).collect();
                for (a, b) in t.iter().zip(&pred) {
                    row.push(num(*a));
                    row.push(num(*b));
                }
                row.push(num(f.norm));
                w.write_record(&row)?;
            }
        }
        Targets::Labels { labels, n_classes } => {
            let mut header = xs.clone();
            header.push("label".into());
            header.push("predicted".into());
            header.extend((0..*n_classes).map(|c| format!("out{c}")));
            header.push("herald_norm".into());
            w.write_record(&header)?;
            for ((x, l), f) in split.inputs.iter().zip(labels).zip(fw) {
                let q = f.quadratures();
                let mut row: Vec<String> = data.input_scale.invert(x).into_iter().map(num).collect();
                row.push(l.to_string());
                row.push(argmax(&q).to_string());
                row.extend(q.iter().copied().map(num));
                row.push(num(f.norm));
                w.write_record(&row)?;
            }
        }
        Targets::Moments(_) => {
            let mut header = vec!["alpha".to_string()];
            for m in MOMENT_NAMES {
                header.push(format!("{m}_re"));
                header.push(format!("{m}_im"));
            }
            header.push("herald_norm".into());
            w.write_record(&header)?;
            for (x, f) in split.inputs.iter().zip(fw) {
                let mut row = vec![num(x[0])];
                for z in &f.expectations {
                    row.push(num(z.re));
                    row.push(num(z.im));
                }
                row.push(num(f.norm));
                w.write_record(&row)?;
            }
        }
    }
    w.flush().map_err(crate::error::io_at(ctx.out.join("predictions.csv")))?;
    Ok(())
}

/// Learned against target moments, one row per (α, moment).
fn write_moment_table(ctx: &Context, split: &Split, fw: &[Forward]) -> Result<()> {
    let Targets::Moments(targets) = &split.targets else { return Ok(()) };
    let (mut w, path) = csv_writer(&ctx.out, "moments.csv")?;
    w.write_record(["alpha", "moment", "target_re", "target_im", "learned_re", "learned_im"])?;
    for ((x, t), f) in split.inputs.iter().zip(targets).zip(fw) {
        for ((name, tv), lv) in MOMENT_NAMES.iter().zip(t).zip(&f.expectations) {
            w.write_record([num(x[0]), name.to_string(), num(tv.re), num(tv.im), num(lv.re), num(lv.im)])?;
        }
    }
    w.flush().map_err(crate::error::io_at(path))?;
    Ok(())
}

fn argmax(v: &[f64]) -> usize {
    v.iter().enumerate().fold(0, |best, (i, x)| if *x > v[best] { i } else { best })
}
