//! CSV output for runs and comparisons. Missing values are empty cells;
//! survivor sets are `;`-separated worker indices, or `all`.

use std::io::Write;

use gradcode_core::sim::{Comparison, RunResult};
use gradcode_core::SurvivorSet;

use crate::error::CliResult;

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn survivors(s: &Option<SurvivorSet>) -> String {
    match s {
        None => "all".to_string(),
        Some(set) => set
            .indices()
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(";"),
    }
}

/// One row per iteration: `iteration, sim_time_s, loss, auc, survivors, strategy`.
pub fn write_run_csv<W: Write>(out: W, run: &RunResult) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "iteration",
        "sim_time_s",
        "loss",
        "auc",
        "survivors",
        "strategy",
    ])?;
    for t in &run.traces {
        w.write_record([
            t.iteration.to_string(),
            t.clock.to_string(),
            t.loss.to_string(),
            opt(t.auc),
            survivors(&t.survivors),
            run.strategy.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(out: W, cmp: &Comparison) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "label",
        "strategy",
        "iterations",
        "total_time_s",
        "mean_iteration_time_s",
        "final_loss",
        "final_auc",
        "replication_overhead",
        "loss_threshold",
        "iterations_to_threshold",
        "time_to_threshold_s",
    ])?;
    for r in &cmp.summary {
        w.write_record([
            r.label.clone(),
            r.strategy.clone(),
            r.iterations.to_string(),
            r.total_time.to_string(),
            r.mean_iteration_time.to_string(),
            r.final_loss.to_string(),
            r.final_auc.to_string(),
            r.replication_overhead.to_string(),
            r.loss_threshold.to_string(),
            r.iterations_to_threshold
                .map(|i| i.to_string())
                .unwrap_or_default(),
            opt(r.time_to_threshold),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-iteration series of every run, including the round length.
pub fn write_series_csv<W: Write>(out: W, cmp: &Comparison) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "iteration",
        "label",
        "iteration_time_s",
        "sim_time_s",
        "loss",
        "auc",
    ])?;
    for r in &cmp.series {
        w.write_record([
            r.iteration.to_string(),
            r.label.clone(),
            r.duration.to_string(),
            r.clock.to_string(),
            r.loss.to_string(),
            opt(r.auc),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Latest loss and AUC of every run on a shared grid of simulated time.
pub fn write_time_grid_csv<W: Write>(out: W, cmp: &Comparison) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sim_time_s", "label", "iterations_done", "loss", "auc"])?;
    for r in &cmp.time_grid {
        w.write_record([
            r.time.to_string(),
            r.label.clone(),
            r.iterations_done.to_string(),
            opt(r.loss),
            opt(r.auc),
        ])?;
    }
    w.flush()?;
    Ok(())
}
