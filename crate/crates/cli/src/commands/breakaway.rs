use landscape::trainer::{
    breakaway_experiment, csv_with_schema, detect_instabilities, metrics_csv, spearman, InstabilityEvent, Schedule, Trainer,
};
use serde::Serialize;

use super::{opt, prepare, sweep_outcome};
use crate::error::{CliError, CliResult};
use crate::Common;

pub const BREAKAWAY_SCHEMA: &str = "# schema: landscape-breakaway v1";

#[derive(Serialize)]
struct Summary {
    eta_high: f64,
    eta_low: f64,
    post_budget: usize,
    drops: Vec<usize>,
    diverged_drops: Vec<usize>,
    /// Rank correlation of drop epoch against worst-case λ_max.
    spearman: Option<f64>,
    /// Spikes of the shared high-η prefix.
    prefix_events: Vec<InstabilityEvent>,
}

pub fn run(
    c: &Common,
    drops: &[usize],
    post_budget: usize,
    eta_high: Option<f64>,
    eta_low: Option<f64>,
    jobs: usize,
) -> CliResult<()> {
    let mut p = prepare(c)?;
    let eta_high = eta_high.unwrap_or_else(|| p.config.schedule.max_eta());
    let eta_low = eta_low.unwrap_or(eta_high / 10.0);
    let last = *drops.iter().max().ok_or_else(|| CliError::Config("no drop epochs".into()))?;
    // record what actually runs: the longest branch
    p.config.schedule = Schedule::delayed_drop(eta_high, eta_low, last);
    p.config.total_epochs = last + post_budget;
    p.config.schedule.validate()?;
    p.out.write_config(&p.config)?;

    let mut sorted = drops.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let trainer = Trainer::new(&p.config, &p.train, &p.eval)?.without_snapshots();
    let rows = breakaway_experiment(&trainer, eta_high, eta_low, &sorted, post_budget, jobs)?;

    let table = rows.iter().map(|r| vec![r.drop_epoch.to_string(), opt(r.worst_case_lambda_max), r.diverged.to_string()]);
    p.out.write(
        "breakaway.csv",
        &csv_with_schema(BREAKAWAY_SCHEMA, &["drop_epoch", "worst_case_lambda_max", "diverged"], table)?,
    )?;
    for r in &rows {
        p.out.write(&format!("branches/drop-{:06}.csv", r.drop_epoch), &metrics_csv(&r.records)?)?;
    }

    let finite: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| !r.diverged)
        .filter_map(|r| r.worst_case_lambda_max.map(|w| (r.drop_epoch as f64, w)))
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = finite.into_iter().unzip();
    let rho = if xs.len() >= 2 { spearman(&xs, &ys).ok().filter(|r| r.is_finite()) } else { None };
    let last_row = rows.last().expect("at least one drop");
    let prefix: Vec<_> = last_row.records.iter().take_while(|r| r.epoch < last_row.drop_epoch).copied().collect();
    let diverged_drops: Vec<usize> = rows.iter().filter(|r| r.diverged).map(|r| r.drop_epoch).collect();
    p.out.write_json(
        "summary.json",
        &Summary {
            eta_high,
            eta_low,
            post_budget,
            drops: sorted,
            diverged_drops: diverged_drops.clone(),
            spearman: rho,
            prefix_events: detect_instabilities(&prefix, p.config.spike_delta)?,
        },
    )?;
    sweep_outcome(diverged_drops.len(), rows.len())
}
