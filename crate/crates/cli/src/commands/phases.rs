use landscape::spectral::bulk_variance_proxy;
use landscape::trainer::{csv_with_schema, detect_instabilities, InstabilityEvent};
use serde::Serialize;

use super::train::train_and_write;
use super::{num, opt, prepare};
use crate::error::CliResult;
use crate::output::divergence;
use crate::Common;

pub const PHASES_SCHEMA: &str = "# schema: landscape-phases v1";
pub const PHASES_COLUMNS: [&str; 11] = [
    "epoch",
    "eta",
    "train_loss",
    "eval_loss",
    "misalignment_to_ref",
    "grad_norm",
    "bulk_variance_proxy",
    "lambda_max",
    "n_eff",
    "weight_dist_to_ref",
    "phase",
];

#[derive(Serialize)]
struct Events<'a> {
    schema: &'static str,
    spike_delta: f64,
    reference_epoch: Option<usize>,
    events: &'a [InstabilityEvent],
}

fn phase(events: &[InstabilityEvent], epoch: usize) -> &'static str {
    for e in events {
        if e.heating().contains(&epoch) {
            return "heating";
        }
        if e.cooling().contains(&epoch) {
            return "cooling";
        }
    }
    ""
}

pub fn run(c: &Common) -> CliResult<()> {
    let p = prepare(c)?;
    let log = train_and_write(&p)?;
    let events = detect_instabilities(&log.records, p.config.spike_delta)?;
    p.out.write_json(
        "events.json",
        &Events {
            schema: "landscape-events v1",
            spike_delta: p.config.spike_delta,
            reference_epoch: log.reference_epoch,
            events: &events,
        },
    )?;
    let rows = log.records.iter().map(|r| {
        let s = r.spectrum;
        vec![
            r.epoch.to_string(),
            num(r.eta),
            num(r.train_loss),
            num(r.eval_loss),
            opt(s.and_then(|s| s.misalignment_to_ref)),
            num(r.grad_norm),
            opt(s.map(|s| bulk_variance_proxy(&[s.lambda_neg_max]))),
            opt(s.map(|s| s.lambda_max)),
            opt(s.map(|s| s.n_eff)),
            opt(s.and_then(|s| s.weight_dist_to_ref)),
            phase(&events, r.epoch).to_string(),
        ]
    });
    p.out.write("phases.csv", &csv_with_schema(PHASES_SCHEMA, &PHASES_COLUMNS, rows)?)?;
    divergence(&log, "training")
}
