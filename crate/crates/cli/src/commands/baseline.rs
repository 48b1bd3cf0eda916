use landscape::trainer::{compare_trajectories, csv_with_schema, par_map, Schedule, TrajectoryLog, Trainer};
use serde::Serialize;

use super::{check_etas, eta_dir, num, prepare, sweep_outcome, Prepared};
use crate::error::CliResult;
use crate::output::{write_run, OutputDir};
use crate::Common;

pub const COMPARE_SCHEMA: &str = "# schema: landscape-compare v1";
pub const COMPARE_COLUMNS: [&str; 4] = ["epoch", "grad_misalignment", "hessian_misalignment", "grad_norm_ratio"];

#[derive(Serialize)]
struct Member {
    eta: f64,
    dir: String,
    diverged_at: Option<usize>,
    compared_epochs: usize,
    mean_grad_misalignment: Option<f64>,
    mean_hessian_misalignment: Option<f64>,
}

#[derive(Serialize)]
struct Index {
    schema: &'static str,
    baseline_eta: f64,
    m: usize,
    runs: Vec<Member>,
}

fn train_member(p: &Prepared, eta: f64) -> CliResult<(OutputDir, TrajectoryLog)> {
    let mut cfg = p.config.clone();
    cfg.schedule = Schedule::constant(eta);
    let dir = p.out.sub(&eta_dir(eta))?;
    cfg.output_dir = dir.root().to_path_buf();
    let log = Trainer::new(&cfg, &p.train, &p.eval)?.run()?;
    write_run(&dir, &log, false)?;
    Ok((dir, log))
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

pub fn run(c: &Common, etas: &[f64], jobs: usize) -> CliResult<()> {
    check_etas(etas)?;
    let p = prepare(c)?;
    p.out.write_config(&p.config)?;
    let mut sorted = etas.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let base_eta = sorted[0];
    let (_, base) = train_member(&p, base_eta)?;
    let m = p.config.m.max(1);

    let member = |&eta: &f64| -> CliResult<Member> {
        let (dir, log) = if eta == base_eta { (p.out.sub(&eta_dir(eta))?, base.clone()) } else { train_member(&p, eta)? };
        let rows = compare_trajectories(&base, &log, m)?;
        let table = rows.iter().map(|r| {
            vec![
                r.epoch.to_string(),
                num(r.grad_misalignment),
                num(r.hessian_misalignment),
                num(r.grad_norm_ratio),
            ]
        });
        dir.write("compare.csv", &csv_with_schema(COMPARE_SCHEMA, &COMPARE_COLUMNS, table)?)?;
        Ok(Member {
            eta,
            dir: eta_dir(eta),
            diverged_at: log.diverged,
            compared_epochs: rows.len(),
            mean_grad_misalignment: mean(rows.iter().map(|r| r.grad_misalignment)),
            mean_hessian_misalignment: mean(rows.iter().map(|r| r.hessian_misalignment)),
        })
    };
    let runs = par_map(&sorted, jobs, member).into_iter().collect::<CliResult<Vec<_>>>()?;
    let diverged = runs.iter().filter(|r| r.diverged_at.is_some()).count();
    let total = runs.len();
    p.out.write_json(
        "index.json",
        &Index {
            schema: "landscape-compare-index v1",
            baseline_eta: base_eta,
            m,
            runs,
        },
    )?;
    sweep_outcome(diverged, total)
}
