use landscape::trainer::{par_map, Schedule, Trainer};
use serde::Serialize;

use super::{check_etas, prepare, sweep_outcome, write_similarity};
use crate::error::CliResult;
use crate::output::write_run;
use crate::Common;

#[derive(Serialize)]
struct Cell {
    eta_plus: f64,
    eta_minus: f64,
    dir: String,
    diverged_at: Option<usize>,
    last_half_mean_s: Option<f64>,
}

#[derive(Serialize)]
struct Index {
    schema: &'static str,
    high_len: usize,
    low_len: usize,
    tail_len: usize,
    cells: Vec<Cell>,
}

pub fn run(c: &Common, eta_plus: &[f64], eta_minus: &[f64], jobs: usize) -> CliResult<()> {
    check_etas(eta_plus)?;
    check_etas(eta_minus)?;
    let p = prepare(c)?;
    p.out.write_config(&p.config)?;
    // lengths come from a cyclic config schedule, else the defaults
    let template = match p.config.schedule {
        s @ Schedule::Cyclic { .. } => s,
        _ => Schedule::cyclic(1.0, 1.0),
    };
    let Schedule::Cyclic {
        high_len,
        low_len,
        tail_len,
        ..
    } = template
    else {
        unreachable!("template is cyclic")
    };
    let grid: Vec<(f64, f64)> = eta_minus.iter().flat_map(|&lo| eta_plus.iter().map(move |&hi| (hi, lo))).collect();

    let cell = |&(hi, lo): &(f64, f64)| -> CliResult<Cell> {
        let name = format!("plus-{hi}-minus-{lo}");
        let dir = p.out.sub(&name)?;
        let mut cfg = p.config.clone();
        cfg.schedule = Schedule::Cyclic {
            eta_plus: hi,
            eta_minus: lo,
            high_len,
            low_len,
            tail_len,
        };
        cfg.schedule.validate()?;
        cfg.output_dir = dir.root().to_path_buf();
        let log = Trainer::new(&cfg, &p.train, &p.eval)?.run()?;
        write_run(&dir, &log, false)?;
        let mean = write_similarity(&dir, &log, 1, "similarity-vmax", &format!("eta+ = {hi}, eta- = {lo}, v_max"))?;
        Ok(Cell {
            eta_plus: hi,
            eta_minus: lo,
            dir: name,
            diverged_at: log.diverged,
            last_half_mean_s: mean,
        })
    };
    let cells = par_map(&grid, jobs, cell).into_iter().collect::<CliResult<Vec<_>>>()?;
    let diverged = cells.iter().filter(|c| c.diverged_at.is_some()).count();
    let total = cells.len();
    p.out.write_json(
        "index.json",
        &Index {
            schema: "landscape-cyclic-index v1",
            high_len,
            low_len,
            tail_len,
            cells,
        },
    )?;
    sweep_outcome(diverged, total)
}
