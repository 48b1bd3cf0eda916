use std::collections::BTreeMap;

use landscape::trainer::{par_map, Schedule, Trainer};
use serde::Serialize;

use super::{check_etas, eta_dir, prepare, sweep_outcome, write_similarity};
use crate::error::{CliError, CliResult};
use crate::output::write_run;
use crate::Common;

#[derive(Serialize)]
pub struct Member {
    pub eta: f64,
    pub dir: String,
    pub diverged_at: Option<usize>,
    /// Mean off-diagonal S over the second half of training, keyed by m.
    pub last_half_mean_s: BTreeMap<usize, Option<f64>>,
}

#[derive(Serialize)]
struct Index {
    schema: &'static str,
    init_seed: u64,
    ms: Vec<usize>,
    runs: Vec<Member>,
}

pub fn run(c: &Common, etas: &[f64], ms: &[usize], jobs: usize) -> CliResult<()> {
    check_etas(etas)?;
    let mut p = prepare(c)?;
    let m_max = *ms.iter().max().ok_or_else(|| CliError::Config("no subspace dimensions".into()))?;
    if ms.contains(&0) {
        return Err(CliError::Config("subspace dimensions must be at least 1".into()));
    }
    p.config.m = m_max;
    p.config.validate()?;
    p.out.write_config(&p.config)?;

    let member = |&eta: &f64| -> CliResult<Member> {
        let mut cfg = p.config.clone();
        cfg.schedule = Schedule::constant(eta);
        let dir = p.out.sub(&eta_dir(eta))?;
        cfg.output_dir = dir.root().to_path_buf();
        let log = Trainer::new(&cfg, &p.train, &p.eval)?.run()?;
        write_run(&dir, &log, false)?;
        let mut means = BTreeMap::new();
        for &m in ms {
            let mean = write_similarity(&dir, &log, m, &format!("similarity-m{m}"), &format!("eta = {eta}, m = {m}"))?;
            means.insert(m, mean);
        }
        Ok(Member {
            eta,
            dir: eta_dir(eta),
            diverged_at: log.diverged,
            last_half_mean_s: means,
        })
    };
    let runs = par_map(etas, jobs, member).into_iter().collect::<CliResult<Vec<_>>>()?;
    let diverged = runs.iter().filter(|r| r.diverged_at.is_some()).count();
    let total = runs.len();
    p.out.write_json(
        "index.json",
        &Index {
            schema: "landscape-similarity-index v1",
            init_seed: p.config.seeds.init,
            ms: ms.to_vec(),
            runs,
        },
    )?;
    sweep_outcome(diverged, total)
}
