use landscape::trainer::{TrajectoryLog, Trainer};

use super::{prepare, Prepared};
use crate::error::CliResult;
use crate::output::{divergence, write_run};
use crate::Common;

pub fn train_and_write(p: &Prepared) -> CliResult<TrajectoryLog> {
    let log = Trainer::new(&p.config, &p.train, &p.eval)?.run()?;
    write_run(&p.out, &log, true)?;
    Ok(log)
}

pub fn run(c: &Common) -> CliResult<()> {
    let p = prepare(c)?;
    let log = train_and_write(&p)?;
    divergence(&log, "training")
}
