pub mod baseline;
pub mod breakaway;
pub mod cyclic;
pub mod fetch;
pub mod oracle;
pub mod perturb;
pub mod phases;
pub mod similarity;
pub mod train;

use landscape::datasets::load;
use landscape::geometry::{similarity_matrix, SimilarityMatrix, SubspaceBasis};
use landscape::mlp::Dataset;
use landscape::trainer::{csv_with_schema, TrajectoryLog};
use landscape::RunConfig;

use crate::error::{CliError, CliResult};
use crate::heatmap::emit_heatmap_svg;
use crate::output::{resolve_output_dir, OutputDir};
use crate::Common;

pub const SIMILARITY_SCHEMA: &str = "# schema: landscape-similarity v1";

/// A loaded config, its output directory and its data.
pub struct Prepared {
    pub config: RunConfig,
    pub out: OutputDir,
    pub train: Dataset,
    pub eval: Dataset,
}

pub fn prepare(c: &Common) -> CliResult<Prepared> {
    let mut config = RunConfig::load(&c.config)?;
    let out = OutputDir::create(resolve_output_dir(&config.output_dir, c.output_dir.as_deref()))?;
    config.output_dir = out.root().to_path_buf();
    let (train, eval) = load(&config.data_config())?;
    Ok(Prepared { config, out, train, eval })
}

pub fn num(x: f64) -> String {
    x.to_string()
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Directory name of a sweep member, e.g. `eta-0.05`.
pub fn eta_dir(eta: f64) -> String {
    format!("eta-{eta}")
}

pub fn check_etas(etas: &[f64]) -> CliResult<()> {
    if etas.is_empty() {
        return Err(CliError::Config("at least one learning rate is required".into()));
    }
    if let Some(bad) = etas.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        return Err(CliError::Config(format!("learning rates must be positive, got {bad}")));
    }
    Ok(())
}

pub fn similarity_csv(sm: &SimilarityMatrix) -> CliResult<Vec<u8>> {
    let mut header = vec!["epoch".to_string()];
    header.extend(sm.labels.iter().map(|l| l.to_string()));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = (0..sm.len()).map(|i| {
        let mut row = vec![sm.labels[i].to_string()];
        row.extend((0..sm.len()).map(|j| num(sm.get(i, j))));
        row
    });
    Ok(csv_with_schema(SIMILARITY_SCHEMA, &header, rows)?)
}

/// Similarity of the leading `m` directions of every snapshot, written as
/// `<stem>.csv` and `<stem>.svg`. Returns the mean off-diagonal S over the
/// snapshots from the second half of the run.
pub fn write_similarity(dir: &OutputDir, log: &TrajectoryLog, m: usize, stem: &str, title: &str) -> CliResult<Option<f64>> {
    if log.subspace_snapshots.is_empty() {
        return Ok(None);
    }
    let snaps = log
        .subspace_snapshots
        .iter()
        .map(|s| s.leading(m))
        .collect::<landscape::Result<Vec<SubspaceBasis>>>()?;
    let sm = similarity_matrix(&snaps)?;
    dir.write(&format!("{stem}.csv"), &similarity_csv(&sm)?)?;
    let svg = emit_heatmap_svg(&sm, &log.lambda_max_series(), title)?;
    dir.write(&format!("{stem}.svg"), svg.as_bytes())?;
    Ok(last_half_mean(&sm, log.config.total_epochs))
}

pub fn last_half_mean(sm: &SimilarityMatrix, total_epochs: usize) -> Option<f64> {
    let idx: Vec<usize> = (0..sm.len()).filter(|&i| sm.labels[i] >= total_epochs / 2).collect();
    sm.mean_off_diagonal(&idx)
}

/// Sweeps report member divergence in their index and fail only when no
/// member finished.
pub fn sweep_outcome(diverged: usize, members: usize) -> CliResult<()> {
    if members > 0 && diverged == members {
        Err(CliError::Diverged(format!("all {members} runs diverged")))
    } else {
        Ok(())
    }
}
