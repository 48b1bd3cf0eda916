use std::fs;
use std::path::{Path, PathBuf};

use landscape::geometry::SubspaceBasis;
use landscape::trainer::{metrics_csv, save_checkpoint, write_atomic, CheckpointMeta, TrajectoryLog};
use landscape::RunConfig;
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Environment variable naming the root for relative output directories.
pub const OUTPUT_ROOT_ENV: &str = "LANDSCAPE_OUTPUT_ROOT";

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"LSSB";

/// `--output-dir` if given, else the config's directory, placed under
/// `$LANDSCAPE_OUTPUT_ROOT` when that is set and the path is relative.
pub fn resolve_output_dir(configured: &Path, cli_override: Option<&Path>) -> PathBuf {
    if let Some(p) = cli_override {
        return p.to_path_buf();
    }
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if configured.is_relative() => PathBuf::from(root).join(configured),
        _ => configured.to_path_buf(),
    }
}

#[derive(Clone, Debug)]
pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: impl Into<PathBuf>) -> CliResult<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| CliError::io(&root, e))?;
        let root = fs::canonicalize(&root).map_err(|e| CliError::io(&root, e))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn sub(&self, name: &str) -> CliResult<Self> {
        Self::create(self.root.join(name))
    }

    pub fn write(&self, rel: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        write_atomic(&path, bytes).map_err(CliError::from)
    }

    pub fn write_json(&self, rel: &str, value: &impl Serialize) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Failed(e.to_string()))?;
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    /// `config.resolved`: the TOML form with every default written out.
    pub fn write_config(&self, config: &RunConfig) -> CliResult<()> {
        let mut c = config.resolved();
        c.output_dir = self.root.clone();
        self.write("config.resolved", c.to_toml().as_bytes())
    }
}

/// Binary dump of subspace snapshots: magic, `u32` version 1, `u32` count,
/// then per snapshot `u64` epoch, `u32` m, `u64` N and `m × N` f64, all
/// little-endian.
pub fn encode_snapshots(snaps: &[SubspaceBasis]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&1u32.to_le_bytes());
    out.extend_from_slice(&(snaps.len() as u32).to_le_bytes());
    for s in snaps {
        out.extend_from_slice(&(s.epoch_tag.unwrap_or(0) as u64).to_le_bytes());
        out.extend_from_slice(&(s.dim() as u32).to_le_bytes());
        out.extend_from_slice(&(s.ambient_dim() as u64).to_le_bytes());
        for v in s.basis().as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

#[derive(Serialize)]
pub struct RunSummary {
    pub epochs_completed: usize,
    pub diverged_at: Option<usize>,
    pub final_train_loss: Option<f64>,
    pub max_lambda_max: Option<f64>,
    pub config_hash: String,
}

impl RunSummary {
    pub fn of(log: &TrajectoryLog) -> Self {
        Self {
            epochs_completed: log.records.len(),
            diverged_at: log.diverged,
            final_train_loss: log.records.last().map(|r| r.train_loss),
            max_lambda_max: log.lambda_max_series().into_iter().map(|(_, l)| l).reduce(f64::max),
            config_hash: log.config.hash(),
        }
    }
}

/// Metrics, checkpoints, snapshots and summary of one run.
pub fn write_run(dir: &OutputDir, log: &TrajectoryLog, snapshots: bool) -> CliResult<()> {
    dir.write_config(&log.config)?;
    dir.write("metrics.csv", &metrics_csv(&log.records)?)?;
    let hash = log.config.hash();
    let total = log.config.total_epochs;
    for (&epoch, params) in &log.checkpoints {
        let eta = log.config.schedule.eta(epoch.min(total.saturating_sub(1)), total);
        let meta = CheckpointMeta {
            epoch,
            eta,
            seed: log.config.seeds.init,
            config_hash: hash.clone(),
        };
        let path = dir.path(&format!("checkpoints/epoch-{epoch:06}.ckpt"));
        fs::create_dir_all(path.parent().unwrap()).map_err(|e| CliError::io(&path, e))?;
        save_checkpoint(&path, params, &meta)?;
    }
    if snapshots && !log.subspace_snapshots.is_empty() {
        dir.write("snapshots.bin", &encode_snapshots(&log.subspace_snapshots))?;
    }
    dir.write_json("summary.json", &RunSummary::of(log))
}

/// Error to return once a diverged run's artifacts are on disk.
pub fn divergence(log: &TrajectoryLog, what: &str) -> CliResult<()> {
    match log.diverged {
        Some(epoch) => Err(CliError::Diverged(format!(
            "{what} diverged at epoch {epoch}; artifacts kept in {}",
            log.config.output_dir.display()
        ))),
        None => Ok(()),
    }
}
