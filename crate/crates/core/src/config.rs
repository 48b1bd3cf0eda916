//! Run configuration and its TOML form.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datasets::DataConfig;
use crate::error::{Error, Result};
use crate::mlp::MlpSpec;
use crate::trainer::Schedule;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    #[serde(default)]
    pub init: u64,
    #[serde(default)]
    pub data: u64,
    #[serde(default)]
    pub lanczos: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub total_epochs: usize,
    /// Epochs between spectrum evaluations. Defaults to 1 for runs of at
    /// most 300 epochs, 5 otherwise. The last epoch always gets one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum_cadence: Option<usize>,
    /// Dimension of the stored top eigenvector subspaces.
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_n_l")]
    pub n_l: usize,
    /// Restrict spectra to the parameters of the last `k` layers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduced_k: Option<usize>,
    /// Weight distance and misalignment are measured against the first
    /// spectrum epoch at or after this one.
    #[serde(default)]
    pub reference_epoch: usize,
    #[serde(default = "default_spike_delta")]
    pub spike_delta: f64,
    #[serde(default = "default_alpha")]
    pub n_eff_alpha: f64,
    /// Training halts once the loss exceeds this or becomes non-finite.
    #[serde(default = "default_divergence_loss")]
    pub divergence_loss: f64,
    /// Keep parameter snapshots every this many epochs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_every: Option<usize>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub dataset: DataConfig,
    pub model: MlpSpec,
    pub schedule: Schedule,
    #[serde(default)]
    pub seeds: Seeds,
}

fn default_m() -> usize {
    4
}

fn default_n_l() -> usize {
    100
}

fn default_spike_delta() -> f64 {
    0.5
}

fn default_alpha() -> f64 {
    1.0
}

fn default_divergence_loss() -> f64 {
    1e6
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

impl RunConfig {
    pub fn new(dataset: DataConfig, model: MlpSpec, schedule: Schedule, total_epochs: usize) -> Self {
        Self {
            total_epochs,
            spectrum_cadence: None,
            m: default_m(),
            n_l: default_n_l(),
            reduced_k: None,
            reference_epoch: 0,
            spike_delta: default_spike_delta(),
            n_eff_alpha: default_alpha(),
            divergence_loss: default_divergence_loss(),
            checkpoint_every: None,
            output_dir: default_output_dir(),
            dataset,
            model,
            schedule,
            seeds: Seeds::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::InvalidArgument(msg) => Error::invalid(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Sha-256 of the resolved TOML form, output directory excluded.
    pub fn hash(&self) -> String {
        let mut r = self.resolved();
        r.output_dir = default_output_dir();
        format!("{:x}", Sha256::digest(r.to_toml().as_bytes()))
    }

    pub fn cadence(&self) -> usize {
        self.spectrum_cadence
            .unwrap_or(if self.total_epochs <= 300 { 1 } else { 5 })
    }

    /// Copy with every defaulted choice written out.
    pub fn resolved(&self) -> Self {
        let mut r = self.clone();
        r.spectrum_cadence = Some(self.cadence());
        r
    }

    /// Dataset configuration with the run's data seed applied.
    pub fn data_config(&self) -> DataConfig {
        let mut d = self.dataset.clone();
        d.seed = self.seeds.data;
        d
    }

    pub fn spec(&self) -> Result<MlpSpec> {
        MlpSpec::new(self.model.widths().to_vec(), self.model.loss_kind())
    }

    pub fn validate(&self) -> Result<()> {
        let spec = self.spec()?;
        self.schedule.validate()?;
        self.dataset.validate()?;
        if self.total_epochs == 0 {
            return Err(Error::invalid("total_epochs must be at least 1"));
        }
        if self.spectrum_cadence == Some(0) {
            return Err(Error::invalid("spectrum_cadence must be at least 1"));
        }
        if self.checkpoint_every == Some(0) {
            return Err(Error::invalid("checkpoint_every must be at least 1"));
        }
        if self.n_l == 0 {
            return Err(Error::invalid("n_l must be at least 1"));
        }
        if self.m > self.n_l {
            return Err(Error::invalid(format!("m = {} exceeds n_l = {}", self.m, self.n_l)));
        }
        if let Some(k) = self.reduced_k {
            if k == 0 || k > spec.depth() {
                return Err(Error::invalid(format!("reduced_k = {k} outside 1..={}", spec.depth())));
            }
        }
        let dim = match self.reduced_k {
            Some(k) => spec.layout().prefix_len(k)?,
            None => spec.param_count(),
        };
        if self.n_l > dim {
            return Err(Error::invalid(format!("n_l = {} exceeds the operator dimension {dim}", self.n_l)));
        }
        if spec.input_width() == 0 || spec.output_width() != self.dataset.output_width() {
            return Err(Error::invalid(format!(
                "model output width {} does not match the dataset's {}",
                spec.output_width(),
                self.dataset.output_width()
            )));
        }
        if !(self.spike_delta > 0.0) || !(self.n_eff_alpha > 0.0) || !(self.divergence_loss > 0.0) {
            return Err(Error::invalid("spike_delta, n_eff_alpha and divergence_loss must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::DataKind;
    use crate::mlp::LossKind;

    fn sample() -> RunConfig {
        let mut c = RunConfig::new(
            DataConfig::new(DataKind::Wreg, 64, 0),
            MlpSpec::new(vec![1, 8, 1], LossKind::MeanSquaredError).unwrap(),
            Schedule::constant(0.05),
            10,
        );
        c.n_l = 20;
        c
    }

    #[test]
    fn toml_round_trip() {
        let c = sample().resolved();
        let back = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = sample().to_toml().replace("total_epochs", "total_epoch");
        assert!(RunConfig::from_toml(&text).is_err());
    }

    #[test]
    fn validation_catches_mismatches() {
        let mut c = sample();
        c.m = 200;
        assert!(c.validate().is_err());
        let mut c = sample();
        c.model = MlpSpec::new(vec![1, 8, 3], LossKind::MeanSquaredError).unwrap();
        assert!(c.validate().is_err());
        let mut c = sample();
        c.reduced_k = Some(3);
        assert!(c.validate().is_err());
        assert_eq!(sample().cadence(), 1);
    }
}
