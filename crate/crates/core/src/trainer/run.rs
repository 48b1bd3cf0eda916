use std::collections::BTreeMap;

use serde::Serialize;

use crate::config::RunConfig;
use crate::datasets::load;
use crate::error::{Error, Result};
use crate::geometry::{misalignment, SubspaceBasis};
use crate::linalg::norm;
use crate::mlp::{init_params, loss, Dataset, Evaluation, MlpSpec, ParamVector};
use crate::spectral::{effective_dimensionality, lanczos, HessianOperator, LanczosConfig, SpectrumResult};

use super::{weight_distance, Schedule};

/// Quantities only measured on spectrum epochs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectrumRecord {
    pub lambda_max: f64,
    /// Smallest Ritz value.
    pub lambda_neg_max: f64,
    pub n_eff: f64,
    /// `‖w(t_0) - w(t)‖`; absent before the reference epoch.
    pub weight_dist_to_ref: Option<f64>,
    /// `S(V*_0, V*_t)`; absent before the reference epoch.
    pub misalignment_to_ref: Option<f64>,
    /// Leading Ritz pairs meeting the residual tolerance.
    pub ritz_converged: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub eta: f64,
    pub train_loss: f64,
    pub eval_loss: f64,
    pub grad_norm: f64,
    pub spectrum: Option<SpectrumRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryLog {
    pub config: RunConfig,
    pub reference_epoch: Option<usize>,
    pub records: Vec<EpochRecord>,
    /// Top-`m` subspaces of the spectrum epochs, tagged with their epoch.
    pub subspace_snapshots: Vec<SubspaceBasis>,
    /// Full gradients of the spectrum epochs.
    pub gradient_snapshots: Vec<(usize, Vec<f64>)>,
    /// Parameters at the start of the keyed epoch: every `checkpoint_every`
    /// epochs, the reference epoch, and the final parameters under
    /// `total_epochs`.
    pub checkpoints: BTreeMap<usize, ParamVector>,
    pub diverged: Option<usize>,
}

impl TrajectoryLog {
    pub fn new(config: RunConfig) -> Self {
        Self {
            config,
            records: Vec::new(),
            subspace_snapshots: Vec::new(),
            gradient_snapshots: Vec::new(),
            checkpoints: BTreeMap::new(),
            reference_epoch: None,
            diverged: None,
        }
    }

    pub fn spectrum_epochs(&self) -> Vec<usize> {
        self.records.iter().filter(|r| r.spectrum.is_some()).map(|r| r.epoch).collect()
    }

    pub fn snapshot(&self, epoch: usize) -> Option<&SubspaceBasis> {
        self.subspace_snapshots.iter().find(|s| s.epoch_tag == Some(epoch))
    }

    pub fn gradient(&self, epoch: usize) -> Option<&[f64]> {
        self.gradient_snapshots.iter().find(|(e, _)| *e == epoch).map(|(_, g)| g.as_slice())
    }

    pub fn lambda_max_series(&self) -> Vec<(usize, f64)> {
        self.records
            .iter()
            .filter_map(|r| r.spectrum.map(|s| (r.epoch, s.lambda_max)))
            .collect()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.train_loss).collect()
    }
}

/// The reference point `t_0` for distances.
#[derive(Clone, Debug, PartialEq)]
pub struct Reference {
    pub epoch: usize,
    pub params: ParamVector,
    pub basis: SubspaceBasis,
}

/// Everything needed to continue a run from the start of `epoch`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub epoch: usize,
    pub params: ParamVector,
    pub reference: Option<Reference>,
}

/// Full-batch gradient descent with per-epoch instrumentation.
pub struct Trainer<'d> {
    config: RunConfig,
    spec: MlpSpec,
    train: &'d Dataset,
    eval: &'d Dataset,
    keep_snapshots: bool,
}

impl<'d> Trainer<'d> {
    pub fn new(config: &RunConfig, train: &'d Dataset, eval: &'d Dataset) -> Result<Self> {
        config.validate()?;
        let spec = config.spec()?;
        train.check_spec(&spec)?;
        eval.check_spec(&spec)?;
        Ok(Self {
            config: config.resolved(),
            spec,
            train,
            eval,
            keep_snapshots: true,
        })
    }

    /// Skip storing subspace and gradient snapshots (records only).
    pub fn without_snapshots(mut self) -> Self {
        self.keep_snapshots = false;
        self
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn train_data(&self) -> &Dataset {
        self.train
    }

    pub fn initial_state(&self) -> TrainState {
        TrainState {
            epoch: 0,
            params: init_params(&self.spec, self.config.seeds.init),
            reference: None,
        }
    }

    /// State at the start of `epoch` rebuilt from saved parameters. The
    /// reference subspace is recomputed from the reference parameters, which
    /// reproduces it exactly.
    pub fn resume(&self, epoch: usize, params: ParamVector, reference: Option<(usize, ParamVector)>) -> Result<TrainState> {
        params.check_spec(&self.spec)?;
        let reference = match reference {
            Some((ref_epoch, ref_params)) => {
                ref_params.check_spec(&self.spec)?;
                let eval = Evaluation::new(&self.spec, &ref_params, self.train)?;
                let (_, basis) = self.spectrum(&eval)?;
                Some(Reference {
                    epoch: ref_epoch,
                    params: ref_params,
                    basis: basis.with_epoch(ref_epoch),
                })
            }
            None => None,
        };
        Ok(TrainState {
            epoch,
            params,
            reference,
        })
    }

    pub fn run(&self) -> Result<TrajectoryLog> {
        let mut state = self.initial_state();
        let mut log = TrajectoryLog::new(self.config.clone());
        self.advance(&mut state, &mut log, &self.config.schedule, self.config.total_epochs, self.config.total_epochs)?;
        Ok(log)
    }

    pub fn is_spectrum_epoch(&self, epoch: usize, total_epochs: usize) -> bool {
        epoch % self.config.cadence() == 0 || epoch + 1 == total_epochs
    }

    /// Trains from `state` up to (not including) epoch `until` of a
    /// `total_epochs` run under `schedule`. Returns `false` when the run
    /// diverged.
    pub fn advance(
        &self,
        state: &mut TrainState,
        log: &mut TrajectoryLog,
        schedule: &Schedule,
        total_epochs: usize,
        until: usize,
    ) -> Result<bool> {
        while state.epoch < until.min(total_epochs) {
            if !self.step(state, log, schedule, total_epochs)? {
                return Ok(false);
            }
        }
        if state.epoch == total_epochs {
            log.checkpoints.insert(total_epochs, state.params.clone());
        }
        Ok(true)
    }

    fn step(&self, state: &mut TrainState, log: &mut TrajectoryLog, schedule: &Schedule, total: usize) -> Result<bool> {
        let epoch = state.epoch;
        let eta = schedule.eta(epoch, total);
        let eval = Evaluation::new(&self.spec, &state.params, self.train)?;
        let train_loss = eval.loss();
        let grad = eval.gradient();
        let grad_norm = norm(grad.as_slice());
        let eval_loss = loss(&self.spec, &state.params, self.eval)?;

        let mut record = EpochRecord {
            epoch,
            eta,
            train_loss,
            eval_loss,
            grad_norm,
            spectrum: None,
        };
        if !(train_loss.is_finite() && train_loss <= self.config.divergence_loss && grad_norm.is_finite()) {
            log.records.push(record);
            log.diverged = Some(epoch);
            return Ok(false);
        }

        if let Some(every) = self.config.checkpoint_every {
            if epoch % every == 0 {
                log.checkpoints.insert(epoch, state.params.clone());
            }
        }

        if self.is_spectrum_epoch(epoch, total) {
            let (spectrum, basis) = self.spectrum(&eval)?;
            let basis = basis.with_epoch(epoch);
            if state.reference.is_none() && epoch >= self.config.reference_epoch {
                log.checkpoints.insert(epoch, state.params.clone());
                log.reference_epoch = Some(epoch);
                state.reference = Some(Reference {
                    epoch,
                    params: state.params.clone(),
                    basis: basis.clone(),
                });
            }
            let (dist, mis) = match &state.reference {
                Some(r) => (
                    Some(weight_distance(&r.params, &state.params)?),
                    Some(misalignment(&r.basis, &basis)?),
                ),
                None => (None, None),
            };
            record.spectrum = Some(SpectrumRecord {
                lambda_max: spectrum.lambda_max(),
                lambda_neg_max: spectrum.lambda_min(),
                n_eff: effective_dimensionality(spectrum.ritz_values(), self.config.n_eff_alpha)?,
                weight_dist_to_ref: dist,
                misalignment_to_ref: mis,
                ritz_converged: spectrum.converged_prefix(),
            });
            if self.keep_snapshots {
                log.subspace_snapshots.push(basis);
                log.gradient_snapshots.push((epoch, grad.as_slice().to_vec()));
            }
        }
        log.records.push(record);

        for (w, g) in state.params.as_mut_slice().iter_mut().zip(grad.as_slice()) {
            *w -= eta * g;
        }
        state.epoch += 1;
        Ok(true)
    }

    /// Lanczos on the (possibly reduced) Hessian at `eval`, plus its top-`m`
    /// subspace. Pairs that miss the residual tolerance still yield a
    /// subspace; the record carries the converged count.
    pub fn spectrum(&self, eval: &Evaluation<'_>) -> Result<(SpectrumResult, SubspaceBasis)> {
        let op = match self.config.reduced_k {
            Some(k) => HessianOperator::reduced(eval, k)?,
            None => HessianOperator::full(eval),
        };
        let m = self.config.m.max(1);
        let lc = LanczosConfig::new(self.config.n_l, self.config.seeds.lanczos).with_vectors(m);
        let spectrum = lanczos(&op, &lc)?;
        let basis = match spectrum.top_subspace(m) {
            Ok(b) => b,
            Err(Error::NotConverged { .. }) => spectrum.leading_subspace(m)?,
            Err(e) => return Err(e),
        };
        Ok((spectrum, basis))
    }
}

/// Loads the data and trains `config` from scratch.
pub fn train(config: &RunConfig) -> Result<TrajectoryLog> {
    let (train, eval) = load(&config.data_config())?;
    Trainer::new(config, &train, &eval)?.run()
}
