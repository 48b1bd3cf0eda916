use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Learning-rate policy over a run of known length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Schedule {
    Constant {
        eta: f64,
    },
    /// `eta_high` before `drop_epoch`, `eta_low` from it on.
    DelayedDrop {
        eta_high: f64,
        eta_low: f64,
        drop_epoch: usize,
    },
    /// Repeating `high_len` epochs of `eta_plus` then `low_len` of
    /// `eta_minus`; the last `tail_len` epochs of the run use `eta_minus`.
    Cyclic {
        eta_plus: f64,
        eta_minus: f64,
        #[serde(default = "default_high_len")]
        high_len: usize,
        #[serde(default = "default_low_len")]
        low_len: usize,
        #[serde(default = "default_tail_len")]
        tail_len: usize,
    },
}

fn default_high_len() -> usize {
    10
}

fn default_low_len() -> usize {
    50
}

fn default_tail_len() -> usize {
    40
}

impl Schedule {
    pub fn constant(eta: f64) -> Self {
        Schedule::Constant { eta }
    }

    pub fn delayed_drop(eta_high: f64, eta_low: f64, drop_epoch: usize) -> Self {
        Schedule::DelayedDrop {
            eta_high,
            eta_low,
            drop_epoch,
        }
    }

    pub fn cyclic(eta_plus: f64, eta_minus: f64) -> Self {
        Schedule::Cyclic {
            eta_plus,
            eta_minus,
            high_len: default_high_len(),
            low_len: default_low_len(),
            tail_len: default_tail_len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rates: Vec<f64> = match self {
            Schedule::Constant { eta } => vec![*eta],
            Schedule::DelayedDrop { eta_high, eta_low, .. } => vec![*eta_high, *eta_low],
            Schedule::Cyclic {
                eta_plus,
                eta_minus,
                high_len,
                low_len,
                tail_len,
            } => {
                if *high_len == 0 || *low_len == 0 || *tail_len == 0 {
                    return Err(Error::invalid("cyclic schedule lengths must be at least 1"));
                }
                vec![*eta_plus, *eta_minus]
            }
        };
        match rates.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            Some(e) => Err(Error::invalid(format!("learning rates must be positive, got {e}"))),
            None => Ok(()),
        }
    }

    /// Rate used at `epoch` of a `total_epochs` run.
    pub fn eta(&self, epoch: usize, total_epochs: usize) -> f64 {
        match *self {
            Schedule::Constant { eta } => eta,
            Schedule::DelayedDrop {
                eta_high,
                eta_low,
                drop_epoch,
            } => {
                if epoch < drop_epoch {
                    eta_high
                } else {
                    eta_low
                }
            }
            Schedule::Cyclic {
                eta_plus,
                eta_minus,
                high_len,
                low_len,
                tail_len,
            } => {
                if epoch + tail_len >= total_epochs {
                    eta_minus
                } else if epoch % (high_len + low_len) < high_len {
                    eta_plus
                } else {
                    eta_minus
                }
            }
        }
    }

    /// Largest rate the schedule can produce.
    pub fn max_eta(&self) -> f64 {
        match *self {
            Schedule::Constant { eta } => eta,
            Schedule::DelayedDrop { eta_high, eta_low, .. } => eta_high.max(eta_low),
            Schedule::Cyclic { eta_plus, eta_minus, .. } => eta_plus.max(eta_minus),
        }
    }
}

/// `2 / η`: GD on a quadratic with curvature above this diverges.
pub fn eos_threshold(eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::invalid(format!("learning rate must be positive, got {eta}")));
    }
    Ok(2.0 / eta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delayed_drop_boundary() {
        let s = Schedule::delayed_drop(0.3, 0.01, 100);
        assert_eq!(s.eta(99, 200), 0.3);
        assert_eq!(s.eta(100, 200), 0.01);
        assert_eq!(Schedule::delayed_drop(0.3, 0.01, 0).eta(0, 10), 0.01);
    }

    #[test]
    fn constant_and_threshold() {
        let s = Schedule::constant(0.01);
        assert!((0..500).all(|e| s.eta(e, 500) == 0.01));
        assert_eq!(eos_threshold(0.01).unwrap(), 200.0);
        assert_eq!(eos_threshold(0.05).unwrap(), 40.0);
        assert!(eos_threshold(0.0).is_err());
    }

    #[test]
    fn validation() {
        assert!(Schedule::constant(-1.0).validate().is_err());
        assert!(Schedule::cyclic(0.2, 0.05).validate().is_ok());
        let bad = Schedule::Cyclic {
            eta_plus: 0.2,
            eta_minus: 0.05,
            high_len: 0,
            low_len: 50,
            tail_len: 40,
        };
        assert!(bad.validate().is_err());
    }
}
