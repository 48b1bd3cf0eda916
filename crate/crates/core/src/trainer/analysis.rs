use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use ndarray::Array2;
use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::geometry::{cosine_misalignment, misalignment};
use crate::linalg::norm;
use crate::mlp::{forward, LossKind, MlpSpec, ParamVector};
use crate::spectral::SpectrumResult;

use super::{EpochRecord, Schedule, TrainState, Trainer, TrajectoryLog};

/// `‖a - b‖₂`.
pub fn weight_distance(a: &ParamVector, b: &ParamVector) -> Result<f64> {
    if a.layout() != b.layout() {
        return Err(Error::invalid("weight_distance: parameter layouts differ"));
    }
    Ok(a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt())
}

/// A non-divergent loss spike. Heating runs onset to peak, cooling peak to
/// recovery.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InstabilityEvent {
    pub onset_epoch: usize,
    pub peak_epoch: usize,
    pub recovery_epoch: usize,
    /// Peak loss over the running minimum before onset.
    pub peak_loss_ratio: f64,
    /// Running minimum loss before onset.
    pub baseline_loss: f64,
    /// Still above the recovery level when the run ended.
    pub open: bool,
}

impl InstabilityEvent {
    pub fn heating(&self) -> std::ops::RangeInclusive<usize> {
        self.onset_epoch..=self.peak_epoch
    }

    pub fn cooling(&self) -> std::ops::RangeInclusive<usize> {
        self.peak_epoch..=self.recovery_epoch
    }

    pub fn contains(&self, epoch: usize) -> bool {
        (self.onset_epoch..=self.recovery_epoch).contains(&epoch)
    }
}

/// Spike detection over `losses` (index = position in the series).
///
/// Onset is the first point above `(1 + delta)` times the running minimum;
/// recovery the first later point back at or below 1.1 times that minimum.
pub fn detect_spikes(losses: &[f64], delta: f64) -> Result<Vec<(usize, usize, usize, f64, f64, bool)>> {
    if losses.len() < 2 {
        return Err(Error::invalid("instability detection needs at least 2 records"));
    }
    if !(delta > 0.0) {
        return Err(Error::invalid(format!("spike threshold must be positive, got {delta}")));
    }
    let mut events = Vec::new();
    let mut running_min = losses[0];
    let mut i = 1;
    while i < losses.len() {
        if losses[i] > (1.0 + delta) * running_min {
            let (onset, base) = (i, running_min);
            let mut peak = i;
            let mut j = i;
            while j < losses.len() && !(losses[j] <= 1.1 * base) {
                if losses[j] > losses[peak] || losses[j].is_nan() {
                    peak = j;
                }
                j += 1;
            }
            let open = j == losses.len();
            let recovery = if open { losses.len() - 1 } else { j };
            events.push((onset, peak, recovery, losses[peak] / base, base, open));
            running_min = running_min.min(losses[recovery]);
            i = recovery + 1;
        } else {
            running_min = running_min.min(losses[i]);
            i += 1;
        }
    }
    Ok(events)
}

pub fn detect_instabilities(records: &[EpochRecord], delta: f64) -> Result<Vec<InstabilityEvent>> {
    let losses: Vec<f64> = records.iter().map(|r| r.train_loss).collect();
    Ok(detect_spikes(&losses, delta)?
        .into_iter()
        .map(|(onset, peak, recovery, ratio, base, open)| InstabilityEvent {
            onset_epoch: records[onset].epoch,
            peak_epoch: records[peak].epoch,
            recovery_epoch: records[recovery].epoch,
            peak_loss_ratio: ratio,
            baseline_loss: base,
            open,
        })
        .collect())
}

/// Average ranks (1-based), ties sharing the mean of their positions.
fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation (Pearson on average ranks).
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_len("spearman", xs.len(), ys.len())?;
    if xs.len() < 2 {
        return Err(Error::invalid("spearman needs at least 2 points"));
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = xs.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return Err(Error::invalid("spearman undefined for a constant series"));
    }
    Ok(cov / (vx * vy).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrajectoryComparison {
    pub epoch: usize,
    pub grad_misalignment: f64,
    pub hessian_misalignment: f64,
    pub grad_norm_ratio: f64,
}

/// Gradient and top-`m` subspace agreement at the spectrum epochs both runs
/// recorded.
pub fn compare_trajectories(a: &TrajectoryLog, b: &TrajectoryLog, m: usize) -> Result<Vec<TrajectoryComparison>> {
    if a.config.model != b.config.model || a.config.reduced_k != b.config.reduced_k {
        return Err(Error::invalid("compare_trajectories: runs use different models"));
    }
    let mut out = Vec::new();
    for (epoch, ga) in &a.gradient_snapshots {
        let (Some(gb), Some(sa), Some(sb)) = (b.gradient(*epoch), a.snapshot(*epoch), b.snapshot(*epoch)) else {
            continue;
        };
        let (na, nb) = (norm(ga), norm(gb));
        out.push(TrajectoryComparison {
            epoch: *epoch,
            grad_misalignment: cosine_misalignment(ga, gb)?,
            hessian_misalignment: misalignment(&sa.leading(m)?, &sb.leading(m)?)?,
            grad_norm_ratio: na / nb,
        });
    }
    Ok(out)
}

/// Runs `f` over `items` on up to `jobs` threads; results keep input order.
pub fn par_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let jobs = jobs.clamp(1, items.len().max(1));
    if jobs == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("no poisoned workers")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("no poisoned workers")
        .into_iter()
        .map(|r| r.expect("every item processed"))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BreakawayRow {
    pub drop_epoch: usize,
    /// Max `λ_max` over the post-drop epochs; absent if none was measured.
    pub worst_case_lambda_max: Option<f64>,
    pub diverged: bool,
    #[serde(skip)]
    pub records: Vec<EpochRecord>,
}

/// For each drop epoch trains `delayed_drop(eta_high, eta_low, drop)` for
/// `drop + post_budget` epochs. One `eta_high` prefix is trained once and
/// every branch continues from its state at the drop epoch.
pub fn breakaway_experiment(
    trainer: &Trainer<'_>,
    eta_high: f64,
    eta_low: f64,
    drop_epochs: &[usize],
    post_budget: usize,
    jobs: usize,
) -> Result<Vec<BreakawayRow>> {
    if post_budget == 0 {
        return Err(Error::invalid("breakaway post_budget must be at least 1"));
    }
    if drop_epochs.is_empty() || drop_epochs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("drop epochs must be non-empty and strictly increasing"));
    }
    let prefix_schedule = Schedule::constant(eta_high);
    prefix_schedule.validate()?;
    Schedule::constant(eta_low).validate()?;

    let last = *drop_epochs.last().unwrap();
    let mut state = trainer.initial_state();
    let mut log = TrajectoryLog::new(trainer.config().clone());
    let mut starts: Vec<(usize, TrainState, Vec<EpochRecord>)> = Vec::new();
    let mut prefix_diverged = false;
    for &drop in drop_epochs {
        if !prefix_diverged {
            // the prefix is the same under every total, since drop < total - 1
            prefix_diverged = !trainer.advance(&mut state, &mut log, &prefix_schedule, last + post_budget + 1, drop)?;
        }
        starts.push((drop, state.clone(), log.records.clone()));
    }

    let branch = |(drop, start, prefix): &(usize, TrainState, Vec<EpochRecord>)| -> Result<BreakawayRow> {
        let total = drop + post_budget;
        let schedule = Schedule::delayed_drop(eta_high, eta_low, *drop);
        let mut state = start.clone();
        let mut log = TrajectoryLog::new(trainer.config().clone());
        log.records = prefix.clone();
        let ok = state.epoch == *drop && trainer.advance(&mut state, &mut log, &schedule, total, total)?;
        let worst = log
            .records
            .iter()
            .filter(|r| r.epoch >= *drop)
            .filter_map(|r| r.spectrum.map(|s| s.lambda_max))
            .reduce(f64::max);
        Ok(BreakawayRow {
            drop_epoch: *drop,
            worst_case_lambda_max: worst,
            diverged: !ok,
            records: log.records,
        })
    };
    par_map(&starts, jobs, branch).into_iter().collect()
}

/// Output bands of one perturbed eigen-direction.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationBand {
    pub index: usize,
    pub lambda: f64,
    /// `√|λ| · c_p`.
    pub scale: f64,
    pub lower: Array2<f64>,
    pub upper: Array2<f64>,
    /// Class predictions at `θ - p v` and `θ + p v` (classification only).
    pub predictions: Option<(Vec<usize>, Vec<usize>)>,
}

pub fn perturbation_scale(lambda: f64, c_p: f64) -> f64 {
    lambda.abs().sqrt() * c_p
}

/// Outputs at `θ ± p_i v_i` for the `top_n` leading Ritz pairs. Vectors of a
/// reduced spectrum act on the parameter prefix they cover.
pub fn perturbation_study(
    spec: &MlpSpec,
    params: &ParamVector,
    spectrum: &SpectrumResult,
    top_n: usize,
    c_p: f64,
    probes: &Array2<f64>,
) -> Result<Vec<PerturbationBand>> {
    if !(c_p >= 0.0 && c_p.is_finite()) {
        return Err(Error::invalid(format!("c_p must be non-negative, got {c_p}")));
    }
    let converged = spectrum.converged_prefix();
    if top_n > converged {
        return Err(Error::NotConverged {
            converged,
            requested: top_n,
        });
    }
    if spectrum.operator_dim() > params.len() {
        return Err(Error::invalid("spectrum dimension exceeds the parameter count"));
    }
    (0..top_n)
        .map(|i| {
            let lambda = spectrum.ritz_values()[i];
            let p = perturbation_scale(lambda, c_p);
            let v = spectrum.ritz_vector(i);
            let shifted = |sign: f64| -> Result<Array2<f64>> {
                let mut q = params.clone();
                for (w, d) in q.as_mut_slice().iter_mut().zip(v) {
                    *w += sign * p * d;
                }
                forward(spec, &q, probes)
            };
            let (minus, plus) = (shifted(-1.0)?, shifted(1.0)?);
            let lower = ndarray::Zip::from(&minus).and(&plus).map_collect(|a, b| a.min(*b));
            let upper = ndarray::Zip::from(&minus).and(&plus).map_collect(|a, b| a.max(*b));
            let predictions = (spec.loss_kind() == LossKind::CrossEntropy).then(|| (argmax_rows(&minus), argmax_rows(&plus)));
            Ok(PerturbationBand {
                index: i,
                lambda,
                scale: p,
                lower,
                upper,
                predictions,
            })
        })
        .collect()
}

pub fn argmax_rows(outputs: &Array2<f64>) -> Vec<usize> {
    outputs
        .rows()
        .into_iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
                .0
        })
        .collect()
}

/// `f(x) = ½ Σ λ_i x_i²` in its eigenbasis; GD maps `x_i ← (1 - ηλ_i) x_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadratic {
    pub eigenvalues: Vec<f64>,
}

impl Quadratic {
    pub fn new(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() || eigenvalues.iter().any(|l| !l.is_finite()) {
            return Err(Error::invalid("quadratic needs finite eigenvalues"));
        }
        Ok(Self { eigenvalues })
    }

    pub fn loss(&self, x: &[f64]) -> f64 {
        0.5 * self.eigenvalues.iter().zip(x).map(|(l, v)| l * v * v).sum::<f64>()
    }

    /// `steps` GD iterations from `x0`; reports divergence once the iterate
    /// norm grows past `1e6` times its start, or ends larger than it began.
    pub fn diverges(&self, eta: f64, x0: &[f64], steps: usize) -> Result<bool> {
        check_len("quadratic start point", self.eigenvalues.len(), x0.len())?;
        let start = norm(x0);
        let mut x = x0.to_vec();
        for _ in 0..steps {
            for (v, l) in x.iter_mut().zip(&self.eigenvalues) {
                *v *= 1.0 - eta * l;
            }
            let n = norm(&x);
            if !n.is_finite() || n > 1e6 * start {
                return Ok(true);
            }
        }
        Ok(norm(&x) > start)
    }

    /// `true` iff some curvature exceeds `2 / η`.
    pub fn predicted_unstable(&self, eta: f64) -> Result<bool> {
        let limit = super::eos_threshold(eta)?;
        Ok(self.eigenvalues.iter().any(|&l| l > limit))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spike_reference_series() {
        let ev = detect_spikes(&[1.0, 0.9, 0.8, 1.6, 0.7], 0.5).unwrap();
        assert_eq!(ev.len(), 1);
        let (onset, peak, recovery, ratio, _, open) = ev[0];
        assert_eq!((onset, peak, recovery, open), (3, 3, 4, false));
        assert!((ratio - 2.0).abs() < 1e-12);
        assert!(detect_spikes(&[5.0, 4.0, 3.0, 2.0, 1.0], 0.5).unwrap().is_empty());
        assert!(detect_spikes(&[1.0], 0.5).is_err());
    }

    #[test]
    fn two_spikes_and_an_open_one() {
        let losses = [1.0, 0.5, 2.0, 3.0, 0.5, 0.4, 0.4, 1.0, 0.41, 0.3, 0.9];
        let ev = detect_spikes(&losses, 0.5).unwrap();
        assert_eq!(ev.len(), 3);
        assert_eq!((ev[0].0, ev[0].1, ev[0].2), (2, 3, 4));
        assert_eq!((ev[1].0, ev[1].1, ev[1].2), (7, 7, 8));
        assert!(ev[0].2 < ev[1].0);
        assert!(ev[2].5 && ev[2].2 == losses.len() - 1);
    }

    #[test]
    fn spearman_cases() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 4.0, 9.0, 16.0]).unwrap() - 1.0).abs() < 1e-15);
        // ties get average ranks
        let r = spearman(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((r - 0.948_683_298_050_513_8).abs() < 1e-12);
        assert!(spearman(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn quadratic_closed_form() {
        let q = Quadratic::new(vec![3.0]).unwrap();
        assert!(!q.diverges(0.5, &[1.0], 200).unwrap());
        assert!(q.diverges(1.0, &[1.0], 200).unwrap());
        assert!(!q.predicted_unstable(0.5).unwrap());
        assert!(q.predicted_unstable(1.0).unwrap());
    }

    #[test]
    fn par_map_keeps_order() {
        let xs: Vec<usize> = (0..37).collect();
        assert_eq!(par_map(&xs, 4, |x| x * 2), xs.iter().map(|x| x * 2).collect::<Vec<_>>());
    }
}
