use landscape::config::RunConfig;
use landscape::datasets::{load, DataConfig, DataKind};
use landscape::mlp::{forward, init_params, Dataset, Evaluation, LossKind, MlpSpec, ParamVector, Targets};
use landscape::spectral::{lanczos, HessianOperator, LanczosConfig};
use landscape::trainer::{
    breakaway_experiment, compare_trajectories, detect_spikes, load_checkpoint, perturbation_scale,
    perturbation_study, save_checkpoint, weight_distance, CheckpointMeta, Schedule, Trainer,
};
use ndarray::Array2;
use proptest::prelude::*;

fn wreg_config(epochs: usize, eta: f64) -> RunConfig {
    let mut c = RunConfig::new(
        DataConfig::new(DataKind::Wreg, 64, 0),
        MlpSpec::new(vec![1, 12, 12, 1], LossKind::MeanSquaredError).unwrap(),
        Schedule::constant(eta),
        epochs,
    );
    c.n_l = 20;
    c.m = 2;
    c.seeds.init = 3;
    c
}

fn data(c: &RunConfig) -> (Dataset, Dataset) {
    load(&c.data_config()).unwrap()
}

#[test]
fn identical_configs_give_bitwise_identical_logs() {
    let c = wreg_config(15, 0.05);
    let (tr, ev) = data(&c);
    let a = Trainer::new(&c, &tr, &ev).unwrap().run().unwrap();
    let b = Trainer::new(&c, &tr, &ev).unwrap().run().unwrap();
    assert_eq!(a, b);
    let cmp = compare_trajectories(&a, &b, 2).unwrap();
    assert_eq!(cmp.len(), a.spectrum_epochs().len());
    for row in cmp {
        assert_eq!(row.grad_misalignment, 0.0);
        assert!(row.hessian_misalignment <= 1e-10);
        assert_eq!(row.grad_norm_ratio, 1.0);
    }
}

#[test]
fn spectrum_cadence_arithmetic() {
    let mut c = wreg_config(20, 0.05);
    c.spectrum_cadence = Some(5);
    let (tr, ev) = data(&c);
    let log = Trainer::new(&c, &tr, &ev).unwrap().run().unwrap();
    assert_eq!(log.records.len(), 20);
    assert_eq!(log.spectrum_epochs(), vec![0, 5, 10, 15, 19]);
    let tags: Vec<usize> = log.subspace_snapshots.iter().map(|s| s.epoch_tag.unwrap()).collect();
    assert_eq!(tags, log.spectrum_epochs());
    let first = log.records[0].spectrum.unwrap();
    assert_eq!(first.weight_dist_to_ref, Some(0.0));
    assert!(first.misalignment_to_ref.unwrap() <= 1e-10);
    assert!(log.records.iter().all(|r| r.train_loss.is_finite() && r.eval_loss.is_finite()));
}

/// Linear model (no hidden layer) with MSE: a convex quadratic whose Hessian
/// is `(2/b) [X 1]ᵀ[X 1]`.
fn linear_setup() -> (RunConfig, Dataset, f64) {
    let widths = vec![3, 1];
    let spec = MlpSpec::new(widths, LossKind::MeanSquaredError).unwrap();
    let mut c = RunConfig::new(DataConfig::new(DataKind::Wreg, 40, 0), spec.clone(), Schedule::constant(0.1), 60);
    c.n_l = 4;
    c.m = 1;
    c.spectrum_cadence = Some(10);
    let g = landscape::linalg::seeded_gaussian_vector(40 * 4, 7).unwrap();
    let x = Array2::from_shape_fn((40, 3), |(i, j)| g[i * 4 + j]);
    let y = Array2::from_shape_fn((40, 1), |(i, _)| g[i * 4 + 3]);
    let d = Dataset::new("linear", x, Targets::Values(y)).unwrap();
    let p = init_params(&spec, 0);
    let eval = Evaluation::new(&spec, &p, &d).unwrap();
    let lmax = lanczos(&HessianOperator::full(&eval), &LanczosConfig::new(4, 0)).unwrap().lambda_max();
    (c, d, lmax)
}

#[test]
fn convex_quadratic_smooth_and_divergent_regimes() {
    let (mut c, d, lmax) = linear_setup();
    c.schedule = Schedule::constant(1.9 / lmax);
    let log = Trainer::new(&c, &d, &d).unwrap().run().unwrap();
    assert!(log.diverged.is_none());
    let losses = log.losses();
    assert!(losses.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{losses:?}");

    c.schedule = Schedule::constant(2.2 / lmax);
    c.total_epochs = 2000;
    let log = Trainer::new(&c, &d, &d).unwrap().run().unwrap();
    let at = log.diverged.expect("diverges above 2/lambda_max");
    assert_eq!(log.records.last().unwrap().epoch, at);
}

#[test]
fn checkpoint_resume_matches_uninterrupted_run() {
    let mut c = wreg_config(20, 0.08);
    c.checkpoint_every = Some(5);
    c.spectrum_cadence = Some(3);
    let (tr, ev) = data(&c);
    let trainer = Trainer::new(&c, &tr, &ev).unwrap();
    let full = trainer.run().unwrap();

    let dir = tempfile::tempdir().unwrap();
    let meta = |epoch| CheckpointMeta {
        epoch,
        eta: 0.08,
        seed: 3,
        config_hash: c.hash(),
    };
    save_checkpoint(&dir.path().join("e10.ckpt"), &full.checkpoints[&10], &meta(10)).unwrap();
    save_checkpoint(&dir.path().join("e0.ckpt"), &full.checkpoints[&0], &meta(0)).unwrap();
    let (p10, m10) = load_checkpoint(&dir.path().join("e10.ckpt")).unwrap();
    let (p0, _) = load_checkpoint(&dir.path().join("e0.ckpt")).unwrap();
    assert_eq!(m10, meta(10));

    let mut state = trainer.resume(m10.epoch, p10, Some((0, p0))).unwrap();
    let mut log = landscape::trainer::TrajectoryLog::new(trainer.config().clone());
    trainer.advance(&mut state, &mut log, &c.schedule, 20, 20).unwrap();
    assert_eq!(log.records, full.records[10..]);
    assert_eq!(log.checkpoints[&20], full.checkpoints[&20]);
}

#[test]
fn breakaway_branches_share_the_prefix() {
    let mut c = wreg_config(30, 0.1);
    c.spectrum_cadence = Some(2);
    let (tr, ev) = data(&c);
    let trainer = Trainer::new(&c, &tr, &ev).unwrap();
    let rows = breakaway_experiment(&trainer, 0.1, 0.01, &[0, 4, 9], 6, 2).unwrap();
    assert_eq!(rows.len(), 3);
    for row in &rows {
        let mut direct = c.clone();
        direct.schedule = Schedule::delayed_drop(0.1, 0.01, row.drop_epoch);
        direct.total_epochs = row.drop_epoch + 6;
        let log = Trainer::new(&direct, &tr, &ev).unwrap().run().unwrap();
        assert_eq!(row.records, log.records, "drop {}", row.drop_epoch);
        assert!(!row.diverged);
        let worst = log.records[row.drop_epoch..]
            .iter()
            .filter_map(|r| r.spectrum.map(|s| s.lambda_max))
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(row.worst_case_lambda_max, Some(worst));
    }
    // drop at 0 is a pure eta_low run
    assert!(rows[0].records.iter().all(|r| r.eta == 0.01));
    let again = breakaway_experiment(&trainer, 0.1, 0.01, &[0, 4, 9], 6, 1).unwrap();
    assert_eq!(again, rows);
}

#[test]
fn independent_models_are_misaligned() {
    let mut total = 0.0;
    let mut count = 0;
    for seed in 0..3u64 {
        let mut c = RunConfig::new(
            DataConfig::new(DataKind::Src, 100, 1),
            MlpSpec::new(vec![2, 32, 32, 2], LossKind::CrossEntropy).unwrap(),
            Schedule::constant(0.05),
            1,
        );
        c.n_l = 40;
        c.seeds.init = 2 * seed;
        let (tr, ev) = data(&c);
        let a = Trainer::new(&c, &tr, &ev).unwrap().run().unwrap();
        c.seeds.init = 2 * seed + 1;
        let b = Trainer::new(&c, &tr, &ev).unwrap().run().unwrap();
        assert!(c.spec().unwrap().param_count() >= 1000);
        for row in compare_trajectories(&a, &b, 4).unwrap() {
            total += row.grad_misalignment + row.hessian_misalignment;
            count += 2;
        }
    }
    assert!(total / count as f64 >= 0.5, "mean misalignment {}", total / count as f64);
}

#[test]
fn perturbation_on_a_linear_model_is_exact() {
    assert!((perturbation_scale(4.0, 0.1) - 0.2).abs() < 1e-15);
    let (c, d, _) = linear_setup();
    let spec = c.spec().unwrap();
    let p = init_params(&spec, 1);
    let eval = Evaluation::new(&spec, &p, &d).unwrap();
    let s = lanczos(&HessianOperator::full(&eval), &LanczosConfig::new(4, 2)).unwrap();
    let probes = Array2::from_shape_fn((11, 3), |(i, j)| i as f64 / 5.0 - 1.0 + j as f64 * 0.3);
    let base = forward(&spec, &p, &probes).unwrap();

    let bands = perturbation_study(&spec, &p, &s, s.converged_prefix(), 0.3, &probes).unwrap();
    for band in &bands {
        let v = s.ritz_vector(band.index);
        assert_eq!(band.scale, perturbation_scale(band.lambda, 0.3));
        for i in 0..probes.nrows() {
            // layout: three weights then the bias
            let feature = [probes[(i, 0)], probes[(i, 1)], probes[(i, 2)], 1.0];
            let dev: f64 = feature.iter().zip(v).map(|(f, w)| f * w).sum::<f64>() * band.scale;
            let half = (band.upper[(i, 0)] - band.lower[(i, 0)]) / 2.0;
            assert!((half - dev.abs()).abs() <= 1e-10);
            assert!((band.upper[(i, 0)] - (base[(i, 0)] + dev.abs())).abs() <= 1e-10);
        }
    }
    let flat = perturbation_study(&spec, &p, &s, 1, 0.0, &probes).unwrap();
    assert_eq!(flat[0].lower, base);
    assert_eq!(flat[0].upper, base);
}

proptest! {
    #[test]
    fn weight_distance_properties(seed in any::<u64>()) {
        let spec = MlpSpec::new(vec![2, 3, 1], LossKind::MeanSquaredError).unwrap();
        let (a, b, c) = (init_params(&spec, seed), init_params(&spec, seed ^ 1), init_params(&spec, seed ^ 2));
        prop_assert_eq!(weight_distance(&a, &a).unwrap(), 0.0);
        let ab = weight_distance(&a, &b).unwrap();
        prop_assert!(ab <= weight_distance(&a, &c).unwrap() + weight_distance(&c, &b).unwrap() + 1e-12);
    }

    #[test]
    fn instability_events_are_ordered_and_disjoint(losses in prop::collection::vec(0.01f64..10.0, 2..200), delta in 0.1f64..2.0) {
        let events = detect_spikes(&losses, delta).unwrap();
        for (k, e) in events.iter().enumerate() {
            prop_assert!(e.0 <= e.1 && e.1 <= e.2);
            if let Some(next) = events.get(k + 1) {
                prop_assert!(e.2 < next.0);
            }
        }
    }
}

#[test]
fn weight_distance_pythagorean_and_layout_check() {
    let spec = MlpSpec::new(vec![2, 1], LossKind::MeanSquaredError).unwrap();
    let a = ParamVector::new(spec.layout(), vec![3.0, 4.0, 0.0]).unwrap();
    let b = ParamVector::zeros(&spec);
    assert_eq!(weight_distance(&a, &b).unwrap(), 5.0);
    let other = ParamVector::zeros(&MlpSpec::new(vec![1, 2], LossKind::MeanSquaredError).unwrap());
    assert!(weight_distance(&a, &other).is_err());
}
