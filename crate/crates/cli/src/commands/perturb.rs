use std::path::Path;

use landscape::mlp::{forward, Evaluation, LossKind};
use landscape::spectral::{lanczos, HessianOperator, LanczosConfig};
use landscape::trainer::{argmax_rows, csv_with_schema, load_checkpoint, perturbation_study};
use ndarray::Array2;
use serde::Serialize;

use super::{num, prepare};
use crate::error::{CliError, CliResult};
use crate::Common;

pub const PERTURB_SCHEMA: &str = "# schema: landscape-perturb v1";
pub const REGRESSION_PROBES: usize = 401;
pub const GRID_SIDE: usize = 200;

/// Uniform points in `[-1, 1]` for scalar inputs, a square grid over
/// `[-1, 1]²` (x fastest) for planar inputs, `None` otherwise.
pub fn probe_grid(input_width: usize) -> Option<Array2<f64>> {
    let lin = |i: usize, n: usize| -1.0 + 2.0 * i as f64 / (n - 1) as f64;
    match input_width {
        1 => Some(Array2::from_shape_fn((REGRESSION_PROBES, 1), |(i, _)| lin(i, REGRESSION_PROBES))),
        2 => Some(Array2::from_shape_fn((GRID_SIDE * GRID_SIDE, 2), |(i, j)| {
            if j == 0 {
                lin(i % GRID_SIDE, GRID_SIDE)
            } else {
                lin(i / GRID_SIDE, GRID_SIDE)
            }
        })),
        _ => None,
    }
}

#[derive(Serialize)]
struct BandInfo {
    index: usize,
    lambda: f64,
    scale: f64,
    file: String,
}

#[derive(Serialize)]
struct Summary {
    checkpoint_epoch: usize,
    top_n: usize,
    c_p: f64,
    probes: usize,
    bands: Vec<BandInfo>,
}

pub fn run(c: &Common, checkpoint: &Path, top_n: usize, c_p: f64) -> CliResult<()> {
    if top_n == 0 {
        return Err(CliError::Config("--top-n must be at least 1".into()));
    }
    let p = prepare(c)?;
    p.out.write_config(&p.config)?;
    let spec = p.config.spec()?;
    let (params, meta) = load_checkpoint(checkpoint)?;
    params
        .check_spec(&spec)
        .map_err(|e| CliError::Config(format!("{}: {e}", checkpoint.display())))?;

    let eval = Evaluation::new(&spec, &params, &p.train)?;
    let op = match p.config.reduced_k {
        Some(k) => HessianOperator::reduced(&eval, k)?,
        None => HessianOperator::full(&eval),
    };
    let spectrum = lanczos(&op, &LanczosConfig::new(p.config.n_l, p.config.seeds.lanczos).with_vectors(top_n))?;

    let grid = probe_grid(spec.input_width());
    let probes = grid.clone().unwrap_or_else(|| p.eval.inputs().clone());
    let bands = perturbation_study(&spec, &params, &spectrum, top_n, c_p, &probes).map_err(|e| match e {
        landscape::Error::NotConverged { .. } => CliError::Failed(format!("{e}; raise n_l")),
        other => other.into(),
    })?;
    let base = forward(&spec, &params, &probes)?;
    let classification = spec.loss_kind() == LossKind::CrossEntropy;
    let base_pred = argmax_rows(&base);

    let outputs = spec.output_width();
    let mut header: Vec<String> = match &grid {
        Some(g) => (0..g.ncols()).map(|j| format!("x{j}")).collect(),
        None => vec!["sample".into()],
    };
    for what in ["base", "lower", "upper"] {
        header.extend((0..outputs).map(|k| format!("{what}_y{k}")));
    }
    if classification {
        header.extend(["pred_base", "pred_minus", "pred_plus"].map(String::from));
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();

    let mut infos = Vec::new();
    for band in &bands {
        let rows = (0..probes.nrows()).map(|i| {
            let mut row: Vec<String> = match &grid {
                Some(g) => g.row(i).iter().map(|&x| num(x)).collect(),
                None => vec![i.to_string()],
            };
            for m in [&base, &band.lower, &band.upper] {
                row.extend(m.row(i).iter().map(|&y| num(y)));
            }
            if let Some((minus, plus)) = &band.predictions {
                row.extend([base_pred[i], minus[i], plus[i]].map(|c| c.to_string()));
            }
            row
        });
        let file = format!("perturb-v{}.csv", band.index);
        p.out.write(&file, &csv_with_schema(PERTURB_SCHEMA, &header, rows)?)?;
        infos.push(BandInfo {
            index: band.index,
            lambda: band.lambda,
            scale: band.scale,
            file,
        });
    }
    p.out.write_json(
        "bands.json",
        &Summary {
            checkpoint_epoch: meta.epoch,
            top_n,
            c_p,
            probes: probes.nrows(),
            bands: infos,
        },
    )
}
