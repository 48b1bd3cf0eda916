use landscape::linalg::{dense_sym_eig_oracle, seeded_gaussian_vector, DenseMatrix};
use landscape::mlp::{
    dense_hessian_oracle, finite_difference_gradient, gradient, hvp, init_params, Dataset, Evaluation, MlpSpec, ParamVector,
};
use landscape::spectral::{lanczos, HessianOperator, LanczosConfig};

use super::prepare;
use crate::error::{CliError, CliResult};
use crate::Common;

/// Parameter budget of the oracle twin built by `oracle-check`.
pub const TWIN_BUDGET: usize = 1000;
pub const ORACLE_SAMPLES: usize = 64;

/// `spec` with every hidden layer narrowed to the widest common width that
/// keeps the parameter count within `budget` (at least 1).
pub fn oracle_twin(spec: &MlpSpec, budget: usize) -> landscape::Result<MlpSpec> {
    let widths = spec.widths();
    if spec.param_count() <= budget {
        return Ok(spec.clone());
    }
    let hidden_max = widths[1..widths.len() - 1].iter().copied().max().unwrap_or(1);
    let build = |h: usize| {
        let mut w = widths.to_vec();
        let last = w.len() - 1;
        for x in &mut w[1..last] {
            *x = (*x).min(h);
        }
        MlpSpec::new(w, spec.loss_kind())
    };
    let mut best = build(1)?;
    for h in 2..=hidden_max {
        let twin = build(h)?;
        if twin.param_count() > budget {
            break;
        }
        best = twin;
    }
    Ok(best)
}

#[derive(Debug)]
pub struct Check {
    pub name: &'static str,
    pub error: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.error <= self.tolerance
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: error {:.3e} (tolerance {:.1e})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.error,
            self.tolerance
        )
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn random_symmetric(n: usize, seed: u64) -> landscape::Result<DenseMatrix> {
    let g = seeded_gaussian_vector(n * n, seed)?;
    let mut a = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = 0.5 * (g[i * n + j] + g[j * n + i]);
        }
    }
    Ok(a)
}

/// Descending `values` with runs closer than `rel` (relative) collapsed to
/// their first member. A single Krylov sequence sees each repeated
/// eigenvalue once.
pub fn distinct_values(values: &[f64], rel: f64) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(values.len());
    for &v in values {
        match out.last() {
            Some(&last) if (last - v).abs() <= rel * last.abs().max(v.abs()) => {}
            _ => out.push(v),
        }
    }
    out
}

/// Top-`k` Lanczos values against the distinct eigenvalues of the dense
/// finite-difference Hessian, relative to each oracle value.
pub fn top_values_check(spec: &MlpSpec, params: &ParamVector, data: &Dataset, k: usize, seed: u64) -> landscape::Result<Check> {
    let h = dense_hessian_oracle(spec, params, data)?;
    let (all, _) = dense_sym_eig_oracle(&h)?;
    let exact = distinct_values(&all, 1e-6);
    let k = k.min(exact.len());
    let eval = Evaluation::new(spec, params, data)?;
    let steps = params.len().min(150);
    let s = lanczos(&HessianOperator::full(&eval), &LanczosConfig::new(steps, seed).with_vectors(k))?;
    let error = s.ritz_values()[..k]
        .iter()
        .zip(&exact)
        .map(|(l, e)| (l - e).abs() / e.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    Ok(Check {
        name: "top Ritz values vs dense hessian",
        error,
        tolerance: 1e-4,
    })
}

pub fn checks(spec: &MlpSpec, data: &Dataset, seed: u64) -> landscape::Result<Vec<Check>> {
    let twin = oracle_twin(spec, TWIN_BUDGET)?;
    let data = data.head(ORACLE_SAMPLES);
    let params = init_params(&twin, seed);
    let n = params.len();

    let g = gradient(&twin, &params, &data)?;
    let fd = finite_difference_gradient(&twin, &params, &data, 1e-5)?;
    let grad = Check {
        name: "gradient vs finite differences",
        error: max_abs_diff(g.as_slice(), &fd),
        tolerance: 1e-6,
    };

    let h = dense_hessian_oracle(&twin, &params, &data)?;
    let v = ParamVector::new(twin.layout(), seeded_gaussian_vector(n, seed ^ 0x5eed)?)?;
    let hv = hvp(&twin, &params, &data, &v)?;
    let dense = h.matvec(v.as_slice())?;
    let scale = 1.0 + dense.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let hvp_check = Check {
        name: "hessian-vector product vs dense hessian",
        error: max_abs_diff(hv.as_slice(), &dense) / scale,
        tolerance: 1e-5,
    };

    let top = top_values_check(&twin, &params, &data, 5.min(n), seed)?;

    let a = random_symmetric(100, seed)?;
    let (exact, _) = dense_sym_eig_oracle(&a)?;
    let full = lanczos(&a, &LanczosConfig::new(100, seed))?;
    let lscale = exact.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let spectrum = Check {
        name: "full lanczos spectrum vs jacobi (100x100)",
        error: max_abs_diff(full.ritz_values(), &exact) / lscale,
        tolerance: 1e-8,
    };
    Ok(vec![grad, hvp_check, top, spectrum])
}

pub fn run(c: &Common) -> CliResult<()> {
    let p = prepare(c)?;
    p.out.write_config(&p.config)?;
    let spec = p.config.spec()?;
    let results = checks(&spec, &p.train, p.config.seeds.init)?;
    let report: Vec<String> = results.iter().map(Check::line).collect();
    for line in &report {
        println!("{line}");
    }
    p.out.write("oracle-report.txt", (report.join("\n") + "\n").as_bytes())?;
    let failed = results.iter().filter(|c| !c.passed()).count();
    if failed > 0 {
        return Err(CliError::Failed(format!("{failed} oracle checks failed")));
    }
    Ok(())
}
