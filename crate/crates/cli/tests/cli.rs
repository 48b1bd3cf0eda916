use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use landscape::geometry::{similarity_matrix, SubspaceBasis};
use landscape::linalg::DenseMatrix;
use landscape::trainer::METRICS_COLUMNS;
use landscape_cli::heatmap::{cell_color, emit_heatmap_svg, VIRIDIS};
use landscape_cli::output::{resolve_output_dir, OUTPUT_ROOT_ENV};

const WREG: &str = r#"total_epochs = 10
n_l = 10
m = 2

[dataset]
kind = "wreg"
sample_count = 32

[model]
widths = [1, 8, 1]
loss = "mean-squared-error"

[schedule]
kind = "constant"
eta = 0.05
"#;

fn bin(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_landscape"))
        .args(args)
        .current_dir(cwd)
        .env_remove(OUTPUT_ROOT_ENV)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

fn csv_body(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# schema: "), "{}", path.display());
    lines.map(|l| l.split(',').map(String::from).collect()).collect()
}

fn read_tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    out
}

#[test]
fn train_writes_one_row_per_epoch() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "wreg.toml", WREG);
    let out = bin(&["train", &cfg, "--output-dir", "run"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = tmp.path().join("run");
    let rows = csv_body(&run.join("metrics.csv"));
    assert_eq!(rows[0], METRICS_COLUMNS);
    assert_eq!(rows.len(), 11);
    for (i, row) in rows[1..].iter().enumerate() {
        assert_eq!(row[0], i.to_string());
        assert_eq!(row.len(), METRICS_COLUMNS.len());
    }
    for f in ["config.resolved", "snapshots.bin", "summary.json", "checkpoints/epoch-000010.ckpt"] {
        assert!(run.join(f).is_file(), "{f}");
    }
    assert!(run.join("checkpoints/epoch-000010.ckpt.meta.toml").is_file());
}

#[test]
fn similarity_single_eta_is_symmetric_with_zero_diagonal() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "wreg.toml", WREG);
    let out = bin(&["similarity", &cfg, "--output-dir", "sim", "--etas", "0.05", "--ms", "1,2"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("sim/eta-0.05");
    for m in [1, 2] {
        let rows = csv_body(&dir.join(format!("similarity-m{m}.csv")));
        let n = rows.len() - 1;
        assert_eq!(n, 10);
        let v = |i: usize, j: usize| -> f64 { rows[i + 1][j + 1].parse().unwrap() };
        for i in 0..n {
            assert_eq!(v(i, i), 0.0);
            for j in 0..n {
                assert_eq!(v(i, j), v(j, i));
                assert!((0.0..=1.0).contains(&v(i, j)));
            }
        }
        let svg = fs::read_to_string(dir.join(format!("similarity-m{m}.svg"))).unwrap();
        roxmltree::Document::parse(&svg).unwrap();
    }
    let index: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("sim/index.json")).unwrap()).unwrap();
    assert_eq!(index["runs"].as_array().unwrap().len(), 1);
}

/// A linear model with MSE is a convex quadratic; small η keeps it smooth.
const LINEAR: &str = r#"total_epochs = 70
n_l = 2
m = 1

[dataset]
kind = "wreg"
sample_count = 32

[model]
widths = [1, 1]
loss = "mean-squared-error"

[schedule]
kind = "constant"
eta = 0.05
"#;

#[test]
fn breakaway_on_a_convex_surrogate_matches_direct_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "lin.toml", LINEAR);
    let args = ["breakaway", &cfg, "--output-dir", "bk", "--drops", "0,50", "--post-budget", "20", "--eta-low", "0.01"];
    let out = bin(&args, tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_body(&tmp.path().join("bk/breakaway.csv"));
    assert_eq!(rows.len(), 3);
    for row in &rows[1..] {
        assert!(row[1].parse::<f64>().unwrap().is_finite());
        assert_eq!(row[2], "false");
    }

    // the drop-50 branch equals a direct delayed-drop run of 70 epochs
    let direct = LINEAR.replace(
        "kind = \"constant\"\neta = 0.05",
        "kind = \"delayed-drop\"\neta_high = 0.05\neta_low = 0.01\ndrop_epoch = 50",
    );
    let dcfg = write_config(tmp.path(), "direct.toml", &direct);
    assert!(bin(&["train", &dcfg, "--output-dir", "direct"], tmp.path()).status.success());
    let branch = fs::read(tmp.path().join("bk/branches/drop-000050.csv")).unwrap();
    assert_eq!(branch, fs::read(tmp.path().join("direct/metrics.csv")).unwrap());

    // losses never increase on the smooth quadratic
    let losses: Vec<f64> = csv_body(&tmp.path().join("direct/metrics.csv"))[1..]
        .iter()
        .map(|r| r[2].parse().unwrap())
        .collect();
    assert!(losses.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn exit_codes_distinguish_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write_config(tmp.path(), "bad.toml", &WREG.replace("m = 2", "m = 2\nbogus = 1"));
    let out = bin(&["train", &bad], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));

    let too_big = write_config(tmp.path(), "m.toml", &WREG.replace("m = 2", "m = 20"));
    assert_eq!(bin(&["train", &too_big], tmp.path()).status.code(), Some(2));

    assert_eq!(bin(&["train", "missing.toml"], tmp.path()).status.code(), Some(4));

    let hot = write_config(tmp.path(), "hot.toml", &WREG.replace("eta = 0.05", "eta = 50.0"));
    let out = bin(&["train", &hot, "--output-dir", "hot"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    let rows = csv_body(&tmp.path().join("hot/metrics.csv"));
    assert!(rows.len() >= 2, "artifacts of the diverged run are kept");

    let cfg = write_config(tmp.path(), "wreg.toml", WREG);
    fs::write(tmp.path().join("junk.ckpt"), b"not a checkpoint").unwrap();
    fs::write(tmp.path().join("junk.ckpt.meta.toml"), "epoch = 0\neta = 0.1\nseed = 0\nconfig_hash = \"x\"\n").unwrap();
    let out = bin(&["perturb", &cfg, "--checkpoint", "junk.ckpt", "--output-dir", "p"], tmp.path());
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn resolved_config_reproduces_artifacts_bitwise() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "wreg.toml", &WREG.replace("total_epochs = 10", "total_epochs = 12\ncheckpoint_every = 4"));
    assert!(bin(&["phases", &cfg, "--output-dir", "a"], tmp.path()).status.success());
    let first = read_tree(&tmp.path().join("a"));
    assert!(first.contains_key(Path::new("checkpoints/epoch-000008.ckpt")));
    fs::copy(tmp.path().join("a/config.resolved"), tmp.path().join("again.toml")).unwrap();
    fs::remove_dir_all(tmp.path().join("a")).unwrap();
    let out = bin(&["phases", "again.toml"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read_tree(&tmp.path().join("a")), first);
}

#[test]
fn perturb_bands_on_the_probe_grids() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "wreg.toml", WREG);
    assert!(bin(&["train", &cfg, "--output-dir", "run"], tmp.path()).status.success());
    let args = ["perturb", &cfg, "--checkpoint", "run/checkpoints/epoch-000010.ckpt", "--top-n", "2", "--cp", "0.5", "--output-dir", "pt"];
    let out = bin(&args, tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_body(&tmp.path().join("pt/perturb-v1.csv"));
    assert_eq!(rows.len(), 402);
    assert_eq!(rows[1][0], "-1");
    assert_eq!(rows[401][0], "1");
    for r in &rows[1..] {
        let (lo, hi): (f64, f64) = (r[2].parse().unwrap(), r[3].parse().unwrap());
        assert!(lo <= hi);
    }

    let src = r#"total_epochs = 3
n_l = 32

[dataset]
kind = "src"
sample_count = 40
class_count = 2

[model]
widths = [2, 6, 2]
loss = "cross-entropy"

[schedule]
kind = "constant"
eta = 0.1
"#;
    let cfg = write_config(tmp.path(), "src.toml", src);
    assert!(bin(&["train", &cfg, "--output-dir", "srun"], tmp.path()).status.success());
    let args = ["perturb", &cfg, "--checkpoint", "srun/checkpoints/epoch-000003.ckpt", "--top-n", "1", "--output-dir", "spt"];
    assert!(bin(&args, tmp.path()).status.success());
    let rows = csv_body(&tmp.path().join("spt/perturb-v0.csv"));
    assert_eq!(rows.len(), 1 + 200 * 200);
    assert_eq!(rows[0].last().unwrap(), "pred_plus");
}

#[test]
fn oracle_check_passes_on_a_small_net() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "wreg.toml", WREG);
    let out = bin(&["oracle-check", &cfg, "--output-dir", "o"], tmp.path());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 4);
}

#[test]
fn output_root_environment_applies_to_relative_dirs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "wreg.toml", WREG);
    let out = Command::new(env!("CARGO_BIN_EXE_landscape"))
        .args(["train", &cfg])
        .current_dir(tmp.path())
        .env(OUTPUT_ROOT_ENV, tmp.path().join("root"))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(tmp.path().join("root/runs/metrics.csv").is_file());

    assert_eq!(resolve_output_dir(Path::new("/abs"), None), PathBuf::from("/abs"));
    assert_eq!(resolve_output_dir(Path::new("rel"), Some(Path::new("flag"))), PathBuf::from("flag"));
}

fn basis(rows: &[&[f64]]) -> SubspaceBasis {
    SubspaceBasis::new(DenseMatrix::from_rows(rows).unwrap()).unwrap()
}

#[test]
fn heatmap_colors_and_determinism() {
    let one = similarity_matrix(&[basis(&[&[1.0, 0.0]])]).unwrap();
    let svg = emit_heatmap_svg(&one, &[(0, 2.0)], "single").unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let cells: Vec<_> = doc
        .descendants()
        .filter(|n| n.has_tag_name("g") && n.attribute("id") == Some("grid"))
        .flat_map(|g| g.children().filter(|c| c.has_tag_name("rect")))
        .collect();
    assert_eq!(cells.len(), 1);
    assert_eq!(cells[0].attribute("fill"), Some("#fde725"));

    let pair = similarity_matrix(&[basis(&[&[1.0, 0.0]]), basis(&[&[0.0, 1.0]])]).unwrap();
    assert!((pair.get(0, 1) - 1.0).abs() < 1e-12);
    let svg = emit_heatmap_svg(&pair, &[(0, 1.0), (1, 3.0)], "pair <&>").unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let fills: Vec<&str> = doc
        .descendants()
        .filter(|n| n.has_tag_name("g") && n.attribute("id") == Some("grid"))
        .flat_map(|g| g.children().filter_map(|c| c.attribute("fill")))
        .collect();
    assert_eq!(fills, ["#fde725", "#440154", "#440154", "#fde725"]);
    assert!(doc.descendants().any(|n| n.has_tag_name("metadata") && n.text().unwrap().contains("per-panel")));
    assert!(doc.descendants().any(|n| n.has_tag_name("polyline")));
    assert_eq!(svg, emit_heatmap_svg(&pair, &[(0, 1.0), (1, 3.0)], "pair <&>").unwrap());

    // halfway between the fifth and sixth stops
    assert_eq!(cell_color(0.25, 0.5), "#23908c");
    assert_eq!(cell_color(0.0, 0.5), "#fde725");
    assert_eq!(cell_color(0.5, 0.5), format!("#{:02x}{:02x}{:02x}", VIRIDIS[0].0, VIRIDIS[0].1, VIRIDIS[0].2));
}
