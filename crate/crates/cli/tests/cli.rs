use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mixcocycle"))
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const DELTA_HALF: &str = r#"
kind = "ergodicity"
[[measure.atoms]]
weight = 1.0
point = [0.5]
"#;

const DIAG: &str = r#"
kind = "lyapunov"
n = 50
samples = 4
[[cocycles.atoms]]
weight = 1.0
freq = [0.6180339887498949]
fiber = { diag = [2.0, 0.5] }
"#;

const NOISY: &str = r#"
kind = "lyapunov"
seed = 9
n = 300
samples = 64
[[cocycles.atoms]]
weight = 0.5
freq = [0.6180339887498949]
fiber = { schrodinger = { energy = 0.5, potential = { cosines = [{ k = [1], amplitude = 2.0 }] } } }
[[cocycles.atoms]]
weight = 0.5
freq = [0.4142135623730951]
fiber = { product = [{ shear = 0.3 }, { inverse = { diag = [1.5, 0.6666666666666666] } }] }
"#;

fn run_kind(kind: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![kind, "--config", config.to_str().unwrap(), "--out-dir", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn delta_half_reports_witness_two() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "e.toml", DELTA_HALF);
    let out = dir.path().join("out");
    let o = run_kind("ergodicity", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: toml::Table = fs::read_to_string(out.join("report.toml")).unwrap().parse().unwrap();
    assert_eq!(report["verdict"].as_str(), Some("fail"));
    assert_eq!(report["witness"].as_array().unwrap(), &vec![toml::Value::Integer(2)]);
    let modes = fs::read_to_string(out.join("modes.csv")).unwrap();
    assert!(modes.starts_with("k1,re,im,gap\n"));
    assert_eq!(modes.lines().count(), 1 + 200);
}

#[test]
fn constant_diagonal_row_is_log_two() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "l.toml", DIAG);
    let out = dir.path().join("out");
    let o = run_kind("lyapunov", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("lyapunov.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "n,samples,estimate,stderr");
    assert_eq!(lines.len(), 2);
    let est: f64 = lines[1].split(',').nth(2).unwrap().parse().unwrap();
    assert!((est - std::f64::consts::LN_2).abs() < 1e-12);
    for f in ["manifest.toml", "report.toml", "metrics.toml"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "n.toml", NOISY);
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "4", "4"].iter().enumerate() {
        let out = dir.path().join(format!("out{i}"));
        let o = run_kind("lyapunov", &cfg, &out, &["--threads", threads]);
        assert!(o.status.success(), "{}", stderr(&o));
        outputs.push((
            fs::read(out.join("lyapunov.csv")).unwrap(),
            fs::read(out.join("report.toml")).unwrap(),
            fs::read(out.join("manifest.toml")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[1], outputs[2]);
}

#[test]
fn manifest_reproduces_the_run() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "n.toml", NOISY);
    let first = dir.path().join("a");
    assert!(run_kind("lyapunov", &cfg, &first, &["--seed", "77"]).status.success());
    let manifest: toml::Table = fs::read_to_string(first.join("manifest.toml")).unwrap().parse().unwrap();
    let config = manifest["config"].as_table().unwrap();
    assert_eq!(config["seed"].as_integer(), Some(77));
    assert_eq!(config["theta"].as_str(), Some("haar"));
    assert!(manifest["artifact"]["version"].is_str());
    let defaults = manifest["defaults"].as_array().unwrap();
    assert!(defaults.iter().any(|d| d.as_str() == Some("theta = \"haar\"")));

    let replay = write_config(dir.path(), "replay.toml", &toml::to_string(config).unwrap());
    let second = dir.path().join("b");
    let o = run_kind("lyapunov", &replay, &second, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(first.join("lyapunov.csv")).unwrap(), fs::read(second.join("lyapunov.csv")).unwrap());
}

#[test]
fn seed_override_changes_samples() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "n.toml", NOISY);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run_kind("lyapunov", &cfg, &a, &[]).status.success());
    assert!(run_kind("lyapunov", &cfg, &b, &["--seed", "10"]).status.success());
    assert_ne!(fs::read(a.join("lyapunov.csv")).unwrap(), fs::read(b.join("lyapunov.csv")).unwrap());
}

#[test]
fn validate_lists_defaults() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "l.toml", DIAG);
    let o = run(&["validate", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    let out = String::from_utf8(o.stdout).unwrap();
    for d in ["seed = 0", "theta = \"haar\"", "ergodicity = \"check\"", "cutoff = 100"] {
        assert!(out.contains(d), "missing {d} in\n{out}");
    }
    assert!(o.stderr.is_empty());
}

#[test]
fn bad_weights_name_measure_and_sum() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "w.toml",
        "kind = \"ergodicity\"\n[[measure.atoms]]\nweight = 0.6\npoint = [0.1]\n[[measure.atoms]]\nweight = 0.3\npoint = [0.2]\n",
    );
    let o = run(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("`measure`") && err.contains("0.899999"), "{err}");
}

#[test]
fn unknown_fiber_node_is_named() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "u.toml",
        "kind = \"lyapunov\"\nn = 10\n[[cocycles.atoms]]\nweight = 1.0\nfreq = [0.1]\nfiber = { rotation = 0.3 }\n",
    );
    let o = run(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("rotation") && err.contains("cocycles.atoms[0].fiber"), "{err}");
}

#[test]
fn parse_errors_carry_line_and_column() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "p.toml", "kind = \"lyapunov\"\nn = = 3\n");
    let o = run(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2, column 5"), "{}", stderr(&o));
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "k.toml", &format!("{DIAG}\nsamplez = 3\n"));
    let o = run(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("samplez"), "{}", stderr(&o));
}

#[test]
fn subcommand_must_match_kind() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "e.toml", DELTA_HALF);
    let o = run_kind("lyapunov", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn io_failure_exits_with_one() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "l.toml", DIAG);
    let blocker = write_config(dir.path(), "file", "");
    let o = run_kind("lyapunov", &cfg, &blocker.join("sub"), &[]);
    assert_eq!(o.status.code(), Some(1));
    let missing = run(&["validate", "--config", dir.path().join("nope.toml").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn every_subcommand_runs() {
    let dir = TempDir::new().unwrap();
    let cases = [
        (
            "base-ldt",
            "kind = \"base-ldt\"\nepsilon = 0.1\nn_list = [10, 20]\nsamples_per_n = 500\n[observable]\ntable = [1.0, 0.0]\n[[cocycles.atoms]]\nweight = 0.5\nfreq = [0.0]\nfiber = { identity = 2 }\n[[cocycles.atoms]]\nweight = 0.5\nfreq = [0.5]\nfiber = { identity = 2 }\n",
            "tails.csv",
        ),
        (
            "fiber-ldt",
            "kind = \"fiber-ldt\"\nepsilon = 0.1\nl1_ref = 0.0\nn_list = [10, 20]\nsamples_per_n = 500\n[[cocycles.atoms]]\nweight = 1.0\nfreq = [0.3]\nfiber = { shear = 1.0 }\n",
            "tails.csv",
        ),
        (
            "semicontinuity",
            "kind = \"semicontinuity\"\nn = 20\nsamples = 8\n[[reference.atoms]]\nweight = 1.0\nfreq = [0.3]\nfiber = { diag = [2.0, 0.5] }\n[[perturbations]]\n[[perturbations.atoms]]\nweight = 1.0\nfreq = [0.31]\nfiber = { diag = [1.9, 0.5263157894736842] }\n",
            "scan.csv",
        ),
        (
            "schrodinger-scan",
            "kind = \"schrodinger-scan\"\nn = 20\nsamples = 4\nalpha = [0.6180339887498949]\nenergies = [0.0, 3.0]\n",
            "energy_scan.csv",
        ),
        (
            "wasserstein",
            "kind = \"wasserstein\"\nspace = \"real\"\n[[left.atoms]]\nweight = 1.0\nvalue = 0.0\n[[right.atoms]]\nweight = 1.0\nvalue = 2.5\n",
            "wasserstein.csv",
        ),
    ];
    for (kind, text, table) in cases {
        let cfg = write_config(dir.path(), &format!("{kind}.toml"), text);
        let out = dir.path().join(kind);
        let o = run_kind(kind, &cfg, &out, &[]);
        assert!(o.status.success(), "{kind}: {}", stderr(&o));
        let csv = fs::read_to_string(out.join(table)).unwrap();
        assert!(csv.lines().count() >= 2, "{kind}");
    }
    let w = fs::read_to_string(dir.path().join("wasserstein/wasserstein.csv")).unwrap();
    assert_eq!(w, "w1\n2.5000000000000000e0\n");
}
