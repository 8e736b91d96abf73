use std::fs;
use std::path::Path;

use mixcocycle_cli::{parse_config, prepare, CliError, Job, Kind};

fn config_err(text: &str) -> String {
    match parse_config(text).and_then(prepare) {
        Err(CliError::Config(msg)) => msg,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        prepare(parse_config(&text).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen += 1;
    }
    assert!(seen >= 7);
}

#[test]
fn resolved_config_round_trips() {
    let text = r#"
kind = "semicontinuity"
n = 20
[[reference.atoms]]
weight = 1.0
freq = [0.3]
fiber = { translate = { child = { schrodinger = { energy = 1.0 } }, shift = [0.25] } }
[[perturbations]]
[[perturbations.atoms]]
weight = 1.0
freq = [0.31]
fiber = { product = [{ shear = 0.1 }, { inverse = { identity = 2 } }] }
"#;
    let prepared = prepare(parse_config(text).unwrap()).unwrap();
    let echoed = toml::to_string(prepared.config.to_value().unwrap().as_table().unwrap()).unwrap();
    let again = prepare(parse_config(&echoed).unwrap()).unwrap();
    assert_eq!(again.config, prepared.config);
    assert!(again.defaults.is_empty(), "{:?}", again.defaults);
    for d in ["seed = 0", "samples = 1000", "delta_probe = inf", "epsilon_probe = 0.05", "grid = 256"] {
        assert!(prepared.defaults.iter().any(|x| x == d), "missing {d} in {:?}", prepared.defaults);
    }
}

#[test]
fn ergodicity_takes_one_measure() {
    let both = "kind = \"ergodicity\"\n[[measure.atoms]]\nweight = 1.0\npoint = [0.5]\n[[cocycles.atoms]]\nweight = 1.0\nfreq = [0.5]\nfiber = { shear = 1.0 }\n";
    assert!(config_err(both).contains("exactly one"));
    assert!(config_err("kind = \"ergodicity\"\n").contains("exactly one"));
}

#[test]
fn cocycle_measures_project_to_frequencies() {
    let text = "kind = \"ergodicity\"\n[[cocycles.atoms]]\nweight = 0.5\nfreq = [0.5]\nfiber = { shear = 1.0 }\n[[cocycles.atoms]]\nweight = 0.5\nfreq = [0.5]\nfiber = { diag = [2.0, 0.5] }\n";
    let prepared = prepare(parse_config(text).unwrap()).unwrap();
    match prepared.job {
        Job::Ergodicity { mu, .. } => assert_eq!(mu.len(), 1),
        other => panic!("{other:?}"),
    }
}

#[test]
fn schema_errors_name_the_offending_field() {
    let msg = config_err("kind = \"lyapunov\"\nn = 5\n[[cocycles.atoms]]\nweight = 1.0\nfreq = [0.1]\nfiber = { diag = [2.0, 0.4] }\n");
    assert!(msg.contains("measure `cocycles` atom 0 fiber") && msg.contains("det"), "{msg}");

    let msg = config_err("kind = \"lyapunov\"\nn = 5\n[[cocycles.atoms]]\nweight = 1.0\npoint = [0.1]\n");
    assert!(msg.contains("`point`"), "{msg}");

    let msg = config_err("kind = \"lyapunov\"\nn = 0\n[[cocycles.atoms]]\nweight = 1.0\nfreq = [0.1]\nfiber = { shear = 1.0 }\n");
    assert!(msg.contains("`n`"), "{msg}");

    let msg = config_err("kind = \"spectral\"\n");
    assert!(msg.contains("kind"), "{msg}");
}

#[test]
fn base_ldt_keeps_atoms_distinct() {
    let msg = config_err(
        "kind = \"base-ldt\"\nepsilon = 0.1\nn_list = [10]\n[observable]\ntable = [1.0, 0.0]\n[[cocycles.atoms]]\nweight = 0.5\nfreq = [0.0]\nfiber = { identity = 2 }\n[[cocycles.atoms]]\nweight = 0.5\nfreq = [0.0]\nfiber = { identity = 2 }\n",
    );
    assert!(msg.contains("merged"), "{msg}");
}

#[test]
fn schrodinger_defaults_cover_the_spectrum() {
    let text = "kind = \"schrodinger-scan\"\nn = 10\nalpha = [0.3]\npotential = { cosines = [{ k = [1], amplitude = 2.0 }] }\n";
    let prepared = prepare(parse_config(text).unwrap()).unwrap();
    assert_eq!(prepared.config.kind(), Kind::SchrodingerScan);
    match prepared.job {
        Job::SchrodingerScan { energies, .. } => {
            assert!(energies.first().unwrap() <= &-4.0 && energies.last().unwrap() >= &4.0);
            assert!(energies.windows(2).all(|w| w[1] > w[0]));
        }
        other => panic!("{other:?}"),
    }
    assert!(prepared.defaults.iter().any(|d| d.starts_with("energies = [")));
}
