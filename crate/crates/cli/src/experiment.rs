//! Default resolution, dispatch to the library, and report assembly.

use mixcocycle::base::{estimate_base_ldt, Observable};
use mixcocycle::ergodicity::{default_cutoff, run_battery, BatteryOptions, DEFAULT_TOLERANCE};
use mixcocycle::fiber::{default_grid, TrigPoly};
use mixcocycle::group::QpCocycle;
use mixcocycle::ldt::{LdtPlan, LdtReport, RateFit};
use mixcocycle::lyapunov::{
    estimate_l1, fiber_ldt_tail, semicontinuity_scan, ErgodicityFlag, ErgodicityGate, L1Estimate, ScanParams,
    ThetaPolicy,
};
use mixcocycle::measure::{pushforward_freq, wasserstein1, AtomicMeasure, GMetric};
use mixcocycle::schrodinger::{lyapunov_energy_scan, EnergyScanParams, FrequencySpec, SchrodingerModel};
use mixcocycle::table::{energy_table, ergodicity_table, fmt_float, l1_table, ldt_table, scan_table, Table};
use mixcocycle::torus::TorusPoint;
use serde::Serialize;
use toml::Value;

use crate::error::{CliError, CliResult};
use crate::schema::*;

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_SAMPLES: usize = 1000;
pub const DEFAULT_SAMPLES_PER_N: usize = 10_000;
pub const DEFAULT_SUMSET_N_MAX: u32 = 10_000;
pub const DEFAULT_EPSILON_PROBE: f64 = 0.05;

/// Records every default filled into a configuration.
#[derive(Debug, Default)]
struct Defaults(Vec<String>);

impl Defaults {
    fn fill<T: Serialize + Clone>(&mut self, slot: &mut Option<T>, name: &str, value: impl FnOnce() -> T) -> T {
        if let Some(v) = slot {
            return v.clone();
        }
        let v = value();
        let shown = Value::try_from(&v).map_or_else(|_| "?".to_string(), |t| t.to_string());
        self.0.push(format!("{name} = {shown}"));
        *slot = Some(v.clone());
        v
    }
}

fn positive(name: &str, value: usize) -> CliResult<usize> {
    if value == 0 {
        Err(CliError::config(format!("`{name}` must be at least 1")))
    } else {
        Ok(value)
    }
}

fn positive_f(name: &str, value: f64) -> CliResult<f64> {
    if value > 0.0 && !value.is_nan() {
        Ok(value)
    } else {
        Err(CliError::config(format!("`{name}` must be positive, got {value}")))
    }
}

fn point(name: &str, coords: &[f64], d: usize) -> CliResult<TorusPoint> {
    if coords.len() != d {
        return Err(CliError::config(format!("`{name}` has {} coordinates, expected {d}", coords.len())));
    }
    TorusPoint::wrap(coords).map_err(|e| CliError::config(format!("`{name}`: {e}")))
}

fn n_list(name: &str, list: &[usize]) -> CliResult<Vec<usize>> {
    if list.is_empty() || list.contains(&0) {
        return Err(CliError::config(format!("`{name}` must be a non-empty list of positive integers")));
    }
    Ok(list.to_vec())
}

fn theta_policy(spec: &ThetaSpec, d: usize) -> CliResult<ThetaPolicy> {
    Ok(match spec {
        ThetaSpec::Named(ThetaName::Haar) => ThetaPolicy::Haar,
        ThetaSpec::Point(p) => ThetaPolicy::Fixed(point("theta", p, d)?),
    })
}

fn gate(spec: GateSpec, cutoff: u32) -> ErgodicityGate {
    match spec {
        GateSpec::Check => ErgodicityGate::Check { cutoff, tolerance: DEFAULT_TOLERANCE },
        GateSpec::Override => ErgodicityGate::Override,
    }
}

fn cocycle_dims(nu: &AtomicMeasure<QpCocycle>) -> (usize, usize) {
    let g = &nu.atoms()[0];
    (g.torus_dim(), g.matrix_size())
}

/// A validated experiment with every parameter resolved.
#[derive(Debug, Clone)]
pub enum Job {
    Ergodicity {
        mu: AtomicMeasure<TorusPoint>,
        options: BatteryOptions,
    },
    BaseLdt {
        nu: AtomicMeasure<QpCocycle>,
        observable: Observable,
        theta: TorusPoint,
        plan: LdtPlan,
    },
    Lyapunov {
        nu: AtomicMeasure<QpCocycle>,
        n: usize,
        samples: usize,
        theta: ThetaPolicy,
        seed: u64,
        gate: ErgodicityGate,
    },
    FiberLdt {
        nu: AtomicMeasure<QpCocycle>,
        theta: TorusPoint,
        l1_ref: f64,
        plan: LdtPlan,
    },
    Semicontinuity {
        nu0: AtomicMeasure<QpCocycle>,
        perturbations: Vec<AtomicMeasure<QpCocycle>>,
        params: ScanParams,
        delta_probe: f64,
        epsilon_probe: f64,
    },
    SchrodingerScan {
        model: SchrodingerModel,
        energies: Vec<f64>,
        params: EnergyScanParams,
    },
    WassersteinReal(AtomicMeasure<f64>, AtomicMeasure<f64>),
    WassersteinTorus(AtomicMeasure<TorusPoint>, AtomicMeasure<TorusPoint>),
    WassersteinCocycle(AtomicMeasure<QpCocycle>, AtomicMeasure<QpCocycle>, GMetric),
}

#[derive(Debug, Clone)]
pub struct Prepared {
    /// The input configuration with every default filled in.
    pub config: ExperimentConfig,
    /// `name = value` for each default that was applied.
    pub defaults: Vec<String>,
    pub job: Job,
}

/// Resolves defaults and builds the library objects without computing.
pub fn prepare(mut config: ExperimentConfig) -> CliResult<Prepared> {
    let mut df = Defaults::default();
    let job = match &mut config {
        ExperimentConfig::Ergodicity(c) => {
            df.fill(&mut c.seed, "seed", || DEFAULT_SEED);
            let mu = match (&c.measure, &c.cocycles) {
                (Some(m), None) => m.torus("measure")?,
                (None, Some(m)) => pushforward_freq(&m.cocycle("cocycles")?),
                _ => return Err(CliError::config("give exactly one of `measure` (torus) or `cocycles`")),
            };
            let d = mu.dim();
            let cutoff = df.fill(&mut c.cutoff, "cutoff", || default_cutoff(d));
            if cutoff == 0 {
                return Err(CliError::config("`cutoff` must be at least 1"));
            }
            let tolerance = df.fill(&mut c.tolerance, "tolerance", || DEFAULT_TOLERANCE);
            if !(tolerance >= 0.0) {
                return Err(CliError::config("`tolerance` must be non-negative"));
            }
            let base = BatteryOptions::for_dim(d);
            let options = BatteryOptions {
                cutoff,
                tolerance,
                cesaro_grid: positive("cesaro_grid", df.fill(&mut c.cesaro_grid, "cesaro_grid", || base.cesaro_grid))?,
                sumset_eps: positive_f("sumset_eps", df.fill(&mut c.sumset_eps, "sumset_eps", || base.sumset_eps))?,
                sumset_n_max: df.fill(&mut c.sumset_n_max, "sumset_n_max", || DEFAULT_SUMSET_N_MAX),
            };
            if options.sumset_n_max == 0 {
                return Err(CliError::config("`sumset_n_max` must be at least 1"));
            }
            Job::Ergodicity { mu, options }
        }
        ExperimentConfig::BaseLdt(c) => {
            let seed = df.fill(&mut c.seed, "seed", || DEFAULT_SEED);
            let nu = c.cocycles.cocycle("cocycles")?;
            if nu.len() != c.cocycles.atoms.len() {
                return Err(CliError::config(
                    "measure `cocycles`: coinciding atoms were merged, but observable tables index atoms by position",
                ));
            }
            let (d, _) = cocycle_dims(&nu);
            let alphabet = nu.len();
            let o = &mut c.observable;
            let window = positive("observable.window", df.fill(&mut o.window, "observable.window", || 1))?;
            let size = alphabet.checked_pow(window as u32).filter(|&s| s <= 1 << 24).ok_or_else(|| {
                CliError::config(format!("observable table of {alphabet}^{window} entries is too large"))
            })?;
            let table = df.fill(&mut o.table, "observable.table", || vec![1.0; size]);
            let trig_spec = df.fill(&mut o.trig, "observable.trig", || TrigPolySpec {
                constant: Some(1.0),
                ..TrigPolySpec::default()
            });
            let trig = trig_spec.build(d, "observable.trig")?;
            let observable = Observable::new(window, alphabet, table, trig)
                .map_err(|e| CliError::config(format!("observable: {e}")))?;
            let theta = df.fill(&mut c.theta, "theta", || vec![0.0; d]);
            let plan = LdtPlan {
                epsilon: positive_f("epsilon", c.epsilon)?,
                n_list: n_list("n_list", &c.n_list)?,
                samples_per_n: positive("samples_per_n", df.fill(&mut c.samples_per_n, "samples_per_n", || DEFAULT_SAMPLES_PER_N))?,
                seed,
            };
            Job::BaseLdt { theta: point("theta", &theta, d)?, nu, observable, plan }
        }
        ExperimentConfig::Lyapunov(c) => {
            let seed = df.fill(&mut c.seed, "seed", || DEFAULT_SEED);
            let nu = c.cocycles.cocycle("cocycles")?;
            let (d, _) = cocycle_dims(&nu);
            let samples = positive("samples", df.fill(&mut c.samples, "samples", || DEFAULT_SAMPLES))?;
            let theta = theta_policy(&df.fill(&mut c.theta, "theta", || ThetaSpec::Named(ThetaName::Haar)), d)?;
            let g = df.fill(&mut c.ergodicity, "ergodicity", || GateSpec::Check);
            let cutoff = df.fill(&mut c.cutoff, "cutoff", || default_cutoff(d));
            Job::Lyapunov { n: positive("n", c.n)?, samples, theta, seed, gate: gate(g, cutoff), nu }
        }
        ExperimentConfig::FiberLdt(c) => {
            let seed = df.fill(&mut c.seed, "seed", || DEFAULT_SEED);
            let nu = c.cocycles.cocycle("cocycles")?;
            let (d, _) = cocycle_dims(&nu);
            let theta = df.fill(&mut c.theta, "theta", || vec![0.0; d]);
            if !c.l1_ref.is_finite() {
                return Err(CliError::config("`l1_ref` must be finite"));
            }
            let plan = LdtPlan {
                epsilon: positive_f("epsilon", c.epsilon)?,
                n_list: n_list("n_list", &c.n_list)?,
                samples_per_n: positive("samples_per_n", df.fill(&mut c.samples_per_n, "samples_per_n", || DEFAULT_SAMPLES_PER_N))?,
                seed,
            };
            Job::FiberLdt { theta: point("theta", &theta, d)?, l1_ref: c.l1_ref, nu, plan }
        }
        ExperimentConfig::Semicontinuity(c) => {
            let seed = df.fill(&mut c.seed, "seed", || DEFAULT_SEED);
            let nu0 = c.reference.cocycle("reference")?;
            let (d, m) = cocycle_dims(&nu0);
            let perturbations = c
                .perturbations
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let nu = p.cocycle(&format!("perturbations[{i}]"))?;
                    if cocycle_dims(&nu) != (d, m) {
                        return Err(CliError::config(format!(
                            "measure `perturbations[{i}]` lives on a different torus or matrix size than `reference`"
                        )));
                    }
                    Ok(nu)
                })
                .collect::<CliResult<Vec<_>>>()?;
            let samples = positive("samples", df.fill(&mut c.samples, "samples", || DEFAULT_SAMPLES))?;
            let theta = theta_policy(&df.fill(&mut c.theta, "theta", || ThetaSpec::Named(ThetaName::Haar)), d)?;
            let g = df.fill(&mut c.ergodicity, "ergodicity", || GateSpec::Check);
            let metric = GMetric {
                grid: positive("grid", df.fill(&mut c.grid, "grid", || default_grid(d)))?,
                freq_weight: df.fill(&mut c.freq_weight, "freq_weight", || 1.0),
                fiber_weight: df.fill(&mut c.fiber_weight, "fiber_weight", || 1.0),
            };
            if !(metric.freq_weight > 0.0 && metric.fiber_weight > 0.0) {
                return Err(CliError::config("metric weights must be positive"));
            }
            let params = ScanParams { n: positive("n", c.n)?, samples, theta, seed, metric, gate: gate(g, default_cutoff(d)) };
            Job::Semicontinuity {
                nu0,
                perturbations,
                params,
                delta_probe: df.fill(&mut c.delta_probe, "delta_probe", || f64::INFINITY),
                epsilon_probe: df.fill(&mut c.epsilon_probe, "epsilon_probe", || DEFAULT_EPSILON_PROBE),
            }
        }
        ExperimentConfig::SchrodingerScan(c) => {
            let seed = df.fill(&mut c.seed, "seed", || DEFAULT_SEED);
            let frequency = match (&c.alpha, &c.frequencies) {
                (Some(a), None) => FrequencySpec::Fixed(
                    TorusPoint::wrap(a).map_err(|e| CliError::config(format!("`alpha`: {e}")))?,
                ),
                (None, Some(m)) => FrequencySpec::Random(m.torus("frequencies")?),
                _ => return Err(CliError::config("give exactly one of `alpha` or `frequencies`")),
            };
            let d = frequency.dim();
            if d == 0 {
                return Err(CliError::config("`alpha` must have at least one coordinate"));
            }
            let potential = match &c.potential {
                Some(p) => p.build(d, "potential")?,
                None => {
                    df.fill(&mut c.potential, "potential", TrigPolySpec::default);
                    TrigPoly::zero(d)
                }
            };
            let noise_spec = df.fill(&mut c.noise, "noise", || MeasureSpec {
                atoms: vec![AtomSpec { weight: 1.0, point: None, value: Some(0.0), freq: None, fiber: None }],
            });
            let noise = noise_spec.real("noise")?;
            let model = SchrodingerModel::new(potential, frequency, noise).map_err(|e| CliError::config(e.to_string()))?;
            let energies = match &c.energies {
                Some(e) => e.clone(),
                None => {
                    let grid = model.default_energy_grid()?;
                    df.fill(&mut c.energies, "energies", || grid)
                }
            };
            if energies.is_empty() || energies.iter().any(|e| !e.is_finite()) {
                return Err(CliError::config("`energies` must be a non-empty list of finite numbers"));
            }
            let samples = positive("samples", df.fill(&mut c.samples, "samples", || DEFAULT_SAMPLES))?;
            let theta = theta_policy(&df.fill(&mut c.theta, "theta", || ThetaSpec::Named(ThetaName::Haar)), d)?;
            let g = df.fill(&mut c.ergodicity, "ergodicity", || GateSpec::Check);
            let params = EnergyScanParams { n: positive("n", c.n)?, samples, theta, seed, gate: gate(g, default_cutoff(d)) };
            Job::SchrodingerScan { model, energies, params }
        }
        ExperimentConfig::Wasserstein(c) => {
            df.fill(&mut c.seed, "seed", || DEFAULT_SEED);
            match c.space {
                Space::Real => Job::WassersteinReal(c.left.real("left")?, c.right.real("right")?),
                Space::Torus => {
                    let (l, r) = (c.left.torus("left")?, c.right.torus("right")?);
                    if l.dim() != r.dim() {
                        return Err(CliError::config("measures `left` and `right` live on tori of different dimension"));
                    }
                    Job::WassersteinTorus(l, r)
                }
                Space::Cocycle => {
                    let (l, r) = (c.left.cocycle("left")?, c.right.cocycle("right")?);
                    let (d, m) = cocycle_dims(&l);
                    if cocycle_dims(&r) != (d, m) {
                        return Err(CliError::config("measures `left` and `right` differ in torus or matrix size"));
                    }
                    let metric = GMetric {
                        grid: positive("grid", df.fill(&mut c.grid, "grid", || default_grid(d)))?,
                        freq_weight: df.fill(&mut c.freq_weight, "freq_weight", || 1.0),
                        fiber_weight: df.fill(&mut c.fiber_weight, "fiber_weight", || 1.0),
                    };
                    Job::WassersteinCocycle(l, r, metric)
                }
            }
        }
    };
    Ok(Prepared { config, defaults: df.0, job })
}

/// Tables and summary produced by a run.
#[derive(Debug, Clone)]
pub struct Outcome {
    /// `(file name, table)`
    pub tables: Vec<(String, Table)>,
    pub report: toml::Table,
    /// Matrix or observable steps performed, for throughput metrics.
    pub work: u64,
}

fn flag_value(flag: &ErgodicityFlag) -> Value {
    Value::String(match flag {
        ErgodicityFlag::Certified { cutoff } => format!("certified up to cutoff {cutoff}"),
        ErgodicityFlag::Refuted { witness } => format!("refuted: mu_hat(k) = 1 at k = {:?}", witness.as_slice()),
        ErgodicityFlag::Overridden => "overridden".to_string(),
    })
}

fn estimate_value(e: &L1Estimate) -> Value {
    let mut t = toml::Table::new();
    t.insert("estimate".into(), Value::Float(e.mean));
    t.insert("stderr".into(), Value::Float(e.stderr));
    t.insert("n".into(), Value::Integer(e.n as i64));
    t.insert("samples".into(), Value::Integer(e.samples as i64));
    t.insert(
        "theta".into(),
        Value::String(match &e.theta_policy {
            ThetaPolicy::Haar => "haar".into(),
            ThetaPolicy::Fixed(p) => format!("{:?}", p.coords()),
        }),
    );
    t.insert("ergodicity".into(), flag_value(&e.ergodicity));
    Value::Table(t)
}

fn ldt_report(r: &LdtReport) -> toml::Table {
    let mut t = toml::Table::new();
    t.insert("epsilon".into(), Value::Float(r.epsilon));
    t.insert("reference".into(), Value::Float(r.reference));
    t.insert("monotone_decay".into(), Value::Boolean(r.monotone_decay));
    let mut rate = toml::Table::new();
    match &r.rate {
        RateFit::Fitted { rate: c, intercept, r_squared, residual_rms, points } => {
            rate.insert("status".into(), Value::String("fitted".into()));
            rate.insert("rate".into(), Value::Float(*c));
            rate.insert("intercept".into(), Value::Float(*intercept));
            rate.insert("r_squared".into(), Value::Float(*r_squared));
            rate.insert("residual_rms".into(), Value::Float(*residual_rms));
            rate.insert("points".into(), Value::Integer(*points as i64));
        }
        RateFit::Censored { lower_bound } => {
            rate.insert("status".into(), Value::String("censored".into()));
            rate.insert("lower_bound".into(), Value::Float(*lower_bound));
        }
        RateFit::Insufficient { nonzero } => {
            rate.insert("status".into(), Value::String("insufficient".into()));
            rate.insert("nonzero_tails".into(), Value::Integer(*nonzero as i64));
        }
    }
    t.insert("rate".into(), Value::Table(rate));
    t
}

fn ldt_work(plan: &LdtPlan) -> u64 {
    plan.n_list.iter().map(|&n| (n * plan.samples_per_n) as u64).sum()
}

fn w1_outcome(w1: f64) -> Outcome {
    let mut table = Table::new(["w1"]);
    table.push(vec![fmt_float(w1)]);
    let mut report = toml::Table::new();
    report.insert("w1".into(), Value::Float(w1));
    Outcome { tables: vec![("wasserstein.csv".into(), table)], report, work: 0 }
}

/// Runs a prepared job on the current rayon pool.
pub fn run_job(job: &Job) -> CliResult<Outcome> {
    Ok(match job {
        Job::Ergodicity { mu, options } => {
            let r = run_battery(mu, options)?;
            let mut report = toml::Table::new();
            report.insert("verdict".into(), Value::String(r.verdict.to_string()));
            report.insert("summary".into(), Value::String(r.summary()));
            report.insert("cutoff".into(), Value::Integer(r.cutoff as i64));
            report.insert("tolerance".into(), Value::Float(r.tolerance));
            if let Some(k) = &r.witness {
                report.insert("witness".into(), Value::Array(k.iter().map(|&x| Value::Integer(x)).collect()));
            }
            if let Some(g) = r.min_gap() {
                report.insert("min_gap".into(), Value::Float(g.gap));
                report.insert("min_gap_mode".into(), Value::Array(g.mode.iter().map(|&x| Value::Integer(x)).collect()));
            }
            let criteria = r
                .criteria
                .iter()
                .map(|c| {
                    let mut t = toml::Table::new();
                    t.insert("criterion".into(), Value::String(c.criterion.to_string()));
                    t.insert("verdict".into(), Value::String(c.verdict.to_string()));
                    t.insert("detail".into(), Value::String(c.detail.clone()));
                    Value::Table(t)
                })
                .collect();
            report.insert("criteria".into(), Value::Array(criteria));
            Outcome { tables: vec![("modes.csv".into(), ergodicity_table(&r))], report, work: r.gaps.len() as u64 }
        }
        Job::BaseLdt { nu, observable, theta, plan } => {
            let r = estimate_base_ldt(nu, observable, theta, plan)?;
            Outcome { tables: vec![("tails.csv".into(), ldt_table(&r))], report: ldt_report(&r), work: ldt_work(plan) }
        }
        Job::Lyapunov { nu, n, samples, theta, seed, gate } => {
            let e = estimate_l1(nu, *n, *samples, theta, *seed, gate)?;
            let mut report = toml::Table::new();
            report.insert("l1".into(), estimate_value(&e));
            Outcome { tables: vec![("lyapunov.csv".into(), l1_table([&e]))], report, work: (*n * *samples) as u64 }
        }
        Job::FiberLdt { nu, theta, l1_ref, plan } => {
            let r = fiber_ldt_tail(nu, theta, *l1_ref, plan)?;
            Outcome { tables: vec![("tails.csv".into(), ldt_table(&r))], report: ldt_report(&r), work: ldt_work(plan) }
        }
        Job::Semicontinuity { nu0, perturbations, params, delta_probe, epsilon_probe } => {
            let scan = semicontinuity_scan(nu0, perturbations, params)?;
            let mut report = toml::Table::new();
            report.insert("reference".into(), estimate_value(&scan.reference));
            report.insert("delta_probe".into(), Value::Float(*delta_probe));
            report.insert("epsilon_probe".into(), Value::Float(*epsilon_probe));
            report.insert(
                "upper_semicontinuous".into(),
                Value::Boolean(scan.upper_semicontinuous(*delta_probe, *epsilon_probe)),
            );
            report.insert("non_increasing".into(), Value::Boolean(scan.non_increasing(3.0)));
            let work = ((perturbations.len() + 1) * params.n * params.samples) as u64;
            Outcome { tables: vec![("scan.csv".into(), scan_table(&scan))], report, work }
        }
        Job::SchrodingerScan { model, energies, params } => {
            let rows = lyapunov_energy_scan(model, energies, params)?;
            let mut report = toml::Table::new();
            report.insert("energies".into(), Value::Integer(rows.len() as i64));
            let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                (lo.min(r.estimate.mean), hi.max(r.estimate.mean))
            });
            report.insert("min_l1".into(), Value::Float(lo));
            report.insert("max_l1".into(), Value::Float(hi));
            if let Some(first) = rows.first() {
                report.insert("ergodicity".into(), flag_value(&first.estimate.ergodicity));
            }
            let work = (rows.len() * params.n * params.samples) as u64;
            Outcome { tables: vec![("energy_scan.csv".into(), energy_table(&rows))], report, work }
        }
        Job::WassersteinReal(a, b) => w1_outcome(wasserstein1(a, b, |x, y| Ok((x - y).abs()))?),
        Job::WassersteinTorus(a, b) => w1_outcome(wasserstein1(a, b, |x, y| x.dist(y))?),
        Job::WassersteinCocycle(a, b, metric) => w1_outcome(wasserstein1(a, b, |x, y| metric.distance(x, y))?),
    })
}
