//! Experiment configuration files.
//!
//! A config is a TOML document with a top-level `kind` naming the
//! experiment; the remaining keys are checked against the schema for that
//! kind, and unknown keys are rejected.

use std::fmt;
use std::sync::Arc;

use mixcocycle::fiber::{FiberMap, TrigPoly};
use mixcocycle::group::QpCocycle;
use mixcocycle::matrix::SlMatrix;
use mixcocycle::measure::AtomicMeasure;
use mixcocycle::torus::{Mode, TorusPoint};
use mixcocycle::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Ergodicity,
    BaseLdt,
    Lyapunov,
    FiberLdt,
    Semicontinuity,
    SchrodingerScan,
    Wasserstein,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Ergodicity => "ergodicity",
            Kind::BaseLdt => "base-ldt",
            Kind::Lyapunov => "lyapunov",
            Kind::FiberLdt => "fiber-ldt",
            Kind::Semicontinuity => "semicontinuity",
            Kind::SchrodingerScan => "schrodinger-scan",
            Kind::Wasserstein => "wasserstein",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `Σ c_k e_k(θ)`, given by any mix of a constant, cosines and raw terms.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigPolySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
    /// `amplitude · cos(2π⟨k, θ⟩)`
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cosines: Vec<CosineSpec>,
    /// Raw coefficients; the mirror mode must carry the conjugate.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terms: Vec<TermSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosineSpec {
    pub k: Vec<i64>,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub k: Vec<i64>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl TrigPolySpec {
    pub fn build(&self, d: usize, ctx: &str) -> CliResult<TrigPoly> {
        if let Some(dim) = self.dim {
            if dim != d {
                return Err(CliError::config(format!("{ctx}: polynomial has dim = {dim}, expected {d}")));
            }
        }
        let mut terms: Vec<(Mode, Complex64)> = Vec::new();
        if let Some(c) = self.constant {
            terms.push((Mode::from_elem(0, d), Complex64::new(c, 0.0)));
        }
        for c in &self.cosines {
            let half = Complex64::new(c.amplitude / 2.0, 0.0);
            terms.push((Mode::from_slice(&c.k), half));
            terms.push((c.k.iter().map(|x| -x).collect(), half));
        }
        for t in &self.terms {
            terms.push((Mode::from_slice(&t.k), Complex64::new(t.re, t.im)));
        }
        TrigPoly::new(d, terms).map_err(|e| CliError::config(format!("{ctx}: {e}")))
    }
}

/// Fiber-map expression tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FiberSpec {
    /// `m × m` identity.
    Identity(usize),
    /// Constant matrix given by rows.
    Const(Vec<Vec<f64>>),
    /// Constant diagonal matrix.
    Diag(Vec<f64>),
    /// `[[v(θ) − E, −1], [1, 0]]`
    Schrodinger {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        potential: Option<TrigPolySpec>,
        energy: f64,
    },
    /// `[[1, w], [0, 1]]`
    Shear(f64),
    /// `θ ↦ child(θ + shift)`
    Translate { child: Box<FiberSpec>, shift: Vec<f64> },
    /// `θ ↦ left(θ) · right(θ)`
    Product(Box<FiberSpec>, Box<FiberSpec>),
    /// `θ ↦ child(θ)⁻¹`
    Inverse(Box<FiberSpec>),
}

impl FiberSpec {
    pub fn build(&self, d: usize, ctx: &str) -> CliResult<FiberMap> {
        let err = |e: mixcocycle::Error| CliError::config(format!("{ctx}: {e}"));
        Ok(match self {
            FiberSpec::Identity(m) => {
                if *m == 0 {
                    return Err(CliError::config(format!("{ctx}: identity size must be positive")));
                }
                FiberMap::identity(*m)
            }
            FiberSpec::Const(rows) => FiberMap::Const(SlMatrix::from_rows(rows).map_err(err)?),
            FiberSpec::Diag(v) => FiberMap::Const(SlMatrix::diag(v).map_err(err)?),
            FiberSpec::Schrodinger { potential, energy } => {
                let v = match potential {
                    Some(p) => p.build(d, &format!("{ctx}.potential"))?,
                    None => TrigPoly::zero(d),
                };
                if !energy.is_finite() {
                    return Err(CliError::config(format!("{ctx}: energy must be finite")));
                }
                FiberMap::schrodinger(v, *energy)
            }
            FiberSpec::Shear(w) => {
                if !w.is_finite() {
                    return Err(CliError::config(format!("{ctx}: shear must be finite")));
                }
                FiberMap::Shear(*w)
            }
            FiberSpec::Translate { child, shift } => {
                let c = child.build(d, &format!("{ctx}.translate.child"))?;
                FiberMap::translate(Arc::new(c), TorusPoint::wrap(shift).map_err(err)?).map_err(err)?
            }
            FiberSpec::Product(l, r) => {
                let l = l.build(d, &format!("{ctx}.product[0]"))?;
                let r = r.build(d, &format!("{ctx}.product[1]"))?;
                FiberMap::product(Arc::new(l), Arc::new(r)).map_err(err)?
            }
            FiberSpec::Inverse(c) => FiberMap::inverse(Arc::new(c.build(d, &format!("{ctx}.inverse"))?)),
        })
    }
}

/// One atom; which fields are required depends on the space of the measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub weight: f64,
    /// Torus measures.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    /// Real measures.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    /// Cocycle measures: frequency and fiber.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freq: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fiber: Option<FiberSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    pub atoms: Vec<AtomSpec>,
}

fn measure_error(name: &str, e: mixcocycle::Error) -> CliError {
    CliError::config(format!("measure `{name}`: {e}"))
}

impl MeasureSpec {
    fn check_fields(&self, name: &str, space: &str, allowed: [bool; 4]) -> CliResult<()> {
        for (i, a) in self.atoms.iter().enumerate() {
            let present = [a.point.is_some(), a.value.is_some(), a.freq.is_some(), a.fiber.is_some()];
            for (j, label) in ["point", "value", "freq", "fiber"].iter().enumerate() {
                if present[j] && !allowed[j] {
                    return Err(CliError::config(format!(
                        "measure `{name}` atom {i}: `{label}` is not used by {space} measures"
                    )));
                }
                if !present[j] && allowed[j] {
                    return Err(CliError::config(format!("measure `{name}` atom {i}: missing `{label}`")));
                }
            }
        }
        if self.atoms.is_empty() {
            return Err(CliError::config(format!("measure `{name}`: no atoms")));
        }
        Ok(())
    }

    pub fn torus(&self, name: &str) -> CliResult<AtomicMeasure<TorusPoint>> {
        self.check_fields(name, "torus", [true, false, false, false])?;
        let d = self.atoms[0].point.as_ref().map_or(0, Vec::len);
        let atoms = self
            .atoms
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let p = a.point.as_deref().unwrap_or_default();
                if p.len() != d || d == 0 {
                    return Err(CliError::config(format!(
                        "measure `{name}` atom {i}: point has {} coordinates, expected {}",
                        p.len(),
                        d.max(1)
                    )));
                }
                Ok((TorusPoint::wrap(p).map_err(|e| measure_error(name, e))?, a.weight))
            })
            .collect::<CliResult<Vec<_>>>()?;
        AtomicMeasure::new(atoms).map_err(|e| measure_error(name, e))
    }

    pub fn real(&self, name: &str) -> CliResult<AtomicMeasure<f64>> {
        self.check_fields(name, "real", [false, true, false, false])?;
        let atoms = self
            .atoms
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let v = a.value.unwrap_or_default();
                if !v.is_finite() {
                    return Err(CliError::config(format!("measure `{name}` atom {i}: value must be finite")));
                }
                Ok((v, a.weight))
            })
            .collect::<CliResult<Vec<_>>>()?;
        AtomicMeasure::new(atoms).map_err(|e| measure_error(name, e))
    }

    pub fn cocycle(&self, name: &str) -> CliResult<AtomicMeasure<QpCocycle>> {
        self.check_fields(name, "cocycle", [false, false, true, true])?;
        let d = self.atoms[0].freq.as_ref().map_or(0, Vec::len);
        let mut m = None;
        let atoms = self
            .atoms
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let freq = a.freq.as_deref().unwrap_or_default();
                if freq.len() != d || d == 0 {
                    return Err(CliError::config(format!(
                        "measure `{name}` atom {i}: freq has {} coordinates, expected {}",
                        freq.len(),
                        d.max(1)
                    )));
                }
                let ctx = format!("measure `{name}` atom {i} fiber");
                let fiber = a.fiber.as_ref().expect("checked above").build(d, &ctx)?;
                if let Some(td) = fiber.torus_dim() {
                    if td != d {
                        return Err(CliError::config(format!("{ctx}: fiber lives on a {td}-torus, freq on a {d}-torus")));
                    }
                }
                let size = fiber.matrix_size();
                if *m.get_or_insert(size) != size {
                    return Err(CliError::config(format!("{ctx}: {size}×{size} fiber in a measure of {}×{} fibers", m.unwrap(), m.unwrap())));
                }
                let g = QpCocycle::new(TorusPoint::wrap(freq).map_err(|e| measure_error(name, e))?, fiber)
                    .map_err(|e| measure_error(name, e))?;
                Ok((g, a.weight))
            })
            .collect::<CliResult<Vec<_>>>()?;
        AtomicMeasure::new(atoms).map_err(|e| measure_error(name, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaName {
    Haar,
}

/// `"haar"` or a point of the torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThetaSpec {
    Named(ThetaName),
    Point(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateSpec {
    Check,
    Override,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    Real,
    Torus,
    Cocycle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErgodicityConfig {
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Frequency law `μ` directly...
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<MeasureSpec>,
    /// ...or a cocycle measure whose frequencies are pushed forward.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cocycles: Option<MeasureSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cesaro_grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sumset_eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sumset_n_max: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    /// Indexed by `Σ_i ω_i · (number of atoms)^i`; defaults to all ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<f64>>,
    /// Defaults to the constant 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trig: Option<TrigPolySpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseLdtConfig {
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub cocycles: MeasureSpec,
    pub observable: ObservableSpec,
    pub epsilon: f64,
    pub n_list: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples_per_n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovConfig {
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub cocycles: MeasureSpec,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<ThetaSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ergodicity: Option<GateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberLdtConfig {
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub cocycles: MeasureSpec,
    pub epsilon: f64,
    pub l1_ref: f64,
    pub n_list: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples_per_n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemicontinuityConfig {
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub reference: MeasureSpec,
    pub perturbations: Vec<MeasureSpec>,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<ThetaSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ergodicity: Option<GateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freq_weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fiber_weight: Option<f64>,
    /// Rows with `W₁ < delta_probe` are checked against `L₁(ν₀) + epsilon_probe`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_probe: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_probe: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchrodingerConfig {
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<TrigPolySpec>,
    /// Fixed frequency...
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    /// ...or a frequency law.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequencies: Option<MeasureSpec>,
    /// Noise law on ℝ; defaults to no noise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<MeasureSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energies: Option<Vec<f64>>,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<ThetaSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ergodicity: Option<GateSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WassersteinConfig {
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub space: Space,
    pub left: MeasureSpec,
    pub right: MeasureSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freq_weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fiber_weight: Option<f64>,
}

/// A parsed configuration of any kind.
#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentConfig {
    Ergodicity(ErgodicityConfig),
    BaseLdt(BaseLdtConfig),
    Lyapunov(LyapunovConfig),
    FiberLdt(FiberLdtConfig),
    Semicontinuity(SemicontinuityConfig),
    SchrodingerScan(SchrodingerConfig),
    Wasserstein(WassersteinConfig),
}

macro_rules! each_config {
    ($self:expr, $c:ident => $body:expr) => {
        match $self {
            ExperimentConfig::Ergodicity($c) => $body,
            ExperimentConfig::BaseLdt($c) => $body,
            ExperimentConfig::Lyapunov($c) => $body,
            ExperimentConfig::FiberLdt($c) => $body,
            ExperimentConfig::Semicontinuity($c) => $body,
            ExperimentConfig::SchrodingerScan($c) => $body,
            ExperimentConfig::Wasserstein($c) => $body,
        }
    };
}

impl ExperimentConfig {
    pub fn kind(&self) -> Kind {
        each_config!(self, c => c.kind)
    }

    pub fn seed(&self) -> Option<u64> {
        each_config!(self, c => c.seed)
    }

    pub fn set_seed(&mut self, seed: u64) {
        each_config!(self, c => c.seed = Some(seed))
    }

    /// The configuration as a TOML value, for echoing into manifests.
    pub fn to_value(&self) -> CliResult<toml::Value> {
        let v = each_config!(self, c => toml::Value::try_from(c));
        v.map_err(|e| CliError::config(format!("cannot serialize configuration: {e}")))
    }
}

fn deserialize<T: DeserializeOwned>(text: &str) -> CliResult<T> {
    let de = toml::Deserializer::parse(text).map_err(|e| CliError::config(e.to_string()))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." || path.is_empty() {
            CliError::config(inner.to_string())
        } else {
            CliError::config(format!("at `{path}`: {inner}"))
        }
    })
}

/// Parses and schema-checks a configuration document.
pub fn parse_config(text: &str) -> CliResult<ExperimentConfig> {
    #[derive(Deserialize)]
    struct Probe {
        kind: Option<toml::Value>,
    }
    let probe: Probe = toml::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
    let kind = probe.kind.ok_or_else(|| CliError::config("missing top-level `kind`"))?;
    let kind: Kind = kind
        .try_into()
        .map_err(|e: toml::de::Error| CliError::config(format!("at `kind`: {}", e.message())))?;
    Ok(match kind {
        Kind::Ergodicity => ExperimentConfig::Ergodicity(deserialize(text)?),
        Kind::BaseLdt => ExperimentConfig::BaseLdt(deserialize(text)?),
        Kind::Lyapunov => ExperimentConfig::Lyapunov(deserialize(text)?),
        Kind::FiberLdt => ExperimentConfig::FiberLdt(deserialize(text)?),
        Kind::Semicontinuity => ExperimentConfig::Semicontinuity(deserialize(text)?),
        Kind::SchrodingerScan => ExperimentConfig::SchrodingerScan(deserialize(text)?),
        Kind::Wasserstein => ExperimentConfig::Wasserstein(deserialize(text)?),
    })
}
