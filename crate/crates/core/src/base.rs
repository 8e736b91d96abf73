//! The base map `f(ω, θ) = (σω, θ + 𝔞(ω₀))`: orbits, Birkhoff averages and
//! empirical large-deviation tails.

use crate::error::{Error, Result};
use crate::fiber::TrigPoly;
use crate::group::QpCocycle;
use crate::ldt::{run_tail, LdtPlan, LdtReport, TailSide};
use crate::measure::AtomicMeasure;
use crate::rng::{sample_rng, DOMAIN_SYMBOLS};
use crate::stats::kahan_sum;
use crate::torus::TorusPoint;

/// A realized one-sided symbol sequence `ω₀, …, ω_{n−1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolPath {
    pub indices: Vec<usize>,
    pub seed: u64,
    pub sample_index: u64,
}

impl SymbolPath {
    /// Draws `len` i.i.d. symbols from `ν`; the same `(seed, sample_index)`
    /// always yields the same path, and a longer path extends a shorter one.
    pub fn draw<X: crate::measure::Support>(nu: &AtomicMeasure<X>, len: usize, seed: u64, sample_index: u64) -> Self {
        let mut rng = sample_rng(seed, DOMAIN_SYMBOLS, sample_index);
        let indices = (0..len).map(|_| nu.sample_index(&mut rng)).collect();
        Self { indices, seed, sample_index }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// `φ(ω, θ) = table(ω₀, …, ω_{k₀−1}) · trig(θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    window: usize,
    alphabet: usize,
    /// Indexed by `Σ_i ω_i · alphabet^i`.
    table: Vec<f64>,
    trig: TrigPoly,
}

impl Observable {
    pub fn new(window: usize, alphabet: usize, table: Vec<f64>, trig: TrigPoly) -> Result<Self> {
        if window == 0 || alphabet == 0 {
            return Err(Error::InvalidArgument("observable window and alphabet must be positive".into()));
        }
        let expected = u32::try_from(window)
            .ok()
            .and_then(|w| alphabet.checked_pow(w))
            .ok_or_else(|| Error::InvalidArgument("observable table is too large".into()))?;
        if table.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "observable table has {} entries, expected {alphabet}^{window} = {expected}",
                table.len()
            )));
        }
        if table.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("observable table"));
        }
        Ok(Self { window, alphabet, table, trig })
    }

    pub fn constant(d: usize, alphabet: usize, value: f64) -> Self {
        Self { window: 1, alphabet, table: vec![value; alphabet], trig: TrigPoly::constant(d, 1.0) }
    }

    /// Window-1 observable that only looks at the current symbol.
    pub fn symbol_table(d: usize, values: Vec<f64>) -> Result<Self> {
        let alphabet = values.len();
        Self::new(1, alphabet, values, TrigPoly::constant(d, 1.0))
    }

    /// `1` on atom `atom`, `0` elsewhere.
    pub fn indicator(d: usize, alphabet: usize, atom: usize) -> Result<Self> {
        if atom >= alphabet {
            return Err(Error::InvalidArgument(format!("atom {atom} outside alphabet of size {alphabet}")));
        }
        let mut values = vec![0.0; alphabet];
        values[atom] = 1.0;
        Self::symbol_table(d, values)
    }

    /// Symbol-independent observable `trig(θ)`.
    pub fn trig_only(alphabet: usize, trig: TrigPoly) -> Self {
        Self { window: 1, alphabet, table: vec![1.0; alphabet], trig }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn trig(&self) -> &TrigPoly {
        &self.trig
    }

    pub fn is_trig_free(&self) -> bool {
        self.trig.terms().iter().all(|(k, _)| k.iter().all(|&x| x == 0))
    }

    fn table_value(&self, symbols: &[usize]) -> f64 {
        let idx = symbols.iter().rev().fold(0usize, |acc, &s| acc * self.alphabet + s);
        self.table[idx]
    }

    /// `φ` at the start of `symbols`, which must hold at least one window.
    pub fn eval(&self, symbols: &[usize], theta: &TorusPoint) -> Result<f64> {
        if symbols.len() < self.window {
            return Err(Error::InvalidArgument(format!(
                "{} symbols given, observable window is {}",
                symbols.len(),
                self.window
            )));
        }
        if let Some(&s) = symbols[..self.window].iter().find(|&&s| s >= self.alphabet) {
            return Err(Error::InvalidArgument(format!("symbol {s} outside alphabet of size {}", self.alphabet)));
        }
        Ok(self.table_value(&symbols[..self.window]) * self.trig.eval(theta)?)
    }

    /// `∫ φ d(ν^ℤ × m)`: product-weighted table average times the Haar mean
    /// of the trigonometric part.
    pub fn mean(&self, weights: &[f64]) -> Result<f64> {
        if weights.len() != self.alphabet {
            return Err(Error::InvalidArgument(format!(
                "measure has {} atoms, observable alphabet is {}",
                weights.len(),
                self.alphabet
            )));
        }
        let table_mean = kahan_sum(self.table.iter().enumerate().map(|(mut idx, &v)| {
            let mut w = 1.0;
            for _ in 0..self.window {
                w *= weights[idx % self.alphabet];
                idx /= self.alphabet;
            }
            w * v
        }));
        Ok(table_mean * self.trig.mean())
    }

    fn check_against(&self, nu: &AtomicMeasure<QpCocycle>) -> Result<()> {
        if nu.len() != self.alphabet {
            return Err(Error::InvalidArgument(format!(
                "measure has {} atoms, observable alphabet is {}",
                nu.len(),
                self.alphabet
            )));
        }
        let d = nu.atoms()[0].torus_dim();
        if self.trig.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: self.trig.dim() });
        }
        Ok(())
    }
}

/// Runs the base map `n` steps from `θ₀`; returns the symbols used and the
/// `n + 1` phases `θ₀, …, θ_n`.
pub fn base_orbit(
    nu: &AtomicMeasure<QpCocycle>,
    theta0: &TorusPoint,
    n: usize,
    seed: u64,
    sample_index: u64,
) -> Result<(SymbolPath, Vec<TorusPoint>)> {
    let path = SymbolPath::draw(nu, n, seed, sample_index);
    let mut traj = Vec::with_capacity(n + 1);
    let mut theta = theta0.clone();
    traj.push(theta.clone());
    for &i in &path.indices {
        theta.translate_mut(nu.atoms()[i].freq())?;
        traj.push(theta.clone());
    }
    Ok((path, traj))
}

/// `(1/n) Σ_{j<n} φ(f^j(ω, θ))` with `n = path.len() − window + 1`.
pub fn birkhoff_average(phi: &Observable, path: &SymbolPath, theta_traj: &[TorusPoint]) -> Result<f64> {
    if path.len() < phi.window {
        return Err(Error::InvalidArgument(format!(
            "path of length {} is shorter than the observable window {}",
            path.len(),
            phi.window
        )));
    }
    let n = path.len() - phi.window + 1;
    if theta_traj.len() < n {
        return Err(Error::InvalidArgument(format!("{} phases given, {n} needed", theta_traj.len())));
    }
    let terms = (0..n)
        .map(|j| phi.eval(&path.indices[j..], &theta_traj[j]))
        .collect::<Result<Vec<_>>>()?;
    Ok(kahan_sum(terms) / n as f64)
}

/// One Birkhoff average of length `n` without materializing the orbit.
pub fn birkhoff_sample(
    nu: &AtomicMeasure<QpCocycle>,
    phi: &Observable,
    theta0: &TorusPoint,
    n: usize,
    seed: u64,
    sample_index: u64,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("Birkhoff length must be at least 1".into()));
    }
    let path = SymbolPath::draw(nu, n + phi.window - 1, seed, sample_index);
    let trig_free = phi.is_trig_free();
    let trig_const = phi.trig.mean();
    let mut theta = theta0.clone();
    let mut sum = 0.0;
    let mut comp = 0.0;
    for j in 0..n {
        let t = if trig_free { trig_const } else { phi.trig.eval(&theta)? };
        let y = phi.table_value(&path.indices[j..j + phi.window]) * t - comp;
        let s = sum + y;
        comp = (s - sum) - y;
        sum = s;
        theta.translate_mut(nu.atoms()[path.indices[j]].freq())?;
    }
    Ok(sum / n as f64)
}

/// Empirical `P(|(1/n) Σ φ∘f^j − ∫φ| ≥ ε)` for each `n` of the plan.
pub fn estimate_base_ldt(
    nu: &AtomicMeasure<QpCocycle>,
    phi: &Observable,
    theta: &TorusPoint,
    plan: &LdtPlan,
) -> Result<LdtReport> {
    phi.check_against(nu)?;
    let reference = phi.mean(nu.weights())?;
    run_tail(plan, reference, TailSide::TwoSided, |n, seed, i| birkhoff_sample(nu, phi, theta, n, seed, i))
}
