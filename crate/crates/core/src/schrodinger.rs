//! Mixed random-quasiperiodic Schrödinger families
//!
//! ```text
//! (Hψ)_n = −ψ_{n+1} − ψ_{n−1} + (v(θ + nα) + w_n) ψ_n
//! ```
//!
//! with random noise `w_n ~ ρ`, random frequencies `α ~ μ`, or both. The
//! transfer matrix factors as `P(w) S_E` with `P(w) = [[1, w], [0, 1]]`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fiber::{default_grid, FiberMap, TrigPoly};
use crate::group::QpCocycle;
use crate::lyapunov::{estimate_l1, ErgodicityGate, L1Estimate, ThetaPolicy};
use crate::measure::AtomicMeasure;
use crate::rng::subdomain;
use crate::torus::TorusPoint;

/// Spacing of the default energy grid.
pub const DEFAULT_ENERGY_STEP: f64 = 0.01;

/// `P(w) S_E`; plain `S_E` when `w = 0`.
pub fn noisy_fiber(potential: &TrigPoly, noise: f64, energy: f64) -> FiberMap {
    let s = FiberMap::schrodinger(potential.clone(), energy);
    if noise == 0.0 {
        s
    } else {
        FiberMap::Product(Arc::new(FiberMap::Shear(noise)), Arc::new(s))
    }
}

fn check_dim(potential: &TrigPoly, d: usize) -> Result<()> {
    if potential.dim() == d {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected: d, found: potential.dim() })
    }
}

/// `ν_E = δ_α × ∫ δ_{P(w) S_E} dρ(w)`.
pub fn build_random_potential_measure(
    alpha: &TorusPoint,
    potential: &TrigPoly,
    noise: &AtomicMeasure<f64>,
    energy: f64,
) -> Result<AtomicMeasure<QpCocycle>> {
    build_random_both_measure(&AtomicMeasure::dirac(alpha.clone()), potential, noise, energy)
}

/// `ν_E = μ × δ_{S_E}`.
pub fn build_random_frequency_measure(
    mu: &AtomicMeasure<TorusPoint>,
    potential: &TrigPoly,
    energy: f64,
) -> Result<AtomicMeasure<QpCocycle>> {
    build_random_both_measure(mu, potential, &AtomicMeasure::dirac(0.0), energy)
}

/// `ν_E = μ × ∫ δ_{P(w) S_E} dρ(w)`, one atom per pair with weight `μ_j ρ_i`.
pub fn build_random_both_measure(
    mu: &AtomicMeasure<TorusPoint>,
    potential: &TrigPoly,
    noise: &AtomicMeasure<f64>,
    energy: f64,
) -> Result<AtomicMeasure<QpCocycle>> {
    if !energy.is_finite() {
        return Err(Error::NonFinite("energy"));
    }
    check_dim(potential, mu.dim())?;
    let fibers: Vec<(Arc<FiberMap>, f64)> = noise
        .iter()
        .map(|(&w, p)| (Arc::new(noisy_fiber(potential, w, energy)), p))
        .collect();
    let mut atoms = Vec::with_capacity(mu.len() * fibers.len());
    for (alpha, q) in mu.iter() {
        for (fiber, p) in &fibers {
            atoms.push((QpCocycle::from_arc(alpha.clone(), fiber.clone())?, q * p));
        }
    }
    AtomicMeasure::new(atoms)
}

#[derive(Debug, Clone, PartialEq)]
pub enum FrequencySpec {
    Fixed(TorusPoint),
    Random(AtomicMeasure<TorusPoint>),
}

impl FrequencySpec {
    pub fn dim(&self) -> usize {
        match self {
            FrequencySpec::Fixed(a) => a.dim(),
            FrequencySpec::Random(mu) => mu.dim(),
        }
    }

    pub fn measure(&self) -> AtomicMeasure<TorusPoint> {
        match self {
            FrequencySpec::Fixed(a) => AtomicMeasure::dirac(a.clone()),
            FrequencySpec::Random(mu) => mu.clone(),
        }
    }
}

/// Potential, frequency law and noise law; the energy is supplied per use.
#[derive(Debug, Clone, PartialEq)]
pub struct SchrodingerModel {
    potential: TrigPoly,
    frequency: FrequencySpec,
    noise: AtomicMeasure<f64>,
}

impl SchrodingerModel {
    pub fn new(potential: TrigPoly, frequency: FrequencySpec, noise: AtomicMeasure<f64>) -> Result<Self> {
        check_dim(&potential, frequency.dim())?;
        Ok(Self { potential, frequency, noise })
    }

    pub fn potential(&self) -> &TrigPoly {
        &self.potential
    }

    pub fn frequency(&self) -> &FrequencySpec {
        &self.frequency
    }

    pub fn noise(&self) -> &AtomicMeasure<f64> {
        &self.noise
    }

    pub fn dim(&self) -> usize {
        self.frequency.dim()
    }

    pub fn measure(&self, energy: f64) -> Result<AtomicMeasure<QpCocycle>> {
        build_random_both_measure(&self.frequency.measure(), &self.potential, &self.noise, energy)
    }

    /// `2 + sup|v| + max|w|`, with the sup over the default grid.
    pub fn energy_reach(&self) -> Result<f64> {
        let sup_v = self.potential.grid_sup(default_grid(self.dim()))?;
        let max_w = self.noise.atoms().iter().fold(0.0f64, |a, w| a.max(w.abs()));
        Ok(2.0 + sup_v + max_w)
    }

    /// Step `0.01` from `−E_max` to `E_max`.
    pub fn default_energy_grid(&self) -> Result<Vec<f64>> {
        let e_max = self.energy_reach()?;
        let count = (2.0 * e_max / DEFAULT_ENERGY_STEP + 1e-9).floor() as usize;
        Ok((0..=count).map(|j| -e_max + j as f64 * DEFAULT_ENERGY_STEP).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyScanParams {
    pub n: usize,
    pub samples: usize,
    pub theta: ThetaPolicy,
    pub seed: u64,
    pub gate: ErgodicityGate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyRow {
    pub energy: f64,
    pub estimate: L1Estimate,
}

/// `L₁(ν_E)` for each energy; grid point `j` uses a seed derived from
/// `(seed, j)`.
pub fn lyapunov_energy_scan(
    model: &SchrodingerModel,
    energies: &[f64],
    params: &EnergyScanParams,
) -> Result<Vec<EnergyRow>> {
    if energies.is_empty() {
        return Err(Error::InvalidArgument("energy grid is empty".into()));
    }
    energies
        .par_iter()
        .enumerate()
        .map(|(j, &energy)| {
            let nu = model.measure(energy)?;
            let seed = subdomain(params.seed, j as u64);
            let estimate = estimate_l1(&nu, params.n, params.samples, &params.theta, seed, &params.gate)?;
            Ok(EnergyRow { energy, estimate })
        })
        .collect()
}
