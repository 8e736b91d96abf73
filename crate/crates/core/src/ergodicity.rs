//! Ergodicity of the base dynamics, decided through the frequency law
//! `μ = 𝔞⋆ν`.
//!
//! The skew translation `(ω, θ) ↦ (σω, θ + 𝔞(ω₀))` is ergodic exactly when
//! `μ̂(k) ≠ 1` for every nonzero `k`. That condition can only be checked up to
//! a cutoff, so a passing report is always qualified by the cutoff `K` used.
//! The other checks here (character witnesses, Cesàro averages of the Markov
//! operator, sumset density) are equivalent formulations and serve as cross
//! checks.

use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fiber::TrigPoly;
use crate::measure::AtomicMeasure;
use crate::torus::{circle_dist, mode_box, Mode, TorusPoint};

/// Default threshold for `|μ̂(k) − 1|`.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;
/// `z` is treated as exactly 1 in `G_n(z)` below this distance.
pub const FROZEN_TOLERANCE: f64 = 1e-14;
/// Decay target for the uniform Cesàro scan.
pub const CESARO_THRESHOLD: f64 = 1e-3;
/// Largest occupancy table the sumset check will allocate.
pub const DEFAULT_OCCUPANCY_CAP: usize = 1 << 24;

/// Default Fourier cutoff: 100 on the circle, 20 on `𝕋²`, 8 beyond.
pub fn default_cutoff(d: usize) -> u32 {
    match d {
        0 | 1 => 100,
        2 => 20,
        _ => 8,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    /// `μ̂(k) ≠ 1` for `0 < |k|∞ ≤ K`.
    Fourier,
    /// Every `k` has an atom with `⟨k, α⟩ ∉ ℤ`.
    CharacterWitness,
    /// Cesàro averages of `Q_μ` converge to the Haar mean, uniformly in `θ`.
    Cesaro,
    /// The sumsets of the support fill the torus.
    SumsetDensity,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Fourier => "fourier",
            Criterion::CharacterWitness => "character_witness",
            Criterion::Cesaro => "cesaro",
            Criterion::SumsetDensity => "sumset_density",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub criterion: Criterion,
    pub verdict: Verdict,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeGap {
    pub mode: Mode,
    pub coefficient: Complex64,
    /// `|μ̂(k) − 1|`
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicityReport {
    /// The Fourier verdict; the other criteria are cross checks.
    pub verdict: Verdict,
    pub cutoff: u32,
    pub tolerance: f64,
    /// Smallest mode (box order) with `|μ̂(k) − 1| ≤ tol`.
    pub witness: Option<Mode>,
    /// Every mode of the box, in box order.
    pub gaps: Vec<ModeGap>,
    pub criteria: Vec<CriterionResult>,
}

impl ErgodicityReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// Smallest `|μ̂(k) − 1|` over the box.
    pub fn min_gap(&self) -> Option<&ModeGap> {
        self.gaps.iter().min_by(|a, b| a.gap.total_cmp(&b.gap))
    }

    pub fn criterion(&self, c: Criterion) -> Option<&CriterionResult> {
        self.criteria.iter().find(|r| r.criterion == c)
    }

    pub fn summary(&self) -> String {
        match (&self.verdict, &self.witness) {
            (Verdict::Fail, Some(k)) => format!("not ergodic: mu_hat(k) = 1 at k = {:?}", k.as_slice()),
            (Verdict::Pass, _) => format!("ergodic up to cutoff K = {}", self.cutoff),
            _ => format!("inconclusive up to cutoff K = {}", self.cutoff),
        }
    }
}

/// Scans `0 < |k|∞ ≤ K` and fails at the first `k` with `|μ̂(k) − 1| ≤ tol`.
pub fn check_fourier_criterion(mu: &AtomicMeasure<TorusPoint>, cutoff: u32, tol: f64) -> Result<ErgodicityReport> {
    if cutoff == 0 {
        return Err(Error::InvalidArgument("Fourier cutoff must be at least 1".into()));
    }
    if !(tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be non-negative, got {tol}")));
    }
    let modes = mode_box(mu.dim(), cutoff);
    let gaps = modes
        .into_par_iter()
        .map(|mode| {
            let coefficient = mu.fourier_coeff(&mode)?;
            let gap = (coefficient - 1.0).norm();
            Ok(ModeGap { mode, coefficient, gap })
        })
        .collect::<Result<Vec<_>>>()?;
    let witness = gaps.iter().find(|g| g.gap <= tol).map(|g| g.mode.clone());
    let (verdict, detail) = match &witness {
        Some(k) => (Verdict::Fail, format!("mu_hat(k) = 1 within {tol:e} at k = {:?}", k.as_slice())),
        None => (
            Verdict::Pass,
            format!("|mu_hat(k) - 1| > {tol:e} for all 0 < |k| <= {cutoff} (up to cutoff)"),
        ),
    };
    Ok(ErgodicityReport {
        verdict,
        cutoff,
        tolerance: tol,
        witness,
        gaps,
        criteria: vec![CriterionResult { criterion: Criterion::Fourier, verdict, detail }],
    })
}

/// First atom `α` with `dist(⟨k, α⟩, ℤ) > tol`.
pub fn check_character_witness(mu: &AtomicMeasure<TorusPoint>, k: &[i64], tol: f64) -> Result<Option<TorusPoint>> {
    if k.iter().all(|&x| x == 0) {
        return Err(Error::InvalidArgument("character witness needs a nonzero mode".into()));
    }
    for a in mu.atoms() {
        if circle_dist(a.pairing(k)?) > tol {
            return Ok(Some(a.clone()));
        }
    }
    Ok(None)
}

/// `G_n(z) = (1/n) Σ_{j<n} z^j`.
pub fn cesaro_weight(z: Complex64, n: u64) -> Complex64 {
    if (z - 1.0).norm() <= FROZEN_TOLERANCE {
        return Complex64::new(1.0, 0.0);
    }
    let zn = match u32::try_from(n) {
        Ok(p) => z.powu(p),
        Err(_) => Complex64::from_polar(z.norm().powf(n as f64), z.arg() * n as f64),
    };
    (1.0 - zn) / (n as f64 * (1.0 - z))
}

fn cesaro_factors(mu: &AtomicMeasure<TorusPoint>, phi: &TrigPoly, n: u64) -> Result<Vec<(Mode, Complex64)>> {
    if n == 0 {
        return Err(Error::InvalidArgument("Cesàro length must be at least 1".into()));
    }
    if phi.dim() != mu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), found: phi.dim() });
    }
    phi.terms()
        .iter()
        .map(|(k, c)| Ok((k.clone(), c * cesaro_weight(mu.fourier_coeff(k)?, n))))
        .collect()
}

fn eval_factors(factors: &[(Mode, Complex64)], theta: &TorusPoint) -> Result<f64> {
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, c) in factors {
        acc += c * theta.character(k)?;
    }
    Ok(acc.re)
}

/// `(1/n) Σ_{j<n} (Q_μ^j φ)(θ)` in closed form, using `Q_μ e_k = μ̂(k) e_k`.
pub fn cesaro_markov_average(mu: &AtomicMeasure<TorusPoint>, phi: &TrigPoly, theta: &TorusPoint, n: u64) -> Result<f64> {
    eval_factors(&cesaro_factors(mu, phi, n)?, theta)
}

/// `max_θ |cesaro_markov_average(μ, φ, θ, n) − φ̂(0)|` over a regular grid
/// with `grid` points per axis.
pub fn uniform_cesaro_scan(mu: &AtomicMeasure<TorusPoint>, phi: &TrigPoly, n: u64, grid: usize) -> Result<f64> {
    if grid == 0 {
        return Err(Error::InvalidArgument("scan grid must have at least one point".into()));
    }
    let factors = cesaro_factors(mu, phi, n)?;
    let mean = phi.mean();
    TorusPoint::grid(mu.dim(), grid)
        .par_iter()
        .map(|t| Ok((eval_factors(&factors, t)? - mean).abs()))
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// `Σ_{0<|k|∞≤K} e_k`, the test observable of the Cesàro cross check.
pub fn cesaro_probe(d: usize, cutoff: u32) -> TrigPoly {
    let terms = mode_box(d, cutoff).into_iter().map(|k| (k, Complex64::new(1.0, 0.0))).collect();
    TrigPoly::new(d, terms).expect("unit coefficients on a symmetric box are Hermitian")
}

/// Length at which `|G_n(z)| ≤ 2/(n|1−z|)` forces the scan of `φ` below
/// `threshold` for every mode of `φ` with `|1 − μ̂(k)| ≥ min_gap`.
pub fn cesaro_required_length(phi_l1: f64, min_gap: f64, threshold: f64) -> u64 {
    let n = (2.0 * phi_l1 / (threshold * min_gap)).ceil();
    if n.is_finite() && n < u64::MAX as f64 {
        (n as u64).max(1)
    } else {
        u64::MAX
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SumsetReport {
    pub dim: usize,
    pub epsilon: f64,
    pub cells_per_dim: usize,
    /// First `n` with `S ∪ S² ∪ … ∪ Sⁿ` meeting every cell.
    pub dense_at: Option<u32>,
    pub steps: u32,
    /// Flattened indices of occupied cells, ascending.
    pub occupied: Vec<usize>,
}

impl SumsetReport {
    pub fn is_dense(&self) -> bool {
        self.dense_at.is_some()
    }

    pub fn total_cells(&self) -> usize {
        self.cells_per_dim.pow(self.dim as u32)
    }
}

/// Sumset density on a grid of cells of side at most `eps`.
pub fn sumset_density_check(mu: &AtomicMeasure<TorusPoint>, n_max: u32, eps: f64) -> Result<SumsetReport> {
    sumset_density_check_capped(mu, n_max, eps, DEFAULT_OCCUPANCY_CAP)
}

/// As [`sumset_density_check`], refusing occupancy tables above `cap` cells.
///
/// `Sⁿ` is tracked through one representative per occupied cell, each an
/// actual element of `Sⁿ`, so the occupancy never exceeds the true one.
pub fn sumset_density_check_capped(
    mu: &AtomicMeasure<TorusPoint>,
    n_max: u32,
    eps: f64,
    cap: usize,
) -> Result<SumsetReport> {
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be at least 1".into()));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidArgument(format!("eps must lie in (0, 1], got {eps}")));
    }
    let d = mu.dim();
    let per_dim = ((1.0 / eps) - 1e-9).ceil().max(1.0) as usize;
    let cells = u32::try_from(d)
        .ok()
        .and_then(|dd| per_dim.checked_pow(dd))
        .filter(|&c| c <= cap)
        .ok_or(Error::OccupancyCap { cells: per_dim.saturating_pow(d as u32), cap })?;
    let cell_of = |p: &TorusPoint| {
        p.coords().iter().rev().fold(0usize, |acc, &c| {
            acc * per_dim + ((c * per_dim as f64) as usize).min(per_dim - 1)
        })
    };

    let mut occupied = vec![false; cells];
    let mut count = 0usize;
    let mut frontier: Vec<TorusPoint> = Vec::new();
    let mut seen = vec![false; cells];
    let mut dense_at = None;
    let mut steps = 0;
    for n in 1..=n_max {
        steps = n;
        let mut next = Vec::new();
        let mut touched = Vec::new();
        let mut push = |p: TorusPoint, next: &mut Vec<TorusPoint>| {
            let c = cell_of(&p);
            if !seen[c] {
                seen[c] = true;
                touched.push(c);
                next.push(p);
            }
        };
        if n == 1 {
            for a in mu.atoms() {
                push(a.clone(), &mut next);
            }
        } else {
            for q in &frontier {
                for a in mu.atoms() {
                    push(q.translate(a)?, &mut next);
                }
            }
        }
        for c in touched {
            seen[c] = false;
            if !occupied[c] {
                occupied[c] = true;
                count += 1;
            }
        }
        frontier = next;
        if count == cells {
            dense_at = Some(n);
            break;
        }
    }
    Ok(SumsetReport {
        dim: d,
        epsilon: eps,
        cells_per_dim: per_dim,
        dense_at,
        steps,
        occupied: occupied.iter().enumerate().filter(|(_, &o)| o).map(|(i, _)| i).collect(),
    })
}

/// Options for [`run_battery`].
#[derive(Debug, Clone, PartialEq)]
pub struct BatteryOptions {
    pub cutoff: u32,
    pub tolerance: f64,
    pub cesaro_grid: usize,
    pub sumset_eps: f64,
    pub sumset_n_max: u32,
}

impl BatteryOptions {
    pub fn for_dim(d: usize) -> Self {
        Self {
            cutoff: default_cutoff(d),
            tolerance: DEFAULT_TOLERANCE,
            cesaro_grid: crate::fiber::default_grid(d),
            sumset_eps: if d <= 1 { 0.01 } else { 0.05 },
            sumset_n_max: 10_000,
        }
    }
}

/// Fourier check followed by the character, Cesàro and sumset cross checks.
pub fn run_battery(mu: &AtomicMeasure<TorusPoint>, opts: &BatteryOptions) -> Result<ErgodicityReport> {
    let mut report = check_fourier_criterion(mu, opts.cutoff, opts.tolerance)?;
    let d = mu.dim();

    let character = match &report.witness {
        Some(k) => match check_character_witness(mu, k, opts.tolerance)? {
            None => CriterionResult {
                criterion: Criterion::CharacterWitness,
                verdict: Verdict::Fail,
                detail: format!("<k, alpha> is an integer for every atom at k = {:?}", k.as_slice()),
            },
            Some(a) => CriterionResult {
                criterion: Criterion::CharacterWitness,
                verdict: Verdict::Inconclusive,
                detail: format!(
                    "atom {:?} separates k = {:?}, although mu_hat(k) = 1 within tolerance",
                    a.coords(),
                    k.as_slice()
                ),
            },
        },
        None => {
            let mut missing = None;
            for g in &report.gaps {
                if check_character_witness(mu, &g.mode, opts.tolerance)?.is_none() {
                    missing = Some(g.mode.clone());
                    break;
                }
            }
            match missing {
                None => CriterionResult {
                    criterion: Criterion::CharacterWitness,
                    verdict: Verdict::Pass,
                    detail: format!("every 0 < |k| <= {} has a separating atom", opts.cutoff),
                },
                Some(k) => CriterionResult {
                    criterion: Criterion::CharacterWitness,
                    verdict: Verdict::Inconclusive,
                    detail: format!("no separating atom at k = {:?}", k.as_slice()),
                },
            }
        }
    };
    report.criteria.push(character);

    let probe = cesaro_probe(d, opts.cutoff);
    let moving_gap = report
        .gaps
        .iter()
        .filter(|g| g.gap > FROZEN_TOLERANCE)
        .map(|g| g.gap)
        .fold(f64::INFINITY, f64::min);
    let n_required = cesaro_required_length(probe.l1_norm(), moving_gap, CESARO_THRESHOLD).max(1_000_000);
    let scan = uniform_cesaro_scan(mu, &probe, n_required, opts.cesaro_grid)?;
    let cesaro_verdict = if scan < CESARO_THRESHOLD { Verdict::Pass } else { Verdict::Fail };
    report.criteria.push(CriterionResult {
        criterion: Criterion::Cesaro,
        verdict: cesaro_verdict,
        detail: format!(
            "uniform scan of the degree-{} probe at n = {n_required} over a {}-point grid: {scan:.6e}",
            opts.cutoff, opts.cesaro_grid
        ),
    });

    let sumset = sumset_density_check(mu, opts.sumset_n_max, opts.sumset_eps)?;
    report.criteria.push(match sumset.dense_at {
        Some(n) => CriterionResult {
            criterion: Criterion::SumsetDensity,
            verdict: Verdict::Pass,
            detail: format!("{}-dense by step {n}", opts.sumset_eps),
        },
        None => CriterionResult {
            criterion: Criterion::SumsetDensity,
            verdict: Verdict::Inconclusive,
            detail: format!(
                "not {}-dense within {} steps ({} of {} cells occupied)",
                opts.sumset_eps,
                sumset.steps,
                sumset.occupied.len(),
                sumset.total_cells()
            ),
        },
    });
    Ok(report)
}
