//! Finitely supported probability measures.
//!
//! Atoms closer than [`MERGE_TOLERANCE`] are merged at construction, so a
//! measure never carries two copies of one point. Cocycle atoms merge only
//! when their frequencies coincide and their fiber trees are identical.

use std::collections::HashMap;

use num_complex::Complex64;
use rand::Rng;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::fiber::{default_grid, sup_distance};
use crate::group::QpCocycle;
use crate::torus::TorusPoint;
use crate::transport;

pub const MERGE_TOLERANCE: f64 = 1e-12;
pub const WEIGHT_TOLERANCE: f64 = 1e-12;
/// Default cap on the atom count of convolution powers.
pub const DEFAULT_ATOM_CAP: usize = 1_000_000;

/// Points that can carry atoms.
pub trait Support: Clone + Send + Sync {
    fn coincides(&self, other: &Self) -> bool;

    /// Merges coinciding atoms, summing weights. Keeps first-seen order.
    fn merge_atoms(atoms: Vec<(Self, f64)>) -> Vec<(Self, f64)> {
        let mut out: Vec<(Self, f64)> = Vec::with_capacity(atoms.len());
        for (x, w) in atoms {
            match out.iter_mut().find(|(y, _)| y.coincides(&x)) {
                Some(slot) => slot.1 += w,
                None => out.push((x, w)),
            }
        }
        out
    }
}

impl Support for f64 {
    fn coincides(&self, other: &Self) -> bool {
        (self - other).abs() < MERGE_TOLERANCE
    }

    fn merge_atoms(atoms: Vec<(Self, f64)>) -> Vec<(Self, f64)> {
        let mut sorted = atoms;
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
        for (x, w) in sorted {
            match out.last_mut() {
                Some(last) if last.0.coincides(&x) => last.1 += w,
                _ => out.push((x, w)),
            }
        }
        out
    }
}

impl Support for TorusPoint {
    fn coincides(&self, other: &Self) -> bool {
        self.dist(other).is_ok_and(|d| d < MERGE_TOLERANCE)
    }

    fn merge_atoms(atoms: Vec<(Self, f64)>) -> Vec<(Self, f64)> {
        // hash on cells much wider than the tolerance; probe neighbouring cells
        const CELLS: f64 = 1e9;
        let cells = CELLS as i64;
        let key = |p: &TorusPoint| -> SmallVec<[i64; 4]> {
            p.coords().iter().map(|&c| ((c * CELLS) as i64).min(cells - 1)).collect()
        };
        let mut out: Vec<(TorusPoint, f64)> = Vec::with_capacity(atoms.len());
        let mut table: HashMap<SmallVec<[i64; 4]>, Vec<usize>> = HashMap::new();
        for (x, w) in atoms {
            let base = key(&x);
            let d = base.len();
            let mut found = None;
            'probe: for offset in 0..3usize.pow(d as u32) {
                let mut o = offset;
                let probe: SmallVec<[i64; 4]> = base
                    .iter()
                    .map(|&b| {
                        let delta = (o % 3) as i64 - 1;
                        o /= 3;
                        (b + delta).rem_euclid(cells)
                    })
                    .collect();
                if let Some(slots) = table.get(&probe) {
                    for &s in slots {
                        if out[s].0.coincides(&x) {
                            found = Some(s);
                            break 'probe;
                        }
                    }
                }
            }
            match found {
                Some(s) => out[s].1 += w,
                None => {
                    table.entry(base).or_default().push(out.len());
                    out.push((x, w));
                }
            }
        }
        out
    }
}

impl Support for QpCocycle {
    fn coincides(&self, other: &Self) -> bool {
        self.freq().coincides(other.freq()) && self.fiber() == other.fiber()
    }
}

/// A probability measure `Σ w_i δ_{x_i}` with `w_i > 0`, `Σ w_i = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure<X> {
    atoms: Vec<X>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

impl<X: Support> AtomicMeasure<X> {
    pub fn new(atoms: Vec<(X, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Measure("no atoms".into()));
        }
        if let Some((_, w)) = atoms.iter().find(|(_, w)| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Measure(format!("weight {w} is not strictly positive")));
        }
        let total: f64 = atoms.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::Measure(format!("weights sum to {total}, expected 1")));
        }
        Ok(Self::from_merged(X::merge_atoms(atoms)))
    }

    fn from_merged(merged: Vec<(X, f64)>) -> Self {
        let (atoms, weights): (Vec<X>, Vec<f64>) = merged.into_iter().unzip();
        let cumulative = weights
            .iter()
            .scan(0.0, |acc, w| {
                *acc += w;
                Some(*acc)
            })
            .collect();
        Self { atoms, weights, cumulative }
    }

    pub fn dirac(x: X) -> Self {
        Self::from_merged(vec![(x, 1.0)])
    }

    /// Equal weights on the given points.
    pub fn uniform(points: Vec<X>) -> Result<Self> {
        let w = 1.0 / points.len() as f64;
        Self::new(points.into_iter().map(|x| (x, w)).collect())
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[X] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&X, f64)> {
        self.atoms.iter().zip(self.weights.iter().copied())
    }

    /// Index of an atom drawn with probability equal to its weight.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("non-empty");
        let u = rng.random::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= u).min(self.atoms.len() - 1)
    }

    pub fn sample_atom<R: Rng + ?Sized>(&self, rng: &mut R) -> &X {
        &self.atoms[self.sample_index(rng)]
    }

    /// Push-forward `f⋆μ`, merging atoms with coinciding images.
    pub fn map<Y: Support>(&self, f: impl Fn(&X) -> Y) -> AtomicMeasure<Y> {
        AtomicMeasure::from_merged(Y::merge_atoms(self.iter().map(|(x, w)| (f(x), w)).collect()))
    }

    /// Product measure `self ⊗ other` mapped through `f`.
    pub fn product_map<Y: Support, Z: Support>(
        &self,
        other: &AtomicMeasure<Y>,
        f: impl Fn(&X, &Y) -> Result<Z>,
    ) -> Result<AtomicMeasure<Z>> {
        let mut atoms = Vec::with_capacity(self.len() * other.len());
        for (x, wx) in self.iter() {
            for (y, wy) in other.iter() {
                atoms.push((f(x, y)?, wx * wy));
            }
        }
        Ok(AtomicMeasure::from_merged(Z::merge_atoms(atoms)))
    }
}

impl AtomicMeasure<TorusPoint> {
    pub fn dim(&self) -> usize {
        self.atoms[0].dim()
    }

    /// `q` equal atoms at `j/q` on the circle.
    pub fn discrete_uniform(q: usize) -> Result<Self> {
        let pts = (0..q).map(|j| TorusPoint::wrap(&[j as f64 / q as f64])).collect::<Result<Vec<_>>>()?;
        Self::uniform(pts)
    }

    /// `μ̂(k) = Σ w_i e_k(α_i)`.
    pub fn fourier_coeff(&self, k: &[i64]) -> Result<Complex64> {
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, w) in self.iter() {
            acc += w * a.character(k)?;
        }
        Ok(acc)
    }

    /// `μ ∗ ν`: pairwise sums with product weights.
    pub fn convolve(&self, other: &Self) -> Result<Self> {
        self.product_map(other, |a, b| a.translate(b))
    }

    /// `μ^{∗n}`; `n = 0` gives `δ_0`. Errors once an intermediate step
    /// would form more than `cap` raw atoms.
    pub fn convolution_power(&self, n: u32, cap: usize) -> Result<Self> {
        let mut acc = Self::dirac(TorusPoint::zero(self.dim()));
        for _ in 0..n {
            let raw = acc.len().saturating_mul(self.len());
            if raw > cap {
                return Err(Error::AtomCap { atoms: raw, cap });
            }
            acc = acc.convolve(self)?;
        }
        Ok(acc)
    }
}

pub fn convolve(mu: &AtomicMeasure<TorusPoint>, nu: &AtomicMeasure<TorusPoint>) -> Result<AtomicMeasure<TorusPoint>> {
    mu.convolve(nu)
}

pub fn fourier_coeff(mu: &AtomicMeasure<TorusPoint>, k: &[i64]) -> Result<Complex64> {
    mu.fourier_coeff(k)
}

/// `μ = 𝔞⋆ν`, the law of the frequency of a `ν`-distributed cocycle.
pub fn pushforward_freq(nu: &AtomicMeasure<QpCocycle>) -> AtomicMeasure<TorusPoint> {
    nu.map(|g| g.freq().clone())
}

/// Exact `W₁(μ, ν)` for the ground metric `dist`, by optimal transport
/// between the atom sets.
pub fn wasserstein1<X: Support>(
    mu: &AtomicMeasure<X>,
    nu: &AtomicMeasure<X>,
    dist: impl Fn(&X, &X) -> Result<f64>,
) -> Result<f64> {
    let mut cost = Vec::with_capacity(mu.len() * nu.len());
    for x in mu.atoms() {
        for y in nu.atoms() {
            cost.push(dist(x, y)?);
        }
    }
    Ok(transport::solve(mu.weights(), nu.weights(), &cost)?.cost)
}

/// Product metric on the cocycle group:
/// `freq_weight · d_𝕋(α, β) + fiber_weight · sup_θ ‖A(θ) − B(θ)‖` with the
/// sup taken over a regular grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GMetric {
    pub grid: usize,
    pub freq_weight: f64,
    pub fiber_weight: f64,
}

impl GMetric {
    pub fn with_grid(grid: usize) -> Self {
        Self { grid, freq_weight: 1.0, fiber_weight: 1.0 }
    }

    pub fn for_dim(d: usize) -> Self {
        Self::with_grid(default_grid(d))
    }

    pub fn distance(&self, g: &QpCocycle, h: &QpCocycle) -> Result<f64> {
        g_distance(g, h, self)
    }
}

pub fn g_distance(g: &QpCocycle, h: &QpCocycle, metric: &GMetric) -> Result<f64> {
    let freq = g.freq().dist(h.freq())?;
    let fiber = sup_distance(g.fiber(), h.fiber(), metric.grid)?;
    Ok(metric.freq_weight * freq + metric.fiber_weight * fiber)
}
