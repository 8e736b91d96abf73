//! The group `𝒢 = 𝕋^d × C⁰(𝕋^d, SL_m(ℝ))` of quasiperiodic cocycles.
//!
//! ```text
//! (α, A) ∘ (β, B) = (α + β, (A ∘ τ_β) B)
//! (α, A)⁻¹       = (−α, (A ∘ τ_{−α})⁻¹)
//! ```
//!
//! Two cocycles are considered equal when they evaluate equally on a grid;
//! many trees denote the same function, so trees are never compared.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fiber::{sup_distance, FiberMap};
use crate::torus::{FrequencyVector, TorusPoint};

/// A quasiperiodic cocycle `(α, A)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpCocycle {
    freq: FrequencyVector,
    fiber: Arc<FiberMap>,
}

impl QpCocycle {
    pub fn new(freq: FrequencyVector, fiber: FiberMap) -> Result<Self> {
        Self::from_arc(freq, Arc::new(fiber))
    }

    pub fn from_arc(freq: FrequencyVector, fiber: Arc<FiberMap>) -> Result<Self> {
        if let Some(d) = fiber.torus_dim() {
            if d != freq.dim() {
                return Err(Error::DimensionMismatch { expected: freq.dim(), found: d });
            }
        }
        Ok(Self { freq, fiber })
    }

    /// `(0, I)`.
    pub fn identity(d: usize, m: usize) -> Self {
        Self { freq: TorusPoint::zero(d), fiber: Arc::new(FiberMap::identity(m)) }
    }

    /// The frequency projection `𝔞(α, A) = α`.
    pub fn freq(&self) -> &FrequencyVector {
        &self.freq
    }

    /// The fiber projection `𝒜(α, A) = A`.
    pub fn fiber(&self) -> &FiberMap {
        &self.fiber
    }

    pub fn fiber_arc(&self) -> &Arc<FiberMap> {
        &self.fiber
    }

    pub fn torus_dim(&self) -> usize {
        self.freq.dim()
    }

    pub fn matrix_size(&self) -> usize {
        self.fiber.matrix_size()
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &QpCocycle) -> Result<QpCocycle> {
        if self.matrix_size() != other.matrix_size() {
            return Err(Error::MatrixSize { expected: self.matrix_size(), found: other.matrix_size() });
        }
        let freq = self.freq.translate(&other.freq)?;
        let shifted = Arc::new(FiberMap::translate(self.fiber.clone(), other.freq.clone())?);
        let fiber = FiberMap::product(shifted, other.fiber.clone())?;
        Ok(QpCocycle { freq, fiber: Arc::new(fiber) })
    }

    pub fn inverse(&self) -> QpCocycle {
        let back = self.freq.neg();
        let shifted = FiberMap::translate(self.fiber.clone(), back.clone())
            .expect("shift has the cocycle's own dimension");
        QpCocycle { freq: back, fiber: Arc::new(FiberMap::inverse(Arc::new(shifted))) }
    }

    /// Frequency distance plus grid sup-distance of the fibers.
    pub fn eval_distance(&self, other: &QpCocycle, per_dim: usize) -> Result<f64> {
        Ok(self.freq.dist(&other.freq)? + sup_distance(&self.fiber, &other.fiber, per_dim)?)
    }
}

pub fn compose(g: &QpCocycle, h: &QpCocycle) -> Result<QpCocycle> {
    g.compose(h)
}

pub fn inverse(g: &QpCocycle) -> QpCocycle {
    g.inverse()
}

/// `gs[n−1] ∘ … ∘ gs[1] ∘ gs[0]`, built as a balanced tree so the
/// evaluation recursion depth is `O(log n)`.
pub fn word_product(gs: &[QpCocycle]) -> Result<QpCocycle> {
    match gs.len() {
        0 => Err(Error::InvalidArgument("word product of an empty list".into())),
        1 => Ok(gs[0].clone()),
        n => {
            let (first, later) = gs.split_at(n / 2);
            word_product(later)?.compose(&word_product(first)?)
        }
    }
}
