//! Fiber maps `A: 𝕋^d → SL_m(ℝ)` as immutable expression trees.
//!
//! The node kinds are closed under the cocycle-group operations: composition
//! needs `Product` and `Translate`, inversion needs `Inverse` and `Translate`.
//! Leaves are constant matrices, Schrödinger blocks
//! `[[v(θ) − E, −1], [1, 0]]` and shears `[[1, w], [0, 1]]`.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::SlMatrix;
use crate::torus::{Mode, TorusPoint};

/// Coefficient symmetry tolerance, `|c_{−k} − conj(c_k)|`.
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;

/// Real trigonometric polynomial `v(θ) = Σ_k c_k e_k(θ)` with `c_{−k} = conj(c_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPoly {
    dim: usize,
    /// All coefficients, both `k` and `−k`, sorted by mode.
    terms: Vec<(Mode, Complex64)>,
    /// `c_0` plus one representative per `±k` pair, used for real evaluation.
    constant: f64,
    half: Vec<(Mode, Complex64)>,
}

fn neg_mode(k: &[i64]) -> Mode {
    k.iter().map(|x| -x).collect()
}

fn is_canonical(k: &[i64]) -> bool {
    k.iter().copied().find(|&x| x != 0).is_some_and(|x| x > 0)
}

impl TrigPoly {
    /// Validates Hermitian symmetry; repeated modes are summed.
    pub fn new(dim: usize, terms: Vec<(Mode, Complex64)>) -> Result<Self> {
        let mut map: BTreeMap<Mode, Complex64> = BTreeMap::new();
        for (k, c) in terms {
            if k.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: k.len() });
            }
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::NonFinite("trigonometric coefficient"));
            }
            *map.entry(k).or_default() += c;
        }
        let zero = Complex64::new(0.0, 0.0);
        for (k, c) in &map {
            let partner = map.get(&neg_mode(k)).copied().unwrap_or(zero);
            if (partner - c.conj()).norm() > HERMITIAN_TOLERANCE {
                return Err(Error::TrigPoly(format!(
                    "coefficient of {k:?} is {c}, but its mirror mode has {partner}; expected the conjugate"
                )));
            }
        }
        let constant = map.get(&Mode::from_elem(0, dim)).map_or(0.0, |c| c.re);
        let half = map
            .iter()
            .filter(|(k, _)| is_canonical(k))
            .map(|(k, c)| (k.clone(), *c))
            .collect();
        Ok(Self { dim, terms: map.into_iter().collect(), constant, half })
    }

    pub fn zero(dim: usize) -> Self {
        Self { dim, terms: Vec::new(), constant: 0.0, half: Vec::new() }
    }

    pub fn constant(dim: usize, value: f64) -> Self {
        Self::new(dim, vec![(Mode::from_elem(0, dim), Complex64::new(value, 0.0))])
            .expect("a real constant is Hermitian")
    }

    /// `amplitude · cos(2π⟨k, θ⟩)`.
    pub fn cosine(k: &[i64], amplitude: f64) -> Self {
        let c = Complex64::new(amplitude / 2.0, 0.0);
        if k.iter().all(|&x| x == 0) {
            return Self::constant(k.len(), amplitude);
        }
        Self::new(k.len(), vec![(k.iter().copied().collect(), c), (neg_mode(k), c)])
            .expect("cosine coefficients are Hermitian")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[(Mode, Complex64)] {
        &self.terms
    }

    pub fn coefficient(&self, k: &[i64]) -> Complex64 {
        self.terms
            .iter()
            .find(|(m, _)| m.as_slice() == k)
            .map_or(Complex64::new(0.0, 0.0), |(_, c)| *c)
    }

    /// Haar mean `∫ v dm = c_0`.
    pub fn mean(&self) -> f64 {
        self.constant
    }

    /// Largest ℓ∞ norm among modes with a coefficient.
    pub fn degree(&self) -> i64 {
        self.terms
            .iter()
            .map(|(k, _)| k.iter().map(|x| x.abs()).max().unwrap_or(0))
            .max()
            .unwrap_or(0)
    }

    /// Sum of coefficient moduli, an upper bound for `sup |v|`.
    pub fn l1_norm(&self) -> f64 {
        self.terms.iter().map(|(_, c)| c.norm()).sum()
    }

    /// `v(θ)`, computed as `c_0 + Σ_{canonical k} 2 Re(c_k e_k(θ))`.
    pub fn eval(&self, theta: &TorusPoint) -> Result<f64> {
        if theta.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: theta.dim() });
        }
        let mut acc = self.constant;
        for (k, c) in &self.half {
            let e = theta.character(k)?;
            acc += 2.0 * (c * e).re;
        }
        Ok(acc)
    }

    /// The full complex sum `Σ_k c_k e_k(θ)`; its imaginary part is rounding residue.
    pub fn eval_complex(&self, theta: &TorusPoint) -> Result<Complex64> {
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, c) in &self.terms {
            acc += c * theta.character(k)?;
        }
        Ok(acc)
    }

    /// Maximum of `|v|` over a regular grid.
    pub fn grid_sup(&self, per_dim: usize) -> Result<f64> {
        TorusPoint::grid(self.dim, per_dim)
            .iter()
            .try_fold(0.0f64, |acc, t| Ok(acc.max(self.eval(t)?.abs())))
    }
}

pub fn eval_potential(v: &TrigPoly, theta: &TorusPoint) -> Result<f64> {
    v.eval(theta)
}

/// A continuous `SL_m(ℝ)`-valued function on the torus.
#[derive(Debug, Clone, PartialEq)]
pub enum FiberMap {
    Const(SlMatrix),
    /// `[[v(θ) − E, −1], [1, 0]]`
    Schrodinger { potential: TrigPoly, energy: f64 },
    /// `[[1, w], [0, 1]]`
    Shear(f64),
    /// `θ ↦ child(θ + shift)`
    Translate { child: Arc<FiberMap>, shift: TorusPoint },
    /// `θ ↦ left(θ) · right(θ)`
    Product(Arc<FiberMap>, Arc<FiberMap>),
    /// `θ ↦ child(θ)⁻¹`
    Inverse(Arc<FiberMap>),
}

impl FiberMap {
    pub fn identity(m: usize) -> Self {
        FiberMap::Const(SlMatrix::identity(m))
    }

    pub fn schrodinger(potential: TrigPoly, energy: f64) -> Self {
        FiberMap::Schrodinger { potential, energy }
    }

    pub fn translate(child: Arc<FiberMap>, shift: TorusPoint) -> Result<Self> {
        if let Some(d) = child.torus_dim() {
            if d != shift.dim() {
                return Err(Error::DimensionMismatch { expected: d, found: shift.dim() });
            }
        }
        Ok(FiberMap::Translate { child, shift })
    }

    pub fn product(left: Arc<FiberMap>, right: Arc<FiberMap>) -> Result<Self> {
        let (ml, mr) = (left.matrix_size(), right.matrix_size());
        if ml != mr {
            return Err(Error::MatrixSize { expected: ml, found: mr });
        }
        if let (Some(a), Some(b)) = (left.torus_dim(), right.torus_dim()) {
            if a != b {
                return Err(Error::DimensionMismatch { expected: a, found: b });
            }
        }
        Ok(FiberMap::Product(left, right))
    }

    pub fn inverse(child: Arc<FiberMap>) -> Self {
        FiberMap::Inverse(child)
    }

    /// The `m` of `SL_m`.
    pub fn matrix_size(&self) -> usize {
        match self {
            FiberMap::Const(a) => a.size(),
            FiberMap::Schrodinger { .. } | FiberMap::Shear(_) => 2,
            FiberMap::Translate { child, .. } | FiberMap::Inverse(child) => child.matrix_size(),
            FiberMap::Product(l, _) => l.matrix_size(),
        }
    }

    /// Torus dimension pinned by the tree, if any node depends on `θ` or shifts it.
    pub fn torus_dim(&self) -> Option<usize> {
        match self {
            FiberMap::Const(_) | FiberMap::Shear(_) => None,
            FiberMap::Schrodinger { potential, .. } => Some(potential.dim()),
            FiberMap::Translate { shift, .. } => Some(shift.dim()),
            FiberMap::Inverse(c) => c.torus_dim(),
            FiberMap::Product(l, r) => l.torus_dim().or_else(|| r.torus_dim()),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            FiberMap::Const(_) | FiberMap::Schrodinger { .. } | FiberMap::Shear(_) => 1,
            FiberMap::Translate { child, .. } | FiberMap::Inverse(child) => 1 + child.depth(),
            FiberMap::Product(l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    /// `A(θ)`.
    pub fn eval(&self, theta: &TorusPoint) -> Result<SlMatrix> {
        match self {
            FiberMap::Const(a) => Ok(a.clone()),
            FiberMap::Schrodinger { potential, energy } => {
                let v = potential.eval(theta)?;
                Ok(SlMatrix::new2(v - energy, -1.0, 1.0, 0.0))
            }
            FiberMap::Shear(w) => Ok(SlMatrix::new2(1.0, *w, 0.0, 1.0)),
            FiberMap::Translate { child, shift } => child.eval(&theta.translate(shift)?),
            FiberMap::Product(l, r) => l.eval(theta)?.mul(&r.eval(theta)?),
            FiberMap::Inverse(c) => c.eval(theta)?.inverse(),
        }
    }

    /// Sup of `‖A(θ)‖₂` over a regular grid.
    pub fn grid_sup_norm(&self, per_dim: usize) -> Result<f64> {
        let d = self.torus_dim().unwrap_or(1);
        TorusPoint::grid(d, per_dim)
            .iter()
            .try_fold(0.0f64, |acc, t| Ok(acc.max(self.eval(t)?.op_norm())))
    }
}

pub fn eval_fiber(a: &FiberMap, theta: &TorusPoint) -> Result<SlMatrix> {
    a.eval(theta)
}

/// Default grid resolution for sup-distances: 256 points for `d = 1`,
/// 64 per axis for `d = 2`, 16 per axis above.
pub fn default_grid(d: usize) -> usize {
    match d {
        0 | 1 => 256,
        2 => 64,
        _ => 16,
    }
}

/// `max_θ ‖A(θ) − B(θ)‖₂` over a regular grid with `per_dim` points per
/// axis. A lower bound for the uniform distance.
pub fn sup_distance(a: &FiberMap, b: &FiberMap, per_dim: usize) -> Result<f64> {
    if per_dim == 0 {
        return Err(Error::InvalidArgument("grid must have at least one point".into()));
    }
    if a.matrix_size() != b.matrix_size() {
        return Err(Error::MatrixSize { expected: a.matrix_size(), found: b.matrix_size() });
    }
    let d = match (a.torus_dim(), b.torus_dim()) {
        (Some(x), Some(y)) if x != y => {
            return Err(Error::DimensionMismatch { expected: x, found: y })
        }
        (Some(x), _) | (None, Some(x)) => x,
        (None, None) => 1,
    };
    TorusPoint::grid(d, per_dim)
        .iter()
        .try_fold(0.0f64, |acc, t| Ok(acc.max(a.eval(t)?.dist(&b.eval(t)?)?)))
}
