//! The d-torus `(ℝ/ℤ)^d`: points, translations, the ℓ∞ circle metric,
//! characters `e_k(θ) = exp(2πi⟨k,θ⟩)` and Haar sampling.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use smallvec::SmallVec;

use crate::error::{Error, Result};

pub type Coords = SmallVec<[f64; 4]>;

/// Integer frequency vector `k ∈ ℤ^d`.
pub type Mode = SmallVec<[i64; 4]>;

/// A point of `𝕋^d`; every coordinate lies in `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusPoint {
    coords: Coords,
}

/// A translation step on the torus. Same representation as a point.
pub type FrequencyVector = TorusPoint;

#[inline]
pub(crate) fn wrap_scalar(x: f64) -> f64 {
    let r = x - x.floor();
    // tiny negatives round up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Distance from `x` to the nearest integer.
#[inline]
pub fn circle_dist(x: f64) -> f64 {
    let r = wrap_scalar(x);
    r.min(1.0 - r)
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

impl TorusPoint {
    /// Reduces every coordinate mod 1.
    pub fn wrap(v: &[f64]) -> Result<Self> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("torus coordinates"));
        }
        Ok(Self {
            coords: v.iter().map(|&x| wrap_scalar(x)).collect(),
        })
    }

    pub fn zero(d: usize) -> Self {
        Self {
            coords: SmallVec::from_elem(0.0, d),
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|&c| c == 0.0)
    }

    /// `τ_α(θ) = θ + α`.
    pub fn translate(&self, alpha: &TorusPoint) -> Result<Self> {
        let mut out = self.clone();
        out.translate_mut(alpha)?;
        Ok(out)
    }

    pub fn translate_mut(&mut self, alpha: &TorusPoint) -> Result<()> {
        check_dim(self.dim(), alpha.dim())?;
        for (c, a) in self.coords.iter_mut().zip(&alpha.coords) {
            *c = wrap_scalar(*c + a);
        }
        Ok(())
    }

    /// The group inverse `-θ`.
    pub fn neg(&self) -> Self {
        Self {
            coords: self.coords.iter().map(|&c| wrap_scalar(-c)).collect(),
        }
    }

    /// ℓ∞ of per-coordinate circle distances; bounded by 1/2.
    pub fn dist(&self, other: &TorusPoint) -> Result<f64> {
        check_dim(self.dim(), other.dim())?;
        Ok(self
            .coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| {
                let delta = (a - b).abs();
                delta.min(1.0 - delta)
            })
            .fold(0.0, f64::max))
    }

    /// `⟨k, θ⟩ mod 1`, reduced term by term to keep precision for large `k`.
    pub fn pairing(&self, k: &[i64]) -> Result<f64> {
        check_dim(self.dim(), k.len())?;
        Ok(wrap_scalar(
            k.iter()
                .zip(&self.coords)
                .map(|(&ki, &c)| wrap_scalar(ki as f64 * c))
                .sum(),
        ))
    }

    /// `e_k(θ) = exp(2πi⟨k,θ⟩)`.
    pub fn character(&self, k: &[i64]) -> Result<Complex64> {
        let phase = self.pairing(k)?;
        Ok(Complex64::from_polar(1.0, TAU * phase))
    }

    /// One draw from Haar measure: i.i.d. uniform coordinates.
    pub fn haar_sample<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Self {
        Self {
            coords: (0..d).map(|_| rng.random::<f64>()).collect(),
        }
    }

    /// Regular grid with `per_dim` points per axis, in lexicographic order.
    pub fn grid(d: usize, per_dim: usize) -> Vec<TorusPoint> {
        let total = per_dim.pow(d as u32);
        (0..total)
            .map(|mut idx| {
                let mut coords = Coords::with_capacity(d);
                for _ in 0..d {
                    coords.push((idx % per_dim) as f64 / per_dim as f64);
                    idx /= per_dim;
                }
                Self { coords }
            })
            .collect()
    }
}

/// Free-function form of [`TorusPoint::wrap`].
pub fn wrap(v: &[f64]) -> Result<TorusPoint> {
    TorusPoint::wrap(v)
}

pub fn translate(theta: &TorusPoint, alpha: &FrequencyVector) -> Result<TorusPoint> {
    theta.translate(alpha)
}

pub fn torus_dist(a: &TorusPoint, b: &TorusPoint) -> Result<f64> {
    a.dist(b)
}

pub fn character(k: &[i64], theta: &TorusPoint) -> Result<Complex64> {
    theta.character(k)
}

pub fn haar_sample<R: Rng + ?Sized>(rng: &mut R, d: usize) -> TorusPoint {
    TorusPoint::haar_sample(rng, d)
}

/// All nonzero modes of the box `[-K, K]^d`, ordered by ℓ∞ norm and, within
/// a norm shell, listing a mode before its negative when its first nonzero
/// entry is positive.
pub fn mode_box(d: usize, cutoff: u32) -> Vec<Mode> {
    let k = cutoff as i64;
    let side = (2 * k + 1) as usize;
    let mut modes: Vec<Mode> = (0..side.pow(d as u32))
        .map(|mut idx| {
            let mut m = Mode::with_capacity(d);
            for _ in 0..d {
                m.push((idx % side) as i64 - k);
                idx /= side;
            }
            m
        })
        .filter(|m| m.iter().any(|&x| x != 0))
        .collect();
    let key = |m: &Mode| {
        let norm = m.iter().map(|x| x.abs()).max().unwrap_or(0);
        let first = m.iter().copied().find(|&x| x != 0).unwrap_or(0);
        let negative = first < 0;
        let rev: Vec<i64> = m.iter().map(|x| x.abs()).collect();
        (norm, rev, negative)
    };
    modes.sort_by_key(key);
    modes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::sample_rng;
    use proptest::prelude::*;

    fn p(v: &[f64]) -> TorusPoint {
        TorusPoint::wrap(v).unwrap()
    }

    #[test]
    fn wrap_examples() {
        assert_eq!(p(&[1.25]).coords(), &[0.25]);
        assert_eq!(p(&[-0.25]).coords(), &[0.75]);
        assert_eq!(p(&[0.0, 1.0]).coords(), &[0.0, 0.0]);
        assert_eq!(p(&[-1e-20]).coords(), &[0.0]);
        assert!(TorusPoint::wrap(&[f64::NAN]).is_err());
        assert!(TorusPoint::wrap(&[f64::INFINITY]).is_err());
    }

    #[test]
    fn translate_examples() {
        let t = p(&[0.7]).translate(&p(&[0.5])).unwrap();
        assert!((t.coords()[0] - 0.2).abs() < 1e-15);
        let theta = p(&[0.3, 0.9]);
        assert_eq!(theta.translate(&TorusPoint::zero(2)).unwrap(), theta);
        assert!(matches!(
            theta.translate(&p(&[0.1])),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
        let alpha = p(&[0.61, 0.27]);
        let back = theta.translate(&alpha).unwrap().translate(&alpha.neg()).unwrap();
        assert!(back.dist(&theta).unwrap() < 1e-15);
    }

    #[test]
    fn dist_examples() {
        assert_eq!(p(&[0.0]).dist(&p(&[0.5])).unwrap(), 0.5);
        assert!((p(&[0.9]).dist(&p(&[0.1])).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(p(&[0.3]).dist(&p(&[0.3])).unwrap(), 0.0);
    }

    #[test]
    fn character_examples() {
        let theta = p(&[0.37]);
        assert_eq!(theta.character(&[0]).unwrap(), Complex64::new(1.0, 0.0));
        let z = p(&[0.5]).character(&[1]).unwrap();
        assert!((z - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        let z = p(&[0.25]).character(&[2]).unwrap();
        assert!((z - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn haar_sample_is_deterministic_and_uniform() {
        let a = haar_sample(&mut sample_rng(11, 0, 0), 3);
        let b = haar_sample(&mut sample_rng(11, 0, 0), 3);
        assert_eq!(a, b);

        let mut rng = sample_rng(12, 0, 0);
        let n = 100_000;
        let mut mean = 0.0;
        let mut fourier = Complex64::new(0.0, 0.0);
        for _ in 0..n {
            let x = haar_sample(&mut rng, 1);
            mean += x.coords()[0];
            fourier += x.character(&[1]).unwrap();
        }
        assert!((mean / n as f64 - 0.5).abs() < 0.01);
        assert!((fourier / n as f64).norm() <= 0.02);
    }

    #[test]
    fn mode_box_order() {
        let modes = mode_box(1, 2);
        let flat: Vec<i64> = modes.iter().map(|m| m[0]).collect();
        assert_eq!(flat, vec![1, -1, 2, -2]);
        assert_eq!(mode_box(2, 1).len(), 8);
        assert_eq!(mode_box(2, 3).len(), 48);
    }

    fn coord() -> impl Strategy<Value = f64> {
        -3.0f64..3.0
    }

    proptest! {
        #[test]
        fn wrap_is_idempotent(v in prop::collection::vec(coord(), 1..4)) {
            let once = TorusPoint::wrap(&v).unwrap();
            let twice = TorusPoint::wrap(once.coords()).unwrap();
            prop_assert_eq!(&once, &twice);
            prop_assert!(once.coords().iter().all(|&c| (0.0..1.0).contains(&c)));
        }

        #[test]
        fn translation_group_law(a in prop::collection::vec(coord(), 2), b in prop::collection::vec(coord(), 2), t in prop::collection::vec(coord(), 2)) {
            let (a, b, t) = (p(&a), p(&b), p(&t));
            let lhs = t.translate(&a).unwrap().translate(&b).unwrap();
            let sum: Vec<f64> = a.coords().iter().zip(b.coords()).map(|(x, y)| x + y).collect();
            let rhs = t.translate(&p(&sum)).unwrap();
            prop_assert!(lhs.dist(&rhs).unwrap() <= 1e-12);
        }

        #[test]
        fn character_is_multiplicative(k in prop::collection::vec(-30i64..30, 2), a in prop::collection::vec(coord(), 2), t in prop::collection::vec(coord(), 2)) {
            let (a, t) = (p(&a), p(&t));
            let lhs = t.translate(&a).unwrap().character(&k).unwrap();
            let rhs = t.character(&k).unwrap() * a.character(&k).unwrap();
            prop_assert!((lhs - rhs).norm() <= 1e-12);
            prop_assert!((lhs.norm() - 1.0).abs() <= 1e-14);
        }

        #[test]
        fn dist_is_a_metric(a in prop::collection::vec(coord(), 3), b in prop::collection::vec(coord(), 3), c in prop::collection::vec(coord(), 3)) {
            let (a, b, c) = (p(&a), p(&b), p(&c));
            let ab = a.dist(&b).unwrap();
            prop_assert_eq!(ab, b.dist(&a).unwrap());
            prop_assert!(ab <= 0.5);
            prop_assert!(ab <= a.dist(&c).unwrap() + c.dist(&b).unwrap() + 1e-15);
        }
    }
}
