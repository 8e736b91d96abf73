//! Numerical laboratory for mixed random-quasiperiodic linear cocycles.
//!
//! A quasiperiodic cocycle is a pair `(α, A)` of a torus translation and a
//! continuous `SL_m(ℝ)`-valued fiber map. Random i.i.d. products of such pairs
//! drive a skew-product over a Bernoulli shift,
//!
//! ```text
//! F(ω, θ, v) = (σω, θ + α(ω₀), A(ω₀)(θ) v)
//! ```
//!
//! and this crate provides the pieces needed to study it numerically:
//!
//! * [`torus`]: arithmetic, metric, characters and sampling on `𝕋^d`.
//! * [`fiber`]: exactly evaluable fiber maps (expression trees).
//! * [`group`]: composition, inversion and words in the cocycle group.
//! * [`measure`]: finitely supported measures, convolution, Fourier
//!   coefficients and exact Wasserstein-1 distances.
//! * [`ergodicity`]: Fourier, character, Cesàro and sumset checks for the
//!   ergodicity of the base dynamics.
//! * [`base`]: base-orbit simulation, Birkhoff averages and empirical
//!   large-deviation tails.
//! * [`lyapunov`]: renormalized transfer products, Lyapunov exponent
//!   estimation, fiber upper tails and semicontinuity scans.
//! * [`schrodinger`]: the random-potential / random-frequency Schrödinger
//!   measure families and energy scans.
//! * [`table`]: fixed-layout CSV rendering of the reports.
//!
//! All Monte Carlo work is keyed by `(seed, sample index)` through
//! [`rng::sample_rng`], so results do not depend on the number of threads.

pub mod base;
pub mod ergodicity;
pub mod error;
pub mod fiber;
pub mod group;
pub mod ldt;
pub mod lyapunov;
pub mod matrix;
pub mod measure;
pub mod rng;
pub mod schrodinger;
pub mod stats;
pub mod table;
pub mod torus;
pub mod transport;

pub use error::{Error, Result};
pub use fiber::{FiberMap, TrigPoly};
pub use group::QpCocycle;
pub use matrix::SlMatrix;
pub use measure::AtomicMeasure;
pub use num_complex::Complex64;
pub use torus::TorusPoint;
