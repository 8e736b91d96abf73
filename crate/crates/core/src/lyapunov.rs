//! Fiber dynamics: renormalized transfer products
//! `𝒜ⁿ(ω)(θ) = A(ω_{n−1})(θ_{n−1}) ⋯ A(ω₀)(θ₀)`, the maximal Lyapunov exponent
//! `L₁(ν)`, the fiber upper tail and Wasserstein perturbation scans.

use rayon::prelude::*;

use crate::ergodicity::{check_fourier_criterion, default_cutoff, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::group::QpCocycle;
use crate::ldt::{run_tail, LdtPlan, LdtReport, TailSide};
use crate::matrix::SlMatrix;
use crate::measure::{pushforward_freq, wasserstein1, AtomicMeasure, GMetric};
use crate::rng::{sample_rng, DOMAIN_PHASE, DOMAIN_SYMBOLS};
use crate::stats::MeanEstimate;
use crate::torus::{Mode, TorusPoint};

const RENORM_HIGH: f64 = 1e6;
const RENORM_LOW: f64 = 1e-6;

/// Running product `M_n ⋯ M_1 = exp(log_scale) · current`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductAccumulator {
    current: SlMatrix,
    log_scale: f64,
    steps: usize,
}

impl ProductAccumulator {
    pub fn new(m: usize) -> Self {
        Self { current: SlMatrix::identity(m), log_scale: 0.0, steps: 0 }
    }

    /// Left-multiplies `factor` into the product. The Frobenius norm is the
    /// trigger (it brackets the spectral norm within `√m`); when it leaves
    /// `[1e−6, 1e6]` the product is divided by its spectral norm.
    pub fn push(&mut self, factor: &SlMatrix) -> Result<()> {
        self.current.mul_left_assign(factor)?;
        self.steps += 1;
        let f = self.current.frobenius();
        if !f.is_finite() {
            return Err(Error::NonFinite("transfer product"));
        }
        if !(RENORM_LOW..=RENORM_HIGH).contains(&f) {
            self.renormalize()?;
        }
        Ok(())
    }

    fn renormalize(&mut self) -> Result<()> {
        let s = self.current.op_norm();
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::NonFinite("transfer product norm"));
        }
        self.current.scale(1.0 / s);
        self.log_scale += s.ln();
        Ok(())
    }

    /// `log ‖M_n ⋯ M_1‖₂`.
    pub fn log_norm(&self) -> f64 {
        self.log_scale + self.current.op_norm().ln()
    }

    pub fn current(&self) -> &SlMatrix {
        &self.current
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
}

fn common_dims(nu: &AtomicMeasure<QpCocycle>) -> Result<(usize, usize)> {
    let first = &nu.atoms()[0];
    let (d, m) = (first.torus_dim(), first.matrix_size());
    for g in nu.atoms() {
        if g.torus_dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: g.torus_dim() });
        }
        if g.matrix_size() != m {
            return Err(Error::MatrixSize { expected: m, found: g.matrix_size() });
        }
    }
    Ok((d, m))
}

/// Unrenormalized `𝒜ⁿ(ω)(θ)` along the given symbols, with the final phase
/// `θ + Σ 𝔞(ω_j)`.
pub fn transfer_product(
    nu: &AtomicMeasure<QpCocycle>,
    symbols: &[usize],
    theta: &TorusPoint,
) -> Result<(SlMatrix, TorusPoint)> {
    let (_, m) = common_dims(nu)?;
    let mut prod = SlMatrix::identity(m);
    let mut phase = theta.clone();
    for &i in symbols {
        let g = nu
            .atoms()
            .get(i)
            .ok_or_else(|| Error::InvalidArgument(format!("symbol {i} outside measure of {} atoms", nu.len())))?;
        prod.mul_left_assign(&g.fiber().eval(&phase)?)?;
        phase.translate_mut(g.freq())?;
    }
    Ok((prod, phase))
}

/// `log ‖𝒜ⁿ(ω)(θ)‖` for the path keyed by `(seed, sample_index)`, the same
/// path [`crate::base::base_orbit`] draws.
pub fn transfer_log_norm(
    nu: &AtomicMeasure<QpCocycle>,
    theta: &TorusPoint,
    n: usize,
    seed: u64,
    sample_index: u64,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("transfer length must be at least 1".into()));
    }
    let (d, m) = common_dims(nu)?;
    if theta.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: theta.dim() });
    }
    let mut rng = sample_rng(seed, DOMAIN_SYMBOLS, sample_index);
    let mut acc = ProductAccumulator::new(m);
    let mut phase = theta.clone();
    for _ in 0..n {
        let g = nu.sample_atom(&mut rng);
        acc.push(&g.fiber().eval(&phase)?)?;
        phase.translate_mut(g.freq())?;
    }
    Ok(acc.log_norm())
}

/// How the starting phase of each sample is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum ThetaPolicy {
    Fixed(TorusPoint),
    /// A fresh Haar draw per sample, keyed by `(seed, sample index)`.
    Haar,
}

impl ThetaPolicy {
    pub fn theta(&self, d: usize, seed: u64, sample_index: u64) -> Result<TorusPoint> {
        match self {
            ThetaPolicy::Fixed(t) if t.dim() == d => Ok(t.clone()),
            ThetaPolicy::Fixed(t) => Err(Error::DimensionMismatch { expected: d, found: t.dim() }),
            ThetaPolicy::Haar => Ok(TorusPoint::haar_sample(&mut sample_rng(seed, DOMAIN_PHASE, sample_index), d)),
        }
    }
}

/// Whether to run the Fourier ergodicity check on `𝔞⋆ν` first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErgodicityGate {
    Check { cutoff: u32, tolerance: f64 },
    Override,
}

impl ErgodicityGate {
    pub fn default_for(d: usize) -> Self {
        ErgodicityGate::Check { cutoff: default_cutoff(d), tolerance: DEFAULT_TOLERANCE }
    }
}

/// Outcome of the ergodicity precondition; estimates are produced either way.
#[derive(Debug, Clone, PartialEq)]
pub enum ErgodicityFlag {
    Certified { cutoff: u32 },
    Refuted { witness: Mode },
    Overridden,
}

impl ErgodicityFlag {
    pub fn evaluate(nu: &AtomicMeasure<QpCocycle>, gate: &ErgodicityGate) -> Result<Self> {
        match *gate {
            ErgodicityGate::Override => Ok(ErgodicityFlag::Overridden),
            ErgodicityGate::Check { cutoff, tolerance } => {
                let r = check_fourier_criterion(&pushforward_freq(nu), cutoff, tolerance)?;
                Ok(match r.witness {
                    Some(witness) => ErgodicityFlag::Refuted { witness },
                    None => ErgodicityFlag::Certified { cutoff },
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct L1Estimate {
    /// Nats per step.
    pub mean: f64,
    pub stderr: f64,
    pub std_dev: f64,
    pub n: usize,
    pub samples: usize,
    pub theta_policy: ThetaPolicy,
    pub ergodicity: ErgodicityFlag,
}

impl L1Estimate {
    pub fn combined_stderr(&self, other: &L1Estimate) -> f64 {
        self.stderr.hypot(other.stderr)
    }
}

/// Mean of `(1/n) log ‖𝒜ⁿ(ω)(θ)‖` over `samples` independent paths.
pub fn estimate_l1(
    nu: &AtomicMeasure<QpCocycle>,
    n: usize,
    samples: usize,
    theta: &ThetaPolicy,
    seed: u64,
    gate: &ErgodicityGate,
) -> Result<L1Estimate> {
    if samples == 0 {
        return Err(Error::InvalidArgument("sample count must be positive".into()));
    }
    let (d, _) = common_dims(nu)?;
    let ergodicity = ErgodicityFlag::evaluate(nu, gate)?;
    let values: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let t = theta.theta(d, seed, i)?;
            Ok(transfer_log_norm(nu, &t, n, seed, i)? / n as f64)
        })
        .collect::<Result<_>>()?;
    let est = MeanEstimate::from_samples(&values);
    Ok(L1Estimate {
        mean: est.mean,
        stderr: est.stderr,
        std_dev: est.std_dev,
        n,
        samples,
        theta_policy: theta.clone(),
        ergodicity,
    })
}

/// Empirical `P((1/n) log ‖𝒜ⁿ(ω)(θ)‖ ≥ L1_ref + ε)`.
pub fn fiber_ldt_tail(
    nu: &AtomicMeasure<QpCocycle>,
    theta: &TorusPoint,
    l1_ref: f64,
    plan: &LdtPlan,
) -> Result<LdtReport> {
    if !l1_ref.is_finite() {
        return Err(Error::NonFinite("reference exponent"));
    }
    run_tail(plan, l1_ref, TailSide::Upper, |n, seed, i| Ok(transfer_log_norm(nu, theta, n, seed, i)? / n as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanParams {
    pub n: usize,
    pub samples: usize,
    pub theta: ThetaPolicy,
    pub seed: u64,
    pub metric: GMetric,
    pub gate: ErgodicityGate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    /// Position in the input list.
    pub index: usize,
    pub w1: f64,
    pub estimate: L1Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemicontinuityScan {
    pub reference: L1Estimate,
    /// Sorted by `w1`, ties by input position.
    pub rows: Vec<ScanRow>,
}

impl SemicontinuityScan {
    /// `L₁(ν) ≤ L₁(ν₀) + ε + 3σ` for every row with `W₁ < δ`, where `σ` is
    /// the combined standard error.
    pub fn upper_semicontinuous(&self, delta: f64, epsilon: f64) -> bool {
        self.rows.iter().filter(|r| r.w1 < delta).all(|r| {
            r.estimate.mean <= self.reference.mean + epsilon + 3.0 * r.estimate.combined_stderr(&self.reference)
        })
    }

    /// Estimates do not increase along the distance ordering, allowing
    /// `sigmas` combined standard errors between neighbours.
    pub fn non_increasing(&self, sigmas: f64) -> bool {
        self.rows.windows(2).all(|w| {
            w[1].estimate.mean <= w[0].estimate.mean + sigmas * w[1].estimate.combined_stderr(&w[0].estimate)
        })
    }
}

/// `W₁(ν, ν₀)` and `L₁(ν)` for each perturbation. Every measure is estimated
/// with the same seed.
pub fn semicontinuity_scan(
    nu0: &AtomicMeasure<QpCocycle>,
    perturbations: &[AtomicMeasure<QpCocycle>],
    params: &ScanParams,
) -> Result<SemicontinuityScan> {
    let (d, m) = common_dims(nu0)?;
    for p in perturbations {
        let (pd, pm) = common_dims(p)?;
        if pd != d {
            return Err(Error::DimensionMismatch { expected: d, found: pd });
        }
        if pm != m {
            return Err(Error::MatrixSize { expected: m, found: pm });
        }
    }
    let estimate = |nu| estimate_l1(nu, params.n, params.samples, &params.theta, params.seed, &params.gate);
    let reference = estimate(nu0)?;
    let mut rows = perturbations
        .iter()
        .enumerate()
        .map(|(index, p)| {
            let w1 = wasserstein1(p, nu0, |a, b| params.metric.distance(a, b))?;
            Ok(ScanRow { index, w1, estimate: estimate(p)? })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.w1.total_cmp(&b.w1).then(a.index.cmp(&b.index)));
    Ok(SemicontinuityScan { reference, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::{base_orbit, SymbolPath};
    use crate::fiber::testutil::random_fiber;
    use crate::fiber::{FiberMap, TrigPoly};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::LN_2;

    fn diag(a: f64) -> FiberMap {
        FiberMap::Const(SlMatrix::diag(&[a, 1.0 / a]).unwrap())
    }

    fn qp(freq: f64, fiber: FiberMap) -> QpCocycle {
        QpCocycle::new(TorusPoint::wrap(&[freq]).unwrap(), fiber).unwrap()
    }

    fn golden() -> f64 {
        (5f64.sqrt() - 1.0) / 2.0
    }

    fn walk() -> AtomicMeasure<QpCocycle> {
        AtomicMeasure::new(vec![(qp(0.0, diag(2.0)), 0.5), (qp(0.0, diag(0.5)), 0.5)]).unwrap()
    }

    fn random_measure(rng: &mut ChaCha8Rng, atoms: usize, depth: usize) -> AtomicMeasure<QpCocycle> {
        let pts = (0..atoms)
            .map(|_| (qp(rng.random(), random_fiber(rng, depth)), rng.random_range(0.1..1.0)))
            .collect::<Vec<_>>();
        let total: f64 = pts.iter().map(|p| p.1).sum();
        AtomicMeasure::new(pts.into_iter().map(|(g, w)| (g, w / total)).collect()).unwrap()
    }

    #[test]
    fn single_factor() {
        let nu = AtomicMeasure::dirac(qp(0.3, FiberMap::schrodinger(TrigPoly::cosine(&[1], 2.0), 0.7)));
        let t = TorusPoint::wrap(&[0.2]).unwrap();
        let a = nu.atoms()[0].fiber().eval(&t).unwrap();
        assert!((transfer_log_norm(&nu, &t, 1, 0, 0).unwrap() - a.op_norm().ln()).abs() < 1e-14);
    }

    #[test]
    fn constant_diagonal_is_exact() {
        let nu = AtomicMeasure::dirac(qp(golden(), diag(2.0)));
        let t = TorusPoint::zero(1);
        for n in [1, 7, 100, 5000] {
            let v = transfer_log_norm(&nu, &t, n, 1, 2).unwrap();
            assert!((v - n as f64 * LN_2).abs() <= 1e-8 * n as f64, "{n}: {v}");
        }
    }

    #[test]
    fn renormalization_keeps_norm_in_window() {
        let mut acc = ProductAccumulator::new(2);
        let d = SlMatrix::diag(&[3.0, 1.0 / 3.0]).unwrap();
        for _ in 0..2000 {
            acc.push(&d).unwrap();
            let s = acc.current().op_norm();
            assert!((1e-6 / 2f64.sqrt()..=1e6 * 3.0).contains(&s));
        }
        assert!((acc.log_norm() - 2000.0 * 3f64.ln()).abs() < 1e-8 * 2000.0);
        assert!(acc.log_scale() > 0.0);
    }

    #[test]
    fn non_finite_is_an_error() {
        let mut acc = ProductAccumulator::new(2);
        let bad = SlMatrix::from_row_major(2, &[f64::NAN, 0.0, 0.0, 1.0]);
        assert!(matches!(acc.push(&bad), Err(Error::NonFinite(_))));
    }

    #[test]
    fn renormalized_matches_raw() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for case in 0..60 {
            let nu = random_measure(&mut rng, 1 + case % 3, 4);
            let t = TorusPoint::wrap(&[rng.random()]).unwrap();
            let n = 1 + case % 50;
            let path = SymbolPath::draw(&nu, n, 9, case as u64);
            let (raw, _) = transfer_product(&nu, &path.indices, &t).unwrap();
            let ren = transfer_log_norm(&nu, &t, n, 9, case as u64).unwrap();
            assert!((ren - raw.op_norm().ln()).abs() <= 1e-8 * n as f64, "case {case}");
            assert!(ren >= -1e-9);
        }
    }

    #[test]
    fn cocycle_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for case in 0..40 {
            let nu = random_measure(&mut rng, 2, 3);
            let t = TorusPoint::wrap(&[rng.random()]).unwrap();
            let (n, m) = (rng.random_range(0..=20), rng.random_range(0..=20));
            let path = SymbolPath::draw(&nu, n + m, 3, case);
            let (full, _) = transfer_product(&nu, &path.indices, &t).unwrap();
            let (head, mid) = transfer_product(&nu, &path.indices[..n], &t).unwrap();
            let (tail, _) = transfer_product(&nu, &path.indices[n..], &mid).unwrap();
            let joined = tail.mul(&head).unwrap();
            let scale = 1.0f64.max(full.entries().iter().fold(0.0, |a: f64, x| a.max(x.abs())));
            assert!(full.max_entry_diff(&joined) <= 1e-8 * scale, "case {case}");
        }
    }

    #[test]
    fn symbol_paths_agree_with_base_orbit() {
        let nu = walk();
        let (path, _) = base_orbit(&nu, &TorusPoint::zero(1), 200, 4, 6).unwrap();
        let s: i64 = path.indices.iter().map(|&i| if i == 0 { 1 } else { -1 }).sum();
        let v = transfer_log_norm(&nu, &TorusPoint::zero(1), 200, 4, 6).unwrap();
        assert!((v - s.abs() as f64 * LN_2).abs() < 1e-10);
    }

    #[test]
    fn norm_bound_on_grid_orbits() {
        let v = TrigPoly::cosine(&[1], 1.5);
        let atoms = vec![
            (qp(5.0 / 64.0, FiberMap::schrodinger(v.clone(), 0.4)), 0.6),
            (qp(17.0 / 64.0, FiberMap::Shear(0.7)), 0.4),
        ];
        let nu = AtomicMeasure::new(atoms).unwrap();
        let sup = nu.atoms().iter().map(|g| g.fiber().grid_sup_norm(64).unwrap()).fold(0.0, f64::max);
        for (i, t) in TorusPoint::grid(1, 64).iter().enumerate().step_by(7) {
            for n in [1, 10, 100] {
                let v = transfer_log_norm(&nu, t, n, 2, i as u64).unwrap() / n as f64;
                assert!(v <= sup.ln() + 1e-9);
            }
        }
    }

    #[test]
    fn exact_l1_cases() {
        let gate = ErgodicityGate::Override;
        let c = estimate_l1(&AtomicMeasure::dirac(qp(golden(), diag(2.0))), 100, 20, &ThetaPolicy::Haar, 1, &gate).unwrap();
        assert!((c.mean - LN_2).abs() < 1e-6);
        assert!(c.stderr < 1e-12);

        let free = AtomicMeasure::dirac(qp(golden(), FiberMap::schrodinger(TrigPoly::zero(1), 3.0)));
        let e = estimate_l1(&free, 2000, 10, &ThetaPolicy::Fixed(TorusPoint::zero(1)), 1, &gate).unwrap();
        assert!((e.mean - ((3.0 + 5f64.sqrt()) / 2.0).ln()).abs() < 0.01);
    }

    #[test]
    fn walk_exponent_matches_walk_oracle() {
        let nu = walk();
        let (n, samples) = (2000, 200);
        let est = estimate_l1(&nu, n, samples, &ThetaPolicy::Haar, 12, &ErgodicityGate::Override).unwrap();
        let oracle: Vec<f64> = (0..samples as u64)
            .map(|i| {
                let p = SymbolPath::draw(&nu, n, 12, i);
                let s: i64 = p.indices.iter().map(|&k| if k == 0 { 1 } else { -1 }).sum();
                s.abs() as f64 * LN_2 / n as f64
            })
            .collect();
        let o = MeanEstimate::from_samples(&oracle);
        assert!((est.mean - o.mean).abs() < 1e-12);
        assert!((est.stderr - o.stderr).abs() < 1e-12);
        assert!(est.mean.abs() < 0.05);
    }

    #[test]
    fn ergodicity_flag() {
        let gate = ErgodicityGate::default_for(1);
        let e = estimate_l1(&walk(), 10, 4, &ThetaPolicy::Haar, 0, &gate).unwrap();
        assert_eq!(e.ergodicity, ErgodicityFlag::Refuted { witness: Mode::from_slice(&[1]) });
        let g = estimate_l1(&AtomicMeasure::dirac(qp(golden(), diag(2.0))), 10, 4, &ThetaPolicy::Haar, 0, &gate).unwrap();
        assert_eq!(g.ergodicity, ErgodicityFlag::Certified { cutoff: 100 });
    }

    #[test]
    fn theta_policy_swap_on_ergodic_measure() {
        let nu = AtomicMeasure::new(vec![
            (qp(golden(), FiberMap::schrodinger(TrigPoly::cosine(&[1], 2.5), 0.3)), 0.5),
            (qp(2f64.sqrt() - 1.0, FiberMap::schrodinger(TrigPoly::cosine(&[1], 2.5), -0.2)), 0.5),
        ])
        .unwrap();
        let gate = ErgodicityGate::default_for(1);
        let a = estimate_l1(&nu, 500, 400, &ThetaPolicy::Haar, 3, &gate).unwrap();
        let b = estimate_l1(&nu, 500, 400, &ThetaPolicy::Fixed(TorusPoint::wrap(&[0.1]).unwrap()), 3, &gate).unwrap();
        assert!(matches!(a.ergodicity, ErgodicityFlag::Certified { .. }));
        assert!((a.mean - b.mean).abs() <= 2.0 * a.combined_stderr(&b), "{} vs {}", a.mean, b.mean);
    }

    /// `E|S_n|` for a simple symmetric walk.
    fn walk_mean_abs(n: usize) -> f64 {
        let mut logc = 0.0;
        let mut total = 0.0;
        for k in 0..=n {
            if k > 0 {
                logc += ((n - k + 1) as f64).ln() - (k as f64).ln();
            }
            total += ((2 * k) as f64 - n as f64).abs() * (logc - n as f64 * LN_2).exp();
        }
        total
    }

    #[test]
    fn n_stability() {
        let gate = ErgodicityGate::Override;
        let diag_nu = AtomicMeasure::dirac(qp(golden(), diag(2.0)));
        let a = estimate_l1(&diag_nu, 500, 50, &ThetaPolicy::Haar, 3, &gate).unwrap();
        let b = estimate_l1(&diag_nu, 1000, 50, &ThetaPolicy::Haar, 3, &gate).unwrap();
        assert!((a.mean - b.mean).abs() <= 3.0 * a.combined_stderr(&b) + 1e-12);

        // The walk estimator carries an O(n^{-1/2}) bias, known exactly.
        let (n, samples) = (1000, 400);
        let a = estimate_l1(&walk(), n, samples, &ThetaPolicy::Haar, 3, &gate).unwrap();
        let b = estimate_l1(&walk(), 2 * n, samples, &ThetaPolicy::Haar, 3, &gate).unwrap();
        let bias = LN_2 * (walk_mean_abs(n) / n as f64 - walk_mean_abs(2 * n) / (2 * n) as f64);
        assert!((a.mean - b.mean - bias).abs() <= 3.0 * a.combined_stderr(&b), "{} {} {bias}", a.mean, b.mean);
        assert!((a.mean - LN_2 * walk_mean_abs(n) / n as f64).abs() <= 3.0 * a.stderr);
    }

    fn binom_tail(n: usize, threshold: f64, strict: bool) -> f64 {
        let mut logc = 0.0;
        let mut total = 0.0;
        for k in 0..=n {
            if k > 0 {
                logc += ((n - k + 1) as f64).ln() - (k as f64).ln();
            }
            let s = (2 * k) as f64 - n as f64;
            let hit = if strict { s.abs() > threshold } else { s.abs() >= threshold };
            if hit {
                total += (logc - n as f64 * LN_2).exp();
            }
        }
        total
    }

    #[test]
    fn walk_tail_matches_binomial() {
        let plan = LdtPlan { epsilon: 0.1 * LN_2, n_list: vec![50, 100], samples_per_n: 20_000, seed: 4 };
        let r = fiber_ldt_tail(&walk(), &TorusPoint::zero(1), 0.0, &plan).unwrap();
        for row in &r.rows {
            let lo = binom_tail(row.n, 0.1 * row.n as f64, true);
            let hi = binom_tail(row.n, 0.1 * row.n as f64, false);
            let se = (hi * (1.0 - hi) / row.samples as f64).sqrt();
            assert!(row.tail >= lo - 4.0 * se && row.tail <= hi + 4.0 * se, "n={}: {} not in [{lo}, {hi}]", row.n, row.tail);
            assert!(row.tail <= 2.0 * (-0.005 * row.n as f64).exp() + 3.0 * row.stderr);
        }
    }

    #[test]
    fn constant_and_bounded_tails_vanish() {
        let nu = AtomicMeasure::dirac(qp(golden(), diag(2.0)));
        let plan = LdtPlan { epsilon: 1e-6, n_list: vec![10, 100], samples_per_n: 50, seed: 0 };
        let r = fiber_ldt_tail(&nu, &TorusPoint::zero(1), LN_2, &plan).unwrap();
        assert!(r.rows.iter().all(|row| row.exceedances == 0));

        let nu = walk();
        let plan = LdtPlan { epsilon: LN_2 + 1e-6, n_list: vec![1, 5, 50], samples_per_n: 500, seed: 0 };
        let r = fiber_ldt_tail(&nu, &TorusPoint::zero(1), 0.0, &plan).unwrap();
        assert!(r.rows.iter().all(|row| row.exceedances == 0));
    }

    fn interpolated(t: f64) -> AtomicMeasure<QpCocycle> {
        AtomicMeasure::dirac(qp(golden(), diag(2f64.powf(1.0 - t))))
    }

    #[test]
    fn scan_examples() {
        let params = ScanParams {
            n: 200,
            samples: 8,
            theta: ThetaPolicy::Haar,
            seed: 2,
            metric: GMetric::with_grid(64),
            gate: ErgodicityGate::Override,
        };
        let nu0 = interpolated(0.0);
        let same = semicontinuity_scan(&nu0, std::slice::from_ref(&nu0), &params).unwrap();
        assert_eq!(same.rows[0].w1, 0.0);
        assert!((same.rows[0].estimate.mean - same.reference.mean).abs() <= same.rows[0].estimate.combined_stderr(&same.reference) + 1e-15);

        let ts = [0.3, 0.1, 0.0, 0.05, 0.2];
        let pert: Vec<_> = ts.iter().map(|&t| interpolated(t)).collect();
        let scan = semicontinuity_scan(&nu0, &pert, &params).unwrap();
        assert!(scan.rows.windows(2).all(|w| w[0].w1 <= w[1].w1));
        for row in &scan.rows {
            let t = ts[row.index];
            assert!((row.estimate.mean - (1.0 - t) * LN_2).abs() < 1e-6);
        }
        assert!(scan.non_increasing(0.0));
        assert!(scan.upper_semicontinuous(f64::INFINITY, 0.0));
    }

    #[test]
    fn scan_rejects_mixed_dimensions() {
        let nu0 = interpolated(0.0);
        let other = AtomicMeasure::dirac(QpCocycle::identity(2, 2));
        let params = ScanParams {
            n: 10,
            samples: 2,
            theta: ThetaPolicy::Haar,
            seed: 0,
            metric: GMetric::with_grid(8),
            gate: ErgodicityGate::Override,
        };
        assert!(semicontinuity_scan(&nu0, &[other], &params).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn sl2_products_have_norm_at_least_one(seed in any::<u64>(), n in 1usize..120, x in 0.0f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let nu = random_measure(&mut rng, 3, 4);
            let t = TorusPoint::wrap(&[x]).unwrap();
            let v = transfer_log_norm(&nu, &t, n, seed, 0).unwrap();
            prop_assert!(v >= -1e-9);
        }
    }
}
