//! Empirical tail probabilities and exponential rate fits shared by the base
//! and fiber large-deviation estimators.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::subdomain;
use crate::stats::linear_fit;

/// Which deviations count toward the tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailSide {
    /// `|value − reference| ≥ ε`
    TwoSided,
    /// `value ≥ reference + ε`
    Upper,
}

/// Sample sizes and thresholds for a tail estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct LdtPlan {
    pub epsilon: f64,
    pub n_list: Vec<usize>,
    pub samples_per_n: usize,
    pub seed: u64,
}

impl LdtPlan {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return Err(Error::InvalidArgument("n_list must be non-empty with n ≥ 1".into()));
        }
        if self.samples_per_n == 0 {
            return Err(Error::InvalidArgument("samples_per_n must be positive".into()));
        }
        Ok(())
    }

    /// Seed for the row with horizon `n`; rows are independent of each other
    /// and of their order in `n_list`.
    pub fn row_seed(&self, n: usize) -> u64 {
        subdomain(self.seed, n as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdtRow {
    pub n: usize,
    pub samples: usize,
    pub exceedances: usize,
    pub tail: f64,
    /// Binomial standard error `sqrt(p(1 − p)/N)`.
    pub stderr: f64,
}

/// Fitted `tail ≈ exp(intercept − rate · n)`.
#[derive(Debug, Clone, PartialEq)]
pub enum RateFit {
    Fitted { rate: f64, intercept: f64, r_squared: f64, residual_rms: f64, points: usize },
    /// Every tail was zero; the rate is at least `log(samples) / min n`.
    Censored { lower_bound: f64 },
    /// Fewer than three nonzero tails.
    Insufficient { nonzero: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdtReport {
    pub epsilon: f64,
    pub reference: f64,
    pub side: TailSide,
    pub rows: Vec<LdtRow>,
    pub rate: RateFit,
    /// Tails are non-increasing in `n`.
    pub monotone_decay: bool,
}

impl LdtReport {
    pub fn from_counts(epsilon: f64, reference: f64, side: TailSide, mut rows: Vec<LdtRow>) -> Self {
        rows.sort_by_key(|r| r.n);
        let nonzero: Vec<&LdtRow> = rows.iter().filter(|r| r.exceedances > 0).collect();
        let rate = if nonzero.is_empty() {
            let min_n = rows.first().map_or(1, |r| r.n) as f64;
            let samples = rows.iter().map(|r| r.samples).max().unwrap_or(1) as f64;
            RateFit::Censored { lower_bound: samples.ln() / min_n }
        } else if nonzero.len() < 3 {
            RateFit::Insufficient { nonzero: nonzero.len() }
        } else {
            let xs: Vec<f64> = nonzero.iter().map(|r| r.n as f64).collect();
            let ys: Vec<f64> = nonzero.iter().map(|r| r.tail.ln()).collect();
            match linear_fit(&xs, &ys) {
                Some(f) => RateFit::Fitted {
                    rate: -f.slope,
                    intercept: f.intercept,
                    r_squared: f.r_squared,
                    residual_rms: f.residual_rms,
                    points: xs.len(),
                },
                None => RateFit::Insufficient { nonzero: nonzero.len() },
            }
        };
        let monotone_decay = rows.windows(2).all(|w| w[1].tail <= w[0].tail);
        Self { epsilon, reference, side, rows, rate, monotone_decay }
    }

    pub fn fitted_rate(&self) -> Option<f64> {
        match self.rate {
            RateFit::Fitted { rate, .. } => Some(rate),
            _ => None,
        }
    }
}

pub(crate) fn exceeds(side: TailSide, value: f64, reference: f64, epsilon: f64) -> bool {
    match side {
        TailSide::TwoSided => (value - reference).abs() >= epsilon,
        TailSide::Upper => value >= reference + epsilon,
    }
}

/// Evaluates `sample(n, row_seed, index)` for every row and sample in
/// parallel and counts exceedances.
pub(crate) fn run_tail<F>(plan: &LdtPlan, reference: f64, side: TailSide, sample: F) -> Result<LdtReport>
where
    F: Fn(usize, u64, u64) -> Result<f64> + Sync,
{
    plan.validate()?;
    let rows = plan
        .n_list
        .iter()
        .map(|&n| {
            let seed = plan.row_seed(n);
            let values: Vec<f64> = (0..plan.samples_per_n as u64)
                .into_par_iter()
                .map(|i| sample(n, seed, i))
                .collect::<Result<_>>()?;
            let exceedances = values.iter().filter(|&&v| exceeds(side, v, reference, plan.epsilon)).count();
            let samples = values.len();
            let tail = exceedances as f64 / samples as f64;
            Ok(LdtRow { n, samples, exceedances, tail, stderr: (tail * (1.0 - tail) / samples as f64).sqrt() })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LdtReport::from_counts(plan.epsilon, reference, side, rows))
}
