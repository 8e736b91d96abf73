//! Order-fixed reductions and small regression helpers.

/// Compensated sum in iteration order.
pub fn kahan_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    /// Sample standard deviation (`n − 1` denominator).
    pub std_dev: f64,
    pub stderr: f64,
    pub count: usize,
}

impl MeanEstimate {
    pub fn from_samples(values: &[f64]) -> Self {
        let count = values.len();
        if count == 0 {
            return Self { mean: f64::NAN, std_dev: f64::NAN, stderr: f64::NAN, count };
        }
        let mean = kahan_sum(values.iter().copied()) / count as f64;
        let std_dev = if count > 1 {
            (kahan_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (count - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std_dev, stderr: std_dev / (count as f64).sqrt(), count }
    }
}

/// Ordinary least squares `y ≈ intercept + slope · x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub residual_rms: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = kahan_sum(xs.iter().copied()) / n as f64;
    let my = kahan_sum(ys.iter().copied()) / n as f64;
    let sxx = kahan_sum(xs.iter().map(|x| (x - mx) * (x - mx)));
    if sxx == 0.0 {
        return None;
    }
    let sxy = kahan_sum(xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res = kahan_sum(xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)));
    let ss_tot = kahan_sum(ys.iter().map(|y| (y - my).powi(2)));
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Some(LinearFit { slope, intercept, r_squared, residual_rms: (ss_res / n as f64).sqrt() })
}
