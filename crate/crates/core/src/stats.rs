//! Small numerical helpers: compensated summation, log-log rate fits and the
//! two-sample Kolmogorov-Smirnov distance.

use crate::error::{Error, Result};

/// Neumaier's variant of Kahan summation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.compensation += (self.sum - t) + v;
        } else {
            self.compensation += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &NeumaierSum) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

pub fn mean(values: &[f64]) -> f64 {
    let mut acc = NeumaierSum::default();
    values.iter().for_each(|&v| acc.add(v));
    acc.total() / values.len() as f64
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    let mut acc = NeumaierSum::default();
    values.iter().for_each(|&v| acc.add((v - m) * (v - m)));
    acc.total() / (values.len() as f64 - 1.0)
}

/// Half-width of the normal-approximation 95% interval for a mean.
pub fn ci95_halfwidth(sample_variance: f64, n: usize) -> f64 {
    1.959_963_984_540_054 * (sample_variance.max(0.0) / n as f64).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of ln(value) on ln(eps).
pub fn fit_loglog_rate(pairs: &[(f64, f64)]) -> Result<RateFit> {
    if pairs.len() < 3 {
        return Err(Error::Domain(format!("rate fit needs at least 3 points, got {}", pairs.len())));
    }
    if let Some(&(e, v)) = pairs.iter().find(|&&(e, v)| !(e > 0.0 && v > 0.0 && e.is_finite() && v.is_finite())) {
        return Err(Error::Domain(format!("log-log fit needs positive finite pairs, got ({e}, {v})")));
    }
    let n = pairs.len() as f64;
    let lx: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let mx = mean(&lx);
    let my = mean(&ly);
    let (mut sxx, mut sxy, mut syy) = (NeumaierSum::default(), NeumaierSum::default(), NeumaierSum::default());
    for (x, y) in lx.iter().zip(&ly) {
        sxx.add((x - mx) * (x - mx));
        sxy.add((x - mx) * (y - my));
        syy.add((y - my) * (y - my));
    }
    let (sxx, sxy, syy) = (sxx.total(), sxy.total(), syy.total());
    if sxx == 0.0 {
        return Err(Error::Domain("rate fit needs at least two distinct eps values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy <= f64::EPSILON * n { 1.0 } else { (1.0 - ss_res / syy).clamp(0.0, 1.0) };
    Ok(RateFit { slope, intercept, r_squared })
}

/// sup_x |F_a(x) - F_b(x)| over the empirical CDFs of two samples.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("KS distance needs two nonempty samples".into()));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::Domain("KS distance is undefined for NaN samples".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}
