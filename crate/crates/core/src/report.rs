//! Point estimates with confidence intervals, plus the small statistics
//! toolbox used by the experiment harness (Wilson intervals, chi-square
//! goodness of fit, log-log least squares).

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Two-sided 95% normal quantile.
pub const Z_95_TWO_SIDED: f64 = 1.959963984540054;
/// One-sided 95% normal quantile, used for ">= p" certifications.
pub const Z_95_ONE_SIDED: f64 = 1.6448536269514722;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalKind {
    Exact,
    MonteCarlo,
}

/// A point estimate together with a 95% confidence interval, the trial count
/// and the seed that produced it. Exact-mode values carry a zero-width
/// interval.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateReport {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub trials: u64,
    pub seed: u64,
    pub mode: EvalKind,
}

impl EstimateReport {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            ci_low: value,
            ci_high: value,
            trials: 0,
            seed: 0,
            mode: EvalKind::Exact,
        }
    }

    /// Wilson-score interval for a Bernoulli proportion.
    pub fn bernoulli(hits: u64, trials: u64, seed: u64) -> Self {
        let (lo, hi) = wilson_interval(hits, trials, Z_95_TWO_SIDED);
        Self {
            value: if trials == 0 { 0.0 } else { hits as f64 / trials as f64 },
            ci_low: lo,
            ci_high: hi,
            trials,
            seed,
            mode: EvalKind::MonteCarlo,
        }
    }

    /// Normal interval for the mean of a \[0,1\]-bounded variable.
    pub fn bounded_mean(sum: f64, sum_sq: f64, trials: u64, seed: u64) -> Self {
        if trials == 0 {
            return Self {
                value: 0.0,
                ci_low: 0.0,
                ci_high: 0.0,
                trials,
                seed,
                mode: EvalKind::MonteCarlo,
            };
        }
        let n = trials as f64;
        let mean = sum / n;
        let var = (sum_sq / n - mean * mean).max(0.0);
        let half = Z_95_TWO_SIDED * (var / n).sqrt();
        Self {
            value: mean,
            ci_low: (mean - half).max(0.0),
            ci_high: (mean + half).min(1.0),
            trials,
            seed,
            mode: EvalKind::MonteCarlo,
        }
    }

    /// Lower end of a one-sided 95% Wilson interval; meaningful only for
    /// Bernoulli-mode reports (value = hits/trials).
    pub fn one_sided_lower(&self) -> f64 {
        if self.mode == EvalKind::Exact || self.trials == 0 {
            return self.value;
        }
        let hits = (self.value * self.trials as f64).round() as u64;
        wilson_interval(hits, self.trials, Z_95_ONE_SIDED).0
    }

    /// Upper end of a one-sided 95% Wilson interval.
    pub fn one_sided_upper(&self) -> f64 {
        if self.mode == EvalKind::Exact || self.trials == 0 {
            return self.value;
        }
        let hits = (self.value * self.trials as f64).round() as u64;
        wilson_interval(hits, self.trials, Z_95_ONE_SIDED).1
    }
}

/// Wilson score interval for `hits` successes out of `trials`.
pub fn wilson_interval(hits: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * ((p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt()) / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Chi-square goodness-of-fit statistic and p-value against the uniform
/// distribution over the histogram cells.
pub fn chi_square_uniform(counts: &[u64]) -> (f64, f64) {
    let k = counts.len();
    assert!(k >= 2, "chi_square_uniform: need at least 2 cells");
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return (0.0, 1.0);
    }
    let expected = total as f64 / k as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    let dist = ChiSquared::new((k - 1) as f64).expect("valid dof");
    let p_value = 1.0 - dist.cdf(stat);
    (stat, p_value)
}

/// Ordinary least squares on (ln x, ln y); returns (slope, intercept, r^2).
///
/// A constant y-series is perfectly explained by a zero slope, so r^2 is 1
/// when the residuals vanish even though the total variance is zero.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "loglog_fit: need at least 2 points");
    let lx: Vec<f64> = xs.iter().map(|&x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|&y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|&x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(&x, &y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_tot: f64 = ly.iter().map(|&y| (y - my) * (y - my)).sum();
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(&x, &y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    let r2 = if ss_tot <= 1e-24 {
        if ss_res <= 1e-18 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ss_res / ss_tot
    };
    (slope, intercept, r2)
}

/// Compensated (Neumaier) summation; the normalization checks need more
/// accuracy than a naive sum over ~10^6 entries provides.
pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_report_zero_width() {
        let r = EstimateReport::exact(0.25);
        assert_eq!(r.ci_low, 0.25);
        assert_eq!(r.ci_high, 0.25);
        assert_eq!(r.mode, EvalKind::Exact);
    }

    #[test]
    fn wilson_brackets_proportion() {
        let r = EstimateReport::bernoulli(500, 1000, 1);
        assert!(r.ci_low <= r.value && r.value <= r.ci_high);
        assert!(r.ci_low > 0.45 && r.ci_high < 0.55);
    }

    #[test]
    fn wilson_extremes_stay_in_unit_interval() {
        let (lo, hi) = wilson_interval(0, 100, Z_95_TWO_SIDED);
        assert!(lo < 1e-12);
        assert!(hi > 0.0 && hi < 0.06);
        let (lo, hi) = wilson_interval(100, 100, Z_95_TWO_SIDED);
        assert!(lo > 0.94 && lo < 1.0);
        assert!(hi > 1.0 - 1e-12);
    }

    #[test]
    fn chi_square_uniform_counts_pass() {
        let counts = vec![100u64; 16];
        let (stat, p) = chi_square_uniform(&counts);
        assert!(stat.abs() < 1e-12);
        assert!(p > 0.999);
    }

    #[test]
    fn chi_square_skewed_counts_fail() {
        let mut counts = vec![100u64; 16];
        counts[0] = 400;
        let (_, p) = chi_square_uniform(&counts);
        assert!(p < 1e-6);
    }

    #[test]
    fn loglog_fit_recovers_power_law() {
        let xs: Vec<f64> = (1..=10).map(|i| (i * 8) as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| 3.0 * x.powf(0.5)).collect();
        let (slope, _, r2) = loglog_fit(&xs, &ys);
        assert!((slope - 0.5).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn loglog_fit_constant_series() {
        let xs = [8.0, 16.0, 32.0, 64.0];
        let ys = [22.0, 22.0, 22.0, 22.0];
        let (slope, _, r2) = loglog_fit(&xs, &ys);
        assert_eq!(slope, 0.0);
        assert_eq!(r2, 1.0);
    }

    #[test]
    fn kahan_sum_many_small_terms() {
        let n = 1 << 20;
        let v = vec![1.0 / n as f64; n];
        assert!((kahan_sum(v) - 1.0).abs() < 1e-15);
    }
}
