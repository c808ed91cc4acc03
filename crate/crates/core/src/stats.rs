//! Small statistics toolkit shared by the Monte Carlo checks.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Kahan–Babuška (Neumaier) compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        iter.into_iter().for_each(|x| s.add(x));
        s
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    xs.into_iter().collect::<CompensatedSum>().value()
}

/// Sample mean, unbiased variance and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub std_err: f64,
}

impl SampleSummary {
    /// Two-pass computation. Needs at least two samples for a variance;
    /// with one sample the variance is reported as 0.
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return SampleSummary {
                count: 0,
                mean: f64::NAN,
                variance: f64::NAN,
                std_err: f64::NAN,
            };
        }
        let mean = compensated_sum(xs.iter().copied()) / n as f64;
        let variance = if n > 1 {
            compensated_sum(xs.iter().map(|x| (x - mean) * (x - mean))) / (n - 1) as f64
        } else {
            0.0
        };
        SampleSummary {
            count: n,
            mean,
            variance,
            std_err: (variance / n as f64).sqrt(),
        }
    }
}

/// Linear-interpolation quantile (type 7) of a sample; `q` in `[0, 1]`.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v: Vec<f64> = xs.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, q)
}

pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Standard quantile summary used in reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub min: f64,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
    pub max: f64,
}

impl Quantiles {
    pub fn of(xs: &[f64]) -> Self {
        let mut v = xs.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p| quantile_sorted(&v, p);
        Quantiles {
            min: q(0.0),
            q05: q(0.05),
            q25: q(0.25),
            median: q(0.5),
            q75: q(0.75),
            q95: q(0.95),
            max: q(1.0),
        }
    }
}

/// `H_n = Σ_{j ≤ n} 1/j`.
pub fn harmonic(n: u64) -> f64 {
    compensated_sum((1..=n).rev().map(|j| 1.0 / j as f64))
}

/// Result of a chi-square homogeneity test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Two-sample chi-square test of homogeneity on aligned category counts.
///
/// Categories are merged left to right until each pooled cell has an
/// expected count of at least `min_expected` in both samples; a short
/// remainder is folded into the last cell.
pub fn chi_square_two_sample(a: &[u64], b: &[u64], min_expected: f64) -> ChiSquareTest {
    assert_eq!(a.len(), b.len(), "category vectors must align");
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    let total = (na + nb) as f64;
    let (fa, fb) = (na as f64 / total, nb as f64 / total);

    let mut cells: Vec<(u64, u64)> = Vec::new();
    let (mut ca, mut cb) = (0u64, 0u64);
    for (&x, &y) in a.iter().zip(b) {
        ca += x;
        cb += y;
        let pooled = (ca + cb) as f64;
        if pooled * fa.min(fb) >= min_expected {
            cells.push((ca, cb));
            ca = 0;
            cb = 0;
        }
    }
    if ca + cb > 0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += ca;
                last.1 += cb;
            }
            None => cells.push((ca, cb)),
        }
    }

    let mut stat = 0.0;
    for &(x, y) in &cells {
        let pooled = (x + y) as f64;
        let (ea, eb) = (pooled * fa, pooled * fb);
        stat += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
    }
    let dof = cells.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        let dist = ChiSquared::new(dof as f64).expect("positive dof");
        1.0 - dist.cdf(stat)
    };
    ChiSquareTest {
        statistic: stat,
        dof,
        p_value,
    }
}

/// Total-variation distance between two pmfs over the same index set.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Sample Pearson correlation.
pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let sx = SampleSummary::of(xs);
    let sy = SampleSummary::of(ys);
    let cov = compensated_sum(xs.iter().zip(ys).map(|(x, y)| (x - sx.mean) * (y - sy.mean))) / (xs.len() - 1) as f64;
    cov / (sx.variance * sy.variance).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::new();
        s.add(1e16);
        for _ in 0..10 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 10.0);
    }

    #[test]
    fn summary_of_known_sample() {
        let s = SampleSummary::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.variance - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn quantiles_interpolate() {
        let xs = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(quantile(&xs, 0.0), 1.0);
        assert_eq!(quantile(&xs, 1.0), 4.0);
        assert_eq!(median(&xs), 2.5);
    }

    #[test]
    fn harmonic_numbers() {
        assert!((harmonic(3) - 11.0 / 6.0).abs() < 1e-15);
        assert!((harmonic(100) - 5.187377517639621).abs() < 1e-12);
    }

    #[test]
    fn chi_square_identical_samples() {
        let t = chi_square_two_sample(&[100, 200, 300], &[100, 200, 300], 5.0);
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.dof, 2);
        assert!((t.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chi_square_detects_shift() {
        let t = chi_square_two_sample(&[500, 300, 200], &[200, 300, 500], 5.0);
        assert!(t.p_value < 1e-10);
    }

    #[test]
    fn chi_square_pools_sparse_tail() {
        let t = chi_square_two_sample(&[50, 50, 1, 0, 1], &[50, 50, 0, 1, 0], 5.0);
        assert_eq!(t.dof, 1);
    }

    #[test]
    fn tv_distance() {
        assert!((total_variation(&[0.5, 0.5], &[1.0, 0.0]) - 0.5).abs() < 1e-15);
    }
}
