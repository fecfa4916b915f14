//! Two-sample significance tests over window means.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

/// Sample mean and the unbiased (n-1) standard deviation.
pub fn mean_sd(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, None);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, None);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    (mean, Some(var.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

/// Welch's unequal-variance two-sample t-test, two-sided.
///
/// Requires at least two values per sample. Identical samples (zero pooled
/// variance, zero mean difference) report t = 0, p = 1.
pub fn welch_t(a: &[f64], b: &[f64]) -> Option<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return None;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, sa) = mean_sd(a);
    let (mb, sb) = mean_sd(b);
    let (va, vb) = (sa.unwrap().powi(2), sb.unwrap().powi(2));
    let se2 = va / na + vb / nb;
    if se2 == 0.0 {
        let t = 0.0;
        let p = if ma == mb { 1.0 } else { 0.0 };
        return Some(WelchTest {
            t: if ma == mb { t } else { f64::INFINITY * (ma - mb).signum() },
            df: na + nb - 2.0,
            p,
        });
    }
    let t = (ma - mb) / se2.sqrt();
    // Welch-Satterthwaite degrees of freedom
    let df = se2.powi(2)
        / ((va / na).powi(2) / (na - 1.0) + (vb / nb).powi(2) / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).ok()?;
    let p = 2.0 * dist.cdf(-t.abs());
    Some(WelchTest { t, df, p })
}

/// Mann-Whitney U with normal approximation and tie correction, two-sided.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() < 2 || b.len() < 2 {
        return None;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut all: Vec<(f64, usize)> = a
        .iter()
        .map(|&x| (x, 0))
        .chain(b.iter().map(|&x| (x, 1)))
        .collect();
    all.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());

    // midranks with tie groups
    let n = all.len();
    let mut rank_sum_a = 0.0;
    let mut tie_term = 0.0;
    let mut k = 0;
    while k < n {
        let mut m = k;
        while m + 1 < n && all[m + 1].0 == all[k].0 {
            m += 1;
        }
        let count = (m - k + 1) as f64;
        let midrank = (k + m) as f64 / 2.0 + 1.0;
        for item in &all[k..=m] {
            if item.1 == 0 {
                rank_sum_a += midrank;
            }
        }
        tie_term += count.powi(3) - count;
        k = m + 1;
    }

    let u = rank_sum_a - na * (na + 1.0) / 2.0;
    let mu = na * nb / 2.0;
    let nt = na + nb;
    let sigma2 = na * nb / 12.0 * ((nt + 1.0) - tie_term / (nt * (nt - 1.0)));
    if sigma2 <= 0.0 {
        return Some(1.0);
    }
    // continuity correction
    let z = (u - mu).abs() - 0.5;
    let z = z.max(0.0) / sigma2.sqrt();
    let normal = Normal::new(0.0, 1.0).ok()?;
    Some((2.0 * normal.cdf(-z)).min(1.0))
}

/// Which two-sample test `compare` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignificanceTest {
    #[default]
    Welch,
    MannWhitney,
}

impl SignificanceTest {
    pub fn p_value(self, a: &[f64], b: &[f64]) -> Option<f64> {
        match self {
            SignificanceTest::Welch => welch_t(a, b).map(|w| w.p),
            SignificanceTest::MannWhitney => mann_whitney_u(a, b),
        }
    }
}
