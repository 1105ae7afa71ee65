//! Welch's unequal-variance t-test and Levene's test for equal variances.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Degrees of freedom: Welch–Satterthwaite for the t-test, the
    /// denominator degrees for Levene (numerator is `groups − 1`).
    pub df: f64,
}

fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

fn sorted_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

fn check_sample(name: &str, xs: &[f64]) -> Result<()> {
    if xs.len() < 2 {
        return Err(Error::InvalidArgument(format!("{name} needs at least two values")));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(format!("{name} contains a non-finite value")));
    }
    Ok(())
}

/// Two-sided Welch t-test of `a` against `b`; the statistic is positive
/// when `a` has the larger mean.
///
/// When both samples have zero variance the statistic is 0 with p = 1 for
/// equal means, and ±∞ with p = 0 otherwise.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TestResult> {
    check_sample("sample a", a)?;
    check_sample("sample b", b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, va) = moments(a);
    let (mb, vb) = moments(b);
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    if se2 == 0.0 {
        let df = na + nb - 2.0;
        return Ok(if ma == mb {
            TestResult {
                statistic: 0.0,
                p_value: 1.0,
                df,
            }
        } else {
            TestResult {
                statistic: if ma > mb { f64::INFINITY } else { f64::NEG_INFINITY },
                p_value: 0.0,
                df,
            }
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Internal(e.to_string()))?;
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(TestResult {
        statistic: t,
        p_value: p,
        df,
    })
}

/// Levene's test, mean-centered (the original form, not Brown–Forsythe).
///
/// When every group has zero spread about its own deviation mean the
/// statistic is 0 with p = 1 if the group deviation means agree, and ∞
/// with p = 0 otherwise.
pub fn levene_test(groups: &[&[f64]]) -> Result<TestResult> {
    if groups.len() < 2 {
        return Err(Error::InvalidArgument("levene_test needs at least two groups".into()));
    }
    for (i, g) in groups.iter().enumerate() {
        check_sample(&format!("group {i}"), g)?;
    }
    let k = groups.len() as f64;
    let total: usize = groups.iter().map(|g| g.len()).sum();
    let n = total as f64;
    let deviations: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| {
            let mean = g.iter().sum::<f64>() / g.len() as f64;
            g.iter().map(|x| (x - mean).abs()).collect()
        })
        .collect();
    let group_means: Vec<f64> = deviations.iter().map(|z| z.iter().sum::<f64>() / z.len() as f64).collect();
    // Group terms are summed in sorted order so W does not depend on the
    // order of the groups.
    let grand = sorted_sum(deviations.iter().map(|z| z.iter().sum::<f64>()).collect()) / n;
    let same = group_means.iter().all(|m| *m == group_means[0]);
    let between = if same { 0.0 } else { sorted_sum(
        deviations
            .iter()
            .zip(&group_means)
            .map(|(z, m)| z.len() as f64 * (m - grand).powi(2))
            .collect(),
    ) };
    let within = sorted_sum(
        deviations
            .iter()
            .zip(&group_means)
            .map(|(z, m)| z.iter().map(|x| (x - m).powi(2)).sum::<f64>())
            .collect(),
    );
    let (d1, d2) = (k - 1.0, n - k);
    if within == 0.0 {
        return Ok(if between == 0.0 {
            TestResult {
                statistic: 0.0,
                p_value: 1.0,
                df: d2,
            }
        } else {
            TestResult {
                statistic: f64::INFINITY,
                p_value: 0.0,
                df: d2,
            }
        });
    }
    let w = d2 / d1 * between / within;
    let dist = FisherSnedecor::new(d1, d2).map_err(|e| Error::Internal(e.to_string()))?;
    Ok(TestResult {
        statistic: w,
        p_value: dist.sf(w),
        df: d2,
    })
}
