//! Aggregate statistics: means, t-based confidence intervals, and the
//! one-sided paired t-tests the result tables report.

use statrs::distribution::{ContinuousCDF, StudentsT};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample standard deviation; 0 for fewer than two samples.
pub fn sample_std(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

/// Half-width of the t-based 95% confidence interval; 0 for n < 2 (the
/// single-run convention).
pub fn ci95_halfwidth(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let sd = sample_std(xs);
    if sd == 0.0 {
        return 0.0;
    }
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("valid dof")
        .inverse_cdf(0.975);
    t * sd / (n as f64).sqrt()
}

/// One-sided one-sample t-test p-value for H1: mean(xs) > mu0. Degenerate
/// inputs (n < 2, or zero variance) report 1.0 unless the constant sample
/// strictly exceeds mu0.
pub fn one_sided_p_greater(xs: &[f64], mu0: f64) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 1.0;
    }
    let m = mean(xs);
    let sd = sample_std(xs);
    if sd == 0.0 {
        return if m > mu0 { 0.0 } else { 1.0 };
    }
    let t = (m - mu0) / (sd / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("valid dof");
    1.0 - dist.cdf(t)
}

/// One-sided paired t-test p-value for H1: mean(xs - ys) > 0.
pub fn paired_one_sided_p(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let diffs: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| x - y).collect();
    one_sided_p_greater(&diffs, 0.0)
}
