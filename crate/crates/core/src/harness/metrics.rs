//! Learning metrics: shift-invariant centered errors, Kendall's tau, and
//! top-quantile slices.

use serde::{Deserialize, Serialize};

/// Mean absolute error between mean-centered predictions and truths.
/// Invariant under adding any constant to all predictions.
pub fn centered_mae(pred: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(pred.len(), truth.len());
    if pred.len() <= 1 {
        return 0.0;
    }
    let (pm, tm) = (mean(pred), mean(truth));
    pred.iter()
        .zip(truth)
        .map(|(p, t)| ((p - pm) - (t - tm)).abs())
        .sum::<f64>()
        / pred.len() as f64
}

/// Mean squared error on centered residuals.
pub fn centered_mse(pred: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(pred.len(), truth.len());
    if pred.len() <= 1 {
        return 0.0;
    }
    let (pm, tm) = (mean(pred), mean(truth));
    pred.iter()
        .zip(truth)
        .map(|(p, t)| ((p - pm) - (t - tm)).powi(2))
        .sum::<f64>()
        / pred.len() as f64
}

/// R-squared on centered residuals: 1 - MSE_C / Var(truth). Zero for
/// degenerate sets (single element or constant truth).
pub fn centered_r2(pred: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(pred.len(), truth.len());
    if pred.len() <= 1 {
        return 0.0;
    }
    let tm = mean(truth);
    let var: f64 = truth.iter().map(|t| (t - tm).powi(2)).sum::<f64>() / truth.len() as f64;
    if var <= 0.0 {
        return 0.0;
    }
    1.0 - centered_mse(pred, truth) / var
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Kendall's tau-b (tie-corrected), O(n log n) via merge-sort inversion
/// counting.
pub fn kendall_tau(pred: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(pred.len(), truth.len());
    let n = pred.len();
    if n < 2 {
        return 0.0;
    }
    // Sort by pred, tie-break by truth so equal-pred runs are ordered.
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        pred[a]
            .partial_cmp(&pred[b])
            .unwrap()
            .then(truth[a].partial_cmp(&truth[b]).unwrap())
    });
    let y: Vec<f64> = idx.iter().map(|&i| truth[i]).collect();
    let x: Vec<f64> = idx.iter().map(|&i| pred[i]).collect();

    let n0 = n as f64 * (n as f64 - 1.0) / 2.0;
    let n1 = tie_pair_count(&x);
    let n2 = tie_pair_count_unsorted(&y);
    // Joint ties: pairs tied in both x and y.
    let mut n3 = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && x[j] == x[i] {
            j += 1;
        }
        let mut group: Vec<f64> = y[i..j].to_vec();
        group.sort_by(|a, b| a.partial_cmp(b).unwrap());
        n3 += tie_pair_count(&group);
        i = j;
    }

    let discordant = count_inversions(&mut y.clone());
    // Concordant pairs = all pairs minus discordant minus ties in either.
    let concordant = n0 - discordant as f64 - n1 - n2 + n3;
    let denom = ((n0 - n1) * (n0 - n2)).sqrt();
    if denom == 0.0 {
        return 0.0;
    }
    (concordant - discordant as f64) / denom
}

/// Tied pairs within equal-value runs of a sorted slice.
fn tie_pair_count(sorted: &[f64]) -> f64 {
    let mut total = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let run = (j - i) as f64;
        total += run * (run - 1.0) / 2.0;
        i = j;
    }
    total
}

fn tie_pair_count_unsorted(xs: &[f64]) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    tie_pair_count(&sorted)
}

/// Merge-sort inversion count; strict inversions only (equal elements are
/// not inversions).
fn count_inversions(xs: &mut [f64]) -> u64 {
    let n = xs.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let (left, right) = xs.split_at_mut(mid);
    let mut inv = count_inversions(left) + count_inversions(right);
    let merged = {
        let mut merged = Vec::with_capacity(n);
        let (mut i, mut j) = (0, 0);
        while i < left.len() && j < right.len() {
            if right[j] < left[i] {
                inv += (left.len() - i) as u64;
                merged.push(right[j]);
                j += 1;
            } else {
                merged.push(left[i]);
                i += 1;
            }
        }
        merged.extend_from_slice(&left[i..]);
        merged.extend_from_slice(&right[j..]);
        merged
    };
    xs.copy_from_slice(&merged);
    inv
}

/// All learning metrics over one evaluation set.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LearningMetrics {
    pub mae_c: f64,
    pub mse_c: f64,
    pub r2_c: f64,
    pub kendall_tau: f64,
    pub n: usize,
}

impl LearningMetrics {
    pub fn compute(pred: &[f64], truth: &[f64]) -> Self {
        LearningMetrics {
            mae_c: centered_mae(pred, truth),
            mse_c: centered_mse(pred, truth),
            r2_c: centered_r2(pred, truth),
            kendall_tau: kendall_tau(pred, truth),
            n: pred.len(),
        }
    }
}

/// Metrics restricted to the top `quantile` fraction of the evaluation set
/// by true value.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct QuantileMetrics {
    pub quantile: f64,
    #[serde(flatten)]
    pub metrics: LearningMetrics,
}

/// Indices of the ceil(f * n) evaluation points with the highest true
/// value; boundary ties broken by index so smaller fractions nest inside
/// larger ones.
pub fn top_quantile_indices(truth: &[f64], fraction: f64) -> Vec<usize> {
    let n = truth.len();
    let count = ((fraction * n as f64).ceil() as usize).clamp(1, n);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        truth[b]
            .partial_cmp(&truth[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    idx.truncate(count);
    idx
}

/// Recomputes every metric on the top-`fraction` slice by true value.
pub fn quantile_slice(pred: &[f64], truth: &[f64], fraction: f64) -> QuantileMetrics {
    let idx = top_quantile_indices(truth, fraction);
    let p: Vec<f64> = idx.iter().map(|&i| pred[i]).collect();
    let t: Vec<f64> = idx.iter().map(|&i| truth[i]).collect();
    QuantileMetrics {
        quantile: fraction,
        metrics: LearningMetrics::compute(&p, &t),
    }
}
