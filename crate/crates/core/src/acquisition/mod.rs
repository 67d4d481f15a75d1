//! Comparison-query selection from a candidate pool: Double Thompson
//! Sampling over ensemble members, Infomax, Boltzmann exploration, or
//! uniform random pairs.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

use crate::domain::{Bundle, CourseCatalog};
use crate::mvnn::{EnsembleModel, EnsembleScratch};
use crate::training::{bradley_terry_prob, sigmoid};

pub const DEFAULT_POOL_SIZE: usize = 512;
pub const DEFAULT_PAIR_BUDGET: usize = 2000;
const MEMBER_REDRAWS: usize = 10;
const POOL_RESAMPLES: usize = 10;
const HISTORY_REJECTION_TRIES: usize = 100;

#[derive(Debug, Error)]
pub enum AcquisitionError {
    #[error("candidate pool needs at least 2 bundles, got {0}")]
    PoolTooSmall(usize),
    #[error("duplicate bundle in candidate pool")]
    DuplicateCandidate,
    #[error("candidate pool exhausted: every unordered pair already asked")]
    Exhausted,
}

/// Which acquisition function selects the next comparison query.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcquisitionKind {
    DoubleTs,
    Infomax,
    Boltzmann,
    Random,
}

impl std::fmt::Display for AcquisitionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            AcquisitionKind::DoubleTs => "double_ts",
            AcquisitionKind::Infomax => "infomax",
            AcquisitionKind::Boltzmann => "boltzmann",
            AcquisitionKind::Random => "random",
        };
        f.write_str(name)
    }
}

/// A set of distinct valid bundles the next query is drawn from, resampled
/// per query so repeated queries see fresh candidates.
#[derive(Clone, Debug)]
pub struct CandidatePool {
    bundles: Vec<Bundle>,
    catalog: CourseCatalog,
    pool_size: usize,
}

impl CandidatePool {
    /// Uniform sample of `pool_size` distinct valid bundles.
    pub fn sample<R: Rng + ?Sized>(
        catalog: &CourseCatalog,
        pool_size: usize,
        rng: &mut R,
    ) -> Self {
        let target = (pool_size as u64).min(catalog.num_bundles()) as usize;
        let mut seen = HashSet::with_capacity(target);
        let mut bundles = Vec::with_capacity(target);
        while bundles.len() < target {
            let b = catalog.sample_bundle(rng);
            if seen.insert(b) {
                bundles.push(b);
            }
        }
        CandidatePool {
            bundles,
            catalog: *catalog,
            pool_size,
        }
    }

    /// Every valid bundle; the exhaustive pool used by oracle tests.
    pub fn exhaustive(catalog: &CourseCatalog) -> Self {
        let bundles: Vec<Bundle> = catalog.enumerate_bundles().collect();
        let pool_size = bundles.len();
        CandidatePool {
            bundles,
            catalog: *catalog,
            pool_size,
        }
    }

    pub fn from_bundles(
        catalog: &CourseCatalog,
        bundles: Vec<Bundle>,
    ) -> Result<Self, AcquisitionError> {
        if bundles.len() < 2 {
            return Err(AcquisitionError::PoolTooSmall(bundles.len()));
        }
        let mut seen = HashSet::with_capacity(bundles.len());
        for b in &bundles {
            catalog
                .validate_bundle(*b)
                .map_err(|_| AcquisitionError::PoolTooSmall(bundles.len()))?;
            if !seen.insert(*b) {
                return Err(AcquisitionError::DuplicateCandidate);
            }
        }
        let pool_size = bundles.len();
        Ok(CandidatePool {
            bundles,
            catalog: *catalog,
            pool_size,
        })
    }

    pub fn bundles(&self) -> &[Bundle] {
        &self.bundles
    }

    pub fn len(&self) -> usize {
        self.bundles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bundles.is_empty()
    }

    fn resampled<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        Self::sample(&self.catalog, self.pool_size, rng)
    }
}

/// Unordered pairs already asked; (a, b) and (b, a) are the same query.
#[derive(Clone, Debug, Default)]
pub struct QueryHistory {
    asked: HashSet<(Bundle, Bundle)>,
}

impl QueryHistory {
    pub fn new() -> Self {
        Self::default()
    }

    fn key(a: Bundle, b: Bundle) -> (Bundle, Bundle) {
        if a.mask() <= b.mask() {
            (a, b)
        } else {
            (b, a)
        }
    }

    pub fn contains(&self, a: Bundle, b: Bundle) -> bool {
        self.asked.contains(&Self::key(a, b))
    }

    /// Records a pair; returns false if it was already present.
    pub fn insert(&mut self, a: Bundle, b: Bundle) -> bool {
        self.asked.insert(Self::key(a, b))
    }

    pub fn len(&self) -> usize {
        self.asked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.asked.is_empty()
    }
}

fn require_pool(pool: &CandidatePool) -> Result<(), AcquisitionError> {
    if pool.len() < 2 {
        Err(AcquisitionError::PoolTooSmall(pool.len()))
    } else {
        Ok(())
    }
}

/// Indices of a member's best and second-best pool bundles (ties broken by
/// lower index).
fn member_top2(
    ensemble: &EnsembleModel,
    member: usize,
    pool: &CandidatePool,
    scratch: &mut EnsembleScratch,
) -> (usize, usize) {
    let mut best = 0usize;
    let mut second = usize::MAX;
    let mut best_v = f64::NEG_INFINITY;
    let mut second_v = f64::NEG_INFINITY;
    for (i, &b) in pool.bundles().iter().enumerate() {
        let v = crate::mvnn::forward_cached(
            &ensemble.arch,
            &ensemble.members[member],
            b,
            scratch_cache(scratch),
        );
        if v > best_v {
            second = best;
            second_v = best_v;
            best = i;
            best_v = v;
        } else if v > second_v {
            second = i;
            second_v = v;
        }
    }
    (best, second)
}

// EnsembleScratch's cache is reused for raw member evaluation here.
fn scratch_cache(scratch: &mut EnsembleScratch) -> &mut crate::mvnn::ForwardCache {
    scratch.cache_mut()
}

/// Double Thompson Sampling: each side of the pair is the pool argmax of an
/// independently drawn ensemble member; a coinciding second draw is redrawn
/// and finally falls back to the second-best bundle. Pairs already in the
/// history trigger a pool resample, then a uniform fallback.
pub fn double_thompson_sample<R: Rng + ?Sized>(
    ensemble: &EnsembleModel,
    pool: &CandidatePool,
    history: &QueryHistory,
    rng: &mut R,
) -> Result<(Bundle, Bundle), AcquisitionError> {
    require_pool(pool)?;
    let mut scratch = EnsembleScratch::new(ensemble);
    let m = ensemble.num_members();
    let mut current = pool.clone();
    for attempt in 0..=POOL_RESAMPLES {
        let j1 = rng.random_range(0..m);
        let (best1, _) = member_top2(ensemble, j1, &current, &mut scratch);
        let first = current.bundles()[best1];

        let mut second = None;
        for _ in 0..MEMBER_REDRAWS {
            let j2 = rng.random_range(0..m);
            let (best2, second2) = member_top2(ensemble, j2, &current, &mut scratch);
            if current.bundles()[best2] != first {
                second = Some(current.bundles()[best2]);
                break;
            }
            // Remember this member's runner-up in case every redraw lands
            // on the same argmax.
            second = Some(current.bundles()[second2]);
        }
        let second = second.expect("pool has at least 2 bundles");

        if !history.contains(first, second) {
            return Ok((first, second));
        }
        if attempt < POOL_RESAMPLES {
            current = current.resampled(rng);
        }
    }
    random_pair(&current, history, rng)
}

/// Infomax: over up to `pair_budget` sampled distinct pool pairs, the pair
/// maximizing the ensemble variance of the Bradley-Terry probability.
/// First-found wins ties.
pub fn infomax<R: Rng + ?Sized>(
    ensemble: &EnsembleModel,
    pool: &CandidatePool,
    history: &QueryHistory,
    rng: &mut R,
    pair_budget: usize,
) -> Result<(Bundle, Bundle), AcquisitionError> {
    require_pool(pool)?;
    let mut scratch = EnsembleScratch::new(ensemble);
    let mut current = pool.clone();
    for attempt in 0..=POOL_RESAMPLES {
        // Per-member predictions for every pool bundle, once.
        let preds: Vec<Vec<f64>> = current
            .bundles()
            .iter()
            .map(|&b| ensemble.member_outputs(b, &mut scratch).to_vec())
            .collect();

        let n = current.len();
        let all_pairs = n * (n - 1) / 2;
        let mut sampled = HashSet::new();
        let mut best: Option<((Bundle, Bundle), f64)> = None;
        let mut draws = 0usize;
        while sampled.len() < pair_budget.min(all_pairs) && draws < pair_budget * 8 {
            draws += 1;
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i == j {
                continue;
            }
            let key = (i.min(j), i.max(j));
            if !sampled.insert(key) {
                continue;
            }
            let (a, b) = (current.bundles()[key.0], current.bundles()[key.1]);
            if history.contains(a, b) {
                continue;
            }
            let score = bt_prob_variance(&preds[key.0], &preds[key.1]);
            if best.as_ref().is_none_or(|(_, s)| score > *s) {
                best = Some(((a, b), score));
            }
        }
        if let Some((pair, _)) = best {
            return Ok(pair);
        }
        if attempt < POOL_RESAMPLES {
            current = current.resampled(rng);
        }
    }
    random_pair(&current, history, rng)
}

/// Population variance over members of sigma(v_a - v_b).
fn bt_prob_variance(a: &[f64], b: &[f64]) -> f64 {
    let m = a.len() as f64;
    let probs = a.iter().zip(b).map(|(x, y)| sigmoid(x - y));
    let mean: f64 = probs.clone().sum::<f64>() / m;
    probs.map(|p| (p - mean).powi(2)).sum::<f64>() / m
}

/// Boltzmann exploration: two distinct bundles drawn without replacement
/// with probability proportional to exp(mean(x) / tau). With `temperature`
/// unset, tau defaults to the standard deviation of the pool's mean
/// predictions.
pub fn boltzmann<R: Rng + ?Sized>(
    ensemble: &EnsembleModel,
    pool: &CandidatePool,
    history: &QueryHistory,
    rng: &mut R,
    temperature: Option<f64>,
) -> Result<(Bundle, Bundle), AcquisitionError> {
    require_pool(pool)?;
    let mut scratch = EnsembleScratch::new(ensemble);
    let mut current = pool.clone();
    for attempt in 0..=POOL_RESAMPLES {
        let means: Vec<f64> = current
            .bundles()
            .iter()
            .map(|&b| ensemble.mean(b, &mut scratch))
            .collect();
        let tau = temperature.unwrap_or_else(|| std_dev(&means));

        for _ in 0..HISTORY_REJECTION_TRIES {
            let first = boltzmann_draw(&means, tau, None, rng);
            let second = boltzmann_draw(&means, tau, Some(first), rng);
            let (a, b) = (current.bundles()[first], current.bundles()[second]);
            if !history.contains(a, b) {
                return Ok((a, b));
            }
        }
        if attempt < POOL_RESAMPLES {
            current = current.resampled(rng);
        }
    }
    random_pair(&current, history, rng)
}

fn std_dev(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Index draw with probability proportional to exp(mean/tau), optionally
/// excluding one index. Weights are shifted by the allowed maximum so the
/// top candidate always carries weight 1; tau <= 0 (or all-equal means,
/// where the default tau is 0) degenerates gracefully to argmax/uniform.
fn boltzmann_draw<R: Rng + ?Sized>(
    means: &[f64],
    tau: f64,
    exclude: Option<usize>,
    rng: &mut R,
) -> usize {
    let allowed = |i: usize| Some(i) != exclude;
    let max = means
        .iter()
        .enumerate()
        .filter(|(i, _)| allowed(*i))
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let weight = |v: f64| {
        if v == max {
            1.0
        } else if tau <= 0.0 {
            0.0
        } else {
            ((v - max) / tau).exp()
        }
    };
    let total: f64 = means
        .iter()
        .enumerate()
        .filter(|(i, _)| allowed(*i))
        .map(|(_, &v)| weight(v))
        .sum();
    let mut target = rng.random_range(0.0..total);
    let mut last_allowed = 0;
    for (i, &v) in means.iter().enumerate() {
        if !allowed(i) {
            continue;
        }
        last_allowed = i;
        let w = weight(v);
        if target < w {
            return i;
        }
        target -= w;
    }
    last_allowed
}

/// Uniform distinct pair absent from the history: rejection sampling, then
/// a deterministic scan, then failure.
pub fn random_pair<R: Rng + ?Sized>(
    pool: &CandidatePool,
    history: &QueryHistory,
    rng: &mut R,
) -> Result<(Bundle, Bundle), AcquisitionError> {
    require_pool(pool)?;
    let n = pool.len();
    for _ in 0..HISTORY_REJECTION_TRIES {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i == j {
            continue;
        }
        let (a, b) = (pool.bundles()[i], pool.bundles()[j]);
        if !history.contains(a, b) {
            return Ok((a, b));
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (pool.bundles()[i], pool.bundles()[j]);
            if !history.contains(a, b) {
                return Ok((a, b));
            }
        }
    }
    Err(AcquisitionError::Exhausted)
}

/// Harness-facing selector: samples a fresh pool per query and dispatches
/// to the configured acquisition function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuerySelector {
    pub kind: AcquisitionKind,
    pub pool_size: usize,
    pub infomax_pair_budget: usize,
    /// Boltzmann temperature; None uses the pool's prediction std.
    pub temperature: Option<f64>,
}

impl Default for QuerySelector {
    fn default() -> Self {
        QuerySelector {
            kind: AcquisitionKind::DoubleTs,
            pool_size: DEFAULT_POOL_SIZE,
            infomax_pair_budget: DEFAULT_PAIR_BUDGET,
            temperature: None,
        }
    }
}

impl QuerySelector {
    pub fn with_kind(kind: AcquisitionKind) -> Self {
        QuerySelector {
            kind,
            ..QuerySelector::default()
        }
    }

    pub fn select<R: Rng + ?Sized>(
        &self,
        ensemble: &EnsembleModel,
        catalog: &CourseCatalog,
        history: &QueryHistory,
        rng: &mut R,
    ) -> Result<(Bundle, Bundle), AcquisitionError> {
        let pool = CandidatePool::sample(catalog, self.pool_size, rng);
        match self.kind {
            AcquisitionKind::DoubleTs => double_thompson_sample(ensemble, &pool, history, rng),
            AcquisitionKind::Infomax => {
                infomax(ensemble, &pool, history, rng, self.infomax_pair_budget)
            }
            AcquisitionKind::Boltzmann => {
                boltzmann(ensemble, &pool, history, rng, self.temperature)
            }
            AcquisitionKind::Random => random_pair(&pool, history, rng),
        }
    }
}

// The Bradley-Terry probability on ensemble means, used by reporting.
pub fn ensemble_bt_prob(
    ensemble: &EnsembleModel,
    a: Bundle,
    b: Bundle,
    scratch: &mut EnsembleScratch,
) -> f64 {
    let va = ensemble.mean(a, scratch);
    let vb = ensemble.mean(b, scratch);
    bradley_terry_prob(va, vb)
}

#[cfg(test)]
mod tests;
