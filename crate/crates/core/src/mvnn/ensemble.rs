//! Ensembles of independently initialized networks. The member mean is the
//! prediction, the member variance the epistemic uncertainty.

use super::network::{forward_cached, initialize, ForwardCache};
use super::{MvnnArchitecture, MvnnParams};
use crate::domain::Bundle;
use crate::seeds::{derive_seed, rng_from};

pub const DEFAULT_ENSEMBLE_SIZE: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleModel {
    pub arch: MvnnArchitecture,
    pub members: Vec<MvnnParams>,
}

/// Reusable evaluation buffers; one per worker thread.
pub struct EnsembleScratch {
    cache: ForwardCache,
    outputs: Vec<f64>,
}

impl EnsembleScratch {
    pub fn new(ensemble: &EnsembleModel) -> Self {
        EnsembleScratch {
            cache: ForwardCache::new(&ensemble.arch),
            outputs: vec![0.0; ensemble.members.len()],
        }
    }

    /// The shared forward cache, for callers evaluating single members.
    pub fn cache_mut(&mut self) -> &mut ForwardCache {
        &mut self.cache
    }
}

impl EnsembleModel {
    /// `num_members` networks sharing one architecture, each initialized
    /// from its own derived seed.
    pub fn initialize(arch: MvnnArchitecture, num_members: usize, seed: u64) -> Self {
        assert!(num_members >= 2, "an ensemble needs at least 2 members");
        let members = (0..num_members)
            .map(|j| {
                let mut rng = rng_from(derive_seed(seed, 0x9e1b, j as u64));
                initialize(&arch, &mut rng)
            })
            .collect();
        EnsembleModel { arch, members }
    }

    pub fn num_members(&self) -> usize {
        self.members.len()
    }

    /// Per-member outputs for a bundle, written into the scratch buffer.
    pub fn member_outputs<'s>(&self, bundle: Bundle, scratch: &'s mut EnsembleScratch) -> &'s [f64] {
        for (j, member) in self.members.iter().enumerate() {
            scratch.outputs[j] = forward_cached(&self.arch, member, bundle, &mut scratch.cache);
        }
        &scratch.outputs
    }

    pub fn mean(&self, bundle: Bundle, scratch: &mut EnsembleScratch) -> f64 {
        let outputs = self.member_outputs(bundle, scratch);
        outputs.iter().sum::<f64>() / outputs.len() as f64
    }

    /// Population variance of member outputs. Exactly zero when all members
    /// agree (the mean of identical values can round off by an ulp).
    pub fn variance(&self, bundle: Bundle, scratch: &mut EnsembleScratch) -> f64 {
        let outputs = self.member_outputs(bundle, scratch);
        if outputs.iter().all(|&y| y == outputs[0]) {
            return 0.0;
        }
        let m = outputs.len() as f64;
        let mean = outputs.iter().sum::<f64>() / m;
        outputs.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / m
    }

    /// Allocation-free convenience when no scratch is at hand.
    pub fn mean_simple(&self, bundle: Bundle) -> f64 {
        let mut scratch = EnsembleScratch::new(self);
        self.mean(bundle, &mut scratch)
    }
}
