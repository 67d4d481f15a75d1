//! The GUI mistake model: how a true profile degrades into a report.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::profile::{GuiReport, InteractionGroup, StudentProfile};

/// Parameters of the simulated reporting errors. `gamma` scales all three
/// (the noise multiplier); the omission probability is clamped to [0, 1]
/// after scaling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MistakeProfile {
    /// Std of the multiplicative log-normal perturbation on base values.
    pub value_noise_std: f64,
    /// Probability an entire interaction group is missing from the report.
    pub group_omission_prob: f64,
    /// Std of the additive perturbation on reported group strengths.
    pub strength_noise_std: f64,
    /// Multiplier applied to all three parameters.
    pub gamma: f64,
}

impl Default for MistakeProfile {
    fn default() -> Self {
        MistakeProfile {
            value_noise_std: 0.15,
            group_omission_prob: 0.5,
            strength_noise_std: 0.1,
            gamma: 1.0,
        }
    }
}

impl MistakeProfile {
    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn effective_value_noise_std(&self) -> f64 {
        self.gamma * self.value_noise_std
    }

    pub fn effective_omission_prob(&self) -> f64 {
        (self.gamma * self.group_omission_prob).clamp(0.0, 1.0)
    }

    pub fn effective_strength_noise_std(&self) -> f64 {
        self.gamma * self.strength_noise_std
    }
}

// Reported strengths are clamped into the open unit interval.
const STRENGTH_MIN: f64 = 1e-3;
const STRENGTH_MAX: f64 = 1.0 - 1e-3;

/// Corrupts a true profile into a GUI report: multiplicative value noise,
/// whole-group omission, and strength perturbation. Deterministic given the
/// RNG state; `gamma = 0` reproduces the profile exactly.
pub fn corrupt<R: Rng + ?Sized>(
    profile: &StudentProfile,
    mistakes: &MistakeProfile,
    rng: &mut R,
) -> GuiReport {
    let value_std = mistakes.effective_value_noise_std();
    let omission_prob = mistakes.effective_omission_prob();
    let strength_std = mistakes.effective_strength_noise_std();

    let reported_values: Vec<f64> = profile
        .base_values()
        .iter()
        .map(|&v| {
            let z: f64 = StandardNormal.sample(rng);
            v * (value_std * z).exp()
        })
        .collect();

    let mut reported_groups = Vec::with_capacity(profile.groups().len());
    for group in profile.groups() {
        let omit = rng.random_range(0.0..1.0) < omission_prob;
        let z: f64 = StandardNormal.sample(rng);
        if omit {
            continue;
        }
        let strength = if strength_std == 0.0 {
            group.strength
        } else {
            (group.strength + strength_std * z).clamp(STRENGTH_MIN, STRENGTH_MAX)
        };
        let reported = InteractionGroup::new(group.members().courses(), group.kind, strength)
            .expect("perturbed group stays valid");
        reported_groups.push(reported);
    }

    GuiReport::new(reported_values, reported_groups).expect("corrupted report stays valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::catalog::{CourseCatalog, CourseId};
    use crate::domain::profile::{generate_profile, InstanceParams, InteractionKind, Tier};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn gamma_zero_is_identity() {
        let catalog = CourseCatalog::default();
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let profile = generate_profile(&catalog, &InstanceParams::default(), &mut rng);
        let mistakes = MistakeProfile::default().with_gamma(0.0);
        let report = corrupt(&profile, &mistakes, &mut rng);
        assert!(report.matches_profile(&profile));
    }

    #[test]
    fn deterministic_given_seed() {
        let catalog = CourseCatalog::default();
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        let profile = generate_profile(&catalog, &InstanceParams::default(), &mut rng);
        let mistakes = MistakeProfile::default();
        let r1 = corrupt(&profile, &mistakes, &mut ChaCha12Rng::seed_from_u64(5));
        let r2 = corrupt(&profile, &mistakes, &mut ChaCha12Rng::seed_from_u64(5));
        assert_eq!(r1, r2);
    }

    #[test]
    fn omission_rate_concentrates() {
        // 1000 groups, omission probability 0.5: the omitted count lands
        // within +-50 of 500 with overwhelming probability (3 sigma ~ 47).
        let n = 10usize;
        let groups: Vec<InteractionGroup> = (0..1000)
            .map(|i| {
                let a = CourseId(1 + (i % n));
                let b = CourseId(1 + ((i + 1) % n));
                InteractionGroup::new([a, b], InteractionKind::Substitute, 0.4).unwrap()
            })
            .collect();
        let profile = StudentProfile::new(vec![10.0; n], groups, vec![Tier::Low; n]).unwrap();
        let mistakes = MistakeProfile {
            value_noise_std: 0.0,
            group_omission_prob: 0.5,
            strength_noise_std: 0.0,
            gamma: 1.0,
        };
        let mut rng = ChaCha12Rng::seed_from_u64(1234);
        let report = corrupt(&profile, &mistakes, &mut rng);
        let omitted = 1000 - report.groups().len();
        assert!(
            (450..=550).contains(&omitted),
            "omitted {omitted} of 1000, expected close to 500"
        );
    }

    #[test]
    fn omission_probability_clamps_at_one() {
        let mistakes = MistakeProfile {
            group_omission_prob: 0.6,
            gamma: 2.0,
            ..MistakeProfile::default()
        };
        assert_eq!(mistakes.effective_omission_prob(), 1.0);

        // With effective probability 1, every group is omitted.
        let catalog = CourseCatalog::default();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let profile = generate_profile(&catalog, &InstanceParams::default(), &mut rng);
        let report = corrupt(&profile, &mistakes, &mut rng);
        assert!(report.groups().is_empty());
    }

    #[test]
    fn reported_groups_subset_with_perturbed_strengths() {
        let catalog = CourseCatalog::default();
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        let profile = generate_profile(&catalog, &InstanceParams::default(), &mut rng);
        let report = corrupt(&profile, &MistakeProfile::default(), &mut rng);
        for rg in report.groups() {
            let twin = profile
                .groups()
                .iter()
                .find(|g| g.members() == rg.members() && g.kind == rg.kind);
            assert!(twin.is_some(), "reported group not present in profile");
            assert!(rg.strength > 0.0 && rg.strength < 1.0);
        }
        assert!(report.groups().len() <= profile.groups().len());
        for &v in report.base_values() {
            assert!(v >= 0.0);
        }
    }
}
