//! The simulated proxy: answers correctly with a configured probability,
//! i.i.d. across queries.

use rand::Rng;

use crate::domain::{true_value, Bundle, CourseCatalog, StudentProfile};

use super::{Choice, ComparisonRecord, ProxyError};

/// Answers a comparison query from the ground-truth valuation: with
/// probability `accuracy` the truly better bundle, otherwise the other.
/// Exact ties are answered uniformly and count as correct.
pub fn simulated_answer<R: Rng + ?Sized>(
    catalog: &CourseCatalog,
    profile: &StudentProfile,
    bundle_a: Bundle,
    bundle_b: Bundle,
    accuracy: f64,
    rng: &mut R,
) -> Result<ComparisonRecord, ProxyError> {
    let va = true_value(catalog, profile, bundle_a)?;
    let vb = true_value(catalog, profile, bundle_b)?;
    if va == vb {
        let answer = if rng.random_range(0.0..1.0) < 0.5 {
            Choice::A
        } else {
            Choice::B
        };
        return Ok(ComparisonRecord::simulated(bundle_a, bundle_b, answer, true));
    }
    let truthful = if va > vb { Choice::A } else { Choice::B };
    let correct = rng.random_range(0.0..1.0) < accuracy;
    let answer = if correct { truthful } else { truthful.other() };
    Ok(ComparisonRecord::simulated(bundle_a, bundle_b, answer, correct))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{generate_profile, InstanceParams};
    use crate::seeds::rng_from;

    fn setup() -> (CourseCatalog, StudentProfile) {
        let catalog = CourseCatalog::default();
        let profile = generate_profile(&catalog, &InstanceParams::default(), &mut rng_from(3));
        (catalog, profile)
    }

    #[test]
    fn perfect_accuracy_always_picks_argmax() {
        let (catalog, profile) = setup();
        let mut rng = rng_from(5);
        for _ in 0..200 {
            let a = catalog.sample_bundle(&mut rng);
            let b = catalog.sample_bundle(&mut rng);
            if a == b {
                continue;
            }
            let rec = simulated_answer(&catalog, &profile, a, b, 1.0, &mut rng).unwrap();
            let va = true_value(&catalog, &profile, a).unwrap();
            let vb = true_value(&catalog, &profile, b).unwrap();
            if va != vb {
                let expect = if va > vb { Choice::A } else { Choice::B };
                assert_eq!(rec.answer, expect);
                assert_eq!(rec.correct, Some(true));
            }
            rec.validate().unwrap();
            assert!(rec.transcript.is_none());
        }
    }

    #[test]
    fn accuracy_grid_matches_binomial_concentration() {
        let (catalog, profile) = setup();
        // The simulated-accuracy grid used by the robustness experiments.
        for accuracy in [0.55, 0.6, 0.65, 0.7] {
            let mut rng = rng_from(17);
            let trials = 10_000;
            let mut correct = 0usize;
            let mut n = 0usize;
            while n < trials {
                let a = catalog.sample_bundle(&mut rng);
                let b = catalog.sample_bundle(&mut rng);
                if a == b
                    || true_value(&catalog, &profile, a).unwrap()
                        == true_value(&catalog, &profile, b).unwrap()
                {
                    continue;
                }
                let rec = simulated_answer(&catalog, &profile, a, b, accuracy, &mut rng).unwrap();
                if rec.correct.unwrap() {
                    correct += 1;
                }
                n += 1;
            }
            let freq = correct as f64 / trials as f64;
            let sigma = (accuracy * (1.0 - accuracy) / trials as f64).sqrt();
            assert!(
                (freq - accuracy).abs() < 3.0 * sigma,
                "accuracy {accuracy}: frequency {freq}"
            );
        }
    }

    #[test]
    fn ties_are_correct_either_way() {
        let catalog = CourseCatalog::new(4, 2).unwrap();
        let profile = StudentProfile::new(
            vec![10.0, 10.0, 5.0, 5.0],
            vec![],
            vec![crate::domain::Tier::Low; 4],
        )
        .unwrap();
        let a = Bundle::from_ids(&[1]);
        let b = Bundle::from_ids(&[2]);
        let mut rng = rng_from(2);
        let mut saw = std::collections::HashSet::new();
        for _ in 0..100 {
            let rec = simulated_answer(&catalog, &profile, a, b, 0.0, &mut rng).unwrap();
            assert_eq!(rec.correct, Some(true));
            saw.insert(rec.answer);
        }
        assert_eq!(saw.len(), 2, "tie answers should vary");
    }

    #[test]
    fn invalid_bundles_error() {
        let (catalog, profile) = setup();
        let too_big = Bundle::from_ids(&[1, 2, 3, 4, 5, 6]);
        let ok = Bundle::from_ids(&[1]);
        let mut rng = rng_from(1);
        assert!(simulated_answer(&catalog, &profile, too_big, ok, 1.0, &mut rng).is_err());
    }
}
