//! Bundle valuation and exact argmax allocation.
//!
//! A bundle's value is the sum of its courses' base values, where each
//! course hit by a triggered interaction group (two or more of the group's
//! members in the bundle) has its contribution scaled by the group's
//! factor; a course in several triggered groups receives the product of
//! their factors.

use super::catalog::{Bundle, CourseCatalog, MAX_COURSES};
use super::profile::{GuiReport, InteractionGroup, StudentProfile};
use super::DomainError;

/// Evaluates the group-scaled additive valuation on a bundle. Callers are
/// responsible for bundle validity.
pub fn bundle_value(base_values: &[f64], groups: &[InteractionGroup], bundle: Bundle) -> f64 {
    if bundle.is_empty() {
        return 0.0;
    }
    let mut multipliers = [1.0f64; MAX_COURSES];
    let mut scaled_any = false;
    for group in groups {
        let hit = bundle.intersection(group.members());
        let k = hit.size();
        if k >= 2 {
            let factor = group.factor(k);
            for c in hit.courses() {
                multipliers[c.index()] *= factor;
            }
            scaled_any = true;
        }
    }
    let mut total = 0.0;
    if scaled_any {
        for c in bundle.courses() {
            total += base_values[c.index()] * multipliers[c.index()];
        }
    } else {
        for c in bundle.courses() {
            total += base_values[c.index()];
        }
    }
    total
}

/// The student's true value for a bundle.
pub fn true_value(
    catalog: &CourseCatalog,
    profile: &StudentProfile,
    bundle: Bundle,
) -> Result<f64, DomainError> {
    catalog.validate_bundle(bundle)?;
    Ok(bundle_value(profile.base_values(), profile.groups(), bundle))
}

/// The value implied by the student's GUI report, same functional form.
pub fn reported_value(
    catalog: &CourseCatalog,
    report: &GuiReport,
    bundle: Bundle,
) -> Result<f64, DomainError> {
    catalog.validate_bundle(bundle)?;
    Ok(bundle_value(report.base_values(), report.groups(), bundle))
}

/// Exact argmax over every valid bundle, breaking value ties by the
/// lexicographically smallest incidence vector.
pub fn best_bundle<F: FnMut(Bundle) -> f64>(
    catalog: &CourseCatalog,
    mut value_fn: F,
) -> (Bundle, f64) {
    let mut best = Bundle::EMPTY;
    let mut best_value = value_fn(best);
    let mut best_key = best.lex_key(catalog.num_courses);
    for bundle in catalog.enumerate_bundles().skip(1) {
        let value = value_fn(bundle);
        let key = bundle.lex_key(catalog.num_courses);
        if value > best_value || (value == best_value && key < best_key) {
            best = bundle;
            best_value = value;
            best_key = key;
        }
    }
    (best, best_value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::profile::{InteractionKind, Tier};
    use crate::domain::CourseId;

    fn profile(
        base: Vec<f64>,
        groups: Vec<(Vec<usize>, InteractionKind, f64)>,
    ) -> StudentProfile {
        let n = base.len();
        let groups = groups
            .into_iter()
            .map(|(ids, kind, s)| {
                InteractionGroup::new(ids.into_iter().map(CourseId), kind, s).unwrap()
            })
            .collect();
        StudentProfile::new(base, groups, vec![Tier::Low; n]).unwrap()
    }

    #[test]
    fn empty_bundle_is_zero() {
        let catalog = CourseCatalog::new(4, 3).unwrap();
        let p = profile(vec![10.0, 20.0, 30.0, 40.0], vec![]);
        assert_eq!(true_value(&catalog, &p, Bundle::EMPTY).unwrap(), 0.0);
    }

    #[test]
    fn singleton_matches_base_value() {
        let catalog = CourseCatalog::default();
        let mut base = vec![50.0; 25];
        base[19] = 117.96; // course 20
        let p = profile(base, vec![(vec![1, 2], InteractionKind::Substitute, 0.4)]);
        let v = true_value(&catalog, &p, Bundle::from_ids(&[20])).unwrap();
        assert!((v - 117.96).abs() < 1e-12);
    }

    #[test]
    fn substitute_pair_scales_down() {
        let catalog = CourseCatalog::new(4, 3).unwrap();
        let p = profile(
            vec![50.0, 50.0, 10.0, 10.0],
            vec![(vec![1, 2], InteractionKind::Substitute, 0.4)],
        );
        let v = true_value(&catalog, &p, Bundle::from_ids(&[1, 2])).unwrap();
        assert!((v - 60.0).abs() < 1e-12, "got {v}");

        // Cross-check against an independent evaluator that walks courses
        // and multiplies out each course's triggered-group factors.
        let oracle = oracle_value(&p, Bundle::from_ids(&[1, 2]));
        assert!((v - oracle).abs() < 1e-12);
    }

    #[test]
    fn omitted_group_restores_additive_value() {
        let catalog = CourseCatalog::new(4, 3).unwrap();
        let report = GuiReport::new(vec![50.0, 50.0, 10.0, 10.0], vec![]).unwrap();
        let v = reported_value(&catalog, &report, Bundle::from_ids(&[1, 2])).unwrap();
        assert!((v - 100.0).abs() < 1e-12);
    }

    #[test]
    fn oversized_bundle_rejected() {
        let catalog = CourseCatalog::new(4, 2).unwrap();
        let p = profile(vec![1.0; 4], vec![]);
        assert!(true_value(&catalog, &p, Bundle::from_ids(&[1, 2, 3])).is_err());
    }

    /// Independent per-course evaluator used as a cross-check oracle.
    fn oracle_value(p: &StudentProfile, bundle: Bundle) -> f64 {
        let mut total = 0.0;
        for c in bundle.courses() {
            let mut contribution = p.base_value(c);
            for g in p.groups() {
                if g.members().contains(c) {
                    let k = bundle.intersection(g.members()).size();
                    if k >= 2 {
                        contribution *= g.factor(k);
                    }
                }
            }
            total += contribution;
        }
        total
    }

    #[test]
    fn overlapping_groups_compose_multiplicatively() {
        let catalog = CourseCatalog::new(5, 4).unwrap();
        let p = profile(
            vec![10.0, 20.0, 30.0, 40.0, 50.0],
            vec![
                (vec![1, 2, 3], InteractionKind::Substitute, 0.4),
                (vec![3, 4], InteractionKind::Complement, 0.5),
            ],
        );
        // Bundle {1,3,4}: substitute hits {1,3} (k=2, factor 0.6),
        // complement hits {3,4} (k=2, factor 1.5). Course 3 gets both.
        let v = true_value(&catalog, &p, Bundle::from_ids(&[1, 3, 4])).unwrap();
        let expect = 10.0 * 0.6 + 30.0 * 0.6 * 1.5 + 40.0 * 1.5;
        assert!((v - expect).abs() < 1e-12, "got {v}, expect {expect}");
        assert!((v - oracle_value(&p, Bundle::from_ids(&[1, 3, 4]))).abs() < 1e-12);
    }

    #[test]
    fn monotone_without_substitutes() {
        use rand::{Rng, SeedableRng};
        let catalog = CourseCatalog::new(8, 8).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(21);
        let p = profile(
            (0..8).map(|_| rng.random_range(1.0..50.0)).collect(),
            vec![
                (vec![1, 2, 5], InteractionKind::Complement, 0.4),
                (vec![3, 4], InteractionKind::Complement, 0.2),
            ],
        );
        for _ in 0..500 {
            let x = catalog.sample_bundle(&mut rng);
            let y_mask = x.mask() | catalog.sample_bundle(&mut rng).mask();
            let y = Bundle::from_mask(y_mask);
            let vx = true_value(&catalog, &p, x).unwrap();
            let vy = true_value(&catalog, &p, y).unwrap();
            assert!(vx <= vy + 1e-12, "monotonicity violated: {vx} > {vy}");
        }
    }

    #[test]
    fn group_locality() {
        let catalog = CourseCatalog::new(6, 3).unwrap();
        let bundle = Bundle::from_ids(&[1, 2]);
        let p1 = profile(
            vec![10.0, 20.0, 30.0, 40.0, 5.0, 6.0],
            vec![(vec![1, 2], InteractionKind::Substitute, 0.3)],
        );
        // Change base value of course 5, outside the bundle.
        let p2 = profile(
            vec![10.0, 20.0, 30.0, 40.0, 999.0, 6.0],
            vec![(vec![1, 2], InteractionKind::Substitute, 0.3)],
        );
        assert_eq!(
            true_value(&catalog, &p1, bundle).unwrap(),
            true_value(&catalog, &p2, bundle).unwrap()
        );
    }

    #[test]
    fn best_bundle_additive_takes_top_courses() {
        let catalog = CourseCatalog::new(8, 5).unwrap();
        let base = vec![10.0, 9.0, 8.0, 7.0, 6.0, 5.0, 4.0, 3.0];
        let p = profile(base, vec![]);
        let (bundle, value) = best_bundle(&catalog, |b| {
            bundle_value(p.base_values(), p.groups(), b)
        });
        assert_eq!(bundle, Bundle::from_ids(&[1, 2, 3, 4, 5]));
        assert!((value - 40.0).abs() < 1e-12);
    }

    #[test]
    fn best_bundle_avoids_strong_substitutes() {
        // The two highest-value courses substitute so strongly that the
        // argmax keeps only one of them.
        let catalog = CourseCatalog::new(4, 2).unwrap();
        let p = profile(
            vec![100.0, 90.0, 50.0, 10.0],
            vec![(vec![1, 2], InteractionKind::Substitute, 0.8)],
        );
        let (bundle, value) = best_bundle(&catalog, |b| {
            bundle_value(p.base_values(), p.groups(), b)
        });
        // {1,2} would be (100+90)*0.2 = 38; {1,3} = 150 wins.
        assert_eq!(bundle, Bundle::from_ids(&[1, 3]));
        assert!((value - 150.0).abs() < 1e-12);
    }

    #[test]
    fn best_bundle_all_zero_takes_lex_smallest() {
        let catalog = CourseCatalog::new(5, 2).unwrap();
        let p = profile(vec![0.0; 5], vec![]);
        let (bundle, value) = best_bundle(&catalog, |b| {
            bundle_value(p.base_values(), p.groups(), b)
        });
        assert_eq!(value, 0.0);
        assert_eq!(bundle, Bundle::EMPTY);
    }

    #[test]
    fn best_bundle_matches_naive_double_loop() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(99);
        for trial in 0..30 {
            let n = rng.random_range(4..=10usize);
            let max = rng.random_range(1..=n.min(4));
            let catalog = CourseCatalog::new(n, max).unwrap();
            let base: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..100.0)).collect();
            let mut groups: Vec<(Vec<usize>, InteractionKind, f64)> = Vec::new();
            for kind in [InteractionKind::Substitute, InteractionKind::Complement] {
                loop {
                    let size = rng.random_range(2..=3.min(n));
                    let mut ids: Vec<usize> = (1..=n).collect();
                    for i in (1..ids.len()).rev() {
                        let j = rng.random_range(0..=i);
                        ids.swap(i, j);
                    }
                    let mut members = ids[..size].to_vec();
                    members.sort_unstable();
                    if !groups.iter().any(|(m, _, _)| *m == members) {
                        groups.push((members, kind, 0.4));
                        break;
                    }
                }
            }
            let p = profile(base, groups);
            let (got_bundle, got_value) = best_bundle(&catalog, |b| {
                bundle_value(p.base_values(), p.groups(), b)
            });

            // Naive oracle: scan raw masks, compare with explicit incidence
            // vectors for the tie-break.
            let mut best: Option<(Vec<bool>, f64, Bundle)> = None;
            for mask in 0u64..(1 << n) {
                if mask.count_ones() as usize > max {
                    continue;
                }
                let b = Bundle::from_mask(mask);
                let v = bundle_value(p.base_values(), p.groups(), b);
                let vec: Vec<bool> = (0..n).map(|i| mask & (1 << i) != 0).collect();
                let better = match &best {
                    None => true,
                    Some((bv, bval, _)) => v > *bval || (v == *bval && vec < *bv),
                };
                if better {
                    best = Some((vec, v, b));
                }
            }
            let (_, want_value, want_bundle) = best.unwrap();
            assert_eq!(got_bundle, want_bundle, "trial {trial}");
            assert_eq!(got_value, want_value, "trial {trial}");
        }
    }
}
