use super::*;
use crate::mvnn::{MvnnArchitecture, MvnnParams};
use crate::seeds::rng_from;

fn catalog() -> CourseCatalog {
    CourseCatalog::new(10, 4).unwrap()
}

/// Linear single-layer net whose pool argmax is fully controlled by the
/// per-course weights.
fn linear_member(weights: &[f64]) -> (MvnnArchitecture, MvnnParams) {
    let n = weights.len();
    let arch = MvnnArchitecture::new(n, vec![], vec![], vec![1.0; n]).unwrap();
    let mut p = MvnnParams::zeros(&arch);
    for (c, &w) in weights.iter().enumerate() {
        p.weights[0].set(0, c, w);
    }
    (arch, p)
}

fn linear_ensemble(member_weights: &[Vec<f64>]) -> EnsembleModel {
    let (arch, _) = linear_member(&member_weights[0]);
    let members = member_weights
        .iter()
        .map(|w| linear_member(w).1)
        .collect();
    EnsembleModel { arch, members }
}

fn random_ensemble(seed: u64) -> EnsembleModel {
    let arch = MvnnArchitecture::default_for(10);
    EnsembleModel::initialize(arch, 4, seed)
}

#[test]
fn double_ts_identical_members_degenerates_to_top_two() {
    let cat = catalog();
    // All members identical: argmax forced to coincide, runner-up taken.
    let w = vec![1.0, 0.9, 0.8, 0.7, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1];
    let ensemble = linear_ensemble(&[w.clone(), w.clone(), w]);
    let pool = CandidatePool::from_bundles(
        &cat,
        vec![
            Bundle::from_ids(&[1, 2]), // 1.9: best
            Bundle::from_ids(&[3, 4]), // 1.5: second
            Bundle::from_ids(&[5, 6]), // 0.2
        ],
    )
    .unwrap();
    let history = QueryHistory::new();
    for seed in 0..20 {
        let mut rng = rng_from(seed);
        let (a, b) = double_thompson_sample(&ensemble, &pool, &history, &mut rng).unwrap();
        assert_eq!(a, Bundle::from_ids(&[1, 2]));
        assert_eq!(b, Bundle::from_ids(&[3, 4]));
    }
}

#[test]
fn double_ts_two_members_disjoint_argmaxes() {
    let cat = catalog();
    // Member 0 loves course 1, member 1 loves course 2.
    let mut w0 = vec![0.1; 10];
    w0[0] = 5.0;
    let mut w1 = vec![0.1; 10];
    w1[1] = 5.0;
    let ensemble = linear_ensemble(&[w0, w1]);
    let a = Bundle::from_ids(&[1]);
    let b = Bundle::from_ids(&[2]);
    let pool =
        CandidatePool::from_bundles(&cat, vec![a, b, Bundle::from_ids(&[3])]).unwrap();
    let history = QueryHistory::new();
    let mut rng = rng_from(7);
    let mut hits = 0;
    let trials = 4000;
    for _ in 0..trials {
        let pair = double_thompson_sample(&ensemble, &pool, &history, &mut rng).unwrap();
        let set = [pair.0, pair.1];
        if set.contains(&a) && set.contains(&b) {
            hits += 1;
        }
    }
    // The two direct draw outcomes (j1, j2) = (0,1) and (1,0) already give
    // {a, b}; redraws can only add to that.
    assert!(
        hits as f64 / trials as f64 >= 0.5,
        "{{a,b}} frequency {}",
        hits as f64 / trials as f64
    );
}

#[test]
fn double_ts_pool_of_two() {
    let cat = catalog();
    let ensemble = random_ensemble(3);
    let x = Bundle::from_ids(&[1, 2]);
    let y = Bundle::from_ids(&[9]);
    let pool = CandidatePool::from_bundles(&cat, vec![x, y]).unwrap();
    let history = QueryHistory::new();
    let mut rng = rng_from(11);
    let (a, b) = double_thompson_sample(&ensemble, &pool, &history, &mut rng).unwrap();
    assert_ne!(a, b);
    assert!([x, y].contains(&a) && [x, y].contains(&b));
}

#[test]
fn infomax_identical_members_returns_first_sampled_pair() {
    let cat = catalog();
    let w = vec![0.5; 10];
    let ensemble = linear_ensemble(&[w.clone(), w]);
    let pool = CandidatePool::sample(&cat, 8, &mut rng_from(2));
    let history = QueryHistory::new();
    // All scores zero: whichever distinct pair is sampled first wins.
    let mut rng = rng_from(5);
    let got = infomax(&ensemble, &pool, &history, &mut rng, 100).unwrap();
    let mut check_rng = rng_from(5);
    let expected = loop {
        let i = check_rng.random_range(0..pool.len());
        let j = check_rng.random_range(0..pool.len());
        if i != j {
            let key = (i.min(j), i.max(j));
            break (pool.bundles()[key.0], pool.bundles()[key.1]);
        }
    };
    assert_eq!(got, expected);
}

#[test]
fn infomax_prefers_order_swapping_pair() {
    let cat = catalog();
    // Bundles {1} and {2}: members disagree on the ordering. Bundles {3}
    // and {4}: members agree. The swapping pair scores higher.
    let mut w0 = vec![0.0; 10];
    let mut w1 = vec![0.0; 10];
    w0[0] = 2.0; // member 0: {1} = 2.0
    w0[1] = 1.0; // member 0: {2} = 1.0
    w1[0] = 1.0; // member 1: {1} = 1.0
    w1[1] = 2.0; // member 1: {2} = 2.0
    w0[2] = 3.0;
    w1[2] = 3.0; // {3} = 3.0 for both
    w0[3] = 0.5;
    w1[3] = 0.5; // {4} = 0.5 for both
    let ensemble = linear_ensemble(&[w0, w1]);
    let pool = CandidatePool::from_bundles(
        &cat,
        vec![
            Bundle::from_ids(&[1]),
            Bundle::from_ids(&[2]),
            Bundle::from_ids(&[3]),
            Bundle::from_ids(&[4]),
        ],
    )
    .unwrap();
    let history = QueryHistory::new();
    let mut rng = rng_from(1);
    // Budget large enough to sample all 6 pairs.
    let (a, b) = infomax(&ensemble, &pool, &history, &mut rng, 100).unwrap();
    let set = [a, b];
    assert!(
        set.contains(&Bundle::from_ids(&[1])) && set.contains(&Bundle::from_ids(&[2])),
        "expected the disagreement pair, got {a:?}, {b:?}"
    );
}

#[test]
fn infomax_pool_of_two() {
    let cat = catalog();
    let ensemble = random_ensemble(9);
    let x = Bundle::from_ids(&[1]);
    let y = Bundle::from_ids(&[2, 3]);
    let pool = CandidatePool::from_bundles(&cat, vec![x, y]).unwrap();
    let (a, b) = infomax(&ensemble, &pool, &QueryHistory::new(), &mut rng_from(3), 10).unwrap();
    assert!([x, y].contains(&a) && [x, y].contains(&b) && a != b);
}

#[test]
fn boltzmann_high_temperature_is_uniform() {
    let cat = catalog();
    let ensemble = random_ensemble(4);
    let bundles = vec![
        Bundle::from_ids(&[1]),
        Bundle::from_ids(&[2]),
        Bundle::from_ids(&[3]),
    ];
    let pool = CandidatePool::from_bundles(&cat, bundles.clone()).unwrap();
    let history = QueryHistory::new();
    let mut rng = rng_from(17);
    let mut counts = std::collections::HashMap::new();
    let draws = 10_000;
    for _ in 0..draws {
        let (a, b) = boltzmann(&ensemble, &pool, &history, &mut rng, Some(1e12)).unwrap();
        let key = QueryHistory::key(a, b);
        *counts.entry(key).or_insert(0usize) += 1;
    }
    // Chi-squared against uniform over the 3 unordered pairs, 2 dof;
    // generous 0.1% critical value 13.8.
    let expect = draws as f64 / 3.0;
    let chi2: f64 = counts
        .values()
        .map(|&c| (c as f64 - expect).powi(2) / expect)
        .sum();
    assert_eq!(counts.len(), 3);
    assert!(chi2 < 13.8, "chi2 {chi2} counts {counts:?}");
}

#[test]
fn boltzmann_low_temperature_takes_top_two() {
    let cat = catalog();
    let mut w = vec![0.1; 10];
    w[0] = 4.0;
    w[1] = 2.0;
    let ensemble = linear_ensemble(&[w.clone(), w]);
    let pool = CandidatePool::from_bundles(
        &cat,
        vec![
            Bundle::from_ids(&[1]), // 4.0
            Bundle::from_ids(&[2]), // 2.0
            Bundle::from_ids(&[3]), // 0.1
        ],
    )
    .unwrap();
    let history = QueryHistory::new();
    for seed in 0..30 {
        let (a, b) =
            boltzmann(&ensemble, &pool, &history, &mut rng_from(seed), Some(1e-9)).unwrap();
        assert_eq!(a, Bundle::from_ids(&[1]));
        assert_eq!(b, Bundle::from_ids(&[2]));
    }
}

#[test]
fn boltzmann_pool_of_two() {
    let cat = catalog();
    let ensemble = random_ensemble(5);
    let x = Bundle::from_ids(&[4]);
    let y = Bundle::from_ids(&[5, 6]);
    let pool = CandidatePool::from_bundles(&cat, vec![x, y]).unwrap();
    let (a, b) = boltzmann(&ensemble, &pool, &QueryHistory::new(), &mut rng_from(2), None).unwrap();
    assert!([x, y].contains(&a) && [x, y].contains(&b) && a != b);
}

#[test]
fn random_pair_uniform_over_pairs() {
    let cat = catalog();
    let bundles = vec![
        Bundle::from_ids(&[1]),
        Bundle::from_ids(&[2]),
        Bundle::from_ids(&[3]),
        Bundle::from_ids(&[4]),
    ];
    let pool = CandidatePool::from_bundles(&cat, bundles).unwrap();
    let history = QueryHistory::new();
    let mut rng = rng_from(23);
    let mut counts = std::collections::HashMap::new();
    let draws = 10_000usize;
    for _ in 0..draws {
        let (a, b) = random_pair(&pool, &history, &mut rng).unwrap();
        assert_ne!(a, b);
        *counts.entry(QueryHistory::key(a, b)).or_insert(0usize) += 1;
    }
    assert_eq!(counts.len(), 6);
    // Each of the 6 pairs within 3 sigma of 1/6.
    let sigma = ((1.0 / 6.0) * (5.0 / 6.0) / draws as f64).sqrt();
    for (&pair, &c) in &counts {
        let freq = c as f64 / draws as f64;
        assert!(
            (freq - 1.0 / 6.0).abs() < 3.0 * sigma + 1e-9,
            "pair {pair:?} freq {freq}"
        );
    }
}

#[test]
fn random_pair_returns_last_unused() {
    let cat = catalog();
    let bundles = vec![
        Bundle::from_ids(&[1]),
        Bundle::from_ids(&[2]),
        Bundle::from_ids(&[3]),
    ];
    let pool = CandidatePool::from_bundles(&cat, bundles.clone()).unwrap();
    let mut history = QueryHistory::new();
    history.insert(bundles[0], bundles[1]);
    history.insert(bundles[0], bundles[2]);
    let (a, b) = random_pair(&pool, &history, &mut rng_from(1)).unwrap();
    assert_eq!(QueryHistory::key(a, b), QueryHistory::key(bundles[1], bundles[2]));

    history.insert(bundles[1], bundles[2]);
    assert!(matches!(
        random_pair(&pool, &history, &mut rng_from(1)),
        Err(AcquisitionError::Exhausted)
    ));
}

#[test]
fn selected_pairs_avoid_history_and_are_valid() {
    let cat = CourseCatalog::new(8, 3).unwrap();
    let ensemble = EnsembleModel::initialize(MvnnArchitecture::default_for(8), 3, 21);
    let mut history = QueryHistory::new();
    let mut rng = rng_from(31);
    for kind in [
        AcquisitionKind::DoubleTs,
        AcquisitionKind::Infomax,
        AcquisitionKind::Boltzmann,
        AcquisitionKind::Random,
    ] {
        let selector = QuerySelector {
            kind,
            pool_size: 16,
            ..QuerySelector::default()
        };
        for _ in 0..40 {
            let (a, b) = selector.select(&ensemble, &cat, &history, &mut rng).unwrap();
            assert_ne!(a, b);
            assert!(cat.is_valid_bundle(a) && cat.is_valid_bundle(b));
            assert!(!history.contains(a, b), "repeated pair {a:?} {b:?}");
            history.insert(a, b);
        }
    }
}

#[test]
fn acquisition_is_deterministic_given_seed() {
    let cat = CourseCatalog::new(9, 3).unwrap();
    let ensemble = EnsembleModel::initialize(MvnnArchitecture::default_for(9), 3, 2);
    for kind in [
        AcquisitionKind::DoubleTs,
        AcquisitionKind::Infomax,
        AcquisitionKind::Boltzmann,
        AcquisitionKind::Random,
    ] {
        let selector = QuerySelector {
            kind,
            pool_size: 12,
            ..QuerySelector::default()
        };
        let run = |seed: u64| {
            let mut history = QueryHistory::new();
            let mut rng = rng_from(seed);
            (0..10)
                .map(|_| {
                    let pair = selector.select(&ensemble, &cat, &history, &mut rng).unwrap();
                    history.insert(pair.0, pair.1);
                    pair
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(99), run(99), "{kind} not reproducible");
    }
}

#[test]
fn pool_sampling_is_distinct_and_valid() {
    let cat = CourseCatalog::new(6, 2).unwrap();
    let mut rng = rng_from(8);
    let pool = CandidatePool::sample(&cat, 1000, &mut rng);
    // Capped at the number of valid bundles (22 = 1 + 6 + 15).
    assert_eq!(pool.len(), 22);
    let set: std::collections::HashSet<_> = pool.bundles().iter().collect();
    assert_eq!(set.len(), pool.len());
    for &b in pool.bundles() {
        assert!(cat.is_valid_bundle(b));
    }
}

#[test]
fn history_treats_pairs_as_unordered() {
    let mut history = QueryHistory::new();
    let a = Bundle::from_ids(&[1]);
    let b = Bundle::from_ids(&[2]);
    assert!(history.insert(a, b));
    assert!(history.contains(b, a));
    assert!(!history.insert(b, a));
    assert_eq!(history.len(), 1);
}
