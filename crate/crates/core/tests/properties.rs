use std::collections::BTreeMap;

use gridlines::geometry::{canonicalize_line, count_on_line, line_count, line_hits, points_on_line};
use gridlines::io::{from_json, to_csv, to_json};
use gridlines::oracle::line_counts_by_pairs;
use gridlines::pipeline2d::build_schedule;
use gridlines::regularizer::{regularize, regularize_shuffled, verify_certificate, to_bipartite, Regularized};
use gridlines::rng::rng_from_seed;
use gridlines::{GridParams, GridPoint, PointSet};
use proptest::prelude::*;

fn planar_set(max_n: u32) -> impl Strategy<Value = PointSet> {
    (2..=max_n).prop_flat_map(|n| {
        proptest::collection::vec(any::<bool>(), (n * n) as usize)
            .prop_map(move |mask| PointSet::from_mask(GridParams::plane(n).unwrap(), &mask))
    })
}

fn dense_set(n: u32) -> impl Strategy<Value = PointSet> {
    proptest::collection::vec(prop::bool::weighted(0.8), (n * n) as usize)
        .prop_map(move |mask| PointSet::from_mask(GridParams::plane(n).unwrap(), &mask))
}

proptest! {
    #[test]
    fn schedule_is_a_cube_chain(k in 2u32..200, extra in 0u32..5000, eps in 0.0f64..1.0) {
        let n = k + extra;
        prop_assume!((1.0 + eps) * k as f64 <= n as f64);
        let s = build_schedule(k, n, eps).unwrap();
        prop_assert!((s.first() - (1.0 + eps) * k as f64).abs() < 1e-9);
        for w in s.stages.windows(2) {
            prop_assert!(w[1] > w[0]);
            prop_assert!((w[1] - w[0].powi(3)).abs() <= 1e-9 * w[1]);
        }
        prop_assert!(*s.stages.last().unwrap() <= n as f64);
        prop_assert!(s.stages.last().unwrap().powi(3) > n as f64 || s.first() <= 1.0);
    }

    #[test]
    fn pair_bucketing_agrees_with_direct_counts(set in planar_set(9)) {
        let by_pairs: BTreeMap<_, _> = line_counts_by_pairs(&set).unwrap().into_iter().collect();
        let by_dirs: BTreeMap<_, _> = line_hits(&set, 2).into_iter().collect();
        prop_assert_eq!(&by_pairs, &by_dirs);
        for (line, c) in by_pairs {
            prop_assert_eq!(count_on_line(&set, &line), c);
        }
    }

    #[test]
    fn canonical_line_is_symmetric_and_exact(n in 2u32..30, a in any::<(u32, u32, u32, u32)>()) {
        let p = GridPoint::xy((a.0 % n) as i32 + 1, (a.1 % n) as i32 + 1);
        let q = GridPoint::xy((a.2 % n) as i32 + 1, (a.3 % n) as i32 + 1);
        prop_assume!(p != q);
        let l = canonicalize_line(&p, &q).unwrap();
        prop_assert_eq!(l, canonicalize_line(&q, &p).unwrap());
        prop_assert!(l.contains(&p) && l.contains(&q));
        let g = GridParams::plane(n).unwrap();
        let pts = points_on_line(&l, &g);
        prop_assert_eq!(pts.len() as u32, line_count(&l, n));
        prop_assert!(pts.iter().all(|x| l.contains(x) && g.contains(x)));
    }

    #[test]
    fn json_and_csv_round_trip(set in planar_set(8)) {
        prop_assert_eq!(from_json(&to_json(&set)).unwrap(), set.clone());
        prop_assert_eq!(to_csv(&set).lines().count(), set.len() + 1);
    }

    #[test]
    fn regularization_is_exact_or_certified(set in dense_set(7), k in 1u32..=5, seed in any::<u64>()) {
        let graph = to_bipartite(&set).unwrap();
        let plain = regularize(&set, k).unwrap();
        let shuffled = regularize_shuffled(&set, k, &mut rng_from_seed(seed)).unwrap();
        prop_assert_eq!(matches!(plain, Regularized::Regular(_)), matches!(shuffled, Regularized::Regular(_)));
        for out in [plain, shuffled] {
            match out {
                Regularized::Regular(s) => {
                    prop_assert!(s.is_subset(&set));
                    prop_assert!(s.axis_counts(0).iter().all(|&c| c == k));
                    prop_assert!(s.axis_counts(1).iter().all(|&c| c == k));
                }
                Regularized::Infeasible(cert) => prop_assert!(verify_certificate(&graph, k, &cert)),
            }
        }
    }
}
