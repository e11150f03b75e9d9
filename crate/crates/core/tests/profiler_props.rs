mod common;

use common::{graph_strategy, permutation_from_keys, reference_scores, reference_weight};
use epiprofile::{
    decay_weight, hit_score, hop_distances, likeliness_scores, Dataset, DecayKind, DecaySpec,
    LikelinessResult, Network, Observable,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spec_strategy() -> impl Strategy<Value = DecaySpec> {
    prop_oneof![
        Just(DecaySpec::Naive),
        (0.1..5.0f64).prop_map(DecaySpec::Power),
        (0.1..5.0f64).prop_map(DecaySpec::Polynomial),
        (0.01..3.0f64).prop_map(DecaySpec::Exponential),
    ]
}

fn instance(max_n: usize) -> impl Strategy<Value = (Network, Vec<f64>)> {
    graph_strategy(max_n).prop_flat_map(|(n, edges)| {
        let net = Network::from_edges(n, &edges).unwrap();
        (
            Just(net),
            prop::collection::vec(prop_oneof![Just(0.0), 0.0..1000.0f64], n),
        )
    })
}

fn dataset(values: Vec<f64>) -> Dataset {
    Dataset::new(values, Observable::DeltaJ).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn matches_direct_evaluation((net, values) in instance(8), spec in spec_strategy()) {
        prop_assume!(values.iter().any(|&v| v > 0.0));
        let dist = hop_distances(&net);
        let rows: Vec<Vec<Option<u32>>> = (0..net.len()).map(|i| dist.row(i).to_vec()).collect();
        let got = likeliness_scores(&dist, &dataset(values.clone()), spec).unwrap();
        let want = reference_scores(&rows, &values, spec);
        for (g, w) in got.scores.iter().zip(&want) {
            prop_assert!((g - w).abs() <= 1e-12, "{} vs {}", g, w);
        }
    }

    #[test]
    fn weights_match_closed_forms(spec in spec_strategy(), d in prop::option::of(0u32..40)) {
        let (got, want) = (decay_weight(spec, d), reference_weight(spec, d));
        prop_assert!((got - want).abs() <= 1e-12 * want.max(1e-300).max(1.0), "{} vs {}", got, want);
    }

    #[test]
    fn power_of_two_rescaling_is_exact((net, values) in instance(12), spec in spec_strategy(), e in -20i32..20) {
        let dist = hop_distances(&net);
        let c = 2f64.powi(e);
        let base = likeliness_scores(&dist, &dataset(values.clone()), spec).unwrap();
        let scaled = likeliness_scores(&dist, &dataset(values.iter().map(|v| v * c).collect()), spec).unwrap();
        prop_assert_eq!(base, scaled);
    }

    #[test]
    fn arbitrary_rescaling_is_invariant((net, values) in instance(12), spec in spec_strategy(), c in 1e-6..1e6f64) {
        let dist = hop_distances(&net);
        let base = likeliness_scores(&dist, &dataset(values.clone()), spec).unwrap();
        let scaled = likeliness_scores(&dist, &dataset(values.iter().map(|v| v * c).collect()), spec).unwrap();
        prop_assert_eq!(base.degenerate, scaled.degenerate);
        for (a, b) in base.scores.iter().zip(&scaled.scores) {
            prop_assert!((a - b).abs() <= 1e-12, "{} vs {}", a, b);
        }
    }

    #[test]
    fn relabeling_permutes_scores(
        (net, values, keys) in instance(14).prop_flat_map(|(net, v)| {
            let n = net.len();
            (Just(net), Just(v), prop::collection::vec(any::<u64>(), n))
        }),
        spec in spec_strategy(),
    ) {
        let perm = permutation_from_keys(&keys);
        let moved = net.relabeled(&perm).unwrap();
        let mut moved_values = vec![0.0; values.len()];
        for (i, &p) in perm.iter().enumerate() {
            moved_values[p] = values[i];
        }
        let base = likeliness_scores(&hop_distances(&net), &dataset(values), spec).unwrap();
        let after = likeliness_scores(&hop_distances(&moved), &dataset(moved_values), spec).unwrap();
        prop_assert_eq!(after, base.relabeled(&perm).unwrap());
    }

    #[test]
    fn steep_decays_approach_naive((net, values) in instance(14)) {
        prop_assume!(values.iter().any(|&v| v > 0.0));
        let dist = hop_distances(&net);
        let naive = likeliness_scores(&dist, &dataset(values.clone()), DecaySpec::Naive).unwrap();
        for steep in [DecaySpec::Polynomial(50.0), DecaySpec::Exponential(50.0)] {
            let s = likeliness_scores(&dist, &dataset(values.clone()), steep).unwrap();
            for (a, b) in s.scores.iter().zip(&naive.scores) {
                prop_assert!((a - b).abs() < 1e-6, "{}: {} vs {}", steep, a, b);
            }
        }
    }

    #[test]
    fn naive_ranks_by_observed_value((net, values) in instance(14)) {
        prop_assume!(values.iter().any(|&v| v > 0.0));
        let got = likeliness_scores(&hop_distances(&net), &dataset(values.clone()), DecaySpec::Naive).unwrap();
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        prop_assert_eq!(got.ranking, order);
    }

    #[test]
    fn swap_equivalent_nodes_tie(
        (net, values) in instance(12),
        spec in spec_strategy(),
        a in any::<prop::sample::Index>(),
        b in any::<prop::sample::Index>(),
    ) {
        let dist = hop_distances(&net);
        let (a, b) = (a.index(net.len()), b.index(net.len()));
        prop_assume!(dist.swap_equivalent(a, b));
        let mut sym = values;
        sym[b] = sym[a];
        let r = likeliness_scores(&dist, &dataset(sym), spec).unwrap();
        prop_assert_eq!(r.scores[a], r.scores[b]);
    }

    #[test]
    fn hit_score_lies_in_unit_range(scores in prop::collection::vec(-1.0..1.0f64, 1..50), src in any::<prop::sample::Index>()) {
        let n = scores.len();
        let r = LikelinessResult::from_scores(scores, false);
        let h = hit_score(&r, src.index(n)).unwrap();
        prop_assert!(h >= 1.0 / n as f64 && h <= 1.0);
    }
}

#[test]
fn leaves_of_a_star_tie() {
    let net = Network::from_edges(6, &[(0, 1), (0, 2), (0, 3), (0, 4), (4, 5)]).unwrap();
    let dist = hop_distances(&net);
    assert!(dist.swap_equivalent(1, 2) && dist.swap_equivalent(2, 3));
    for kind in DecayKind::ALL {
        let spec = DecaySpec::new(kind, (kind != DecayKind::Naive).then_some(0.7)).unwrap();
        let r =
            likeliness_scores(&dist, &dataset(vec![3.0, 1.0, 1.0, 1.0, 0.0, 2.0]), spec).unwrap();
        assert_eq!(r.scores[1], r.scores[2]);
        assert_eq!(r.scores[2], r.scores[3]);
    }
}

#[test]
fn random_scores_hit_half_way() {
    let (n, trials) = (100, 10_000);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let total: f64 = (0..trials)
        .map(|_| {
            let scores: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let src = rng.random_range(0..n);
            hit_score(&LikelinessResult::from_scores(scores, false), src).unwrap()
        })
        .sum();
    let mean = total / trials as f64;
    let expected = (n + 1) as f64 / (2 * n) as f64;
    assert!((mean - expected).abs() <= 0.02, "mean {mean} vs {expected}");
}

#[test]
fn all_zero_data_is_degenerate_with_full_hit_score() {
    let net = Network::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
    let r = likeliness_scores(
        &hop_distances(&net),
        &dataset(vec![0.0; 4]),
        DecaySpec::Polynomial(0.5),
    )
    .unwrap();
    assert!(r.degenerate);
    assert_eq!(hit_score(&r, 2).unwrap(), 1.0);
}
