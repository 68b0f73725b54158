//! Property tests for the divergence axioms, the simplex updates, and the
//! closed-form inference rule.

use lbrank::{
    exp_weight_update, infer_linear, lb_divergence_cardinality, lb_divergence_general,
    rank_from_scores, ConcaveKind, ConcaveSpec, LinearModel, Ranking, ScoreList,
    SetFunctionOracle,
};

use itertools::Itertools;
use proptest::prelude::*;

fn scores_strategy(max_n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 1..=max_n)
}

/// A random permutation of the same length as the scores.
fn instance_strategy(max_n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<usize>)> {
    scores_strategy(max_n).prop_flat_map(|scores| {
        let n = scores.len();
        (Just(scores), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
    })
}

/// Positive, non-increasing deltas: a valid concave gain table.
fn concave_deltas(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, n).prop_map(|raw| {
        let mut level = 0.0;
        // Build non-increasing positives by accumulating from the back.
        let mut deltas: Vec<f64> = raw
            .iter()
            .rev()
            .map(|&r| {
                level += r;
                level
            })
            .collect();
        deltas.reverse();
        deltas
    })
}

fn gains() -> Vec<ConcaveKind> {
    vec![
        ConcaveKind::Sqrt,
        ConcaveKind::Log1p,
        ConcaveKind::power(0.7).unwrap(),
    ]
}

proptest! {
    #[test]
    fn divergence_is_nonnegative((scores, order) in instance_strategy(64)) {
        let x = ScoreList::new(scores).unwrap();
        let sigma = Ranking::new(order).unwrap();
        for kind in gains() {
            let g = ConcaveSpec::new(kind, x.len()).unwrap();
            let d = lb_divergence_cardinality(&x, &sigma, &g).unwrap();
            prop_assert!(d >= -1e-12, "negative divergence {d}");
        }
    }

    #[test]
    fn divergence_zero_at_own_ranking(scores in scores_strategy(64)) {
        let x = ScoreList::new(scores).unwrap();
        let sigma = rank_from_scores(&x);
        let g = ConcaveSpec::sqrt(x.len()).unwrap();
        prop_assert_eq!(lb_divergence_cardinality(&x, &sigma, &g).unwrap(), 0.0);
    }

    #[test]
    fn divergence_zero_iff_weakly_descending((scores, order) in instance_strategy(8)) {
        let x = ScoreList::new(scores).unwrap();
        let sigma = Ranking::new(order).unwrap();
        let g = ConcaveSpec::sqrt(x.len()).unwrap();
        let d = lb_divergence_cardinality(&x, &sigma, &g).unwrap();
        let weakly_descending = sigma
            .order()
            .windows(2)
            .all(|w| x.scores()[w[0]] >= x.scores()[w[1]]);
        if weakly_descending {
            prop_assert!(d.abs() <= 1e-12, "descending sigma but d = {d}");
        } else {
            prop_assert!(d > 0.0, "non-descending sigma but d = {d}");
        }
    }

    #[test]
    fn modular_gain_collapses_divergence((scores, order) in instance_strategy(32)) {
        let x = ScoreList::new(scores).unwrap();
        let sigma = Ranking::new(order).unwrap();
        let g = ConcaveSpec::new(ConcaveKind::Linear, x.len()).unwrap();
        let d = lb_divergence_cardinality(&x, &sigma, &g).unwrap();
        prop_assert!(d.abs() <= 1e-12);
    }

    #[test]
    fn divergence_invariant_under_score_shift(
        (scores, order) in instance_strategy(32),
        shift in -100.0f64..100.0,
    ) {
        let sigma = Ranking::new(order).unwrap();
        let g = ConcaveSpec::sqrt(scores.len()).unwrap();
        let x = ScoreList::new(scores.clone()).unwrap();
        let shifted = ScoreList::new(scores.iter().map(|v| v + shift).collect()).unwrap();
        let d0 = lb_divergence_cardinality(&x, &sigma, &g).unwrap();
        let d1 = lb_divergence_cardinality(&shifted, &sigma, &g).unwrap();
        prop_assert!((d0 - d1).abs() <= 1e-10 * d0.abs().max(1.0));
    }

    #[test]
    fn divergence_scales_linearly(
        (scores, order) in instance_strategy(32),
        scale in 0.01f64..100.0,
    ) {
        let sigma = Ranking::new(order).unwrap();
        let g = ConcaveSpec::sqrt(scores.len()).unwrap();
        let x = ScoreList::new(scores.clone()).unwrap();
        let scaled = ScoreList::new(scores.iter().map(|v| v * scale).collect()).unwrap();
        let d0 = lb_divergence_cardinality(&x, &sigma, &g).unwrap();
        let d1 = lb_divergence_cardinality(&scaled, &sigma, &g).unwrap();
        prop_assert!((scale * d0 - d1).abs() <= 1e-10 * (scale * d0).abs().max(1e-9));
    }

    #[test]
    fn fast_path_matches_oracle_on_random_concave_tables(
        (scores, order) in instance_strategy(8),
        raw in concave_deltas(8),
    ) {
        let n = scores.len();
        let x = ScoreList::new(scores).unwrap();
        let sigma = Ranking::new(order).unwrap();
        let deltas = raw[..n].to_vec();
        // Truncation keeps positivity and the non-increasing order.
        let g = ConcaveSpec::new(ConcaveKind::Custom { deltas }, n).unwrap();
        let oracle = SetFunctionOracle::from_concave(&g);
        oracle.check_submodular().unwrap();
        oracle.check_monotone().unwrap();
        let fast = lb_divergence_cardinality(&x, &sigma, &g).unwrap();
        let general = lb_divergence_general(&x, &sigma, &oracle).unwrap();
        prop_assert!((fast - general).abs() <= 1e-10, "fast {fast} vs general {general}");
    }

    #[test]
    fn exp_update_keeps_simplex(
        raw in prop::collection::vec(0.01f64..1.0, 1..10),
        grads in prop::collection::vec(-50.0f64..50.0, 10),
        mu in 0.001f64..10.0,
    ) {
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let out = exp_weight_update(&w, &grads[..w.len()], mu).unwrap();
        prop_assert!((out.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(out.iter().all(|&v| v >= 0.0));
        // Strict positivity holds whenever the shifted exponents stay above
        // the f64 underflow threshold (~ -745 nats).
        let spread = grads[..w.len()]
            .iter()
            .fold(f64::NEG_INFINITY, |a, &b| a.max(b))
            - grads[..w.len()].iter().fold(f64::INFINITY, |a, &b| a.min(b));
        if mu * spread < 700.0 {
            prop_assert!(out.iter().all(|&v| v > 0.0), "positivity lost");
        }
    }

    #[test]
    fn closed_form_inference_attains_brute_force_minimum(
        lists_raw in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 4), 1..4),
        raw_w in prop::collection::vec(0.05f64..1.0, 4),
    ) {
        let n = 4;
        let k = lists_raw.len();
        let lists: Vec<ScoreList> = lists_raw
            .into_iter()
            .map(|l| ScoreList::new(l).unwrap())
            .collect();
        let total: f64 = raw_w[..k].iter().sum();
        let weights: Vec<f64> = raw_w[..k].iter().map(|v| v / total).collect();
        let g = ConcaveSpec::sqrt(n).unwrap();
        let model = LinearModel::new(weights.clone(), ConcaveKind::Sqrt).unwrap();
        let (sigma_hat, _) = infer_linear(&model, &lists).unwrap();

        let objective = |sigma: &Ranking| -> f64 {
            lists
                .iter()
                .zip(&weights)
                .map(|(x, w)| w * lb_divergence_cardinality(x, sigma, &g).unwrap())
                .sum()
        };
        let best = (0..n)
            .permutations(n)
            .map(|p| objective(&Ranking::new(p).unwrap()))
            .fold(f64::INFINITY, f64::min);
        let achieved = objective(&sigma_hat);
        prop_assert!(achieved <= best + 1e-10, "{achieved} vs {best}");
    }
}

#[test]
fn h_vector_entries_are_diminishing_along_the_chain() {
    // For concave gains the marginal gain at each chain step must not grow.
    let g = ConcaveSpec::new(ConcaveKind::Log1p, 6).unwrap();
    let oracle = SetFunctionOracle::from_concave(&g);
    let sigma = Ranking::new(vec![3, 0, 5, 1, 4, 2]).unwrap();
    let h = lbrank::h_vector(&sigma, &oracle).unwrap();
    let along_chain: Vec<f64> = sigma.order().iter().map(|&c| h.scores()[c]).collect();
    for w in along_chain.windows(2) {
        assert!(w[0] >= w[1] - 1e-12);
    }
}
