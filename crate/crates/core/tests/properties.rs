//! Property tests over seeded random instances.

use proptest::prelude::*;
use rand::seq::SliceRandom;

use strategia::graphdist::{graph_loss, hpx_distance, surrogate_bounds, GraphSample, BOUND_SLACK};
use strategia::learners::{draw_sample, erm, rng};
use strategia::losses::{
    effective_hypothesis, expected_loss, is_incentive_compatible, strategic_component_loss, strategic_loss,
};
use strategia::scenarios::{gen_random, random_graph, RandomParams, Scenario};
use strategia::vcdim::{loss_class, vc_dimension};
use strategia::{LabeledSample, LossKind, ManipulationGraph};

fn instance(seed: u64, points: usize, density: f64, class_size: usize) -> Scenario {
    gen_random(
        RandomParams {
            points,
            edge_density: density,
            class_size,
            deterministic_labels: false,
        },
        seed,
    )
    .expect("valid parameters")
}

fn params() -> impl Strategy<Value = (u64, usize, f64, usize)> {
    (any::<u64>(), 2usize..=8, 0.0f64..1.0, 1usize..=10)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn strategic_loss_sits_between_parts((seed, n, dens, k) in params()) {
        let s = instance(seed, n, dens, k);
        for h in &s.class {
            for x in 0..n {
                for y in [false, true] {
                    let st = strategic_loss(h, x, y, &s.graph);
                    let bin = h.label(x) != y;
                    let comp = strategic_component_loss(h, x, &s.graph);
                    prop_assert!(st >= bin && st >= comp && st <= (bin || comp));
                }
            }
            let st = expected_loss(LossKind::Strategic(&s.graph), h, &s.distribution).unwrap();
            let bin = expected_loss(LossKind::Binary, h, &s.distribution).unwrap();
            let comp = expected_loss(LossKind::Component(&s.graph), h, &s.distribution).unwrap();
            prop_assert!(st + 1e-12 >= bin.max(comp));
            prop_assert!(st <= bin + comp + 1e-12);
        }
    }

    #[test]
    fn more_edges_never_lower_component_loss((seed, n, dens, k) in params()) {
        let s = instance(seed, n, dens, k);
        let extra = random_graph(&mut rng(seed ^ 1), n, 0.3);
        let union = ManipulationGraph::from_edges(n, s.graph.edges().chain(extra.edges())).unwrap();
        prop_assert!(s.graph.is_subgraph_of(&union));
        for h in &s.class {
            let a = expected_loss(LossKind::Component(&s.graph), h, &s.distribution).unwrap();
            let b = expected_loss(LossKind::Component(&union), h, &s.distribution).unwrap();
            prop_assert!(a <= b + 1e-12);
        }
    }

    #[test]
    fn incentive_compatible_iff_fixed_by_best_response((seed, n, dens, k) in params()) {
        let s = instance(seed, n, dens, k);
        for h in &s.class {
            let eff = effective_hypothesis(h, &s.graph);
            prop_assert_eq!(is_incentive_compatible(h, &s.graph), eff == *h);
            // The effective hypothesis only adds positives.
            prop_assert!((0..n).all(|x| !h.label(x) || eff.label(x)));
        }
    }

    #[test]
    fn binary_loss_class_vc_at_most_strategic((seed, n, dens, k) in params()) {
        let s = instance(seed, n, dens, k);
        let vb = vc_dimension(&loss_class(&s.class, LossKind::Binary), 5).unwrap();
        let vs = vc_dimension(&loss_class(&s.class, LossKind::Strategic(&s.graph)), 5).unwrap();
        prop_assert!(vb.lower_bound() <= vs.lower_bound());
    }

    #[test]
    fn distance_is_a_pseudometric((seed, n, dens, k) in params()) {
        let s = instance(seed, n, dens, k);
        let px = s.distribution.marginal();
        let mut r = rng(seed ^ 2);
        let g2 = random_graph(&mut r, n, 0.5);
        let g3 = random_graph(&mut r, n, 0.2);
        let d = |a: &ManipulationGraph, b: &ManipulationGraph| hpx_distance(a, b, &s.class, &px).unwrap();
        prop_assert_eq!(d(&s.graph, &s.graph), 0.0);
        prop_assert_eq!(d(&s.graph, &g2), d(&g2, &s.graph));
        prop_assert!(d(&s.graph, &g3) <= d(&s.graph, &g2) + d(&g2, &g3) + 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&d(&g2, &g3)));
    }

    #[test]
    fn graph_loss_is_component_difference((seed, n, dens, k) in params()) {
        let s = instance(seed, n, dens, k);
        let cand = s.alt_graph.clone().unwrap();
        for h in &s.class {
            for x in 0..n {
                let diff = strategic_component_loss(h, x, &s.graph) != strategic_component_loss(h, x, &cand);
                prop_assert_eq!(graph_loss(h, &cand, x, s.graph.neighbors(x)), diff);
            }
        }
    }

    #[test]
    fn surrogate_bounds_hold((seed, n, dens, k) in params()) {
        let s = instance(seed, n, dens, k);
        let cand = s.alt_graph.clone().unwrap();
        for h in &s.class {
            let b = surrogate_bounds(h, &s.graph, &cand, &s.class, &s.distribution).unwrap();
            prop_assert!(b.holds(BOUND_SLACK), "{:?}", b.violations(BOUND_SLACK));
        }
    }

    #[test]
    fn erm_ignores_sample_order((seed, n, dens, k) in params(), m in 1usize..60) {
        let s = instance(seed, n, dens, k);
        let sample = draw_sample(&s.distribution, m, seed);
        let mut items = sample.items().to_vec();
        items.shuffle(&mut rng(seed ^ 3));
        let shuffled = LabeledSample::new(n, items).unwrap();
        for kind in [LossKind::Binary, LossKind::Strategic(&s.graph)] {
            let a = erm(&s.class, &sample, kind).unwrap();
            let b = erm(&s.class, &shuffled, kind).unwrap();
            prop_assert_eq!(a.index, b.index);
            prop_assert_eq!(a.tie_count, b.tie_count);
        }
    }

    #[test]
    fn graph_sample_tsv_round_trip((seed, n, dens, k) in params(), m in 0usize..30) {
        let s = instance(seed, n, dens, k);
        let gs = GraphSample::draw(&s.graph, &s.distribution.marginal(), m, seed);
        let back = GraphSample::parse_tsv(&gs.to_tsv(), n).unwrap();
        prop_assert_eq!(back, gs);
    }
}
