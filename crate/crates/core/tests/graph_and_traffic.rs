use std::collections::{BTreeMap, BTreeSet};

use mlgsynth_core::{
    aggregate, merge_flows, Demand, Edge, EdgeId, FlowSpec, InterLayerEdge, MultilayerGraph, Node,
    NodeKind, Route,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Full mesh of `k` physical sources, one service layer, `demands` random
/// simple-path routes.
fn random_network(seed: u64, k: usize, demands: usize) -> (MultilayerGraph, Vec<Demand>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let name = |i: usize| format!("n{i}");
    let mut g = MultilayerGraph {
        layers: 2,
        services: vec!["svc".into()],
        ..Default::default()
    };
    for i in 0..k {
        g.nodes.push(Node::new(name(i), 1, NodeKind::Source));
        g.nodes.push(Node::new(name(i), 2, NodeKind::Source));
        g.inter_layer.push(InterLayerEdge::new(2, name(i), name(i)));
    }
    for i in 0..k {
        for j in 0..k {
            if i != j {
                g.edges
                    .push(Edge::new(format!("p{i}_{j}"), 1, name(i), name(j)));
            }
        }
    }
    let mut ds = Vec::new();
    for d in 0..demands {
        let mut order: Vec<usize> = (0..k).collect();
        order.shuffle(&mut rng);
        let hops = rng.random_range(1..k);
        let path: Vec<usize> = order[..=hops].to_vec();
        let id = format!("d{d}");
        let (src, dst) = (path[0], path[hops]);
        g.edges
            .push(Edge::new(id.as_str(), 2, name(src), name(dst)));
        g.routes.push(Route::new(
            id.as_str(),
            path.windows(2)
                .map(|w| EdgeId::new(format!("p{}_{}", w[0], w[1]))),
        ));
        let flow = FlowSpec::new(
            rng.random_range(1.0..1000.0),
            rng.random_range(40.0..12000.0),
            rng.random_range(0.0..5.0),
            rng.random_range(0.5..0.95),
        )
        .unwrap();
        ds.push(Demand {
            id: id.as_str().into(),
            service: "svc".into(),
            src: name(src).into(),
            dst: name(dst).into(),
            flow,
            edge: id.as_str().into(),
        });
    }
    (g, ds)
}

#[test]
fn demands_through_matches_route_scan() {
    for seed in 0..20 {
        let (g, _) = random_network(seed, 5, 5);
        assert!(g.validate().is_valid(), "{:?}", g.validate());
        for e in g.edges.iter().filter(|e| e.layer == 1) {
            let brute: BTreeSet<EdgeId> = g
                .routes
                .iter()
                .filter(|r| r.physical_path.contains(&e.id))
                .map(|r| r.upper_edge.clone())
                .collect();
            assert_eq!(g.demands_through(&e.id).unwrap(), brute);
        }
    }
}

#[test]
fn route_index_duality() {
    for seed in 100..110 {
        let (g, _) = random_network(seed, 6, 12);
        let index = g.route_index();
        for upper in g.edges.iter().filter(|e| e.layer == 2) {
            for phys in g.edges.iter().filter(|e| e.layer == 1) {
                let on_route = index.route_of(&upper.id).unwrap().contains(&phys.id);
                let indexed = index.demands_through(&phys.id).unwrap().contains(&upper.id);
                assert_eq!(on_route, indexed);
            }
        }
    }
}

#[test]
fn aggregated_rates_match_brute_force() {
    for seed in 0..30 {
        let (g, ds) = random_network(seed, 6, 50);
        let set = aggregate(&g, &ds).unwrap();
        let mut by_edge: BTreeMap<EdgeId, f64> = BTreeMap::new();
        for d in &ds {
            let route = g.routes.iter().find(|r| r.upper_edge == d.edge).unwrap();
            for e in &route.physical_path {
                *by_edge.entry(e.clone()).or_default() += d.flow.rate;
            }
        }
        assert_eq!(set.loads.len(), by_edge.len());
        for (e, rate) in by_edge {
            let got = set.loads[&e].flow.rate;
            assert!((got - rate).abs() <= 1e-12 * rate, "{e}: {got} vs {rate}");
        }
        let packets: f64 = ds.iter().map(|d| d.flow.rate / d.flow.mean_packet).sum();
        assert!((set.total_packet_rate - packets).abs() <= 1e-12 * packets);
    }
}

#[test]
fn packet_intensity_ignores_routing() {
    let (g, ds) = random_network(7, 5, 20);
    let (g2, _) = random_network(8, 5, 20);
    // Same demands, different graph routes: re-point each demand's endpoints.
    let ds2: Vec<Demand> = ds
        .iter()
        .zip(g2.edges.iter().filter(|e| e.layer == 2))
        .map(|(d, e)| Demand {
            src: e.from.clone(),
            dst: e.to.clone(),
            ..d.clone()
        })
        .collect();
    let a = aggregate(&g, &ds).unwrap().total_packet_rate;
    let b = aggregate(&g2, &ds2).unwrap().total_packet_rate;
    assert_eq!(a, b);
}

fn flow_strategy() -> impl Strategy<Value = FlowSpec> {
    (1e-3..1e9f64, 1.0..1e5f64, 0.0..10.0f64, 0.5..0.999f64)
        .prop_map(|(r, p, a, h)| FlowSpec::new(r, p, a, h).unwrap())
}

proptest! {
    #[test]
    fn merge_is_a_convex_combination(flows in prop::collection::vec(flow_strategy(), 1..20)) {
        let m = merge_flows(&flows).unwrap();
        let lo = |f: fn(&FlowSpec) -> f64| flows.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = |f: fn(&FlowSpec) -> f64| flows.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(m.mean_packet >= lo(|f| f.mean_packet) && m.mean_packet <= hi(|f| f.mean_packet));
        prop_assert!(m.variance_coeff >= lo(|f| f.variance_coeff) && m.variance_coeff <= hi(|f| f.variance_coeff));
        prop_assert_eq!(m.hurst, hi(|f| f.hurst));
        let total: f64 = flows.iter().map(|f| f.rate).sum();
        prop_assert!((m.rate - total).abs() <= 1e-12 * total);
        prop_assert!(m.check().is_ok());
    }

    #[test]
    fn merge_is_permutation_invariant(flows in prop::collection::vec(flow_strategy(), 1..12), seed in any::<u64>()) {
        let mut shuffled = flows.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let a = merge_flows(&flows).unwrap();
        let b = merge_flows(&shuffled).unwrap();
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(y.abs());
        prop_assert!(close(a.rate, b.rate));
        prop_assert!(close(a.mean_packet, b.mean_packet));
        prop_assert!(close(a.variance_coeff, b.variance_coeff));
        prop_assert_eq!(a.hurst, b.hurst);
    }
}
