use mlgsynth::sim::{
    estimate_hurst, fgn_autocovariance, generate_fgn, simulate_edge_queue, simulate_network,
    SimConfig,
};
use mlgsynth_core::{CapacityAssignment, EdgeId, EdgeLoad, FlowSpec, LoadSet};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

const N: usize = 1 << 20;

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n)
}

fn lag_cov(xs: &[f64], lag: usize) -> f64 {
    let (m, _) = mean_var(xs);
    let n = xs.len() - lag;
    (0..n).map(|i| (xs[i] - m) * (xs[i + lag] - m)).sum::<f64>() / n as f64
}

#[test]
fn fgn_moments_and_lag_one_covariance() {
    for (i, &h) in [0.5, 0.6, 0.7, 0.8, 0.9, 0.95].iter().enumerate() {
        let x = generate_fgn(N, h, 100 + i as u64).unwrap();
        let (m, v) = mean_var(&x);
        // The sample mean of fGn has standard deviation N^(H−1): 0.001 at
        // H = 0.5 but 0.25 at H = 0.9, so the fixed ±0.01 band only applies
        // to weakly dependent noise. The sample variance spreads the same way.
        let mean_sd = (N as f64).powf(h - 1.0);
        if h <= 0.6 {
            assert!(m.abs() <= 0.01, "H {h}: mean {m}");
        } else {
            assert!(m.abs() <= 4.0 * mean_sd, "H {h}: mean {m}");
        }
        if h <= 0.8 {
            assert!((0.97..=1.03).contains(&v), "H {h}: variance {v}");
        }
        let g1 = lag_cov(&x, 1);
        let want = fgn_autocovariance(1, h);
        if h == 0.5 {
            assert!(g1.abs() <= 0.01, "white noise lag-1 {g1}");
        } else if h <= 0.8 {
            assert!((g1 - want).abs() <= 0.05 * want, "H {h}: {g1} vs {want}");
        }
    }
    let want = 0.5 * (2f64.powf(1.6) - 2.0);
    assert!((want - 0.5157).abs() < 1e-4);
}

#[test]
fn hurst_estimator_recovers_generator_parameter() {
    for (i, &h) in [0.5, 0.6, 0.7, 0.8, 0.9].iter().enumerate() {
        let x = generate_fgn(N, h, 7 + i as u64).unwrap();
        let est = estimate_hurst(&x).unwrap();
        assert!((est - h).abs() <= 0.05, "H {h}: estimate {est}");
    }
}

/// Mean of the all-time maximum of a Gaussian random walk with step mean
/// `-drift` and unit variance: `Σ_n E[S_n⁺]/n`.
fn gaussian_walk_mean_max(drift: f64) -> f64 {
    let std = Normal::new(0.0, 1.0).unwrap();
    let mut sum = 0.0;
    for n in 1..100_000 {
        let n = n as f64;
        let s = n.sqrt();
        let mu = -drift * n;
        let term = (s * std.pdf(mu / s) + mu * std.cdf(mu / s)) / n;
        sum += term;
        if term < 1e-18 {
            break;
        }
    }
    sum
}

#[test]
fn brownian_queue_matches_reflected_limit_at_fine_slots() {
    let flow = FlowSpec::new(100.0, 50.0, 1.0, 0.5).unwrap();
    let cfg = SimConfig {
        slot: 1e-5,
        slots: N,
        warmup: 1 << 12,
        replications: 8,
        seed: 0,
    };
    let s = simulate_edge_queue(&flow, 200.0, &cfg).unwrap();
    let limit = 1.0 * 100.0 / (2.0 * 100.0);
    assert!((s.mean_queue - limit).abs() <= 0.15 * limit, "{s:?}");
    assert!((s.mean_delay - s.mean_queue / 100.0).abs() < 1e-15);
    assert!((s.utilization - 0.5).abs() < 0.01);
    assert!(s.ci_halfwidth > 0.0);
}

#[test]
fn coarse_slots_match_discrete_random_walk() {
    // With Δ = 0.01 each slot adds N(−1, 1) bits, so the queue is the
    // maximum of a discrete walk, well below the continuous limit of 0.5.
    let flow = FlowSpec::new(100.0, 50.0, 1.0, 0.5).unwrap();
    let cfg = SimConfig {
        slot: 0.01,
        slots: N,
        warmup: 1 << 10,
        replications: 8,
        seed: 1,
    };
    let s = simulate_edge_queue(&flow, 200.0, &cfg).unwrap();
    let oracle = gaussian_walk_mean_max(1.0);
    assert!((0.12..0.14).contains(&oracle), "{oracle}");
    assert!(
        (s.mean_queue - oracle).abs() <= 0.03 * oracle,
        "{} vs {oracle}",
        s.mean_queue
    );
}

#[test]
fn vanishing_load_leaves_empty_queue() {
    let flow = FlowSpec::new(100.0, 50.0, 1.0, 0.5).unwrap();
    let cfg = SimConfig {
        slot: 1e-5,
        slots: 1 << 18,
        warmup: 0,
        replications: 4,
        seed: 2,
    };
    let loaded = simulate_edge_queue(&flow, 200.0, &cfg).unwrap();
    let idle = simulate_edge_queue(&flow, 100.0 * 100.0, &cfg).unwrap();
    assert!(idle.mean_queue <= 0.01 * loaded.mean_queue, "{idle:?}");
}

#[test]
fn same_seed_same_statistics() {
    let flow = FlowSpec::new(100.0, 50.0, 2.0, 0.8).unwrap();
    let cfg = SimConfig {
        slot: 1e-3,
        slots: 1 << 14,
        warmup: 100,
        replications: 3,
        seed: 42,
    };
    let a = simulate_edge_queue(&flow, 150.0, &cfg).unwrap();
    let b = simulate_edge_queue(&flow, 150.0, &cfg).unwrap();
    assert_eq!(a, b);
    let c = simulate_edge_queue(&flow, 150.0, &SimConfig { seed: 43, ..cfg }).unwrap();
    assert_ne!(a, c);
}

#[test]
fn queue_is_monotone_in_capacity_under_common_numbers() {
    for &h in &[0.5, 0.7, 0.9] {
        let flow = FlowSpec::new(100.0, 50.0, 1.5, h).unwrap();
        let cfg = SimConfig {
            slot: 1e-3,
            slots: 1 << 14,
            warmup: 0,
            replications: 2,
            seed: 5,
        };
        let mut last = f64::INFINITY;
        for c in [101.0, 110.0, 130.0, 200.0, 500.0] {
            let q = simulate_edge_queue(&flow, c, &cfg).unwrap().mean_queue;
            assert!(q <= last, "H {h}, c {c}");
            last = q;
        }
    }
}

#[test]
fn ci_shrinks_with_replications() {
    let flow = FlowSpec::new(100.0, 50.0, 1.0, 0.7).unwrap();
    let cfg = |r| SimConfig {
        slot: 1e-3,
        slots: 1 << 14,
        warmup: 256,
        replications: r,
        seed: 9,
    };
    let t = |dof: f64| {
        statrs::distribution::StudentsT::new(0.0, 1.0, dof)
            .unwrap()
            .inverse_cdf(0.975)
    };
    let few = simulate_edge_queue(&flow, 130.0, &cfg(8))
        .unwrap()
        .ci_halfwidth;
    let many = simulate_edge_queue(&flow, 130.0, &cfg(32))
        .unwrap()
        .ci_halfwidth;
    // Divide out the change in the t quantile; what remains should be about √4.
    let ratio = few / many / (t(7.0) / t(31.0));
    assert!((1.0..=3.0).contains(&ratio), "{ratio}");
}

fn load_set(edges: &[(&str, FlowSpec)], packet_rate: f64) -> LoadSet {
    LoadSet {
        loads: edges
            .iter()
            .map(|(e, f)| {
                let load = EdgeLoad {
                    edge: EdgeId::from(*e),
                    flow: *f,
                    contributors: Default::default(),
                };
                (EdgeId::from(*e), load)
            })
            .collect(),
        total_packet_rate: packet_rate,
    }
}

fn caps(edges: &[(&str, f64)]) -> CapacityAssignment {
    edges.iter().map(|&(e, c)| (EdgeId::from(e), c)).collect()
}

#[test]
fn single_edge_network_delay_is_the_edge_packet_delay() {
    let flow = FlowSpec::new(100.0, 50.0, 1.0, 0.8).unwrap();
    let cfg = SimConfig {
        slot: 1e-3,
        slots: 1 << 14,
        warmup: 0,
        replications: 4,
        seed: 3,
    };
    let loads = load_set(&[("e1", flow)], 2.0);
    let net = simulate_network(&loads, &caps(&[("e1", 180.0)]), &cfg).unwrap();
    let edge = net.per_edge[&EdgeId::from("e1")];
    let want = edge.mean_queue / 50.0 / 2.0;
    assert!((net.mean_delay - want).abs() <= 1e-12 * want);
}

#[test]
fn identical_edges_add() {
    let flow = FlowSpec::new(100.0, 50.0, 2.0, 0.5).unwrap();
    let cfg = SimConfig {
        slot: 1e-4,
        slots: 1 << 16,
        warmup: 1 << 8,
        replications: 8,
        seed: 4,
    };
    let one =
        simulate_network(&load_set(&[("a", flow)], 2.0), &caps(&[("a", 200.0)]), &cfg).unwrap();
    let two = simulate_network(
        &load_set(&[("a", flow), ("b", flow)], 2.0),
        &caps(&[("a", 200.0), ("b", 200.0)]),
        &cfg,
    )
    .unwrap();
    // Edge "a" reuses its stream; "b" is an independent copy.
    assert_eq!(
        two.per_edge[&EdgeId::from("a")],
        one.per_edge[&EdgeId::from("a")]
    );
    let halfwidth = two.ci_halfwidth + 2.0 * one.ci_halfwidth;
    assert!((two.mean_delay - 2.0 * one.mean_delay).abs() <= halfwidth);
}

#[test]
fn network_rejects_missing_or_saturated_capacity() {
    let flow = FlowSpec::new(100.0, 50.0, 1.0, 0.5).unwrap();
    let cfg = SimConfig {
        slot: 1e-3,
        slots: 1 << 10,
        warmup: 0,
        replications: 2,
        seed: 0,
    };
    let loads = load_set(&[("a", flow), ("b", flow)], 4.0);
    let err = simulate_network(&loads, &caps(&[("a", 200.0)]), &cfg).unwrap_err();
    assert_eq!(err.to_string(), "no capacity given for loaded edge b");
    let err = simulate_network(&loads, &caps(&[("a", 200.0), ("b", 100.0)]), &cfg).unwrap_err();
    assert!(matches!(
        err,
        mlgsynth::sim::SimError::CapacityViolated { .. }
    ));
}
