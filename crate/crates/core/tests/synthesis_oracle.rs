use mlgsynth_core::{
    compare_methods_on_loads, mean_network_delay, square_root_assignment, synthesize_loads,
    CostModel, DescentMetric, EdgeId, EdgeLoad, FlowSpec, LoadSet, SynthesisOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Instance {
    rates: Vec<f64>,
    hursts: Vec<f64>,
    alphas: Vec<f64>,
    packet_rate: f64,
    budget: f64,
}

impl Instance {
    fn random(rng: &mut impl Rng, n: usize, rate_range: std::ops::Range<f64>) -> Self {
        let rates: Vec<f64> = (0..n)
            .map(|_| rng.random_range(rate_range.clone()))
            .collect();
        let hursts = (0..n).map(|_| rng.random_range(0.5..0.9)).collect();
        let alphas: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
        let floor: f64 = rates.iter().zip(&alphas).map(|(l, a)| l * a).sum();
        let budget = floor * rng.random_range(1.2..3.0);
        let packet_rate = rates.iter().sum::<f64>() / 500.0;
        Self {
            rates,
            hursts,
            alphas,
            packet_rate,
            budget,
        }
    }

    fn id(i: usize) -> EdgeId {
        EdgeId::new(format!("e{i:02}"))
    }

    fn loads(&self) -> LoadSet {
        LoadSet {
            loads: (0..self.rates.len())
                .map(|i| {
                    let load = EdgeLoad {
                        edge: Self::id(i),
                        flow: FlowSpec::new(self.rates[i], 500.0, 1.0, self.hursts[i]).unwrap(),
                        contributors: Default::default(),
                    };
                    (Self::id(i), load)
                })
                .collect(),
            total_packet_rate: self.packet_rate,
        }
    }

    fn cost(&self) -> CostModel {
        CostModel {
            unit_costs: (0..self.rates.len())
                .map(|i| (Self::id(i), self.alphas[i]))
                .collect(),
            budget: self.budget,
        }
    }

    /// Delay written directly from the occupancy formula with raw powers.
    fn delay(&self, caps: &[f64]) -> f64 {
        let mut sum = 0.0;
        for i in 0..caps.len() {
            let (l, c, h) = (self.rates[i], caps[i], self.hursts[i]);
            if c <= l {
                return f64::INFINITY;
            }
            let q = l.powf((2.0 * h - 1.0) / (2.0 - 2.0 * h)) * c.powf(1.0 / (2.0 - 2.0 * h))
                / (c - l).powf(h / (1.0 - h));
            sum += l / c * (1.0 + q);
        }
        sum / self.packet_rate
    }

    /// Zooming grid search over the budget simplex for 2 or 3 edges.
    fn grid_optimum(&self, margin: f64) -> f64 {
        let n = self.rates.len();
        let floors: Vec<f64> = self.rates.iter().map(|l| l * (1.0 + margin)).collect();
        let last = n - 1;
        let complete = |free: &[f64]| -> Option<Vec<f64>> {
            let spent: f64 = free.iter().zip(&self.alphas).map(|(c, a)| c * a).sum();
            let c_last = (self.budget - spent) / self.alphas[last];
            (c_last >= floors[last]).then(|| {
                let mut v = free.to_vec();
                v.push(c_last);
                v
            })
        };
        let mut lo: Vec<f64> = floors[..last].to_vec();
        let mut hi: Vec<f64> = (0..last)
            .map(|i| {
                let others: f64 = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| floors[j] * self.alphas[j])
                    .sum();
                (self.budget - others) / self.alphas[i]
            })
            .collect();
        let k = 40;
        let mut best = f64::INFINITY;
        let mut best_point = lo.clone();
        for _ in 0..60 {
            let mut idx = vec![0usize; last];
            loop {
                let free: Vec<f64> = (0..last)
                    .map(|d| lo[d] + (hi[d] - lo[d]) * idx[d] as f64 / k as f64)
                    .collect();
                if let Some(c) = complete(&free) {
                    let t = self.delay(&c);
                    if t < best {
                        best = t;
                        best_point = free.clone();
                    }
                }
                let mut d = 0;
                while d < last {
                    idx[d] += 1;
                    if idx[d] <= k {
                        break;
                    }
                    idx[d] = 0;
                    d += 1;
                }
                if d == last {
                    break;
                }
            }
            for d in 0..last {
                let cell = (hi[d] - lo[d]) / k as f64;
                lo[d] = (best_point[d] - 2.0 * cell).max(floors[d]);
                hi[d] = best_point[d] + 2.0 * cell;
            }
        }
        best
    }
}

#[test]
fn two_and_three_edge_instances_match_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let opts = SynthesisOptions::default();
    for case in 0..20 {
        let n = if case % 2 == 0 { 2 } else { 3 };
        let inst = Instance::random(&mut rng, n, 50.0..500.0);
        let r = synthesize_loads(&inst.loads(), &inst.cost(), &opts).unwrap();
        let oracle = inst.grid_optimum(opts.stability_margin);
        let rel = (r.objective - oracle) / oracle;
        assert!(
            rel.abs() <= 1e-6,
            "case {case}: {} vs grid {oracle}",
            r.objective
        );
        assert!(r.converged, "case {case} did not converge");
        assert!((r.cost - inst.budget).abs() <= 1e-9 * inst.budget);
        assert!(r.trace.windows(2).all(|w| w[1].objective <= w[0].objective));
    }
}

#[test]
fn rate_scaled_metric_reaches_the_same_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let opts = SynthesisOptions {
        metric: DescentMetric::RateScaled,
        ..Default::default()
    };
    for case in 0..10 {
        let inst = Instance::random(&mut rng, 2 + case % 2, 50.0..500.0);
        let r = synthesize_loads(&inst.loads(), &inst.cost(), &opts).unwrap();
        let oracle = inst.grid_optimum(opts.stability_margin);
        assert!(
            ((r.objective - oracle) / oracle).abs() <= 1e-6,
            "case {case}"
        );
        assert!(r.trace.windows(2).all(|w| w[1].objective <= w[0].objective));
    }
}

#[test]
fn asymmetric_hurst_matches_grid_and_favours_burstier_edge() {
    let inst = Instance {
        rates: vec![100.0, 100.0],
        hursts: vec![0.5, 0.9],
        alphas: vec![1.0, 1.0],
        packet_rate: 2.0,
        budget: 400.0,
    };
    let opts = SynthesisOptions::default();
    let r = synthesize_loads(&inst.loads(), &inst.cost(), &opts).unwrap();
    let oracle = inst.grid_optimum(opts.stability_margin);
    assert!(((r.objective - oracle) / oracle).abs() <= 1e-6);
    let c = |i| r.capacities.get(&Instance::id(i)).unwrap();
    assert!(c(1) > c(0));
    let cmp = compare_methods_on_loads(&inst.loads(), &inst.cost(), &opts).unwrap();
    assert!(cmp.improvement > 0.0);
}

#[test]
fn invariants_hold_on_larger_wide_range_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let opts = SynthesisOptions::default();
    for case in 0..40 {
        let n = rng.random_range(2..30);
        let inst = Instance::random(&mut rng, n, 1e3..1e9);
        let loads = inst.loads();
        let cost = inst.cost();
        let r = synthesize_loads(&loads, &cost, &opts).unwrap();
        assert!(
            r.converged,
            "case {case}: {} iterations, last {:?}",
            r.iterations,
            r.trace.last()
        );
        assert!(
            (r.cost - inst.budget).abs() <= 1e-9 * inst.budget,
            "case {case}"
        );
        for (i, rate) in inst.rates.iter().enumerate() {
            assert!(
                r.capacities.get(&Instance::id(i)).unwrap() >= rate * (1.0 + opts.stability_margin)
            );
        }
        assert!(r.trace.windows(2).all(|w| w[1].objective <= w[0].objective));
        let report = mean_network_delay(&loads, &r.capacities).unwrap();
        assert_eq!(report.mean_delay, r.objective);
        let sqrt = square_root_assignment(&loads, &cost).unwrap();
        if let Ok(baseline) = mean_network_delay(&loads, &sqrt) {
            assert!(r.objective <= baseline.mean_delay, "case {case}");
        }
    }
}

#[test]
fn brownian_symmetric_instances_agree_with_square_root() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10 {
        let n = rng.random_range(2..8);
        let rate = rng.random_range(10.0..1e6);
        let alpha = rng.random_range(0.1..5.0);
        let inst = Instance {
            rates: vec![rate; n],
            hursts: vec![0.5; n],
            alphas: vec![alpha; n],
            packet_rate: 1.0,
            budget: rate * alpha * n as f64 * rng.random_range(1.1..3.0),
        };
        let cmp =
            compare_methods_on_loads(&inst.loads(), &inst.cost(), &SynthesisOptions::default())
                .unwrap();
        assert!(cmp.improvement.abs() <= 1e-6);
        for (e, c) in &cmp.square_root.capacities {
            let g = cmp.gradient.capacities.get(e).unwrap();
            assert!((g - c).abs() <= 1e-6 * c);
        }
    }
}
