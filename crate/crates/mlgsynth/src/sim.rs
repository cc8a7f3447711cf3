//! Fractional Gaussian noise synthesis and fluid queue simulation.
//!
//! Arrivals on an edge follow `A(t) = λt + sqrt(aλ)·Z(t)` with `Z` a standard
//! fractional Brownian motion. Time is cut into slots of length `Δ`; slot
//! arrivals are `λΔ + sqrt(aλ)·Δ^H·G_k` with `G_k` unit fGn, and the queue
//! content follows the Lindley recursion. Negative slot arrivals are kept: the
//! recursion absorbs them, and clamping would bias both the mean rate and the
//! second-order statistics.
//!
//! Edges are simulated independently. Correlation between edges that share
//! demands is ignored, matching the additive analytic objective.

use std::collections::BTreeMap;
use std::sync::Arc;

use mlgsynth_core::{CapacityAssignment, EdgeId, FlowSpec, LoadSet};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Batches used for the confidence interval when there is one replication.
const BATCHES: usize = 16;

/// Shortest series accepted by [`estimate_hurst`].
pub const MIN_HURST_SERIES: usize = 1 << 10;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("sample count must be a power of two >= 2, got {0}")]
    Length(usize),
    #[error("Hurst parameter must lie in [0.5, 1), got {0}")]
    Hurst(f64),
    #[error("circulant embedding has a negative eigenvalue {value} at index {index}")]
    Embedding { index: usize, value: f64 },
    #[error("series too short for Hurst estimation: {len} < {min}")]
    TooShort { len: usize, min: usize },
    #[error("series has zero variance; Hurst parameter undefined")]
    Degenerate,
    #[error("invalid simulation config: {0}")]
    Config(&'static str),
    #[error("capacity violated on edge {edge}: rate {rate} >= capacity {capacity}")]
    CapacityViolated {
        edge: String,
        rate: f64,
        capacity: f64,
    },
    #[error("no capacity given for loaded edge {0}")]
    MissingCapacity(EdgeId),
    #[error("network carries no traffic (total packet rate is zero)")]
    NoTraffic,
    #[error("invalid flow: {0}")]
    Flow(#[from] mlgsynth_core::TrafficError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConfig {
    /// Slot length Δ, seconds.
    pub slot: f64,
    /// Slots per replication; a power of two.
    pub slots: usize,
    /// Leading slots discarded from every replication.
    pub warmup: usize,
    pub replications: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn check(&self) -> Result<(), SimError> {
        if !(self.slot > 0.0 && self.slot.is_finite()) {
            return Err(SimError::Config("slot length must be positive"));
        }
        if self.slots < 2 || !self.slots.is_power_of_two() {
            return Err(SimError::Config("slot count must be a power of two >= 2"));
        }
        if self.warmup >= self.slots {
            return Err(SimError::Config("warmup must be shorter than the run"));
        }
        if self.replications == 0 {
            return Err(SimError::Config("at least one replication is required"));
        }
        if self.replications == 1 && self.slots - self.warmup < BATCHES {
            return Err(SimError::Config(
                "a single replication needs at least 16 slots after warmup",
            ));
        }
        Ok(())
    }
}

/// Autocovariance of unit fractional Gaussian noise at lag `k`.
pub fn fgn_autocovariance(k: usize, hurst: f64) -> f64 {
    let k = k as f64;
    let h2 = 2.0 * hurst;
    0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
}

/// Exact fGn sampler by circulant embedding.
///
/// The covariance of `n` samples is embedded in a circulant matrix of size
/// `2n` whose eigenvalues are computed once; each draw then costs one FFT.
pub struct FgnGenerator {
    n: usize,
    hurst: f64,
    sqrt_eig: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex<f64>>,
}

impl FgnGenerator {
    pub fn new(n: usize, hurst: f64) -> Result<Self, SimError> {
        if n < 2 || !n.is_power_of_two() {
            return Err(SimError::Length(n));
        }
        if !(0.5..1.0).contains(&hurst) {
            return Err(SimError::Hurst(hurst));
        }
        let m = 2 * n;
        let mut row: Vec<Complex<f64>> = (0..m)
            .map(|k| {
                let lag = if k <= n { k } else { m - k };
                Complex::new(fgn_autocovariance(lag, hurst), 0.0)
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(m);
        fft.process(&mut row);

        let largest = row.iter().map(|z| z.re).fold(0.0, f64::max);
        let mut sqrt_eig = Vec::with_capacity(m);
        for (index, z) in row.iter().enumerate() {
            // Round-off leaves eigenvalues near zero slightly negative.
            if z.re < -1e-9 * largest {
                return Err(SimError::Embedding { index, value: z.re });
            }
            sqrt_eig.push((z.re.max(0.0) / m as f64).sqrt());
        }
        Ok(Self {
            n,
            hurst,
            sqrt_eig,
            fft,
            buf: vec![Complex::default(); m],
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    /// Replaces the contents of `out` with `n` fresh samples.
    pub fn generate<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut Vec<f64>) {
        for (z, s) in self.buf.iter_mut().zip(&self.sqrt_eig) {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *z = Complex::new(s * re, s * im);
        }
        self.fft.process(&mut self.buf);
        out.clear();
        out.extend(self.buf[..self.n].iter().map(|z| z.re));
    }
}

/// `n` samples of unit-variance fGn, deterministic in `seed`.
pub fn generate_fgn(n: usize, hurst: f64, seed: u64) -> Result<Vec<f64>, SimError> {
    let mut generator = FgnGenerator::new(n, hurst)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    generator.generate(&mut rng, &mut out);
    Ok(out)
}

/// Aggregated-variance Hurst estimate.
///
/// For block sizes `m = 1, 2, 4, …` (at least 32 blocks each) the sample
/// variance of block means scales as `m^(2H−2)`. With few blocks the sample
/// variance is biased low by the factor `K(1 − K^(2H−2))/(K − 1)` for `K`
/// blocks; the regression divides it out and iterates on `H`.
pub fn estimate_hurst(series: &[f64]) -> Result<f64, SimError> {
    let len = series.len();
    if len < MIN_HURST_SERIES {
        return Err(SimError::TooShort {
            len,
            min: MIN_HURST_SERIES,
        });
    }
    let mut points = Vec::new();
    let mut m = 1;
    while len / m >= 32 {
        let blocks = len / m;
        let means: Vec<f64> = series[..blocks * m]
            .chunks_exact(m)
            .map(|c| c.iter().sum::<f64>() / m as f64)
            .collect();
        let var = sample_variance(&means);
        if !(var > 0.0) {
            return Err(SimError::Degenerate);
        }
        points.push(((m as f64).ln(), var.ln(), blocks as f64));
        m *= 2;
    }

    let mut h: f64 = 0.5;
    for _ in 0..50 {
        let e = (2.0 * h - 2.0).min(-0.02);
        let fit: Vec<(f64, f64)> = points
            .iter()
            .map(|&(x, y, k)| (x, y - (k * (1.0 - k.powf(e)) / (k - 1.0)).ln()))
            .collect();
        let next = 1.0 + slope(&fit) / 2.0;
        let done = (next - h).abs() < 1e-9;
        h = next;
        if done {
            break;
        }
    }
    Ok(h)
}

fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// 32-byte stream seed for one (element, replication) pair. Streams depend
/// only on the master seed and the element's own id, so adding an edge leaves
/// every other edge's samples unchanged.
pub fn derive_seed(master: u64, tag: &str, index: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update((tag.len() as u64).to_le_bytes());
    h.update(tag.as_bytes());
    h.update(index.to_le_bytes());
    h.finalize().into()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QueueStats {
    /// Time-average queue content after warmup, bits.
    pub mean_queue: f64,
    /// Offered load over capacity, measured on the simulated arrivals.
    pub utilization: f64,
    /// Mean queue content over the bit rate, seconds.
    pub mean_delay: f64,
    /// 95% confidence halfwidth of `mean_delay`, seconds.
    pub ci_halfwidth: f64,
}

/// Per-replication (or, with one replication, per-batch) averages of one edge.
struct EdgeRuns {
    mean_queue: f64,
    utilization: f64,
    samples: Vec<f64>,
}

fn run_edge(
    flow: &FlowSpec,
    capacity: f64,
    cfg: &SimConfig,
    tag: &str,
) -> Result<EdgeRuns, SimError> {
    flow.check()?;
    if !(flow.rate < capacity) {
        return Err(SimError::CapacityViolated {
            edge: tag.to_string(),
            rate: flow.rate,
            capacity,
        });
    }
    let mut generator = FgnGenerator::new(cfg.slots, flow.hurst)?;
    let drift = (flow.rate - capacity) * cfg.slot;
    let mean_in = flow.rate * cfg.slot;
    let scale = (flow.variance_coeff * flow.rate).sqrt() * cfg.slot.powf(flow.hurst);
    let service = capacity * cfg.slot;
    let kept = cfg.slots - cfg.warmup;
    let batch = kept / BATCHES;

    let mut noise = Vec::with_capacity(cfg.slots);
    let mut queue_total = 0.0;
    let mut arrivals_total = 0.0;
    let mut samples = Vec::new();
    for rep in 0..cfg.replications {
        let mut rng = ChaCha20Rng::from_seed(derive_seed(cfg.seed, tag, rep as u64));
        generator.generate(&mut rng, &mut noise);
        let mut q = 0.0_f64;
        let mut sum = 0.0;
        let mut noise_sum = 0.0;
        let mut batch_sum = 0.0;
        for (k, g) in noise.iter().enumerate() {
            q = (q + drift + scale * g).max(0.0);
            if k >= cfg.warmup {
                sum += q;
                noise_sum += g;
                batch_sum += q;
                let pos = k - cfg.warmup + 1;
                if cfg.replications == 1 && pos % batch == 0 && pos / batch <= BATCHES {
                    samples.push(batch_sum / batch as f64);
                    batch_sum = 0.0;
                }
            }
        }
        let mean = sum / kept as f64;
        if cfg.replications > 1 {
            samples.push(mean);
        }
        queue_total += mean;
        arrivals_total += mean_in + scale * noise_sum / kept as f64;
    }
    let reps = cfg.replications as f64;
    Ok(EdgeRuns {
        mean_queue: queue_total / reps,
        utilization: arrivals_total / reps / service,
        samples,
    })
}

/// 95% Student-t halfwidth of the mean of `samples`.
fn ci_halfwidth(samples: &[f64]) -> f64 {
    let n = samples.len();
    if n < 2 {
        return 0.0;
    }
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    t * (sample_variance(samples) / n as f64).sqrt()
}

fn stats(runs: &EdgeRuns, rate: f64) -> QueueStats {
    let delays: Vec<f64> = runs.samples.iter().map(|q| q / rate).collect();
    QueueStats {
        mean_queue: runs.mean_queue,
        utilization: runs.utilization,
        mean_delay: runs.mean_queue / rate,
        ci_halfwidth: ci_halfwidth(&delays),
    }
}

/// Simulates one edge. The confidence interval is taken across replications,
/// or across 16 batch means when there is a single replication (batch means
/// understate the spread for long-range dependent input).
pub fn simulate_edge_queue(
    flow: &FlowSpec,
    capacity: f64,
    cfg: &SimConfig,
) -> Result<QueueStats, SimError> {
    cfg.check()?;
    let runs = run_edge(flow, capacity, cfg, "edge")?;
    Ok(stats(&runs, flow.rate))
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSim {
    pub per_edge: BTreeMap<EdgeId, QueueStats>,
    /// Mean packet delay, seconds.
    pub mean_delay: f64,
    /// 95% confidence halfwidth of `mean_delay`, seconds.
    pub ci_halfwidth: f64,
}

/// Simulates every loaded edge with its aggregated flow. The network delay
/// converts each edge's queue to packets with the edge's mean packet length
/// and applies Little's law with the network packet intensity.
pub fn simulate_network(
    loads: &LoadSet,
    caps: &CapacityAssignment,
    cfg: &SimConfig,
) -> Result<NetworkSim, SimError> {
    cfg.check()?;
    if !(loads.total_packet_rate > 0.0) || loads.is_empty() {
        return Err(SimError::NoTraffic);
    }
    for (edge, load) in &loads.loads {
        let c = caps
            .get(edge)
            .ok_or_else(|| SimError::MissingCapacity(edge.clone()))?;
        if !(load.flow.rate < c) {
            return Err(SimError::CapacityViolated {
                edge: edge.to_string(),
                rate: load.flow.rate,
                capacity: c,
            });
        }
    }

    let lambda = loads.total_packet_rate;
    let mut per_edge = BTreeMap::new();
    let mut mean_delay = 0.0;
    let mut network_samples: Vec<f64> = Vec::new();
    for (edge, load) in &loads.loads {
        let c = caps.get(edge).expect("checked above");
        let runs = run_edge(&load.flow, c, cfg, edge.as_str())?;
        let packets = |q: f64| q / load.flow.mean_packet / lambda;
        mean_delay += packets(runs.mean_queue);
        if network_samples.is_empty() {
            network_samples = vec![0.0; runs.samples.len()];
        }
        for (acc, q) in network_samples.iter_mut().zip(&runs.samples) {
            *acc += packets(*q);
        }
        per_edge.insert(edge.clone(), stats(&runs, load.flow.rate));
    }
    Ok(NetworkSim {
        per_edge,
        mean_delay,
        ci_halfwidth: ci_halfwidth(&network_samples),
    })
}
