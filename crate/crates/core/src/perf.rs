//! Analytic delay model.
//!
//! Each loaded physical edge contributes a mean occupancy (dimensionless mean
//! number in system) built from the fractional Brownian mean-queue
//! expression:
//!
//! ```text
//! N(λ, c, H) = (λ/c) · [1 + λ^((2H−1)/(2−2H)) · c^(1/(2−2H)) / (c−λ)^(H/(1−H))]
//! ```
//!
//! and the network mean delay follows from Little's law with the total packet
//! intensity Λ: `T = Σ N_e / Λ`.
//!
//! The bracketed queue term is homogeneous of degree zero, so it is evaluated
//! through the utilization `ρ = λ/c` as `ρ^p / (1−ρ)^(2p−1)` with
//! `p = 1/(2−2H)`. That form does not overflow for large rates or H close
//! to 1.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::traffic::{check_hurst, LoadSet};
use crate::EdgeId;

/// Utilization above which reports carry a near-saturation warning.
pub const NEAR_SATURATION: f64 = 0.98;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum PerfError {
    #[error("capacity violated: rate {rate} >= capacity {capacity}")]
    CapacityViolated { rate: f64, capacity: f64 },
    #[error("capacity violated on edge {edge}: rate {rate} >= capacity {capacity}")]
    EdgeCapacityViolated {
        edge: EdgeId,
        rate: f64,
        capacity: f64,
    },
    #[error("Hurst parameter must lie in [0.5, 1), got {0}")]
    Hurst(f64),
    #[error("rate must be positive, got {0}")]
    Rate(f64),
    #[error("no capacity given for loaded edge {0}")]
    MissingCapacity(EdgeId),
    #[error("network carries no traffic (total packet rate is zero)")]
    NoTraffic,
    #[error("variance coefficient must be positive, got {0}")]
    VarianceCoeff(f64),
    #[error("buffer size must be positive, got {0}")]
    Buffer(f64),
    #[error("loss probability must lie in (0, 1), got {0}")]
    LossProbability(f64),
}

/// Mean occupancy of one edge carrying rate `rate` at capacity `capacity`.
pub fn edge_occupancy(rate: f64, capacity: f64, hurst: f64) -> Result<f64, PerfError> {
    check_edge(rate, capacity, hurst)?;
    Ok(occupancy(rate / capacity, hurst))
}

fn check_edge(rate: f64, capacity: f64, hurst: f64) -> Result<(), PerfError> {
    check_hurst(hurst).map_err(PerfError::Hurst)?;
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(PerfError::Rate(rate));
    }
    if !(rate < capacity) {
        return Err(PerfError::CapacityViolated { rate, capacity });
    }
    Ok(())
}

fn exponent(hurst: f64) -> f64 {
    1.0 / (2.0 - 2.0 * hurst)
}

/// `ρ + ρ^p / (1−ρ)^(2p−1)`, valid for `0 < ρ < 1`.
pub(crate) fn occupancy(rho: f64, hurst: f64) -> f64 {
    let p = exponent(hurst);
    rho + queue_term(rho, p)
}

fn queue_term(rho: f64, p: f64) -> f64 {
    libm::exp(p * libm::log(rho) - (2.0 * p - 1.0) * libm::log1p(-rho))
}

/// `dN/dc` for one edge.
pub(crate) fn occupancy_slope(rate: f64, capacity: f64, hurst: f64) -> f64 {
    let rho = rate / capacity;
    let p = exponent(hurst);
    // dN/dρ = 1 + ρ^(p−1) (1−ρ)^(−2p) (p + (p−1)ρ), dρ/dc = −ρ/c
    let tail = libm::exp((p - 1.0) * libm::log(rho) - 2.0 * p * libm::log1p(-rho));
    let dn_drho = 1.0 + tail * (p + (p - 1.0) * rho);
    -rho / capacity * dn_drho
}

/// `d²N/dc²` for one edge; positive on the stable region.
pub(crate) fn occupancy_curvature(rate: f64, capacity: f64, hurst: f64) -> f64 {
    let rho = rate / capacity;
    let p = exponent(hurst);
    let u = libm::exp((p - 1.0) * libm::log(rho) - 2.0 * p * libm::log1p(-rho));
    let v = p + (p - 1.0) * rho;
    let dn = 1.0 + u * v;
    let d2n = u * (((p - 1.0) / rho + 2.0 * p / (1.0 - rho)) * v + (p - 1.0));
    let k = rho / capacity;
    2.0 * k / capacity * dn + k * k * d2n
}

/// Capacities of physical edges, bits/s.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CapacityAssignment {
    pub capacities: BTreeMap<EdgeId, f64>,
}

impl CapacityAssignment {
    pub fn get(&self, edge: &EdgeId) -> Option<f64> {
        self.capacities.get(edge).copied()
    }
}

impl FromIterator<(EdgeId, f64)> for CapacityAssignment {
    fn from_iter<I: IntoIterator<Item = (EdgeId, f64)>>(iter: I) -> Self {
        Self {
            capacities: iter.into_iter().collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeDelay {
    pub utilization: f64,
    pub occupancy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DelayReport {
    pub per_edge: BTreeMap<EdgeId, EdgeDelay>,
    /// Mean network packet delay, seconds.
    pub mean_delay: f64,
    /// Edges whose utilization exceeds [`NEAR_SATURATION`].
    pub near_saturation: Vec<EdgeId>,
}

struct Point<'a> {
    edge: &'a EdgeId,
    rate: f64,
    capacity: f64,
    hurst: f64,
}

fn feasible_points<'a>(
    loads: &'a LoadSet,
    caps: &CapacityAssignment,
) -> Result<Vec<Point<'a>>, PerfError> {
    if !(loads.total_packet_rate > 0.0) {
        return Err(PerfError::NoTraffic);
    }
    loads
        .loads
        .values()
        .map(|l| {
            let capacity = caps
                .get(&l.edge)
                .ok_or_else(|| PerfError::MissingCapacity(l.edge.clone()))?;
            check_edge(l.flow.rate, capacity, l.flow.hurst).map_err(|e| match e {
                PerfError::CapacityViolated { rate, capacity } => PerfError::EdgeCapacityViolated {
                    edge: l.edge.clone(),
                    rate,
                    capacity,
                },
                other => other,
            })?;
            Ok(Point {
                edge: &l.edge,
                rate: l.flow.rate,
                capacity,
                hurst: l.flow.hurst,
            })
        })
        .collect()
}

/// Mean network packet delay for the given capacities.
pub fn mean_network_delay(
    loads: &LoadSet,
    caps: &CapacityAssignment,
) -> Result<DelayReport, PerfError> {
    let points = feasible_points(loads, caps)?;
    let mut per_edge = BTreeMap::new();
    let mut near_saturation = Vec::new();
    let mut total = 0.0;
    for p in points {
        let utilization = p.rate / p.capacity;
        let occupancy = occupancy(utilization, p.hurst);
        total += occupancy;
        if utilization > NEAR_SATURATION {
            near_saturation.push(p.edge.clone());
        }
        per_edge.insert(
            p.edge.clone(),
            EdgeDelay {
                utilization,
                occupancy,
            },
        );
    }
    Ok(DelayReport {
        per_edge,
        mean_delay: total / loads.total_packet_rate,
        near_saturation,
    })
}

/// Partial derivatives of the mean network delay with respect to each loaded
/// edge's capacity. Every component is negative.
pub fn delay_gradient(
    loads: &LoadSet,
    caps: &CapacityAssignment,
) -> Result<BTreeMap<EdgeId, f64>, PerfError> {
    let points = feasible_points(loads, caps)?;
    let lambda = loads.total_packet_rate;
    Ok(points
        .into_iter()
        .map(|p| {
            (
                p.edge.clone(),
                occupancy_slope(p.rate, p.capacity, p.hurst) / lambda,
            )
        })
        .collect())
}

/// Inputs for sizing a single link against a buffer-overflow target.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SizingInput {
    /// bits/s
    pub rate: f64,
    pub variance_coeff: f64,
    pub hurst: f64,
    /// bits
    pub buffer: f64,
    pub loss_prob: f64,
}

impl SizingInput {
    pub fn check(&self) -> Result<(), PerfError> {
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(PerfError::Rate(self.rate));
        }
        if !(self.variance_coeff > 0.0 && self.variance_coeff.is_finite()) {
            return Err(PerfError::VarianceCoeff(self.variance_coeff));
        }
        check_hurst(self.hurst).map_err(PerfError::Hurst)?;
        if !(self.buffer > 0.0 && self.buffer.is_finite()) {
            return Err(PerfError::Buffer(self.buffer));
        }
        if !(self.loss_prob > 0.0 && self.loss_prob < 1.0) {
            return Err(PerfError::LossProbability(self.loss_prob));
        }
        Ok(())
    }
}

/// Service rate (bits/s) that keeps the probability of the queue exceeding
/// `buffer` bits below `loss_prob`.
pub fn required_service_rate(input: &SizingInput) -> Result<f64, PerfError> {
    input.check()?;
    let SizingInput {
        rate,
        variance_coeff,
        hurst: h,
        buffer,
        loss_prob,
    } = *input;
    let kappa =
        libm::pow(h, h) * libm::pow(1.0 - h, 1.0 - h) * libm::sqrt(-2.0 * libm::log(loss_prob));
    let spare = libm::pow(kappa, 1.0 / h)
        * libm::pow(variance_coeff, 1.0 / (2.0 * h))
        * libm::pow(buffer, -(1.0 - h) / h)
        * libm::pow(rate, 1.0 / (2.0 * h));
    Ok(rate + spare)
}
