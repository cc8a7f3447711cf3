//! Self-similar flow descriptors and their aggregation onto physical edges.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::mlg::MultilayerGraph;
use crate::{DemandId, EdgeId, NodeId, ServiceId};

/// Parameters of a self-similar flow under the fractional Brownian arrival
/// model `A(t) = rate * t + sqrt(variance_coeff * rate) * Z(t)`, so that
/// `Var[A(t)] = variance_coeff * rate * t^(2 * hurst)` in bits².
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowSpec {
    /// Mean bit rate, bits/s.
    pub rate: f64,
    /// Mean packet length, bits.
    pub mean_packet: f64,
    pub variance_coeff: f64,
    pub hurst: f64,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum TrafficError {
    #[error("rate must be positive and finite, got {0}")]
    Rate(f64),
    #[error("mean packet length must be positive and finite, got {0}")]
    MeanPacket(f64),
    #[error("variance coefficient must be non-negative and finite, got {0}")]
    VarianceCoeff(f64),
    #[error("Hurst parameter must lie in [0.5, 1), got {0}")]
    Hurst(f64),
    #[error("cannot merge an empty set of flows")]
    NoFlows,
    #[error("graph is invalid ({0} violations)")]
    InvalidGraph(usize),
    #[error("demand {demand} has no routed upper-layer edge {edge}")]
    Unrouted { demand: DemandId, edge: EdgeId },
    #[error("demand {demand}: {source}")]
    BadDemand {
        demand: DemandId,
        source: alloc::boxed::Box<TrafficError>,
    },
}

impl FlowSpec {
    pub fn new(
        rate: f64,
        mean_packet: f64,
        variance_coeff: f64,
        hurst: f64,
    ) -> Result<Self, TrafficError> {
        let f = Self {
            rate,
            mean_packet,
            variance_coeff,
            hurst,
        };
        f.check()?;
        Ok(f)
    }

    pub fn check(&self) -> Result<(), TrafficError> {
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(TrafficError::Rate(self.rate));
        }
        if !(self.mean_packet > 0.0 && self.mean_packet.is_finite()) {
            return Err(TrafficError::MeanPacket(self.mean_packet));
        }
        if !(self.variance_coeff >= 0.0 && self.variance_coeff.is_finite()) {
            return Err(TrafficError::VarianceCoeff(self.variance_coeff));
        }
        check_hurst(self.hurst).map_err(TrafficError::Hurst)
    }

    /// Packets per second.
    pub fn packet_rate(&self) -> f64 {
        self.rate / self.mean_packet
    }
}

pub(crate) fn check_hurst(h: f64) -> Result<(), f64> {
    if (0.5..1.0).contains(&h) {
        Ok(())
    } else {
        Err(h)
    }
}

/// Merges flows sharing an edge.
///
/// Rates add; mean packet length and variance coefficient are rate-weighted
/// means; the Hurst parameter is the maximum. The weighted means are taken
/// over the whole list in one pass: merging pairwise without carrying the
/// intermediate rates gives different answers.
pub fn merge_flows(flows: &[FlowSpec]) -> Result<FlowSpec, TrafficError> {
    if flows.is_empty() {
        return Err(TrafficError::NoFlows);
    }
    let mut rate = 0.0;
    let mut packet_weighted = 0.0;
    let mut variance_weighted = 0.0;
    let mut hurst = f64::NEG_INFINITY;
    for f in flows {
        f.check()?;
        rate += f.rate;
        packet_weighted += f.mean_packet * f.rate;
        variance_weighted += f.variance_coeff * f.rate;
        hurst = hurst.max(f.hurst);
    }
    // Clamp rounding so the weighted means stay inside the contributor range.
    let (lo_p, hi_p) = range(flows.iter().map(|f| f.mean_packet));
    let (lo_a, hi_a) = range(flows.iter().map(|f| f.variance_coeff));
    Ok(FlowSpec {
        rate,
        mean_packet: (packet_weighted / rate).clamp(lo_p, hi_p),
        variance_coeff: (variance_weighted / rate).clamp(lo_a, hi_a),
        hurst,
    })
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

/// One service demand between two physical source nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct Demand {
    pub id: DemandId,
    pub service: ServiceId,
    pub src: NodeId,
    pub dst: NodeId,
    pub flow: FlowSpec,
    /// Upper-layer edge that carries this demand; its route is looked up in
    /// the graph.
    pub edge: EdgeId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeLoad {
    pub edge: EdgeId,
    pub flow: FlowSpec,
    pub contributors: BTreeSet<DemandId>,
}

/// Aggregated traffic on every loaded physical edge.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LoadSet {
    /// Edges that carry no traffic are absent.
    pub loads: BTreeMap<EdgeId, EdgeLoad>,
    /// Network-wide packet intensity, packets/s.
    pub total_packet_rate: f64,
}

impl LoadSet {
    pub fn is_empty(&self) -> bool {
        self.loads.is_empty()
    }

    pub fn get(&self, edge: &EdgeId) -> Option<&EdgeLoad> {
        self.loads.get(edge)
    }
}

/// Aggregates every demand onto the physical edges of its route.
///
/// The network packet intensity sums `rate / mean_packet` over demands, so it
/// does not depend on routing.
pub fn aggregate(graph: &MultilayerGraph, demands: &[Demand]) -> Result<LoadSet, TrafficError> {
    let report = graph.validate();
    if !report.is_valid() {
        return Err(TrafficError::InvalidGraph(report.violations.len()));
    }
    let index = graph.route_index();

    let mut per_edge: BTreeMap<&EdgeId, Vec<&Demand>> = BTreeMap::new();
    let mut total_packet_rate = 0.0;
    for d in demands {
        d.flow.check().map_err(|e| TrafficError::BadDemand {
            demand: d.id.clone(),
            source: alloc::boxed::Box::new(e),
        })?;
        let path = index
            .route_of(&d.edge)
            .map_err(|_| TrafficError::Unrouted {
                demand: d.id.clone(),
                edge: d.edge.clone(),
            })?;
        for e in path {
            per_edge.entry(e).or_default().push(d);
        }
        total_packet_rate += d.flow.packet_rate();
    }

    let mut loads = BTreeMap::new();
    for (edge, ds) in per_edge {
        let flows: Vec<FlowSpec> = ds.iter().map(|d| d.flow).collect();
        let flow = merge_flows(&flows)?;
        let load = EdgeLoad {
            edge: edge.clone(),
            flow,
            contributors: ds.iter().map(|d| d.id.clone()).collect(),
        };
        loads.insert(edge.clone(), load);
    }
    Ok(LoadSet {
        loads,
        total_packet_rate,
    })
}
