//! Capacity synthesis for multiservice overlay networks.
//!
//! The network is a multilayer graph: layer 1 is the physical topology and
//! every higher layer carries the logical links of one service. Each logical
//! link is realized by a fixed path of physical edges. Demand flows are
//! self-similar (fractional Brownian) and are aggregated onto the physical
//! edges they traverse; link capacities are then chosen to minimize the mean
//! network packet delay under a linear budget.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod mlg;
pub mod perf;
pub mod synthesis;
pub mod traffic;

mod id;

pub use id::{DemandId, EdgeId, NodeId, ServiceId};
pub use mlg::{
    Edge, InterLayerEdge, MlgError, MultilayerGraph, Node, NodeKind, Route, RouteIndex,
    ValidationReport, Violation,
};
pub use perf::{
    delay_gradient, edge_occupancy, mean_network_delay, required_service_rate, CapacityAssignment,
    DelayReport, EdgeDelay, PerfError, SizingInput, NEAR_SATURATION,
};
pub use synthesis::{
    compare_methods, compare_methods_on_loads, initial_point, square_root_assignment, synthesize,
    synthesize_loads, Backtracking, Comparison, CostModel, DescentMetric, SynthesisError,
    SynthesisOptions, SynthesisResult, TraceEntry,
};
pub use traffic::{aggregate, merge_flows, Demand, EdgeLoad, FlowSpec, LoadSet, TrafficError};
