//! Machine-readable run reports.
//!
//! Every report is one JSON object with keys in sorted order. Numeric results
//! carry their unit as `{"value": …, "unit": …}`. Reports contain no
//! timestamps, so identical runs produce identical bytes.

use std::collections::BTreeMap;

use mlgsynth_core::{
    CapacityAssignment, CostModel, DelayReport, LoadSet, SynthesisResult, NEAR_SATURATION,
};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::sim::{NetworkSim, QueueStats};

pub const BITS_PER_S: &str = "bits/s";
pub const BITS: &str = "bits";
pub const SECONDS: &str = "s";
pub const PACKETS_PER_S: &str = "packets/s";
pub const COST: &str = "cost units";
pub const VARIANCE_COEFF: &str = "bits·s^(1-2H)";
pub const DIMENSIONLESS: &str = "1";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Quantity {
    pub value: f64,
    pub unit: &'static str,
}

pub fn q(value: f64, unit: &'static str) -> Value {
    serde_json::to_value(Quantity { value, unit }).expect("quantity serializes")
}

pub fn digest(bytes: &[u8]) -> String {
    let hash = Sha256::digest(bytes);
    let hex: String = hash.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub tool: &'static str,
    pub tool_version: &'static str,
    /// Command name and its effective arguments, defaults included.
    pub command: Value,
    pub input_digest: Option<String>,
    pub results: Value,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn new(command: Value, input_digest: Option<String>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            tool_version: env!("CARGO_PKG_VERSION"),
            command,
            input_digest,
            results: Value::Null,
            warnings: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        // Round trip through Value so every object, nested ones included,
        // comes out with sorted keys.
        let value = serde_json::to_value(self).expect("report serializes");
        let mut text = serde_json::to_string_pretty(&value).expect("report serializes");
        text.push('\n');
        text
    }

    pub fn warn_saturation(&mut self, label: &str, report: &DelayReport) {
        for e in &report.near_saturation {
            let rho = report.per_edge[e].utilization;
            self.warnings.push(format!(
                "{label}: edge {e} utilization {rho:.4} exceeds {NEAR_SATURATION}; the delay model is near its singularity"
            ));
        }
    }
}

pub fn loads_json(loads: &LoadSet) -> Value {
    let edges: BTreeMap<String, Value> = loads
        .loads
        .iter()
        .map(|(e, l)| {
            let v = json!({
                "rate": q(l.flow.rate, BITS_PER_S),
                "mean_packet": q(l.flow.mean_packet, BITS),
                "variance_coeff": q(l.flow.variance_coeff, VARIANCE_COEFF),
                "hurst": q(l.flow.hurst, DIMENSIONLESS),
                "contributors": l.contributors.iter().map(|d| d.to_string()).collect::<Vec<_>>(),
            });
            (e.to_string(), v)
        })
        .collect();
    json!({
        "edges": edges,
        "total_packet_rate": q(loads.total_packet_rate, PACKETS_PER_S),
    })
}

pub fn capacities_json(caps: &CapacityAssignment) -> Value {
    let map: BTreeMap<String, Value> = caps
        .capacities
        .iter()
        .map(|(e, c)| (e.to_string(), q(*c, BITS_PER_S)))
        .collect();
    json!(map)
}

pub fn delay_json(report: &DelayReport) -> Value {
    let edges: BTreeMap<String, Value> = report
        .per_edge
        .iter()
        .map(|(e, d)| {
            let v = json!({
                "utilization": q(d.utilization, DIMENSIONLESS),
                "occupancy": q(d.occupancy, DIMENSIONLESS),
            });
            (e.to_string(), v)
        })
        .collect();
    json!({
        "edges": edges,
        "mean_delay": q(report.mean_delay, SECONDS),
        "near_saturation": report.near_saturation.iter().map(|e| e.to_string()).collect::<Vec<_>>(),
    })
}

pub fn synthesis_json(result: &SynthesisResult, budget: f64) -> Value {
    let trace: Vec<Value> = result
        .trace
        .iter()
        .map(|t| {
            json!({
                "objective": q(t.objective, SECONDS),
                "step": q(t.step, DIMENSIONLESS),
                "projected_gradient_norm": q(t.projected_gradient_norm, DIMENSIONLESS),
            })
        })
        .collect();
    json!({
        "capacities": capacities_json(&result.capacities),
        "objective": q(result.objective, SECONDS),
        "cost": q(result.cost, COST),
        "budget": q(budget, COST),
        "converged": result.converged,
        "iterations": result.iterations,
        "trace": trace,
        "unloaded_edges": result.unloaded_edges.iter().map(|e| e.to_string()).collect::<Vec<_>>(),
    })
}

fn queue_json(s: &QueueStats) -> Value {
    json!({
        "mean_queue": q(s.mean_queue, BITS),
        "utilization": q(s.utilization, DIMENSIONLESS),
        "mean_delay": q(s.mean_delay, SECONDS),
        "ci_halfwidth": q(s.ci_halfwidth, SECONDS),
    })
}

pub fn simulation_json(sim: &NetworkSim) -> Value {
    let edges: BTreeMap<String, Value> = sim
        .per_edge
        .iter()
        .map(|(e, s)| (e.to_string(), queue_json(s)))
        .collect();
    json!({
        "edges": edges,
        "mean_delay": q(sim.mean_delay, SECONDS),
        "ci_halfwidth": q(sim.ci_halfwidth, SECONDS),
        "confidence": q(0.95, DIMENSIONLESS),
        "model_notes": [
            "fluid queues fed by fractional Brownian arrivals; negative slot arrivals are not clamped",
            "edges are simulated independently; correlation from shared demands is ignored",
        ],
    })
}

/// Per-edge CSV rows: edge, lambda_bps, capacity_bps, utilization,
/// occupancy, alpha, cost.
pub fn write_csv(
    path: &str,
    loads: &LoadSet,
    caps: &CapacityAssignment,
    delay: &DelayReport,
    cost: &CostModel,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "edge",
        "lambda_bps",
        "capacity_bps",
        "utilization",
        "occupancy",
        "alpha",
        "cost",
    ])?;
    for (e, c) in &caps.capacities {
        let lambda = loads.get(e).map_or(0.0, |l| l.flow.rate);
        let (rho, occ) = delay
            .per_edge
            .get(e)
            .map_or((0.0, 0.0), |d| (d.utilization, d.occupancy));
        let alpha = cost.unit_costs.get(e).copied().unwrap_or(0.0);
        w.write_record([
            e.to_string(),
            lambda.to_string(),
            c.to_string(),
            rho.to_string(),
            occ.to_string(),
            alpha.to_string(),
            (alpha * c).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_are_sorted_and_units_attached() {
        let mut r = RunReport::new(json!({"name": "x", "b": 1, "a": 2}), Some(digest(b"abc")));
        r.results = json!({"zeta": q(1.0, SECONDS), "alpha": q(2.0, BITS)});
        let text = r.to_json();
        assert!(text.find("\"alpha\"").unwrap() < text.find("\"zeta\"").unwrap());
        assert!(text.find("\"command\"").unwrap() < text.find("\"results\"").unwrap());
        assert!(text.contains("\"unit\": \"s\""));
        assert!(text
            .contains("sha256:ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"));
    }
}
