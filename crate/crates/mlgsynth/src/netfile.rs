//! Network specification and capacities files (JSON).
//!
//! A network file lists the physical topology, the services and a flat list
//! of demands, each with its physical route. It expands into a multilayer
//! graph as follows:
//!
//! * physical nodes and edges form layer 1;
//! * service `i` (0-based, in file order) gets layer `i + 2`;
//! * every demand endpoint becomes a source node on its service layer, mapped
//!   down by an inter-layer edge to the physical node of the same id;
//! * every demand becomes one upper-layer edge whose id is the demand id,
//!   routed over the demand's `route`.
//!
//! Unknown members are rejected everywhere.

use std::collections::{BTreeMap, BTreeSet};

use mlgsynth_core::{
    CapacityAssignment, CostModel, Demand, Edge, EdgeId, FlowSpec, InterLayerEdge, MultilayerGraph,
    Node, NodeKind, Route, ServiceId,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKindName {
    Source,
    Transit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    pub id: String,
    pub kind: NodeKindName,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeEntry {
    pub id: String,
    pub from: String,
    pub to: String,
    /// Cost units per bit/s.
    pub unit_cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandEntry {
    pub id: String,
    pub service: String,
    pub src: String,
    pub dst: String,
    pub rate_bps: f64,
    pub mean_packet_bits: f64,
    pub variance_coeff: f64,
    pub hurst: f64,
    pub route: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub nodes: Vec<NodeEntry>,
    pub edges: Vec<EdgeEntry>,
    pub services: Vec<String>,
    pub demands: Vec<DemandEntry>,
    pub budget: f64,
}

/// One problem found in a network file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Issue {
    pub rule: String,
    pub element: String,
    pub message: String,
}

impl Issue {
    fn new(rule: &str, element: &str, message: impl Into<String>) -> Self {
        Self {
            rule: rule.to_string(),
            element: element.to_string(),
            message: message.into(),
        }
    }
}

/// The in-memory model a valid network file describes.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub graph: MultilayerGraph,
    pub demands: Vec<Demand>,
    pub cost: CostModel,
}

fn parse<T: serde::de::DeserializeOwned>(text: &str, path: &str) -> Result<T, FileError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let member = e.path().to_string();
        let message = if member == "." {
            e.inner().to_string()
        } else {
            format!("member {member}: {}", e.inner())
        };
        FileError::Parse {
            path: path.to_string(),
            message,
        }
    })
}

fn read(path: &str) -> Result<String, FileError> {
    std::fs::read_to_string(path).map_err(|source| FileError::Io {
        path: path.to_string(),
        source,
    })
}

impl NetworkFile {
    /// Parses a document; `origin` names it in diagnostics.
    pub fn from_json(text: &str, origin: &str) -> Result<Self, FileError> {
        parse(text, origin)
    }

    pub fn load(path: &str) -> Result<(Self, Vec<u8>), FileError> {
        let text = read(path)?;
        let file = Self::from_json(&text, path)?;
        Ok((file, text.into_bytes()))
    }

    /// Canonical form: members in declaration order, two-space indent.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network file serializes")
    }

    /// Range checks and references the multilayer graph cannot express.
    fn field_issues(&self) -> Vec<Issue> {
        let mut issues = Vec::new();
        if !(self.budget > 0.0 && self.budget.is_finite()) {
            issues.push(Issue::new(
                "budget_range",
                "budget",
                format!("budget must be positive, got {}", self.budget),
            ));
        }
        for e in &self.edges {
            if !(e.unit_cost > 0.0 && e.unit_cost.is_finite()) {
                issues.push(Issue::new(
                    "unit_cost_range",
                    &e.id,
                    format!(
                        "unit cost of edge {} must be positive, got {}",
                        e.id, e.unit_cost
                    ),
                ));
            }
        }
        let mut services = BTreeSet::new();
        for s in &self.services {
            if !services.insert(s.as_str()) {
                issues.push(Issue::new(
                    "duplicate_service",
                    s,
                    format!("service {s} is listed more than once"),
                ));
            }
        }
        let nodes: BTreeSet<&str> = self.nodes.iter().map(|n| n.id.as_str()).collect();
        for d in &self.demands {
            if !services.contains(d.service.as_str()) {
                issues.push(Issue::new(
                    "unknown_service",
                    &d.id,
                    format!("demand {} names unknown service {}", d.id, d.service),
                ));
            }
            for end in [&d.src, &d.dst] {
                if !nodes.contains(end.as_str()) {
                    issues.push(Issue::new(
                        "unknown_node",
                        &d.id,
                        format!("demand {} names unknown node {end}", d.id),
                    ));
                }
            }
            if let Err(e) = FlowSpec::new(d.rate_bps, d.mean_packet_bits, d.variance_coeff, d.hurst)
            {
                issues.push(Issue::new(
                    "flow_range",
                    &d.id,
                    format!("demand {}: {e}", d.id),
                ));
            }
        }
        issues
    }

    fn graph(&self) -> MultilayerGraph {
        let layer_of: BTreeMap<&str, u32> = self
            .services
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i as u32 + 2))
            .collect();
        let mut g = MultilayerGraph {
            layers: self.services.len() as u32 + 1,
            services: self
                .services
                .iter()
                .map(|s| ServiceId::from(s.as_str()))
                .collect(),
            ..Default::default()
        };
        for n in &self.nodes {
            let kind = match n.kind {
                NodeKindName::Source => NodeKind::Source,
                NodeKindName::Transit => NodeKind::Transit,
            };
            g.nodes.push(Node::new(n.id.as_str(), 1, kind));
        }
        for e in &self.edges {
            g.edges
                .push(Edge::new(e.id.as_str(), 1, e.from.as_str(), e.to.as_str()));
        }
        let mut upper_nodes = BTreeSet::new();
        for d in &self.demands {
            let Some(&layer) = layer_of.get(d.service.as_str()) else {
                continue;
            };
            for end in [&d.src, &d.dst] {
                if upper_nodes.insert((layer, end.as_str())) {
                    g.nodes
                        .push(Node::new(end.as_str(), layer, NodeKind::Source));
                    g.inter_layer
                        .push(InterLayerEdge::new(layer, end.as_str(), end.as_str()));
                }
            }
            g.edges.push(Edge::new(
                d.id.as_str(),
                layer,
                d.src.as_str(),
                d.dst.as_str(),
            ));
            g.routes.push(Route::new(
                d.id.as_str(),
                d.route.iter().map(|e| EdgeId::from(e.as_str())),
            ));
        }
        g
    }

    /// Every problem with the file, in a stable order: field checks first,
    /// then graph violations.
    pub fn validate(&self) -> Vec<Issue> {
        let mut issues = self.field_issues();
        for v in self.graph().validate().violations {
            issues.push(Issue::new(v.rule(), &v.element(), v.to_string()));
        }
        issues
    }

    /// Expands into the multilayer model, or returns the issues that prevent
    /// it.
    pub fn to_model(&self) -> Result<Model, Vec<Issue>> {
        let issues = self.validate();
        if !issues.is_empty() {
            return Err(issues);
        }
        let demands = self
            .demands
            .iter()
            .map(|d| Demand {
                id: d.id.as_str().into(),
                service: d.service.as_str().into(),
                src: d.src.as_str().into(),
                dst: d.dst.as_str().into(),
                flow: FlowSpec::new(d.rate_bps, d.mean_packet_bits, d.variance_coeff, d.hurst)
                    .expect("validated"),
                edge: d.id.as_str().into(),
            })
            .collect();
        let cost = CostModel {
            unit_costs: self
                .edges
                .iter()
                .map(|e| (EdgeId::from(e.id.as_str()), e.unit_cost))
                .collect(),
            budget: self.budget,
        };
        Ok(Model {
            graph: self.graph(),
            demands,
            cost,
        })
    }
}

/// `{"capacities": {edge id: bits/s}}`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacitiesFile {
    pub capacities: BTreeMap<String, f64>,
}

impl CapacitiesFile {
    pub fn from_json(text: &str, origin: &str) -> Result<Self, FileError> {
        let file: Self = parse(text, origin)?;
        for (edge, c) in &file.capacities {
            if !(*c > 0.0 && c.is_finite()) {
                return Err(FileError::Parse {
                    path: origin.to_string(),
                    message: format!(
                        "member capacities.{edge}: capacity must be positive, got {c}"
                    ),
                });
            }
        }
        Ok(file)
    }

    pub fn load(path: &str) -> Result<(Self, Vec<u8>), FileError> {
        let text = read(path)?;
        let file = Self::from_json(&text, path)?;
        Ok((file, text.into_bytes()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("capacities serialize")
    }

    pub fn assignment(&self) -> CapacityAssignment {
        self.capacities
            .iter()
            .map(|(e, c)| (EdgeId::from(e.as_str()), *c))
            .collect()
    }
}

impl From<&CapacityAssignment> for CapacitiesFile {
    fn from(caps: &CapacityAssignment) -> Self {
        Self {
            capacities: caps
                .capacities
                .iter()
                .map(|(e, c)| (e.to_string(), *c))
                .collect(),
        }
    }
}
