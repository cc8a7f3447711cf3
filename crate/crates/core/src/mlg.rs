//! Multilayer graph model.
//!
//! Layer 1 is the physical network. Layer `l > 1` hosts the logical topology
//! of service `l - 1`; its nodes are tied to physical source nodes through
//! inter-layer edges and each of its edges is realized by exactly one path of
//! physical edges (its [`Route`]).

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;

use crate::{EdgeId, NodeId, ServiceId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    /// Terminal node that originates or consumes traffic.
    Source,
    /// Physical switching node that only forwards traffic.
    Transit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub layer: u32,
    pub kind: NodeKind,
}

impl Node {
    pub fn new(id: impl Into<NodeId>, layer: u32, kind: NodeKind) -> Self {
        Self {
            id: id.into(),
            layer,
            kind,
        }
    }
}

/// Directed edge between two nodes of the same layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub id: EdgeId,
    pub layer: u32,
    pub from: NodeId,
    pub to: NodeId,
}

impl Edge {
    pub fn new(
        id: impl Into<EdgeId>,
        layer: u32,
        from: impl Into<NodeId>,
        to: impl Into<NodeId>,
    ) -> Self {
        Self {
            id: id.into(),
            layer,
            from: from.into(),
            to: to.into(),
        }
    }
}

/// Ties a node of an upper layer to the physical source node it runs on.
#[derive(Clone, Debug, PartialEq)]
pub struct InterLayerEdge {
    pub upper_layer: u32,
    pub upper_node: NodeId,
    pub lower_node: NodeId,
}

impl InterLayerEdge {
    pub fn new(upper_layer: u32, upper: impl Into<NodeId>, lower: impl Into<NodeId>) -> Self {
        Self {
            upper_layer,
            upper_node: upper.into(),
            lower_node: lower.into(),
        }
    }
}

/// Physical realization of one upper-layer edge.
#[derive(Clone, Debug, PartialEq)]
pub struct Route {
    pub upper_edge: EdgeId,
    pub physical_path: Vec<EdgeId>,
}

impl Route {
    pub fn new(upper_edge: impl Into<EdgeId>, path: impl IntoIterator<Item = EdgeId>) -> Self {
        Self {
            upper_edge: upper_edge.into(),
            physical_path: path.into_iter().collect(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MultilayerGraph {
    pub layers: u32,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub inter_layer: Vec<InterLayerEdge>,
    pub routes: Vec<Route>,
    /// Service hosted on layer `i + 2` for entry `i`.
    pub services: Vec<ServiceId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathEnd {
    Start,
    End,
}

impl fmt::Display for PathEnd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PathEnd::Start => "start",
            PathEnd::End => "end",
        })
    }
}

/// One failed structural rule, carrying the offending element.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    TooFewLayers { layers: u32 },
    ServiceLayerMismatch { layers: u32, services: usize },
    EmptyLayer { layer: u32 },
    NodeLayerOutOfRange { node: NodeId, layer: u32 },
    DuplicateNode { node: NodeId, layer: u32 },
    UpperNodeNotSource { node: NodeId, layer: u32 },
    EdgeLayerOutOfRange { edge: EdgeId, layer: u32 },
    DuplicateEdge { edge: EdgeId },
    SelfLoop { edge: EdgeId },
    DanglingEndpoint { edge: EdgeId, node: NodeId },
    InterLayerBadUpper { node: NodeId, layer: u32 },
    InterLayerDanglingLower { upper: NodeId, lower: NodeId },
    InterLayerLowerNotSource { upper: NodeId, lower: NodeId },
    AmbiguousInterLayer { node: NodeId, layer: u32 },
    RouteUnknownUpperEdge { edge: EdgeId },
    RouteOnPhysicalEdge { edge: EdgeId },
    DuplicateRoute { edge: EdgeId },
    EmptyRoute { edge: EdgeId },
    RouteUnknownEdge { route: EdgeId, edge: EdgeId },
    RouteEdgeNotPhysical { route: EdgeId, edge: EdgeId },
    RouteBrokenChain { route: EdgeId, position: usize },
    MissingInterLayerImage { route: EdgeId, node: NodeId },
    RouteEndpointMismatch { route: EdgeId, end: PathEnd },
    MissingRoute { edge: EdgeId },
}

impl Violation {
    /// Stable machine-readable rule name.
    pub fn rule(&self) -> &'static str {
        use Violation::*;
        match self {
            TooFewLayers { .. } => "too_few_layers",
            ServiceLayerMismatch { .. } => "service_layer_mismatch",
            EmptyLayer { .. } => "empty_layer",
            NodeLayerOutOfRange { .. } => "node_layer_out_of_range",
            DuplicateNode { .. } => "duplicate_node",
            UpperNodeNotSource { .. } => "upper_node_not_source",
            EdgeLayerOutOfRange { .. } => "edge_layer_out_of_range",
            DuplicateEdge { .. } => "duplicate_edge",
            SelfLoop { .. } => "self_loop",
            DanglingEndpoint { .. } => "dangling_endpoint",
            InterLayerBadUpper { .. } => "inter_layer_bad_upper",
            InterLayerDanglingLower { .. } => "inter_layer_dangling_lower",
            InterLayerLowerNotSource { .. } => "inter_layer_lower_not_source",
            AmbiguousInterLayer { .. } => "ambiguous_inter_layer",
            RouteUnknownUpperEdge { .. } => "route_unknown_upper_edge",
            RouteOnPhysicalEdge { .. } => "route_on_physical_edge",
            DuplicateRoute { .. } => "duplicate_route",
            EmptyRoute { .. } => "empty_route",
            RouteUnknownEdge { .. } => "route_unknown_edge",
            RouteEdgeNotPhysical { .. } => "route_edge_not_physical",
            RouteBrokenChain { .. } => "route_broken_chain",
            MissingInterLayerImage { .. } => "missing_inter_layer_image",
            RouteEndpointMismatch { .. } => "route_endpoint_mismatch",
            MissingRoute { .. } => "missing_route",
        }
    }

    /// Id of the element the violation is about.
    pub fn element(&self) -> alloc::string::String {
        use alloc::string::ToString;
        use Violation::*;
        match self {
            TooFewLayers { .. } | ServiceLayerMismatch { .. } => "graph".to_string(),
            EmptyLayer { layer } => alloc::format!("layer {layer}"),
            NodeLayerOutOfRange { node, .. }
            | DuplicateNode { node, .. }
            | UpperNodeNotSource { node, .. }
            | InterLayerBadUpper { node, .. }
            | AmbiguousInterLayer { node, .. } => node.to_string(),
            InterLayerDanglingLower { upper, .. } | InterLayerLowerNotSource { upper, .. } => {
                upper.to_string()
            }
            EdgeLayerOutOfRange { edge, .. }
            | DuplicateEdge { edge }
            | SelfLoop { edge }
            | DanglingEndpoint { edge, .. }
            | RouteUnknownUpperEdge { edge }
            | RouteOnPhysicalEdge { edge }
            | DuplicateRoute { edge }
            | EmptyRoute { edge }
            | MissingRoute { edge } => edge.to_string(),
            RouteUnknownEdge { route, .. }
            | RouteEdgeNotPhysical { route, .. }
            | RouteBrokenChain { route, .. }
            | MissingInterLayerImage { route, .. }
            | RouteEndpointMismatch { route, .. } => route.to_string(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            TooFewLayers { layers } => write!(f, "graph has {layers} layers, at least 2 required"),
            ServiceLayerMismatch { layers, services } => write!(
                f,
                "graph has {layers} layers but {services} services (expected layers = services + 1)"
            ),
            EmptyLayer { layer } => write!(f, "layer {layer} has no nodes"),
            NodeLayerOutOfRange { node, layer } => {
                write!(f, "node {node} sits on nonexistent layer {layer}")
            }
            DuplicateNode { node, layer } => write!(f, "node {node} repeated on layer {layer}"),
            UpperNodeNotSource { node, layer } => {
                write!(f, "node {node} on layer {layer} must be a source")
            }
            EdgeLayerOutOfRange { edge, layer } => {
                write!(f, "edge {edge} sits on nonexistent layer {layer}")
            }
            DuplicateEdge { edge } => write!(f, "edge id {edge} is used more than once"),
            SelfLoop { edge } => write!(f, "edge {edge} starts and ends at the same node"),
            DanglingEndpoint { edge, node } => {
                write!(f, "edge {edge} references unknown node {node} on its layer")
            }
            InterLayerBadUpper { node, layer } => write!(
                f,
                "inter-layer edge starts at {node} on layer {layer}, which is not an upper-layer node"
            ),
            InterLayerDanglingLower { upper, lower } => write!(
                f,
                "inter-layer edge from {upper} references unknown physical node {lower}"
            ),
            InterLayerLowerNotSource { upper, lower } => write!(
                f,
                "inter-layer edge from {upper} lands on transit node {lower}"
            ),
            AmbiguousInterLayer { node, layer } => write!(
                f,
                "node {node} on layer {layer} maps to more than one physical node (unsupported)"
            ),
            RouteUnknownUpperEdge { edge } => write!(f, "route given for unknown edge {edge}"),
            RouteOnPhysicalEdge { edge } => {
                write!(f, "route given for physical edge {edge}")
            }
            DuplicateRoute { edge } => write!(f, "edge {edge} has more than one route"),
            EmptyRoute { edge } => write!(f, "route of edge {edge} is empty"),
            RouteUnknownEdge { route, edge } => {
                write!(f, "route of {route} uses unknown edge {edge}")
            }
            RouteEdgeNotPhysical { route, edge } => {
                write!(f, "route of {route} uses non-physical edge {edge}")
            }
            RouteBrokenChain { route, position } => write!(
                f,
                "route of {route} is not a chain: edge {position} does not start where edge {} ends",
                position - 1
            ),
            MissingInterLayerImage { route, node } => write!(
                f,
                "route of {route}: endpoint {node} has no inter-layer edge"
            ),
            RouteEndpointMismatch { route, end } => write!(
                f,
                "route of {route}: path {end} does not match the physical image of the edge's {end} node"
            ),
            MissingRoute { edge } => write!(f, "upper-layer edge {edge} has no route"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum MlgError {
    #[error("unknown edge {0}")]
    UnknownEdge(EdgeId),
    #[error("no route for physical edge {0}")]
    PhysicalEdge(EdgeId),
    #[error("edge {0} is not a physical edge")]
    NotPhysical(EdgeId),
    #[error("upper-layer edge {0} has no route")]
    MissingRoute(EdgeId),
}

impl MultilayerGraph {
    /// Checks every structural rule and returns one violation per failure.
    pub fn validate(&self) -> ValidationReport {
        let mut out = Vec::new();
        let layers = self.layers;

        if layers < 2 {
            out.push(Violation::TooFewLayers { layers });
        }
        if self.services.len() + 1 != layers as usize {
            out.push(Violation::ServiceLayerMismatch {
                layers,
                services: self.services.len(),
            });
        }

        let mut nodes: BTreeMap<(u32, &NodeId), NodeKind> = BTreeMap::new();
        for n in &self.nodes {
            if n.layer == 0 || n.layer > layers {
                out.push(Violation::NodeLayerOutOfRange {
                    node: n.id.clone(),
                    layer: n.layer,
                });
                continue;
            }
            if nodes.insert((n.layer, &n.id), n.kind).is_some() {
                out.push(Violation::DuplicateNode {
                    node: n.id.clone(),
                    layer: n.layer,
                });
            }
            if n.layer > 1 && n.kind != NodeKind::Source {
                out.push(Violation::UpperNodeNotSource {
                    node: n.id.clone(),
                    layer: n.layer,
                });
            }
        }
        for layer in 1..=layers {
            if !nodes.keys().any(|(l, _)| *l == layer) {
                out.push(Violation::EmptyLayer { layer });
            }
        }

        let mut edges: BTreeMap<&EdgeId, &Edge> = BTreeMap::new();
        for e in &self.edges {
            if edges.insert(&e.id, e).is_some() {
                out.push(Violation::DuplicateEdge { edge: e.id.clone() });
                continue;
            }
            if e.layer == 0 || e.layer > layers {
                out.push(Violation::EdgeLayerOutOfRange {
                    edge: e.id.clone(),
                    layer: e.layer,
                });
                continue;
            }
            if e.from == e.to {
                out.push(Violation::SelfLoop { edge: e.id.clone() });
            }
            for end in [&e.from, &e.to] {
                if !nodes.contains_key(&(e.layer, end)) {
                    out.push(Violation::DanglingEndpoint {
                        edge: e.id.clone(),
                        node: end.clone(),
                    });
                }
            }
        }

        // upper (layer, node) -> physical node
        let mut image: BTreeMap<(u32, &NodeId), &NodeId> = BTreeMap::new();
        let mut ambiguous: BTreeSet<(u32, &NodeId)> = BTreeSet::new();
        for il in &self.inter_layer {
            let upper_ok =
                il.upper_layer > 1 && nodes.contains_key(&(il.upper_layer, &il.upper_node));
            if !upper_ok {
                out.push(Violation::InterLayerBadUpper {
                    node: il.upper_node.clone(),
                    layer: il.upper_layer,
                });
            }
            match nodes.get(&(1, &il.lower_node)) {
                None => out.push(Violation::InterLayerDanglingLower {
                    upper: il.upper_node.clone(),
                    lower: il.lower_node.clone(),
                }),
                Some(NodeKind::Transit) => out.push(Violation::InterLayerLowerNotSource {
                    upper: il.upper_node.clone(),
                    lower: il.lower_node.clone(),
                }),
                Some(NodeKind::Source) => {}
            }
            if upper_ok {
                let key = (il.upper_layer, &il.upper_node);
                if image.insert(key, &il.lower_node).is_some() && ambiguous.insert(key) {
                    out.push(Violation::AmbiguousInterLayer {
                        node: il.upper_node.clone(),
                        layer: il.upper_layer,
                    });
                }
            }
        }

        let mut routed: BTreeSet<&EdgeId> = BTreeSet::new();
        for r in &self.routes {
            let route = &r.upper_edge;
            let upper = match edges.get(route) {
                None => {
                    out.push(Violation::RouteUnknownUpperEdge {
                        edge: route.clone(),
                    });
                    continue;
                }
                Some(e) if e.layer <= 1 => {
                    out.push(Violation::RouteOnPhysicalEdge {
                        edge: route.clone(),
                    });
                    continue;
                }
                Some(e) => *e,
            };
            if !routed.insert(route) {
                out.push(Violation::DuplicateRoute {
                    edge: route.clone(),
                });
                continue;
            }
            if r.physical_path.is_empty() {
                out.push(Violation::EmptyRoute {
                    edge: route.clone(),
                });
                continue;
            }

            let mut path = Vec::with_capacity(r.physical_path.len());
            for id in &r.physical_path {
                match edges.get(id) {
                    None => out.push(Violation::RouteUnknownEdge {
                        route: route.clone(),
                        edge: id.clone(),
                    }),
                    Some(e) if e.layer != 1 => out.push(Violation::RouteEdgeNotPhysical {
                        route: route.clone(),
                        edge: id.clone(),
                    }),
                    Some(e) => path.push(*e),
                }
            }
            if path.len() != r.physical_path.len() {
                continue;
            }
            for (position, pair) in path.windows(2).enumerate() {
                if pair[0].to != pair[1].from {
                    out.push(Violation::RouteBrokenChain {
                        route: route.clone(),
                        position: position + 1,
                    });
                }
            }

            let ends = [
                (PathEnd::Start, &upper.from, &path[0].from),
                (PathEnd::End, &upper.to, &path[path.len() - 1].to),
            ];
            for (end, upper_node, physical) in ends {
                match image.get(&(upper.layer, upper_node)) {
                    None => out.push(Violation::MissingInterLayerImage {
                        route: route.clone(),
                        node: upper_node.clone(),
                    }),
                    Some(img) if *img != physical => out.push(Violation::RouteEndpointMismatch {
                        route: route.clone(),
                        end,
                    }),
                    Some(_) => {}
                }
            }
        }

        for e in &self.edges {
            if e.layer > 1 && e.layer <= layers && !routed.contains(&e.id) {
                out.push(Violation::MissingRoute { edge: e.id.clone() });
            }
        }

        ValidationReport { violations: out }
    }

    pub fn edge(&self, id: &EdgeId) -> Option<&Edge> {
        self.edges.iter().find(|e| &e.id == id)
    }

    /// Physical path of an upper-layer edge.
    pub fn route_of(&self, upper_edge: &EdgeId) -> Result<&[EdgeId], MlgError> {
        let edge = self
            .edge(upper_edge)
            .ok_or_else(|| MlgError::UnknownEdge(upper_edge.clone()))?;
        if edge.layer <= 1 {
            return Err(MlgError::PhysicalEdge(upper_edge.clone()));
        }
        self.routes
            .iter()
            .find(|r| &r.upper_edge == upper_edge)
            .map(|r| r.physical_path.as_slice())
            .ok_or_else(|| MlgError::MissingRoute(upper_edge.clone()))
    }

    /// Upper-layer edges whose route crosses `physical_edge`.
    pub fn demands_through(&self, physical_edge: &EdgeId) -> Result<BTreeSet<EdgeId>, MlgError> {
        RouteIndex::new(self)
            .demands_through(physical_edge)
            .cloned()
    }

    pub fn route_index(&self) -> RouteIndex<'_> {
        RouteIndex::new(self)
    }
}

/// Forward and inverse route lookup over a graph.
#[derive(Clone, Debug)]
pub struct RouteIndex<'g> {
    layer_of: BTreeMap<&'g EdgeId, u32>,
    routes: BTreeMap<&'g EdgeId, &'g [EdgeId]>,
    through: BTreeMap<&'g EdgeId, BTreeSet<EdgeId>>,
}

impl<'g> RouteIndex<'g> {
    pub fn new(graph: &'g MultilayerGraph) -> Self {
        let layer_of: BTreeMap<_, _> = graph.edges.iter().map(|e| (&e.id, e.layer)).collect();
        let mut routes = BTreeMap::new();
        let mut through: BTreeMap<&EdgeId, BTreeSet<EdgeId>> = graph
            .edges
            .iter()
            .filter(|e| e.layer == 1)
            .map(|e| (&e.id, BTreeSet::new()))
            .collect();
        for r in &graph.routes {
            routes
                .entry(&r.upper_edge)
                .or_insert(r.physical_path.as_slice());
            for e in &r.physical_path {
                if let Some(set) = through.get_mut(e) {
                    set.insert(r.upper_edge.clone());
                }
            }
        }
        Self {
            layer_of,
            routes,
            through,
        }
    }

    pub fn route_of(&self, upper_edge: &EdgeId) -> Result<&'g [EdgeId], MlgError> {
        match self.layer_of.get(upper_edge) {
            None => Err(MlgError::UnknownEdge(upper_edge.clone())),
            Some(1) => Err(MlgError::PhysicalEdge(upper_edge.clone())),
            Some(_) => self
                .routes
                .get(upper_edge)
                .copied()
                .ok_or_else(|| MlgError::MissingRoute(upper_edge.clone())),
        }
    }

    pub fn demands_through(&self, physical_edge: &EdgeId) -> Result<&BTreeSet<EdgeId>, MlgError> {
        match self.layer_of.get(physical_edge) {
            None => Err(MlgError::UnknownEdge(physical_edge.clone())),
            Some(1) => Ok(&self.through[physical_edge]),
            Some(_) => Err(MlgError::NotPhysical(physical_edge.clone())),
        }
    }
}
