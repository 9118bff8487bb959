//! Pedestrian path network graph.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::geo::{GeoError, LineStringM, LocalProjection, PointM};

/// Tolerance for edge geometry endpoints vs. node positions.
pub const ENDPOINT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PedNodeId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PedEdgeId(pub u64);

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CornerId(pub String);

impl std::fmt::Display for CornerId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    SidewalkPt,
    Curb,
    CrossingPt,
    /// Parsed from data that carried no recognizable kind tag.
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Sidewalk,
    Link,
    Crossing,
    Unknown,
}

impl EdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::Sidewalk => "sidewalk",
            EdgeKind::Link => "link",
            EdgeKind::Crossing => "crossing",
            EdgeKind::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PedNode {
    pub pos: PointM,
    pub kind: NodeKind,
    pub corner: Option<CornerId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PedEdge {
    pub from: PedNodeId,
    pub to: PedNodeId,
    pub geometry: LineStringM,
    pub kind: EdgeKind,
    pub confidence: Option<f64>,
}

impl PedEdge {
    pub fn other(&self, n: PedNodeId) -> PedNodeId {
        if self.from == n {
            self.to
        } else {
            self.from
        }
    }

    pub fn length(&self) -> f64 {
        self.geometry.length()
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GraphError {
    #[error("unknown node {0:?}")]
    UnknownNode(PedNodeId),
    #[error("unknown edge {0:?}")]
    UnknownEdge(PedEdgeId),
    #[error("edge geometry endpoint is {distance} m from its node")]
    EndpointMismatch { distance: f64 },
    #[error("node {0:?} is not a pass-through node")]
    NotPassThrough(PedNodeId),
    #[error(transparent)]
    Geo(#[from] GeoError),
}

#[derive(Debug, Clone)]
pub struct PedGraph {
    pub projection: LocalProjection,
    nodes: BTreeMap<PedNodeId, PedNode>,
    edges: BTreeMap<PedEdgeId, PedEdge>,
    adj: BTreeMap<PedNodeId, BTreeSet<PedEdgeId>>,
    next_node: u64,
    next_edge: u64,
}

impl PartialEq for PedGraph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.edges == other.edges
    }
}

impl PedGraph {
    pub fn new(projection: LocalProjection) -> Self {
        Self {
            projection,
            nodes: BTreeMap::new(),
            edges: BTreeMap::new(),
            adj: BTreeMap::new(),
            next_node: 0,
            next_edge: 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty() && self.edges.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (PedNodeId, &PedNode)> + '_ {
        self.nodes.iter().map(|(&k, v)| (k, v))
    }

    pub fn edges(&self) -> impl Iterator<Item = (PedEdgeId, &PedEdge)> + '_ {
        self.edges.iter().map(|(&k, v)| (k, v))
    }

    pub fn node(&self, id: PedNodeId) -> Option<&PedNode> {
        self.nodes.get(&id)
    }

    pub fn node_mut(&mut self, id: PedNodeId) -> Option<&mut PedNode> {
        self.nodes.get_mut(&id)
    }

    pub fn edge(&self, id: PedEdgeId) -> Option<&PedEdge> {
        self.edges.get(&id)
    }

    pub fn edge_mut(&mut self, id: PedEdgeId) -> Option<&mut PedEdge> {
        self.edges.get_mut(&id)
    }

    pub fn add_node(&mut self, pos: PointM, kind: NodeKind) -> PedNodeId {
        let id = PedNodeId(self.next_node);
        self.next_node += 1;
        self.nodes.insert(
            id,
            PedNode {
                pos,
                kind,
                corner: None,
            },
        );
        self.adj.insert(id, BTreeSet::new());
        id
    }

    /// Adds an edge. The geometry's endpoints must sit on the node positions
    /// (within [`ENDPOINT_TOL`]); they are then snapped exactly.
    pub fn add_edge(
        &mut self,
        from: PedNodeId,
        to: PedNodeId,
        geometry: LineStringM,
        kind: EdgeKind,
    ) -> Result<PedEdgeId, GraphError> {
        let a = self
            .nodes
            .get(&from)
            .ok_or(GraphError::UnknownNode(from))?
            .pos;
        let b = self.nodes.get(&to).ok_or(GraphError::UnknownNode(to))?.pos;
        let distance = geometry.first().dist(a).max(geometry.last().dist(b));
        if distance > ENDPOINT_TOL {
            return Err(GraphError::EndpointMismatch { distance });
        }
        let geometry = geometry.with_endpoints(a, b)?;
        let id = PedEdgeId(self.next_edge);
        self.next_edge += 1;
        self.edges.insert(
            id,
            PedEdge {
                from,
                to,
                geometry,
                kind,
                confidence: None,
            },
        );
        self.adj.entry(from).or_default().insert(id);
        self.adj.entry(to).or_default().insert(id);
        Ok(id)
    }

    pub fn remove_edge(&mut self, id: PedEdgeId) -> Option<PedEdge> {
        let e = self.edges.remove(&id)?;
        for n in [e.from, e.to] {
            if let Some(s) = self.adj.get_mut(&n) {
                s.remove(&id);
            }
        }
        Some(e)
    }

    /// Removes a node together with its incident edges.
    pub fn remove_node(&mut self, id: PedNodeId) -> Option<PedNode> {
        let incident: Vec<PedEdgeId> = self.adj.get(&id)?.iter().copied().collect();
        for e in incident {
            self.remove_edge(e);
        }
        self.adj.remove(&id);
        self.nodes.remove(&id)
    }

    pub fn incident(&self, id: PedNodeId) -> impl Iterator<Item = PedEdgeId> + '_ {
        self.adj
            .get(&id)
            .into_iter()
            .flat_map(|s| s.iter().copied())
    }

    /// Undirected degree; self-loops count twice.
    pub fn degree(&self, id: PedNodeId) -> usize {
        self.incident(id)
            .map(|e| {
                let e = &self.edges[&e];
                if e.from == e.to {
                    2
                } else {
                    1
                }
            })
            .sum()
    }

    pub fn incident_of_kind(&self, id: PedNodeId, kind: EdgeKind) -> Vec<PedEdgeId> {
        self.incident(id)
            .filter(|e| self.edges[e].kind == kind)
            .collect()
    }

    /// Replaces a degree-2 node whose two incident edges share a kind by a
    /// single merged edge.
    pub fn merge_pass_through(&mut self, id: PedNodeId) -> Result<PedEdgeId, GraphError> {
        let inc: Vec<PedEdgeId> = self.incident(id).collect();
        if inc.len() != 2 {
            return Err(GraphError::NotPassThrough(id));
        }
        let (e1, e2) = (self.edges[&inc[0]].clone(), self.edges[&inc[1]].clone());
        if e1.kind != e2.kind || e1.from == e1.to || e2.from == e2.to {
            return Err(GraphError::NotPassThrough(id));
        }
        // orient e1 to end at `id`, e2 to start at `id`
        let g1 = if e1.to == id {
            e1.geometry.clone()
        } else {
            e1.geometry.reversed()
        };
        let g2 = if e2.from == id {
            e2.geometry.clone()
        } else {
            e2.geometry.reversed()
        };
        let mut pts = g1.into_points();
        pts.extend_from_slice(&g2.points()[1..]);
        let geometry = LineStringM::new_dedup(pts, 0.0)?;
        let (from, to) = (e1.other(id), e2.other(id));
        let confidence = match (e1.confidence, e2.confidence) {
            (Some(a), Some(b)) => {
                let (l1, l2) = (e1.length(), e2.length());
                Some((a * l1 + b * l2) / (l1 + l2))
            }
            _ => None,
        };
        self.remove_node(id);
        let new = self.add_edge(from, to, geometry, e1.kind)?;
        self.edges.get_mut(&new).expect("just added").confidence = confidence;
        Ok(new)
    }

    /// Moves nodes and rebuilds every touched edge: endpoints follow their
    /// nodes, interior vertices move by the arc-length-weighted blend of the
    /// two endpoint displacements.
    pub fn move_nodes(&mut self, moves: &BTreeMap<PedNodeId, PointM>) -> Result<(), GraphError> {
        let mut touched = BTreeSet::new();
        let mut delta = BTreeMap::new();
        for (&id, &p) in moves {
            let n = self.nodes.get_mut(&id).ok_or(GraphError::UnknownNode(id))?;
            delta.insert(id, p - n.pos);
            n.pos = p;
            touched.extend(self.adj[&id].iter().copied());
        }
        for eid in touched {
            let e = self.edges.get_mut(&eid).expect("adjacency is consistent");
            let d0 = delta.get(&e.from).copied().unwrap_or_default();
            let d1 = delta.get(&e.to).copied().unwrap_or_default();
            let cum = e.geometry.cumulative();
            let total = *cum.last().expect("non-empty");
            let pts: Vec<PointM> = e
                .geometry
                .points()
                .iter()
                .zip(&cum)
                .map(|(&p, &s)| {
                    let f = if total > 0.0 { s / total } else { 0.0 };
                    p + d0 * (1.0 - f) + d1 * f
                })
                .collect();
            let a = self.nodes[&e.from].pos;
            let b = self.nodes[&e.to].pos;
            match LineStringM::new_dedup(pts, 1e-9) {
                Ok(g) => e.geometry = g.with_endpoints(a, b).unwrap_or(g),
                Err(_) if a != b => {
                    e.geometry = LineStringM::new(vec![a, b])?;
                }
                Err(err) => return Err(err.into()),
            }
        }
        Ok(())
    }

    /// Connected components as sorted node lists, ordered by smallest id.
    pub fn components(&self) -> Vec<Vec<PedNodeId>> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for &start in self.nodes.keys() {
            if !seen.insert(start) {
                continue;
            }
            let mut comp = vec![start];
            let mut stack = vec![start];
            while let Some(n) = stack.pop() {
                for e in self.incident(n) {
                    let m = self.edges[&e].other(n);
                    if seen.insert(m) {
                        comp.push(m);
                        stack.push(m);
                    }
                }
            }
            comp.sort();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }

    /// Nodes grouped by their corner attribute.
    pub fn corners(&self) -> BTreeMap<CornerId, Vec<PedNodeId>> {
        let mut out: BTreeMap<CornerId, Vec<PedNodeId>> = BTreeMap::new();
        for (&id, n) in &self.nodes {
            if let Some(c) = &n.corner {
                out.entry(c.clone()).or_default().push(id);
            }
        }
        out
    }

    /// Structural problems: crossings not between curbs, links not joining a
    /// curb to a sidewalk point, curbs without exactly one crossing and one
    /// link, isolated nodes.
    pub fn structural_problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (id, e) in &self.edges {
            let k0 = self.nodes[&e.from].kind;
            let k1 = self.nodes[&e.to].kind;
            match e.kind {
                EdgeKind::Crossing if k0 != NodeKind::Curb || k1 != NodeKind::Curb => {
                    out.push(format!("crossing {id:?} does not join two curbs"));
                }
                EdgeKind::Link => {
                    let ok = matches!(
                        (k0, k1),
                        (NodeKind::Curb, NodeKind::SidewalkPt)
                            | (NodeKind::SidewalkPt, NodeKind::Curb)
                    );
                    if !ok {
                        out.push(format!(
                            "link {id:?} does not join a curb to a sidewalk point"
                        ));
                    }
                }
                _ => {}
            }
        }
        for (&id, n) in &self.nodes {
            if self.adj[&id].is_empty() {
                out.push(format!("node {id:?} is isolated"));
            }
            if n.kind == NodeKind::Curb {
                let c = self.incident_of_kind(id, EdgeKind::Crossing).len();
                let l = self.incident_of_kind(id, EdgeKind::Link).len();
                if c != 1 || l != 1 {
                    out.push(format!("curb {id:?} has {c} crossings and {l} links"));
                }
            }
        }
        out
    }

    pub fn total_length(&self, kind: EdgeKind) -> f64 {
        self.edges
            .values()
            .filter(|e| e.kind == kind)
            .map(|e| e.length())
            .sum()
    }
}
