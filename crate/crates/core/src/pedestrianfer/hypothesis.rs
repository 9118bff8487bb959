use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::blocks::enumerate_blocks;
use super::crossings::{
    split_crossing, CrossingCandidate, CrossingCostWeights, DEFAULT_SEARCH_RADIUS,
};
use super::placer::{placers, ArmContext};
use super::regime::regimes;
use super::sidewalks::{generate_sidewalks, right_side_of, SidewalkOptions};
use super::PedError;
use crate::geo::{LineStringM, PointM};
use crate::graph::{CornerId, EdgeKind, NodeKind, PedGraph, PedNodeId};
use crate::net::{half_block_extents, intersections, NodeId, StreetNetwork};

/// Sidewalk points closer than this are the same graph node.
const NODE_SNAP_M: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HypothesisConfig {
    /// Sidewalk regime name: `auto`, `full` or `metadata`.
    pub regime: String,
    pub default_offset: f64,
    pub emit_outer: bool,
    /// Crossing placer name: `cost` or `known`.
    pub placer: String,
    pub weights: CrossingCostWeights,
    pub curb_fractions: (f64, f64),
    pub step: f64,
    pub search_radius: f64,
    /// Curb and sidewalk nodes within this distance of an intersection belong
    /// to one of its corners.
    pub corner_radius: f64,
}

impl Default for HypothesisConfig {
    fn default() -> Self {
        Self {
            regime: "auto".into(),
            default_offset: 4.0,
            emit_outer: true,
            placer: "cost".into(),
            weights: CrossingCostWeights::default(),
            curb_fractions: (0.25, 0.75),
            step: 1.0,
            search_radius: DEFAULT_SEARCH_RADIUS,
            corner_radius: 15.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Warning {
    pub context: String,
    pub message: String,
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.context, self.message)
    }
}

#[derive(Debug, Clone)]
pub struct Hypothesis {
    pub graph: PedGraph,
    pub warnings: Vec<Warning>,
}

struct ArmCrossing {
    candidate: CrossingCandidate,
    left_sidewalk: usize,
    right_sidewalk: usize,
}

/// Builds the hypothesized pedestrian graph: block sidewalks, one crossing
/// per street arm at every intersection, curb splits, and corner labels.
pub fn build_hypothesis(
    g: &StreetNetwork,
    cfg: &HypothesisConfig,
    known_crossings: &[PointM],
) -> Result<Hypothesis, PedError> {
    let regime = regimes().get(&cfg.regime)?;
    let placer = placers().get(&cfg.placer)?;
    cfg.weights.validate()?;
    let (f1, f2) = cfg.curb_fractions;
    if !(0.0 < f1 && f1 < f2 && f2 < 1.0) {
        return Err(PedError::InvalidFractions(f1, f2));
    }
    if !(cfg.step > 0.0) {
        return Err(PedError::InvalidStep(cfg.step));
    }

    let blocks = enumerate_blocks(g);
    let opts = SidewalkOptions {
        default_offset: cfg.default_offset,
        emit_outer: cfg.emit_outer,
    };
    let sw = generate_sidewalks(g, &blocks, &opts, regime.as_ref())?;
    let mut warnings: Vec<Warning> = sw
        .warnings
        .iter()
        .map(|w| Warning {
            context: "sidewalks".into(),
            message: w.to_string(),
        })
        .collect();

    let side_index: HashMap<_, usize> = sw
        .sidewalks
        .iter()
        .enumerate()
        .flat_map(|(i, s)| s.sides.iter().map(move |&k| (k, i)))
        .collect();

    let ix = intersections(g);
    let per_node: Vec<(Vec<ArmCrossing>, Vec<Warning>)> = ix
        .par_iter()
        .map(|&v| {
            let mut found = Vec::new();
            let mut warns = Vec::new();
            let extents = match half_block_extents(g, v) {
                Ok(e) => e,
                Err(e) => {
                    warns.push(Warning {
                        context: format!("intersection {v}"),
                        message: e.to_string(),
                    });
                    return (found, warns);
                }
            };
            for ext in extents {
                let h = ext.half_edge;
                let right = side_index.get(&(h.edge, right_side_of(h))).copied();
                let left = side_index.get(&(h.edge, right_side_of(h.twin()))).copied();
                let (Some(li), Some(ri)) = (left, right) else {
                    warns.push(Warning {
                        context: format!("intersection {v}, street {}", h.edge.0),
                        message: "no sidewalk pair; crossing skipped".into(),
                    });
                    continue;
                };
                let lg = [&sw.sidewalks[li].geometry];
                let rg = [&sw.sidewalks[ri].geometry];
                let ctx = ArmContext {
                    extent: &ext.geometry,
                    left: &lg,
                    right: &rg,
                    known: known_crossings,
                    weights: cfg.weights,
                    step: cfg.step,
                    search_radius: cfg.search_radius,
                };
                match placer.place(&ctx) {
                    Ok(c) if c.length > NODE_SNAP_M => found.push(ArmCrossing {
                        candidate: c,
                        left_sidewalk: li,
                        right_sidewalk: ri,
                    }),
                    Ok(_) => warns.push(Warning {
                        context: format!("intersection {v}, street {}", h.edge.0),
                        message: "degenerate crossing skipped".into(),
                    }),
                    Err(e) => warns.push(Warning {
                        context: format!("intersection {v}, street {}", h.edge.0),
                        message: e.to_string(),
                    }),
                }
            }
            (found, warns)
        })
        .collect();
    let mut crossings = Vec::new();
    for (c, w) in per_node {
        crossings.extend(c);
        warnings.extend(w);
    }

    let mut graph = PedGraph::new(g.projection);
    let mut keyed: HashMap<(i64, i64), PedNodeId> = HashMap::new();
    let mut node_at = |graph: &mut PedGraph, p: PointM| -> PedNodeId {
        let key = (
            (p.x / NODE_SNAP_M).round() as i64,
            (p.y / NODE_SNAP_M).round() as i64,
        );
        *keyed
            .entry(key)
            .or_insert_with(|| graph.add_node(p, NodeKind::SidewalkPt))
    };

    // cut positions per sidewalk: (s, crossing index, is_left)
    let mut cuts: Vec<Vec<(f64, usize, bool)>> = vec![Vec::new(); sw.sidewalks.len()];
    for (ci, c) in crossings.iter().enumerate() {
        cuts[c.left_sidewalk].push((c.candidate.left.s, ci, true));
        cuts[c.right_sidewalk].push((c.candidate.right.s, ci, false));
    }
    let mut endpoint_node: Vec<[Option<PedNodeId>; 2]> = vec![[None, None]; crossings.len()];

    for (si, s) in sw.sidewalks.iter().enumerate() {
        let geom = &s.geometry;
        let total = geom.length();
        let mut list = std::mem::take(&mut cuts[si]);
        list.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        // representative arc positions, merging near-duplicates
        let mut stops: Vec<f64> = Vec::new();
        let mut assign: Vec<(usize, bool, usize)> = Vec::new();
        for (s_cut, ci, is_left) in list {
            let s_cut = if s_cut < NODE_SNAP_M {
                0.0
            } else if s_cut > total - NODE_SNAP_M {
                total
            } else {
                s_cut
            };
            if stops.last().is_none_or(|&l| s_cut - l > NODE_SNAP_M) {
                stops.push(s_cut);
            }
            assign.push((ci, is_left, stops.len() - 1));
        }
        let interior: Vec<f64> = stops
            .iter()
            .copied()
            .filter(|&x| x > 0.0 && x < total)
            .collect();
        let pieces = if interior.is_empty() {
            vec![geom.clone()]
        } else {
            geom.split_at(&interior)?
        };
        let stop_node: Vec<PedNodeId> = stops
            .iter()
            .map(|&x| node_at(&mut graph, geom.point_at(x)))
            .collect();
        for (ci, is_left, k) in assign {
            endpoint_node[ci][usize::from(!is_left)] = Some(stop_node[k]);
        }
        for piece in pieces {
            let a = node_at(&mut graph, piece.first());
            let b = node_at(&mut graph, piece.last());
            let pa = graph.node(a).expect("node exists").pos;
            let pb = graph.node(b).expect("node exists").pos;
            let Ok(piece) = piece.with_endpoints(pa, pb) else {
                continue;
            };
            graph.add_edge(a, b, piece, EdgeKind::Sidewalk)?;
        }
    }

    for (ci, c) in crossings.iter().enumerate() {
        let [Some(ln), Some(rn)] = endpoint_node[ci] else {
            continue;
        };
        let lp = graph.node(ln).expect("node exists").pos;
        let rp = graph.node(rn).expect("node exists").pos;
        let Ok(geom) = c.candidate.geometry.with_endpoints(lp, rp) else {
            continue;
        };
        let split = match split_crossing(&geom, cfg.curb_fractions) {
            Ok(s) => s,
            Err(e) => {
                warnings.push(Warning {
                    context: "crossing".into(),
                    message: e.to_string(),
                });
                continue;
            }
        };
        let c1 = graph.add_node(split.curbs[0], NodeKind::Curb);
        let c2 = graph.add_node(split.curbs[1], NodeKind::Curb);
        let [s1, s2, s3] = split.segments;
        graph.add_edge(ln, c1, s1, EdgeKind::Link)?;
        graph.add_edge(c1, c2, s2, EdgeKind::Crossing)?;
        graph.add_edge(c2, rn, s3, EdgeKind::Link)?;
    }

    assign_corners(&mut graph, g, &ix, cfg.corner_radius);
    Ok(Hypothesis { graph, warnings })
}

/// Labels curb and sidewalk nodes near an intersection with the corner
/// (angular sector between consecutive street arms) they sit in.
pub fn assign_corners(graph: &mut PedGraph, g: &StreetNetwork, ix: &[NodeId], radius: f64) {
    let arms: BTreeMap<NodeId, Vec<f64>> = ix
        .iter()
        .map(|&v| {
            let mut a: Vec<f64> = g
                .outgoing(v)
                .into_iter()
                .map(|h| g.departure_angle(h))
                .collect();
            a.sort_by(f64::total_cmp);
            (v, a)
        })
        .collect();
    let ids: Vec<PedNodeId> = graph.nodes().map(|(id, _)| id).collect();
    for id in ids {
        let node = graph.node(id).expect("listed");
        if !matches!(node.kind, NodeKind::Curb | NodeKind::SidewalkPt) {
            continue;
        }
        let p = node.pos;
        let nearest = ix
            .iter()
            .map(|&v| (g.node(v).expect("valid").pos.dist(p), v))
            .filter(|(d, _)| *d <= radius)
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let corner = nearest.map(|(_, v)| {
            let center = g.node(v).expect("valid").pos;
            let bearing = (p - center).angle().rem_euclid(std::f64::consts::TAU);
            let a = &arms[&v];
            let sector = a.iter().rposition(|&x| x <= bearing).unwrap_or(a.len() - 1);
            CornerId(format!("{}:{}", v.0, sector))
        });
        graph.node_mut(id).expect("listed").corner = corner;
    }
}

/// Convenience used by tests and tooling: sidewalk geometry of a hypothesis.
pub fn sidewalk_lines(graph: &PedGraph) -> Vec<LineStringM> {
    graph
        .edges()
        .filter(|(_, e)| e.kind == EdgeKind::Sidewalk)
        .map(|(_, e)| e.geometry.clone())
        .collect()
}
