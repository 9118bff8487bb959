//! Raster-guided refinement of a hypothesized graph: per-corner affine fits
//! against the corner-bulb raster, pruning of corners the raster does not
//! support, and per-edge confidence.

mod spsa;

pub use spsa::{
    corner_polygon, mean_mu, objective_g, sample_polygon, spsa_optimize, CornerFit,
    ProbabilitySample, RefineParams, FALLBACK_RADIUS_PX,
};

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::geo::PointM;
use crate::graph::{CornerId, EdgeKind, GraphError, NodeKind, PedGraph, PedNodeId};
use crate::raster::{fill_capsule, ClassRaster, ProbabilityRasters, RasterClass};
use crate::registry::{Registry, UnknownStrategy};

#[derive(Debug, thiserror::Error)]
pub enum RefineError {
    #[error("missing {} raster", .0.name())]
    MissingClassRaster(RasterClass),
    #[error("invalid refine parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    UnknownStrategy(#[from] UnknownStrategy),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Class rasters keyed by class.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RasterSet {
    rasters: BTreeMap<RasterClass, ClassRaster>,
}

impl RasterSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, r: ClassRaster) -> &mut Self {
        self.rasters.insert(r.class, r);
        self
    }

    pub fn get(&self, class: RasterClass) -> Option<&ClassRaster> {
        self.rasters.get(&class)
    }

    pub fn require(&self, class: RasterClass) -> Result<&ClassRaster, RefineError> {
        self.get(class)
            .ok_or(RefineError::MissingClassRaster(class))
    }
}

impl From<ProbabilityRasters> for RasterSet {
    fn from(p: ProbabilityRasters) -> Self {
        let mut s = Self::new();
        s.insert(p.sidewalk)
            .insert(p.crossing)
            .insert(p.corner_bulb);
        s
    }
}

/// A corner's nodes and their pixel coordinates in the bulb raster.
#[derive(Debug, Clone, PartialEq)]
pub struct CornerSet {
    pub id: CornerId,
    pub nodes: Vec<PedNodeId>,
    pub points: Vec<PointM>,
}

pub fn corner_sets(g: &PedGraph, raster: &ClassRaster) -> Vec<CornerSet> {
    g.corners()
        .into_iter()
        .map(|(id, nodes)| {
            let points = nodes
                .iter()
                .map(|&n| {
                    raster
                        .frame
                        .to_pixel(g.node(n).expect("corner node exists").pos)
                })
                .collect();
            CornerSet { id, nodes, points }
        })
        .collect()
}

/// Mean bulb probability under the corner's polygon.
pub fn corner_mu(raster: &ClassRaster, cs: &CornerSet) -> f64 {
    corner_polygon(&cs.points)
        .map(|p| mean_mu(&sample_polygon(raster, p.vertices())))
        .unwrap_or(0.0)
}

/// Fits one corner's warp.
pub trait CornerOptimizer: Send + Sync {
    fn optimize(
        &self,
        raster: &ClassRaster,
        cs: &CornerSet,
        params: &RefineParams,
        rng: &mut ChaCha8Rng,
    ) -> CornerFit;
}

pub struct SpsaOptimizer;

impl CornerOptimizer for SpsaOptimizer {
    fn optimize(
        &self,
        raster: &ClassRaster,
        cs: &CornerSet,
        params: &RefineParams,
        rng: &mut ChaCha8Rng,
    ) -> CornerFit {
        spsa_optimize(raster, &cs.points, params, rng)
    }
}

/// Leaves every corner where it is.
pub struct IdentityOptimizer;

impl CornerOptimizer for IdentityOptimizer {
    fn optimize(
        &self,
        raster: &ClassRaster,
        cs: &CornerSet,
        _: &RefineParams,
        _: &mut ChaCha8Rng,
    ) -> CornerFit {
        let n = cs.points.len().max(1) as f64;
        let center = cs.points.iter().fold(PointM::default(), |a, &p| a + p) * (1.0 / n);
        let g = corner_polygon(&cs.points)
            .map(|p| objective_g(&sample_polygon(raster, p.vertices())))
            .unwrap_or(0.0);
        CornerFit::identity(center, g)
    }
}

pub fn optimizers() -> Registry<dyn CornerOptimizer> {
    let mut r: Registry<dyn CornerOptimizer> = Registry::new("corner optimizer");
    r.register("spsa", Arc::new(SpsaOptimizer))
        .register("identity", Arc::new(IdentityOptimizer));
    r
}

/// Independent random stream for one corner.
pub fn corner_rng(seed: u64, corner: &CornerId) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(corner.0.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Deletes whole corners: their curbs, every crossing touching those curbs,
/// the far curbs of such crossings and all their links. Sidewalk points left
/// with two sidewalk edges are merged away; surviving nodes of the deleted
/// corners lose their corner label.
pub fn remove_corners(g: &mut PedGraph, ids: &BTreeSet<CornerId>) -> Result<(), GraphError> {
    if ids.is_empty() {
        return Ok(());
    }
    let members: Vec<PedNodeId> = g
        .nodes()
        .filter(|(_, n)| n.corner.as_ref().is_some_and(|c| ids.contains(c)))
        .map(|(id, _)| id)
        .collect();
    let mut curbs: BTreeSet<PedNodeId> = members
        .iter()
        .copied()
        .filter(|&n| g.node(n).is_some_and(|n| n.kind == NodeKind::Curb))
        .collect();
    // far ends of the doomed crossings
    let far: Vec<PedNodeId> = curbs
        .iter()
        .flat_map(|&c| {
            g.incident_of_kind(c, EdgeKind::Crossing)
                .into_iter()
                .map(move |e| (c, e))
        })
        .map(|(c, e)| g.edge(e).expect("incident").other(c))
        .collect();
    curbs.extend(far);

    let mut touched: BTreeSet<PedNodeId> = BTreeSet::new();
    for &c in &curbs {
        for e in g.incident(c).collect::<Vec<_>>() {
            if let Some(edge) = g.edge(e) {
                touched.insert(edge.other(c));
            }
        }
        g.remove_node(c);
    }
    let member_set: BTreeSet<PedNodeId> = members.iter().copied().collect();
    for n in touched.union(&member_set) {
        let Some(node) = g.node(*n) else { continue };
        if node.kind != NodeKind::SidewalkPt {
            continue;
        }
        let all_sidewalk = g
            .incident(*n)
            .all(|e| g.edge(e).is_some_and(|e| e.kind == EdgeKind::Sidewalk));
        if g.degree(*n) == 2 && all_sidewalk && member_set.contains(n) {
            // self-loop rings cannot merge; keep the node then
            let _ = g.merge_pass_through(*n);
        }
    }
    for n in member_set {
        if let Some(node) = g.node_mut(n) {
            node.corner = None;
        }
    }
    Ok(())
}

/// Removes corners whose mean bulb probability is below `threshold`.
/// Returns the removed ids.
pub fn prune_false_corners(
    g: &mut PedGraph,
    raster: &ClassRaster,
    threshold: f64,
) -> Result<Vec<CornerId>, RefineError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(RefineError::InvalidParams(format!(
            "threshold {threshold} outside [0, 1]"
        )));
    }
    let doomed: BTreeSet<CornerId> = corner_sets(g, raster)
        .iter()
        .filter(|cs| corner_mu(raster, cs) < threshold)
        .map(|cs| cs.id.clone())
        .collect();
    remove_corners(g, &doomed)?;
    Ok(doomed.into_iter().collect())
}

/// Mean probability over the pixels within `halfwidth` meters of the line.
pub fn line_mean_probability(raster: &ClassRaster, pts: &[PointM], halfwidth: f64) -> f64 {
    let mut seen: HashSet<usize> = HashSet::new();
    for w in pts.windows(2) {
        fill_capsule(&raster.frame, w[0], w[1], halfwidth, |i| {
            seen.insert(i);
        });
    }
    if seen.is_empty() {
        return 0.0;
    }
    let total: f64 = seen.iter().map(|&i| raster.values[i] as f64).sum();
    (total / seen.len() as f64).clamp(0.0, 1.0)
}

/// Stores each edge's mean class probability as its confidence. Sidewalks
/// read the sidewalk raster; crossings and links read the crossing raster.
pub fn edge_confidence(
    g: &mut PedGraph,
    rasters: &RasterSet,
    halfwidth: f64,
) -> Result<(), RefineError> {
    let ids: Vec<_> = g.edges().map(|(id, _)| id).collect();
    let mut updates = Vec::with_capacity(ids.len());
    for id in ids {
        let e = g.edge(id).expect("listed");
        let class = match e.kind {
            EdgeKind::Sidewalk => RasterClass::Sidewalk,
            EdgeKind::Crossing | EdgeKind::Link => RasterClass::Crossing,
            EdgeKind::Unknown => continue,
        };
        let raster = rasters.require(class)?;
        updates.push((
            id,
            line_mean_probability(raster, e.geometry.points(), halfwidth),
        ));
    }
    for (id, c) in updates {
        g.edge_mut(id).expect("listed").confidence = Some(c);
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Refined {
    pub graph: PedGraph,
    pub pruned: Vec<CornerId>,
    pub fits: BTreeMap<CornerId, CornerFit>,
    pub warnings: Vec<String>,
}

/// Prune, fit every surviving corner, move its nodes, and score all edges.
pub fn refine_graph(
    hypo: &PedGraph,
    rasters: &RasterSet,
    params: &RefineParams,
) -> Result<Refined, RefineError> {
    params.validate()?;
    let optimizer = optimizers().get(&params.optimizer)?;
    let bulb = rasters.require(RasterClass::CornerBulb)?;
    rasters.require(RasterClass::Sidewalk)?;
    rasters.require(RasterClass::Crossing)?;

    let mut graph = hypo.clone();
    let pruned = prune_false_corners(&mut graph, bulb, params.prune_threshold)?;

    let sets = corner_sets(&graph, bulb);
    let fits: Vec<(CornerSet, CornerFit)> = sets
        .into_par_iter()
        .map(|cs| {
            let mut rng = corner_rng(params.seed, &cs.id);
            let fit = optimizer.optimize(bulb, &cs, params, &mut rng);
            (cs, fit)
        })
        .collect();

    let mut warnings = Vec::new();
    let mut moves = BTreeMap::new();
    let mut out = BTreeMap::new();
    for (cs, fit) in fits {
        if !fit.params.is_finite() {
            warnings.push(format!("corner {}: non-finite fit, left in place", cs.id.0));
            continue;
        }
        for (&n, &px) in cs.nodes.iter().zip(&cs.points) {
            moves.insert(n, bulb.frame.to_world(fit.apply(px)));
        }
        out.insert(cs.id, fit);
    }
    graph.move_nodes(&moves)?;
    edge_confidence(&mut graph, rasters, params.confidence_halfwidth)?;
    Ok(Refined {
        graph,
        pruned,
        fits: out,
        warnings,
    })
}
