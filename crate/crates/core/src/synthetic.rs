//! Synthetic street grids and perturbed ground truth for tests and demos.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geo::{LineStringM, LocalProjection, LonLat, PointM};
use crate::graph::{CornerId, GraphError, PedGraph, PedNodeId};
use crate::net::{network_from_lines, NetError, StreetNetwork};
use crate::refine::remove_corners;

/// Street centerlines of an `nx` x `ny` block grid with `block_m` spacing,
/// lower-left intersection at the local origin. One line per block side.
pub fn grid_lines(nx: usize, ny: usize, block_m: f64) -> Vec<LineStringM> {
    let mut lines = Vec::new();
    let p = |i: usize, j: usize| PointM::new(i as f64 * block_m, j as f64 * block_m);
    for j in 0..=ny {
        for i in 0..nx {
            lines.push(LineStringM::new(vec![p(i, j), p(i + 1, j)]).expect("distinct"));
        }
    }
    for i in 0..=nx {
        for j in 0..ny {
            lines.push(LineStringM::new(vec![p(i, j), p(i, j + 1)]).expect("distinct"));
        }
    }
    lines
}

pub fn grid_city(
    nx: usize,
    ny: usize,
    block_m: f64,
    origin: LonLat,
) -> Result<StreetNetwork, NetError> {
    let proj = LocalProjection::new(origin);
    let mut tags = BTreeMap::new();
    tags.insert("highway".to_string(), "residential".to_string());
    network_from_lines(
        proj,
        grid_lines(nx, ny, block_m)
            .into_iter()
            .map(|l| (l, tags.clone()))
            .collect(),
    )
}

/// The grid as a WGS84 GeoJSON FeatureCollection string.
pub fn grid_city_geojson(
    nx: usize,
    ny: usize,
    block_m: f64,
    origin: LonLat,
) -> Result<String, NetError> {
    let net = grid_city(nx, ny, block_m, origin)?;
    Ok(geojson::GeoJson::from(net.to_geojson()).to_string())
}

#[derive(Debug, Clone)]
pub struct PerturbedTruth {
    pub graph: PedGraph,
    pub deleted: Vec<CornerId>,
    /// Displacement applied to every surviving corner, in meters.
    pub offsets: BTreeMap<CornerId, PointM>,
}

/// Ground truth derived from a hypothesis: a fraction of corners deleted
/// (with their crossings) and every other corner moved rigidly by `jitter_m`
/// in a random direction.
pub fn perturb_corners(
    hypo: &PedGraph,
    delete_frac: f64,
    jitter_m: f64,
    seed: u64,
) -> Result<PerturbedTruth, GraphError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let corners = hypo.corners();
    let mut ids: Vec<CornerId> = corners.keys().cloned().collect();
    ids.shuffle(&mut rng);
    let n_delete = (delete_frac * ids.len() as f64).round() as usize;
    let deleted: BTreeSet<CornerId> = ids[..n_delete].iter().cloned().collect();
    let mut graph = hypo.clone();
    remove_corners(&mut graph, &deleted)?;

    let mut offsets = BTreeMap::new();
    let mut moves: BTreeMap<PedNodeId, PointM> = BTreeMap::new();
    for (cid, nodes) in &corners {
        if deleted.contains(cid) {
            continue;
        }
        let theta = rng.gen_range(0.0..std::f64::consts::TAU);
        let d = PointM::new(theta.cos(), theta.sin()) * jitter_m;
        offsets.insert(cid.clone(), d);
        for n in nodes {
            if let Some(node) = graph.node(*n) {
                moves.insert(*n, node.pos + d);
            }
        }
    }
    graph.move_nodes(&moves)?;
    Ok(PerturbedTruth {
        graph,
        deleted: deleted.into_iter().collect(),
        offsets,
    })
}

/// Every node (and edge) shifted by `d`.
pub fn translate_graph(g: &PedGraph, d: PointM) -> Result<PedGraph, GraphError> {
    let mut out = g.clone();
    let moves = g.nodes().map(|(id, n)| (id, n.pos + d)).collect();
    out.move_nodes(&moves)?;
    Ok(out)
}
