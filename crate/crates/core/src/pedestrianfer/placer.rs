use std::sync::Arc;

use super::crossings::{
    generate_crossing_candidates, project_known_crossing, select_best_crossing, CrossingCandidate,
    CrossingCostWeights,
};
use super::PedError;
use crate::geo::{LineStringM, PointM};
use crate::registry::Registry;

/// Everything a placer sees for one street arm leaving an intersection.
pub struct ArmContext<'a> {
    /// Street geometry from the intersection out to half the edge length.
    pub extent: &'a LineStringM,
    pub left: &'a [&'a LineStringM],
    pub right: &'a [&'a LineStringM],
    /// Known crossing locations (may be empty).
    pub known: &'a [PointM],
    pub weights: CrossingCostWeights,
    pub step: f64,
    pub search_radius: f64,
}

/// Picks one crossing for a street arm.
pub trait CrossingPlacer: Send + Sync {
    fn place(&self, ctx: &ArmContext<'_>) -> Result<CrossingCandidate, PedError>;
}

/// Minimizes the weighted distance / length / angle cost over candidates.
pub struct CostPlacer;

impl CrossingPlacer for CostPlacer {
    fn place(&self, ctx: &ArmContext<'_>) -> Result<CrossingCandidate, PedError> {
        let mut cands = generate_crossing_candidates(
            ctx.extent,
            ctx.left,
            ctx.right,
            ctx.step,
            ctx.search_radius,
        )?;
        let best = select_best_crossing(&cands, &ctx.weights)?;
        Ok(cands.swap_remove(best))
    }
}

/// Uses the nearest known crossing lying within half a search radius of the
/// arm; otherwise falls back to [`CostPlacer`].
pub struct KnownPlacer;

impl CrossingPlacer for KnownPlacer {
    fn place(&self, ctx: &ArmContext<'_>) -> Result<CrossingCandidate, PedError> {
        let reach = ctx.search_radius / 2.0;
        let nearest = ctx
            .known
            .iter()
            .map(|&p| (ctx.extent.distance_to(p), p))
            .filter(|(d, _)| *d <= reach)
            .min_by(|a, b| a.0.total_cmp(&b.0));
        match nearest {
            Some((_, p)) => {
                project_known_crossing(p, ctx.left, ctx.right, Some(ctx.extent), ctx.search_radius)
            }
            None => CostPlacer.place(ctx),
        }
    }
}

pub fn placers() -> Registry<dyn CrossingPlacer> {
    let mut r: Registry<dyn CrossingPlacer> = Registry::new("crossing placer");
    r.register("cost", Arc::new(CostPlacer))
        .register("known", Arc::new(KnownPlacer));
    r
}
