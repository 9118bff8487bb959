//! Street network to hypothesized pedestrian network.
//!
//! Three steps: sidewalks offset from every block boundary, one crossing per
//! street arm at each intersection, and a split of every crossing into
//! link / crossing / link with curb nodes at the cuts.

pub mod blocks;
pub mod crossings;
pub mod hypothesis;
pub mod placer;
pub mod regime;
pub mod sidewalks;

pub use blocks::{component_count, enumerate_blocks, Block};
pub use crossings::{
    generate_crossing_candidates, project_known_crossing, select_best_crossing, split_crossing,
    CrossingCandidate, CrossingCostWeights, SplitCrossing,
};
pub use hypothesis::{assign_corners, build_hypothesis, Hypothesis, HypothesisConfig, Warning};
pub use placer::{placers, ArmContext, CrossingPlacer};
pub use regime::{regimes, SidewalkRegime};
pub use sidewalks::{generate_sidewalks, Sidewalk, SidewalkOptions, SidewalkSet, SidewalkWarning};

use crate::geo::GeoError;
use crate::graph::GraphError;
use crate::registry::UnknownStrategy;

#[derive(Debug, thiserror::Error)]
pub enum PedError {
    #[error("sidewalk offset must be > 0, got {0}")]
    InvalidOffset(f64),
    #[error("no crossing candidates: {0}")]
    NoCandidates(String),
    #[error("empty candidate list")]
    EmptyCandidates,
    #[error("crossing cost weights must be >= 0 and not all zero")]
    InvalidWeights,
    #[error("curb fractions must satisfy 0 < f1 < f2 < 1, got ({0}, {1})")]
    InvalidFractions(f64, f64),
    #[error("candidate step must be > 0, got {0}")]
    InvalidStep(f64),
    #[error(transparent)]
    UnknownStrategy(#[from] UnknownStrategy),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}
