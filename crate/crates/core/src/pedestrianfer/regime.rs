use std::sync::Arc;

use crate::geo::Side;
use crate::net::{SidewalkMeta, SidewalkPresence};
use crate::registry::Registry;

/// Decides which street sides receive a hypothesized sidewalk.
///
/// `side` is relative to the street's digitized direction.
pub trait SidewalkRegime: Send + Sync {
    fn present(&self, meta: &SidewalkMeta, side: Side) -> bool;
}

fn tagged_presence(presence: SidewalkPresence, side: Side) -> Option<bool> {
    match presence {
        SidewalkPresence::Unknown => None,
        SidewalkPresence::None => Some(false),
        SidewalkPresence::Both => Some(true),
        SidewalkPresence::Left => Some(side == Side::Left),
        SidewalkPresence::Right => Some(side == Side::Right),
    }
}

/// Sidewalks on both sides of every street, tags ignored.
pub struct FullRegime;

impl SidewalkRegime for FullRegime {
    fn present(&self, _meta: &SidewalkMeta, _side: Side) -> bool {
        true
    }
}

/// Sidewalks only where a `sidewalk` tag says so.
pub struct MetadataRegime;

impl SidewalkRegime for MetadataRegime {
    fn present(&self, meta: &SidewalkMeta, side: Side) -> bool {
        tagged_presence(meta.presence, side).unwrap_or(false)
    }
}

/// Tagged streets follow their tags; untagged streets get both sides.
pub struct AutoRegime;

impl SidewalkRegime for AutoRegime {
    fn present(&self, meta: &SidewalkMeta, side: Side) -> bool {
        tagged_presence(meta.presence, side).unwrap_or(true)
    }
}

pub fn regimes() -> Registry<dyn SidewalkRegime> {
    let mut r: Registry<dyn SidewalkRegime> = Registry::new("sidewalk regime");
    r.register("full", Arc::new(FullRegime))
        .register("metadata", Arc::new(MetadataRegime))
        .register("auto", Arc::new(AutoRegime));
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regimes_disagree_only_on_tags() {
        let untagged = SidewalkMeta::default();
        let left = SidewalkMeta {
            presence: SidewalkPresence::Left,
            offset: None,
        };
        let r = regimes();
        let full = r.get("full").unwrap();
        let meta = r.get("metadata").unwrap();
        let auto = r.get("auto").unwrap();
        assert!(full.present(&untagged, Side::Right));
        assert!(!meta.present(&untagged, Side::Right));
        assert!(auto.present(&untagged, Side::Right));
        assert!(meta.present(&left, Side::Left) && !meta.present(&left, Side::Right));
        assert!(auto.present(&left, Side::Left) && !auto.present(&left, Side::Right));
        assert!(full.present(&left, Side::Right));
    }
}
