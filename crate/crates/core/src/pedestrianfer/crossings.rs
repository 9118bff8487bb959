use serde::{Deserialize, Serialize};

use super::PedError;
use crate::geo::{LineStringM, PointM};

/// Closest point on one of several sidewalks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SidewalkHit {
    /// Index into the slice of sidewalks that was searched.
    pub index: usize,
    /// Arc length along that sidewalk.
    pub s: f64,
    pub point: PointM,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossingCandidate {
    /// Arc length along the street extent.
    pub anchor_s: f64,
    pub geometry: LineStringM,
    pub dist_to_intersection: f64,
    pub length: f64,
    /// Degrees away from perpendicular to the street, in [0, 90].
    pub angle_dev: f64,
    pub left: SidewalkHit,
    pub right: SidewalkHit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossingCostWeights {
    pub w_dist: f64,
    pub w_len: f64,
    pub w_ang: f64,
}

impl Default for CrossingCostWeights {
    fn default() -> Self {
        Self {
            w_dist: 1.0,
            w_len: 1.0,
            w_ang: 1.0,
        }
    }
}

impl CrossingCostWeights {
    pub fn validate(&self) -> Result<(), PedError> {
        let w = [self.w_dist, self.w_len, self.w_ang];
        if w.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) || w.iter().all(|&x| x == 0.0) {
            return Err(PedError::InvalidWeights);
        }
        Ok(())
    }
}

pub const DEFAULT_SEARCH_RADIUS: f64 = 25.0;

/// Nearest point over all `lines` within `radius` of `p`; ties go to the
/// lowest index.
pub fn closest_sidewalk(p: PointM, lines: &[&LineStringM], radius: f64) -> Option<SidewalkHit> {
    let mut best: Option<SidewalkHit> = None;
    for (index, l) in lines.iter().enumerate() {
        let pr = l.project(p);
        if pr.distance > radius {
            continue;
        }
        if best.is_none_or(|b| pr.distance < b.distance - 1e-12) {
            best = Some(SidewalkHit {
                index,
                s: pr.s,
                // a point already on the sidewalk is its own projection
                point: if pr.distance < 1e-9 { p } else { pr.point },
                distance: pr.distance,
            });
        }
    }
    best
}

fn candidate(
    anchor_s: f64,
    street_pt: PointM,
    tangent: PointM,
    left: SidewalkHit,
    right: SidewalkHit,
) -> Option<CrossingCandidate> {
    let (l, r) = (left.point, right.point);
    let chord = r - l;
    let mut pts = vec![l];
    // keep the street point unless it is on the straight left-right chord
    let off_chord = if chord.norm() > 0.0 {
        chord.cross(street_pt - l).abs() / chord.norm()
    } else {
        street_pt.dist(l)
    };
    if off_chord > 1e-9 {
        pts.push(street_pt);
    }
    pts.push(r);
    let geometry = LineStringM::new_dedup(pts, 1e-9).ok()?;
    let angle_dev = if chord.norm() > 0.0 {
        let cos = (chord.dot(tangent) / chord.norm()).abs().min(1.0);
        // angle between the lines is acos(cos); deviation from 90 is asin(cos)
        cos.asin().to_degrees()
    } else {
        90.0
    };
    Some(CrossingCandidate {
        anchor_s,
        length: geometry.length(),
        geometry,
        dist_to_intersection: anchor_s,
        angle_dev,
        left,
        right,
    })
}

/// Candidate crossings every `step` meters along a street extent, each
/// connecting the closest left and right sidewalk points through the street.
pub fn generate_crossing_candidates(
    extent: &LineStringM,
    left: &[&LineStringM],
    right: &[&LineStringM],
    step: f64,
    search_radius: f64,
) -> Result<Vec<CrossingCandidate>, PedError> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(PedError::InvalidStep(step));
    }
    if left.is_empty() || right.is_empty() {
        return Err(PedError::NoCandidates(
            "missing sidewalk on one side".into(),
        ));
    }
    let total = extent.length();
    let n = (total / step + 1e-9).floor() as usize;
    let mut out = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let s = k as f64 * step;
        let q = extent.point_at(s);
        let (Some(l), Some(r)) = (
            closest_sidewalk(q, left, search_radius),
            closest_sidewalk(q, right, search_radius),
        ) else {
            continue;
        };
        if let Some(c) = candidate(s, q, extent.tangent_at(s), l, r) {
            out.push(c);
        }
    }
    if out.is_empty() {
        return Err(PedError::NoCandidates(format!(
            "no sidewalk pair within {search_radius} m"
        )));
    }
    Ok(out)
}

/// Index of the lowest-cost candidate under normalized metrics.
pub fn select_best_crossing(
    cands: &[CrossingCandidate],
    w: &CrossingCostWeights,
) -> Result<usize, PedError> {
    w.validate()?;
    if cands.is_empty() {
        return Err(PedError::EmptyCandidates);
    }
    let dist_max = cands
        .iter()
        .map(|c| c.dist_to_intersection)
        .fold(0.0, f64::max);
    let len_max = cands.iter().map(|c| c.length).fold(0.0, f64::max);
    let norm = |x: f64, max: f64| if max > 0.0 { x / max } else { 0.0 };
    let cost = |c: &CrossingCandidate| {
        w.w_dist * norm(c.dist_to_intersection, dist_max)
            + w.w_len * norm(c.length, len_max)
            + w.w_ang * c.angle_dev / 90.0
    };
    let mut best = 0;
    let mut best_cost = cost(&cands[0]);
    for (i, c) in cands.iter().enumerate().skip(1) {
        let ci = cost(c);
        let tol = 1e-9 * ci.abs().max(best_cost.abs());
        let b = &cands[best];
        let better = if (ci - best_cost).abs() <= tol {
            (c.dist_to_intersection, c.anchor_s) < (b.dist_to_intersection, b.anchor_s)
        } else {
            ci < best_cost
        };
        if better {
            best = i;
            best_cost = ci;
        }
    }
    Ok(best)
}

/// Crossing through a known crossing location, ending at its projections
/// onto the nearest sidewalk on each side. `street` (if given) supplies the
/// anchor position and tangent for the metrics.
pub fn project_known_crossing(
    known: PointM,
    left: &[&LineStringM],
    right: &[&LineStringM],
    street: Option<&LineStringM>,
    search_radius: f64,
) -> Result<CrossingCandidate, PedError> {
    let (Some(l), Some(r)) = (
        closest_sidewalk(known, left, search_radius),
        closest_sidewalk(known, right, search_radius),
    ) else {
        return Err(PedError::NoCandidates(
            "known crossing has no sidewalk on one side".into(),
        ));
    };
    let (anchor_s, tangent) = match street {
        Some(st) => {
            let pr = st.project(known);
            (pr.s, st.tangent_at(pr.s))
        }
        None => (0.0, (r.point - l.point).perp().normalized()),
    };
    candidate(anchor_s, known, tangent, l, r)
        .ok_or_else(|| PedError::NoCandidates("known crossing collapses to a point".into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitCrossing {
    /// Link, crossing, link.
    pub segments: [LineStringM; 3],
    pub curbs: [PointM; 2],
}

/// Splits a crossing line at two arc-length fractions into link / crossing /
/// link segments with curb points at the cuts.
pub fn split_crossing(c: &LineStringM, fracs: (f64, f64)) -> Result<SplitCrossing, PedError> {
    let (f1, f2) = fracs;
    if !(0.0 < f1 && f1 < f2 && f2 < 1.0) {
        return Err(PedError::InvalidFractions(f1, f2));
    }
    let len = c.length();
    let (s1, s2) = (f1 * len, f2 * len);
    let parts = c.split_at(&[s1, s2])?;
    let [a, b, d]: [LineStringM; 3] = parts.try_into().expect("two cuts give three parts");
    Ok(SplitCrossing {
        curbs: [b.first(), b.last()],
        segments: [a, b, d],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ls(v: &[(f64, f64)]) -> LineStringM {
        LineStringM::new(v.iter().map(|&(x, y)| PointM::new(x, y)).collect()).unwrap()
    }

    #[test]
    fn straight_street_candidates() {
        let extent = ls(&[(0.0, 0.0), (50.0, 0.0)]);
        let left = ls(&[(-10.0, 4.0), (110.0, 4.0)]);
        let right = ls(&[(-10.0, -4.0), (110.0, -4.0)]);
        let c = generate_crossing_candidates(&extent, &[&left], &[&right], 1.0, 25.0).unwrap();
        assert_eq!(c.len(), 51);
        for (i, x) in c.iter().enumerate() {
            assert_eq!(x.dist_to_intersection, i as f64);
            assert!((x.length - 8.0).abs() < 1e-12);
            assert!(x.angle_dev.abs() < 1e-9);
            assert_eq!(x.geometry.points().len(), 2);
        }
        assert_eq!(c[10].dist_to_intersection, 10.0);
        let best = select_best_crossing(&c, &CrossingCostWeights::default()).unwrap();
        assert_eq!(c[best].anchor_s, 0.0);
    }

    #[test]
    fn missing_side_has_no_candidates() {
        let extent = ls(&[(0.0, 0.0), (50.0, 0.0)]);
        let left = ls(&[(0.0, 4.0), (50.0, 4.0)]);
        assert!(matches!(
            generate_crossing_candidates(&extent, &[&left], &[], 1.0, 25.0),
            Err(PedError::NoCandidates(_))
        ));
        let far = ls(&[(0.0, -40.0), (50.0, -40.0)]);
        assert!(matches!(
            generate_crossing_candidates(&extent, &[&left], &[&far], 1.0, 25.0),
            Err(PedError::NoCandidates(_))
        ));
        assert!(matches!(
            generate_crossing_candidates(&extent, &[&left], &[&far], 0.0, 25.0),
            Err(PedError::InvalidStep(_))
        ));
    }

    #[test]
    fn known_crossing_projects_to_both_sides() {
        let left = ls(&[(0.0, 4.0), (50.0, 4.0)]);
        let right = ls(&[(0.0, -4.0), (50.0, -4.0)]);
        let c = project_known_crossing(PointM::new(12.0, 0.5), &[&left], &[&right], None, 25.0)
            .unwrap();
        assert_eq!(c.geometry.first(), PointM::new(12.0, 4.0));
        assert_eq!(c.geometry.last(), PointM::new(12.0, -4.0));
        let on_left =
            project_known_crossing(PointM::new(7.0, 4.0), &[&left], &[&right], None, 25.0).unwrap();
        assert_eq!(on_left.geometry.first(), PointM::new(7.0, 4.0));
        assert!(project_known_crossing(PointM::new(7.0, 4.0), &[], &[&right], None, 25.0).is_err());
    }

    #[test]
    fn split_fractions() {
        let c = ls(&[(10.0, -4.0), (10.0, 4.0)]);
        let s = split_crossing(&c, (0.25, 0.75)).unwrap();
        assert_eq!(s.curbs, [PointM::new(10.0, -2.0), PointM::new(10.0, 2.0)]);
        assert!(matches!(
            split_crossing(&c, (0.5, 0.5)),
            Err(PedError::InvalidFractions(..))
        ));
        // curved, 12 m long
        let bent = ls(&[(0.0, 0.0), (6.0, 0.0), (6.0, 6.0)]);
        let s = split_crossing(&bent, (1.0 / 3.0, 2.0 / 3.0)).unwrap();
        assert!(s.curbs[0].dist(PointM::new(4.0, 0.0)) < 1e-12);
        assert!(s.curbs[1].dist(PointM::new(6.0, 2.0)) < 1e-12);
        assert!((s.segments.iter().map(|x| x.length()).sum::<f64>() - 12.0).abs() < 1e-12);
    }

    #[test]
    fn weights_validated() {
        let extent = ls(&[(0.0, 0.0), (5.0, 0.0)]);
        let left = ls(&[(0.0, 4.0), (5.0, 4.0)]);
        let right = ls(&[(0.0, -4.0), (5.0, -4.0)]);
        let c = generate_crossing_candidates(&extent, &[&left], &[&right], 1.0, 25.0).unwrap();
        let zero = CrossingCostWeights {
            w_dist: 0.0,
            w_len: 0.0,
            w_ang: 0.0,
        };
        assert!(matches!(
            select_best_crossing(&c, &zero),
            Err(PedError::InvalidWeights)
        ));
        assert!(matches!(
            select_best_crossing(&[], &CrossingCostWeights::default()),
            Err(PedError::EmptyCandidates)
        ));
    }
}
