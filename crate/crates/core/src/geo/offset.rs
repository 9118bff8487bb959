use serde::{Deserialize, Serialize};

use super::{line_intersection, GeoError, LineStringM, PointM};

/// Miter joins longer than this multiple of the offset distance are beveled.
pub const MITER_LIMIT: f64 = 4.0;

const PARALLEL_EPS: f64 = 1e-10;

/// Side of a directed line, relative to its direction of travel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    /// +1 for left, -1 for right.
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }
}

/// Offsets `line` by `dist` meters to one side with miter joins (limit
/// [`MITER_LIMIT`], bevel beyond it).
pub fn offset_linestring(
    line: &LineStringM,
    dist: f64,
    side: Side,
) -> Result<LineStringM, GeoError> {
    if !(dist >= 0.0) || !dist.is_finite() {
        return Err(GeoError::DegenerateGeometry(format!(
            "invalid offset distance {dist}"
        )));
    }
    if dist == 0.0 {
        return Ok(line.clone());
    }
    let pts = offset_polyline(line.points(), dist * side.sign())?;
    LineStringM::new_dedup(pts, 0.0)
}

/// Offsets an open polyline by a signed distance (positive = left).
///
/// Inner joins use the intersection of adjacent offset segments; outer joins
/// use a miter point or, past the miter limit, a bevel. Fails when an inner
/// join swallows a whole segment (the offset runs backwards).
pub fn offset_polyline(points: &[PointM], d: f64) -> Result<Vec<PointM>, GeoError> {
    if points.len() < 2 {
        return Err(GeoError::DegenerateGeometry(
            "polyline needs 2 vertices".into(),
        ));
    }
    let n_seg = points.len() - 1;
    let dirs: Vec<PointM> = points
        .windows(2)
        .map(|w| (w[1] - w[0]).normalized())
        .collect();
    let shift = |i: usize| dirs[i].perp() * d;

    let mut out = vec![points[0] + shift(0)];
    // start/end of each segment's share of the output, for the collapse check
    let mut seg_start = vec![out[0]];
    let mut seg_end = Vec::with_capacity(n_seg);

    for j in 1..n_seg {
        let v = points[j];
        let (u0, u1) = (dirs[j - 1], dirs[j]);
        let p_end = v + shift(j - 1);
        let q_start = v + shift(j);
        let cross = u0.cross(u1);
        let dot = u0.dot(u1);
        if cross.abs() < PARALLEL_EPS && dot > 0.0 {
            out.push(p_end);
            seg_end.push(p_end);
            seg_start.push(p_end);
            continue;
        }
        let inner = cross * d > 0.0;
        let miter = line_intersection(p_end, u0, q_start, u1).map(|(s, _)| p_end + u0 * s);
        match miter {
            Some(m) if inner => {
                out.push(m);
                seg_end.push(m);
                seg_start.push(m);
            }
            Some(m) if miter_ratio(u0, u1) <= MITER_LIMIT => {
                out.push(m);
                seg_end.push(m);
                seg_start.push(m);
            }
            _ => {
                out.push(p_end);
                out.push(q_start);
                seg_end.push(p_end);
                seg_start.push(q_start);
            }
        }
    }
    let last = points[n_seg] + shift(n_seg - 1);
    out.push(last);
    seg_end.push(last);

    for i in 0..n_seg {
        if (seg_end[i] - seg_start[i]).dot(dirs[i]) <= 0.0 {
            return Err(GeoError::DegenerateGeometry(format!(
                "offset of segment {i} collapsed at distance {}",
                d.abs()
            )));
        }
    }
    Ok(out)
}

/// Ratio of miter length to offset distance for a turn from `u0` to `u1`.
pub(crate) fn miter_ratio(u0: PointM, u1: PointM) -> f64 {
    let cos_theta = u0.dot(u1).clamp(-1.0, 1.0);
    let half = ((1.0 + cos_theta) / 2.0).sqrt();
    if half <= 0.0 {
        f64::INFINITY
    } else {
        1.0 / half
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ls(v: &[(f64, f64)]) -> LineStringM {
        LineStringM::new(v.iter().map(|&(x, y)| PointM::new(x, y)).collect()).unwrap()
    }

    fn assert_pts(got: &LineStringM, want: &[(f64, f64)]) {
        assert_eq!(got.points().len(), want.len(), "{got:?}");
        for (g, w) in got.points().iter().zip(want) {
            assert!(
                (g.x - w.0).abs() < 1e-9 && (g.y - w.1).abs() < 1e-9,
                "{g:?} vs {w:?}"
            );
        }
    }

    #[test]
    fn straight_left() {
        let out = offset_linestring(&ls(&[(0.0, 0.0), (10.0, 0.0)]), 2.0, Side::Left).unwrap();
        assert_pts(&out, &[(0.0, 2.0), (10.0, 2.0)]);
    }

    #[test]
    fn zero_offset_is_identity() {
        let l = ls(&[(0.0, 0.0), (3.0, 1.0), (5.0, -2.0)]);
        assert_eq!(offset_linestring(&l, 0.0, Side::Right).unwrap(), l);
    }

    #[test]
    fn inner_miter_at_left_turn() {
        let out = offset_linestring(
            &ls(&[(0.0, 0.0), (10.0, 0.0), (10.0, 10.0)]),
            2.0,
            Side::Left,
        )
        .unwrap();
        assert_pts(&out, &[(0.0, 2.0), (8.0, 2.0), (8.0, 10.0)]);
    }

    #[test]
    fn outer_miter_at_left_turn() {
        let out = offset_linestring(
            &ls(&[(0.0, 0.0), (10.0, 0.0), (10.0, 10.0)]),
            2.0,
            Side::Right,
        )
        .unwrap();
        assert_pts(&out, &[(0.0, -2.0), (12.0, -2.0), (12.0, 10.0)]);
    }

    #[test]
    fn sharp_outer_turn_is_beveled() {
        // ~170 degree turn: miter ratio ~ 11.5 > 4
        let l = ls(&[(0.0, 0.0), (10.0, 0.0), (0.0, 1.75)]);
        let out = offset_linestring(&l, 1.0, Side::Right).unwrap();
        assert_eq!(out.points().len(), 4);
    }

    #[test]
    fn inner_offset_collapse_is_an_error() {
        let l = ls(&[(0.0, 0.0), (10.0, 0.0), (10.0, 1.0), (0.0, 1.0)]);
        assert!(matches!(
            offset_linestring(&l, 2.0, Side::Left),
            Err(GeoError::DegenerateGeometry(_))
        ));
    }
}
