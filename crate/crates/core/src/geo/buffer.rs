use std::f64::consts::TAU;

use super::{line_intersection, GeoError, LineStringM, PointM, PolygonM};

/// Segments used to approximate a full circle.
pub const DEFAULT_ARC_SEGMENTS: usize = 64;

#[derive(Debug, Clone)]
pub enum BufferInput<'a> {
    Point(PointM),
    Line(&'a LineStringM),
}

/// Polygonal approximation of the Minkowski sum of `g` with a disc of
/// `radius`, with round caps and round outer joins.
pub fn buffer_geometry(g: BufferInput<'_>, radius: f64) -> Result<PolygonM, GeoError> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(GeoError::InvalidBuffer(radius));
    }
    match g {
        BufferInput::Point(c) => {
            PolygonM::new(arc(c, radius, 0.0, TAU, DEFAULT_ARC_SEGMENTS, false))
        }
        BufferInput::Line(l) => {
            let fwd = l.points();
            let rev: Vec<PointM> = fwd.iter().rev().copied().collect();
            let mut ring = Vec::new();
            ring.extend(left_side(fwd, radius));
            ring.extend(cap(&fwd[fwd.len() - 2..], radius));
            ring.extend(left_side(&rev, radius));
            ring.extend(cap(&rev[rev.len() - 2..], radius));
            PolygonM::new(ring)
        }
    }
}

/// Points on a circle from angle `start` sweeping `sweep` radians. The start
/// point is always included, the end point only with `include_end`.
pub(crate) fn arc(
    center: PointM,
    r: f64,
    start: f64,
    sweep: f64,
    per_circle: usize,
    include_end: bool,
) -> Vec<PointM> {
    let steps = ((sweep.abs() / TAU) * per_circle as f64).ceil().max(1.0) as usize;
    let last = if include_end { steps } else { steps - 1 };
    (0..=last)
        .map(|i| {
            let a = start + sweep * i as f64 / steps as f64;
            center + PointM::new(a.cos(), a.sin()) * r
        })
        .collect()
}

/// Left offset of an open polyline with round outer joins; inner joins use
/// the offset-segment intersection when it lies on both segments.
fn left_side(pts: &[PointM], r: f64) -> Vec<PointM> {
    let dirs: Vec<PointM> = pts.windows(2).map(|w| (w[1] - w[0]).normalized()).collect();
    let mut out = vec![pts[0] + dirs[0].perp() * r];
    for j in 1..dirs.len() {
        let v = pts[j];
        let (u0, u1) = (dirs[j - 1], dirs[j]);
        let cross = u0.cross(u1);
        let p_end = v + u0.perp() * r;
        let q_start = v + u1.perp() * r;
        if cross > 1e-12 {
            // inner (left turn on the left side)
            let seg0 = pts[j - 1] + u0.perp() * r;
            let seg1_end = pts[j + 1] + u1.perp() * r;
            match line_intersection(seg0, p_end - seg0, q_start, seg1_end - q_start) {
                Some((s, u)) if (0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&u) => {
                    out.push(seg0 + (p_end - seg0) * s);
                }
                _ => {
                    out.push(p_end);
                    out.push(v);
                    out.push(q_start);
                }
            }
        } else if cross < -1e-12 || u0.dot(u1) < 0.0 {
            let a0 = u0.perp().angle();
            let mut sweep = u1.perp().angle() - a0;
            while sweep > 0.0 {
                sweep -= TAU;
            }
            out.extend(arc(v, r, a0, sweep, super::DEFAULT_ARC_SEGMENTS, true));
        } else {
            out.push(p_end);
        }
    }
    let n = pts.len();
    out.push(pts[n - 1] + dirs[n - 2].perp() * r);
    out
}

/// Half circle around the end of the segment `last2[0] -> last2[1]`, from the
/// left normal clockwise to the right normal; endpoints excluded.
fn cap(last2: &[PointM], r: f64) -> Vec<PointM> {
    let u = (last2[1] - last2[0]).normalized();
    let a0 = u.perp().angle();
    let mut pts = arc(last2[1], r, a0, -TAU / 2.0, DEFAULT_ARC_SEGMENTS, true);
    pts.pop();
    pts.remove(0);
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn disc_area_within_one_percent() {
        let poly = buffer_geometry(BufferInput::Point(PointM::new(3.0, -1.0)), 2.0).unwrap();
        let analytic = PI * 4.0;
        assert!((poly.area() - analytic).abs() / analytic < 0.01);
        assert!(poly.is_simple());
    }

    #[test]
    fn capsule_area_within_one_percent() {
        let l = LineStringM::new(vec![PointM::new(0.0, 0.0), PointM::new(10.0, 0.0)]).unwrap();
        let poly = buffer_geometry(BufferInput::Line(&l), 2.0).unwrap();
        let analytic = 40.0 + 4.0 * PI;
        assert!(
            (poly.area() - analytic).abs() / analytic < 0.01,
            "{}",
            poly.area()
        );
        assert!(poly.is_simple());
    }

    #[test]
    fn bent_line_buffer_is_simple_and_sized() {
        let l = LineStringM::new(vec![
            PointM::new(0.0, 0.0),
            PointM::new(20.0, 0.0),
            PointM::new(20.0, 20.0),
        ])
        .unwrap();
        let poly = buffer_geometry(BufferInput::Line(&l), 1.0).unwrap();
        // two capsules (40 + pi each) minus their overlap (1 + 3pi/4)
        let analytic = 79.0 + 1.25 * PI;
        assert!(
            (poly.area() - analytic).abs() / analytic < 0.01,
            "{} vs {analytic}",
            poly.area()
        );
        assert!(poly.is_simple());
    }

    #[test]
    fn non_positive_radius_rejected() {
        let e = buffer_geometry(BufferInput::Point(PointM::default()), 0.0).unwrap_err();
        assert_eq!(e, GeoError::InvalidBuffer(0.0));
        assert!(buffer_geometry(BufferInput::Point(PointM::default()), -1.0).is_err());
    }
}
