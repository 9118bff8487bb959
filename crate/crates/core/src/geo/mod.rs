//! Planar geometry kernel.
//!
//! Everything here works in a local metric frame (meters east/north of a
//! projection origin) or, for raster work, in pixel coordinates. Nothing in
//! this module knows about WGS84 except [`projection`].

mod affine;
mod buffer;
mod offset;
pub mod projection;

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

pub use affine::{apply_affine, AffineParams};
pub(crate) use buffer::arc;
pub use buffer::{buffer_geometry, BufferInput, DEFAULT_ARC_SEGMENTS};
pub(crate) use offset::miter_ratio;
pub use offset::{offset_linestring, offset_polyline, Side, MITER_LIMIT};
pub use projection::{LocalProjection, LonLat};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeoError {
    #[error("point ({lon}, {lat}) is {distance_m:.0} m from the projection origin (limit {limit_m:.0} m)")]
    OutOfProjectionRange {
        lon: f64,
        lat: f64,
        distance_m: f64,
        limit_m: f64,
    },
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("invalid buffer radius {0}")]
    InvalidBuffer(f64),
}

/// A point in a planar metric (or pixel) frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PointM {
    pub x: f64,
    pub y: f64,
}

impl PointM {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: PointM) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z component of the 3d cross product; positive when `o` is
    /// counter-clockwise from `self`.
    pub fn cross(self, o: PointM) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: PointM) -> f64 {
        (self - o).norm()
    }

    pub fn normalized(self) -> PointM {
        let n = self.norm();
        PointM::new(self.x / n, self.y / n)
    }

    /// Left-hand normal (rotated 90 degrees counter-clockwise).
    pub fn perp(self) -> PointM {
        PointM::new(-self.y, self.x)
    }

    pub fn lerp(self, o: PointM, t: f64) -> PointM {
        self + (o - self) * t
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }
}

impl Add for PointM {
    type Output = PointM;
    fn add(self, o: PointM) -> PointM {
        PointM::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for PointM {
    type Output = PointM;
    fn sub(self, o: PointM) -> PointM {
        PointM::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for PointM {
    type Output = PointM;
    fn mul(self, k: f64) -> PointM {
        PointM::new(self.x * k, self.y * k)
    }
}

impl Neg for PointM {
    type Output = PointM;
    fn neg(self) -> PointM {
        PointM::new(-self.x, -self.y)
    }
}

/// Closest point to `p` on segment `a`-`b` and its parameter in `[0, 1]`.
pub fn closest_on_segment(p: PointM, a: PointM, b: PointM) -> (PointM, f64) {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return (a, 0.0);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    (a + ab * t, t)
}

pub fn point_segment_distance(p: PointM, a: PointM, b: PointM) -> f64 {
    closest_on_segment(p, a, b).0.dist(p)
}

/// Intersection of the infinite lines `p + s*r` and `q + u*v`, returned as
/// `(s, u)`. `None` for parallel lines.
pub fn line_intersection(p: PointM, r: PointM, q: PointM, v: PointM) -> Option<(f64, f64)> {
    let denom = r.cross(v);
    if denom.abs() < 1e-12 * r.norm().max(1e-300) * v.norm().max(1e-300) {
        return None;
    }
    let qp = q - p;
    Some((qp.cross(v) / denom, qp.cross(r) / denom))
}

/// Proper or touching intersection of two closed segments.
pub fn segment_intersection(a0: PointM, a1: PointM, b0: PointM, b1: PointM) -> Option<(f64, f64)> {
    let (s, u) = line_intersection(a0, a1 - a0, b0, b1 - b0)?;
    const EPS: f64 = 1e-12;
    if (-EPS..=1.0 + EPS).contains(&s) && (-EPS..=1.0 + EPS).contains(&u) {
        Some((s.clamp(0.0, 1.0), u.clamp(0.0, 1.0)))
    } else {
        None
    }
}

/// A polyline with at least two vertices and no repeated consecutive vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<PointM>", into = "Vec<PointM>")]
pub struct LineStringM(Vec<PointM>);

impl TryFrom<Vec<PointM>> for LineStringM {
    type Error = GeoError;
    fn try_from(v: Vec<PointM>) -> Result<Self, GeoError> {
        LineStringM::new(v)
    }
}

impl From<LineStringM> for Vec<PointM> {
    fn from(l: LineStringM) -> Self {
        l.0
    }
}

/// Result of projecting a point onto a polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub point: PointM,
    /// Arc length from the first vertex.
    pub s: f64,
    pub distance: f64,
    pub segment: usize,
}

impl LineStringM {
    pub fn new(points: Vec<PointM>) -> Result<Self, GeoError> {
        if points.len() < 2 {
            return Err(GeoError::DegenerateGeometry(format!(
                "linestring needs at least 2 vertices, got {}",
                points.len()
            )));
        }
        if let Some(p) = points.iter().find(|p| !p.is_finite()) {
            return Err(GeoError::DegenerateGeometry(format!(
                "non-finite vertex {p:?}"
            )));
        }
        if points.windows(2).any(|w| w[0] == w[1]) {
            return Err(GeoError::DegenerateGeometry(
                "repeated consecutive vertex".into(),
            ));
        }
        Ok(Self(points))
    }

    /// Drops repeated consecutive vertices (and near-repeats closer than
    /// `tol`) before validating.
    pub fn new_dedup(points: Vec<PointM>, tol: f64) -> Result<Self, GeoError> {
        let mut out: Vec<PointM> = Vec::with_capacity(points.len());
        for p in points {
            match out.last() {
                Some(q) if q.dist(p) <= tol => {}
                _ => out.push(p),
            }
        }
        // keep the exact final vertex so endpoints stay where callers put them
        Self::new(out)
    }

    pub fn points(&self) -> &[PointM] {
        &self.0
    }

    pub fn into_points(self) -> Vec<PointM> {
        self.0
    }

    pub fn first(&self) -> PointM {
        self.0[0]
    }

    pub fn last(&self) -> PointM {
        self.0[self.0.len() - 1]
    }

    pub fn segments(&self) -> impl Iterator<Item = (PointM, PointM)> + '_ {
        self.0.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn length(&self) -> f64 {
        self.segments().map(|(a, b)| a.dist(b)).sum()
    }

    pub fn reversed(&self) -> LineStringM {
        let mut v = self.0.clone();
        v.reverse();
        LineStringM(v)
    }

    /// Cumulative arc length at each vertex.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.0.len());
        out.push(0.0);
        for (a, b) in self.segments() {
            acc += a.dist(b);
            out.push(acc);
        }
        out
    }

    /// Point at arc length `s`, clamped to the line.
    pub fn point_at(&self, s: f64) -> PointM {
        let (seg, t) = self.locate(s);
        if t <= 0.0 {
            self.0[seg]
        } else if t >= 1.0 {
            self.0[seg + 1]
        } else {
            self.0[seg].lerp(self.0[seg + 1], t)
        }
    }

    /// Unit tangent at arc length `s`.
    pub fn tangent_at(&self, s: f64) -> PointM {
        let (seg, _) = self.locate(s);
        (self.0[seg + 1] - self.0[seg]).normalized()
    }

    fn locate(&self, s: f64) -> (usize, f64) {
        let mut remaining = s.max(0.0);
        let n = self.0.len() - 1;
        for i in 0..n {
            let l = self.0[i].dist(self.0[i + 1]);
            if remaining <= l || i == n - 1 {
                return (
                    i,
                    if l > 0.0 {
                        (remaining / l).min(1.0)
                    } else {
                        0.0
                    },
                );
            }
            remaining -= l;
        }
        unreachable!("linestring has at least one segment")
    }

    /// Portion of the line between arc lengths `s0 < s1`.
    pub fn substring(&self, s0: f64, s1: f64) -> Result<LineStringM, GeoError> {
        let total = self.length();
        let s0 = s0.clamp(0.0, total);
        let s1 = s1.clamp(0.0, total);
        if s1 <= s0 {
            return Err(GeoError::DegenerateGeometry(format!(
                "empty substring [{s0}, {s1}]"
            )));
        }
        let cum = self.cumulative();
        let mut pts = vec![self.point_at(s0)];
        for (i, &c) in cum.iter().enumerate() {
            if c > s0 && c < s1 {
                pts.push(self.0[i]);
            }
        }
        pts.push(self.point_at(s1));
        LineStringM::new_dedup(pts, 1e-12)
    }

    /// Nearest point on the polyline to `p`. Ties resolve to the smallest
    /// arc length.
    pub fn project(&self, p: PointM) -> Projection {
        let mut best = Projection {
            point: self.0[0],
            s: 0.0,
            distance: f64::INFINITY,
            segment: 0,
        };
        let mut acc = 0.0;
        for (i, (a, b)) in self.segments().enumerate() {
            let (q, t) = closest_on_segment(p, a, b);
            let d = q.dist(p);
            let l = a.dist(b);
            if d < best.distance - 1e-12 {
                best = Projection {
                    point: q,
                    s: acc + t * l,
                    distance: d,
                    segment: i,
                };
            }
            acc += l;
        }
        best
    }

    pub fn distance_to(&self, p: PointM) -> f64 {
        self.project(p).distance
    }

    /// Splits the line at the given arc lengths, which must be strictly inside
    /// `(0, length)` and increasing.
    pub fn split_at(&self, cuts: &[f64]) -> Result<Vec<LineStringM>, GeoError> {
        let total = self.length();
        let mut bounds = Vec::with_capacity(cuts.len() + 2);
        bounds.push(0.0);
        bounds.extend_from_slice(cuts);
        bounds.push(total);
        bounds
            .windows(2)
            .map(|w| self.substring(w[0], w[1]))
            .collect()
    }

    /// Returns the line with its endpoints replaced, keeping interior vertices.
    pub fn with_endpoints(&self, start: PointM, end: PointM) -> Result<LineStringM, GeoError> {
        let mut v = self.0.clone();
        v[0] = start;
        let n = v.len();
        v[n - 1] = end;
        LineStringM::new_dedup(v, 0.0)
    }
}

/// Shoelace signed area of an open or closed ring; positive when CCW.
pub fn signed_area(ring: &[PointM]) -> f64 {
    if ring.len() < 3 {
        return 0.0;
    }
    let n = ring.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        acc += a.cross(b);
    }
    acc / 2.0
}

/// A simple polygon. The ring is stored closed (first == last) and oriented
/// counter-clockwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolygonM {
    ring: Vec<PointM>,
}

impl PolygonM {
    /// Builds a polygon from a ring given open or closed, in either orientation.
    pub fn new(mut ring: Vec<PointM>) -> Result<Self, GeoError> {
        if ring.len() >= 2 && ring[0] == ring[ring.len() - 1] {
            ring.pop();
        }
        ring.dedup();
        if ring.len() < 3 {
            return Err(GeoError::DegenerateGeometry(format!(
                "polygon ring needs at least 3 distinct vertices, got {}",
                ring.len()
            )));
        }
        if ring.iter().any(|p| !p.is_finite()) {
            return Err(GeoError::DegenerateGeometry(
                "non-finite polygon vertex".into(),
            ));
        }
        let area = signed_area(&ring);
        if area == 0.0 || !area.is_finite() {
            return Err(GeoError::DegenerateGeometry("zero-area polygon".into()));
        }
        if area < 0.0 {
            ring.reverse();
        }
        let first = ring[0];
        ring.push(first);
        Ok(Self { ring })
    }

    /// Closed, CCW ring.
    pub fn ring(&self) -> &[PointM] {
        &self.ring
    }

    /// Ring without the duplicated closing vertex.
    pub fn vertices(&self) -> &[PointM] {
        &self.ring[..self.ring.len() - 1]
    }

    pub fn area(&self) -> f64 {
        signed_area(self.vertices())
    }

    pub fn perimeter(&self) -> f64 {
        self.ring.windows(2).map(|w| w[0].dist(w[1])).sum()
    }

    pub fn centroid(&self) -> PointM {
        let v = self.vertices();
        let n = v.len();
        let mut cx = 0.0;
        let mut cy = 0.0;
        let mut a = 0.0;
        for i in 0..n {
            let p = v[i];
            let q = v[(i + 1) % n];
            let c = p.cross(q);
            a += c;
            cx += (p.x + q.x) * c;
            cy += (p.y + q.y) * c;
        }
        PointM::new(cx / (3.0 * a), cy / (3.0 * a))
    }

    /// Axis-aligned bounds `(min, max)`.
    pub fn bounds(&self) -> (PointM, PointM) {
        bounds_of(self.vertices())
    }

    /// Even-odd point-in-polygon.
    pub fn contains(&self, p: PointM) -> bool {
        point_in_ring(p, self.vertices())
    }

    /// True when no two non-adjacent edges intersect.
    pub fn is_simple(&self) -> bool {
        let v = self.vertices();
        let n = v.len();
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                if segment_intersection(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]).is_some() {
                    return false;
                }
            }
        }
        true
    }
}

pub fn bounds_of(pts: &[PointM]) -> (PointM, PointM) {
    let mut lo = PointM::new(f64::INFINITY, f64::INFINITY);
    let mut hi = PointM::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in pts {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    (lo, hi)
}

/// Even-odd crossing test against an open ring (last vertex connects back to
/// the first).
pub fn point_in_ring(p: PointM, ring: &[PointM]) -> bool {
    let n = ring.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let a = ring[i];
        let b = ring[j];
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Convex hull (Andrew's monotone chain), CCW, without the closing vertex.
pub fn convex_hull(points: &[PointM]) -> Vec<PointM> {
    let mut pts: Vec<PointM> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<PointM> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 {
            let n = lower.len();
            if (lower[n - 1] - lower[n - 2]).cross(p - lower[n - 2]) <= 0.0 {
                lower.pop();
            } else {
                break;
            }
        }
        lower.push(p);
    }
    let mut upper: Vec<PointM> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 {
            let n = upper.len();
            if (upper[n - 1] - upper[n - 2]).cross(p - upper[n - 2]) <= 0.0 {
                upper.pop();
            } else {
                break;
            }
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}
