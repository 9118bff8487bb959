use std::f64::consts::TAU;

use serde::Serialize;

use super::blocks::Block;
use super::regime::SidewalkRegime;
use super::PedError;
use crate::geo::{
    arc, line_intersection, miter_ratio, offset_polyline, segment_intersection, LineStringM,
    PointM, Side, DEFAULT_ARC_SEGMENTS, MITER_LIMIT,
};
use crate::net::{EdgeId, HalfEdge, NodeId, StreetNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct SidewalkOptions {
    pub default_offset: f64,
    /// Also draw sidewalks around the unbounded face of each component.
    pub emit_outer: bool,
}

impl Default for SidewalkOptions {
    fn default() -> Self {
        Self {
            default_offset: 4.0,
            emit_outer: true,
        }
    }
}

/// One continuous sidewalk along a block boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Sidewalk {
    pub geometry: LineStringM,
    /// Street sides this sidewalk runs along, in order.
    pub sides: Vec<(EdgeId, Side)>,
    pub block: usize,
    /// Street nodes at which the sidewalk starts and ends.
    pub start_node: NodeId,
    pub end_node: NodeId,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SidewalkWarning {
    DegenerateBlock {
        block: usize,
        perimeter: f64,
        offset: f64,
    },
    CollapsedPiece {
        block: usize,
        edge: usize,
    },
}

impl std::fmt::Display for SidewalkWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::DegenerateBlock {
                block,
                perimeter,
                offset,
            } => write!(
                f,
                "block {block}: perimeter {perimeter:.2} m too short for offset {offset} m"
            ),
            Self::CollapsedPiece { block, edge } => {
                write!(f, "block {block}: sidewalk along street {edge} collapsed")
            }
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SidewalkSet {
    pub sidewalks: Vec<Sidewalk>,
    pub warnings: Vec<SidewalkWarning>,
}

impl SidewalkSet {
    /// Index of the sidewalk running along `(edge, side)`.
    pub fn find(&self, edge: EdgeId, side: Side) -> Option<usize> {
        self.sidewalks
            .iter()
            .position(|s| s.sides.contains(&(edge, side)))
    }

    pub fn total_length(&self) -> f64 {
        self.sidewalks.iter().map(|s| s.geometry.length()).sum()
    }
}

/// Street side (relative to digitized direction) lying right of travel.
pub fn right_side_of(h: HalfEdge) -> Side {
    if h.forward {
        Side::Right
    } else {
        Side::Left
    }
}

/// Offsets each block boundary toward the block interior, trims or joins the
/// per-street pieces at their junctions and merges pieces that meet at
/// pass-through (degree-2) street nodes.
pub fn generate_sidewalks(
    g: &StreetNetwork,
    blocks: &[Block],
    opts: &SidewalkOptions,
    regime: &dyn SidewalkRegime,
) -> Result<SidewalkSet, PedError> {
    if !(opts.default_offset > 0.0) || !opts.default_offset.is_finite() {
        return Err(PedError::InvalidOffset(opts.default_offset));
    }
    let degrees = g.degrees();
    let mut out = SidewalkSet::default();
    for (bi, block) in blocks.iter().enumerate() {
        if block.is_outer && !opts.emit_outer {
            continue;
        }
        block_sidewalks(g, &degrees, bi, block, opts, regime, &mut out);
    }
    Ok(out)
}

#[derive(Clone, Copy, PartialEq)]
enum Turn {
    Reverse,
    Straight,
    Inner,
    Outer,
}

fn block_sidewalks(
    g: &StreetNetwork,
    degrees: &[usize],
    bi: usize,
    block: &Block,
    opts: &SidewalkOptions,
    regime: &dyn SidewalkRegime,
    out: &mut SidewalkSet,
) {
    let hs = &block.half_edges;
    let k = hs.len();
    let mut present: Vec<bool> = hs
        .iter()
        .map(|&h| regime.present(&g.edge(h.edge).sidewalk, right_side_of(h)))
        .collect();
    if !present.iter().any(|&p| p) {
        return;
    }
    let dist: Vec<f64> = hs
        .iter()
        .map(|&h| {
            g.edge(h.edge)
                .sidewalk
                .offset
                .unwrap_or(opts.default_offset)
        })
        .collect();
    let perimeter = block.perimeter(g);
    let max_d = dist.iter().copied().fold(0.0, f64::max);
    if perimeter < 2.0 * max_d {
        out.warnings.push(SidewalkWarning::DegenerateBlock {
            block: bi,
            perimeter,
            offset: max_d,
        });
        return;
    }

    let streets: Vec<Vec<PointM>> = hs
        .iter()
        .map(|&h| g.half_edge_geometry(h).into_points())
        .collect();
    let mut pieces = Vec::with_capacity(k);
    for i in 0..k {
        match offset_polyline(&streets[i], -dist[i]) {
            Ok(p) => pieces.push(p),
            Err(_) => {
                out.warnings.push(SidewalkWarning::DegenerateBlock {
                    block: bi,
                    perimeter,
                    offset: dist[i],
                });
                return;
            }
        }
    }

    // junction j joins piece j to piece (j + 1) % k
    let mut turns = Vec::with_capacity(k);
    for j in 0..k {
        let j1 = (j + 1) % k;
        let turn = if hs[j1] == hs[j].twin() {
            Turn::Reverse
        } else {
            let a = &streets[j];
            let b = &streets[j1];
            let u_in = (a[a.len() - 1] - a[a.len() - 2]).normalized();
            let u_out = (b[1] - b[0]).normalized();
            let cross = u_in.cross(u_out);
            if cross.abs() < 1e-9 && u_in.dot(u_out) > 0.0 {
                Turn::Straight
            } else if cross < 0.0 {
                Turn::Inner
            } else {
                Turn::Outer
            }
        };
        turns.push(turn);
    }

    for j in 0..k {
        let j1 = (j + 1) % k;
        let both = present[j] && present[j1];
        let v = g.node(g.head(hs[j])).expect("valid node").pos;
        if j1 == j {
            // a single-edge loop block: close on itself
            let piece = &mut pieces[j];
            let (a, b) = (piece[piece.len() - 1], piece[0]);
            if a != b {
                let mid = a.lerp(b, 0.5);
                piece.push(mid);
                piece[0] = mid;
            }
            continue;
        }
        let (left, right) = split_pair(&mut pieces, j, j1);
        match turns[j] {
            Turn::Reverse if both => join_round(left, right, v),
            Turn::Reverse => {}
            Turn::Straight => {
                let (a, b) = (*left.last().unwrap(), right[0]);
                if a.dist(b) < 1e-9 {
                    right[0] = a;
                } else if both {
                    join_bevel(left, right);
                }
            }
            Turn::Inner => trim_inner(left, right),
            Turn::Outer if both => join_outer(left, right),
            Turn::Outer => {}
        }
    }

    for i in 0..k {
        if !present[i] {
            continue;
        }
        if !piece_is_valid(&pieces[i], &streets[i]) {
            out.warnings.push(SidewalkWarning::CollapsedPiece {
                block: bi,
                edge: hs[i].edge.0,
            });
            present[i] = false;
        }
    }

    let mergeable: Vec<bool> = (0..k)
        .map(|j| {
            let j1 = (j + 1) % k;
            j1 != j
                && present[j]
                && present[j1]
                && turns[j] != Turn::Reverse
                && degrees[g.head(hs[j]).0] == 2
        })
        .collect();

    let start = match mergeable.iter().position(|&m| !m) {
        Some(j) => (j + 1) % k,
        None => 0,
    };
    let mut i = start;
    let mut visited = 0;
    while visited < k {
        if !present[i] {
            i = (i + 1) % k;
            visited += 1;
            continue;
        }
        let first = i;
        let mut pts = pieces[i].clone();
        let mut sides = vec![(hs[i].edge, right_side_of(hs[i]))];
        visited += 1;
        while mergeable[i] && visited < k {
            i = (i + 1) % k;
            visited += 1;
            pts.extend_from_slice(&pieces[i][1..]);
            sides.push((hs[i].edge, right_side_of(hs[i])));
        }
        let last = i;
        if let Ok(geometry) = LineStringM::new_dedup(pts, 1e-9) {
            out.sidewalks.push(Sidewalk {
                geometry,
                sides,
                block: bi,
                start_node: g.tail(hs[first]),
                end_node: g.head(hs[last]),
            });
        }
        i = (i + 1) % k;
    }
}

fn split_pair(
    pieces: &mut [Vec<PointM>],
    j: usize,
    j1: usize,
) -> (&mut Vec<PointM>, &mut Vec<PointM>) {
    if j < j1 {
        let (lo, hi) = pieces.split_at_mut(j1);
        (&mut lo[j], &mut hi[0])
    } else {
        let (lo, hi) = pieces.split_at_mut(j);
        (&mut hi[0], &mut lo[j1])
    }
}

/// Cuts both pieces at their first mutual crossing near the junction.
fn trim_inner(a: &mut Vec<PointM>, b: &mut Vec<PointM>) {
    for p in (0..a.len() - 1).rev() {
        for q in 0..b.len() - 1 {
            if let Some((s, _)) = segment_intersection(a[p], a[p + 1], b[q], b[q + 1]) {
                let x = a[p].lerp(a[p + 1], s);
                a.truncate(p + 1);
                a.push(x);
                b.drain(..=q);
                b.insert(0, x);
                return;
            }
        }
    }
    // offsets never meet: extend to the line intersection and let the
    // validity check decide whether anything is left
    let (a0, a1) = (a[a.len() - 2], a[a.len() - 1]);
    let (b0, b1) = (b[0], b[1]);
    if let Some((s, _)) = line_intersection(a0, a1 - a0, b0, b1 - b0) {
        let x = a0 + (a1 - a0) * s;
        *a.last_mut().unwrap() = x;
        b[0] = x;
    }
}

fn join_outer(a: &mut Vec<PointM>, b: &mut Vec<PointM>) {
    let (a0, a1) = (a[a.len() - 2], a[a.len() - 1]);
    let (b0, b1) = (b[0], b[1]);
    let (ua, ub) = ((a1 - a0).normalized(), (b1 - b0).normalized());
    if miter_ratio(ua, ub) <= MITER_LIMIT {
        if let Some((s, _)) = line_intersection(a1, ua, b0, ub) {
            let x = a1 + ua * s;
            *a.last_mut().unwrap() = x;
            b[0] = x;
            return;
        }
    }
    join_bevel(a, b);
}

fn join_bevel(a: &mut Vec<PointM>, b: &mut Vec<PointM>) {
    let mid = a[a.len() - 1].lerp(b[0], 0.5);
    a.push(mid);
    b.insert(0, mid);
}

/// Wraps a dead end with a counter-clockwise arc around `v`, split at its
/// midpoint between the two pieces.
fn join_round(a: &mut Vec<PointM>, b: &mut Vec<PointM>, v: PointM) {
    let (pa, pb) = (a[a.len() - 1], b[0]);
    let r = (pa.dist(v) + pb.dist(v)) / 2.0;
    let a0 = (pa - v).angle();
    let mut sweep = ((pb - v).angle() - a0).rem_euclid(TAU);
    if sweep == 0.0 {
        sweep = TAU;
    }
    let half = sweep / 2.0;
    let mid = v + PointM::new((a0 + half).cos(), (a0 + half).sin()) * r;
    let mut first = arc(v, r, a0, half, DEFAULT_ARC_SEGMENTS, true);
    let mut second = arc(v, r, a0 + half, half, DEFAULT_ARC_SEGMENTS, true);
    *first.last_mut().unwrap() = mid;
    second[0] = mid;
    *second.last_mut().unwrap() = pb;
    a.extend_from_slice(&first[1..]);
    second.pop();
    second.extend_from_slice(b);
    *b = second;
}

fn piece_is_valid(piece: &[PointM], street: &[PointM]) -> bool {
    let Ok(line) = LineStringM::new_dedup(piece.to_vec(), 1e-9) else {
        return false;
    };
    if line.length() < 1e-6 {
        return false;
    }
    let Ok(street) = LineStringM::new(street.to_vec()) else {
        return false;
    };
    if street.first() == street.last() {
        return true;
    }
    street.project(line.first()).s < street.project(line.last()).s
}

#[cfg(test)]
mod tests {
    use super::super::blocks::enumerate_blocks;
    use super::super::regime::{FullRegime, MetadataRegime};
    use super::*;
    use crate::geo::{LocalProjection, LonLat};
    use crate::net::network_from_lines;
    use std::collections::BTreeMap;

    type Line<'a> = (&'a [(f64, f64)], &'a [(&'a str, &'a str)]);

    fn net(lines: &[Line]) -> StreetNetwork {
        network_from_lines(
            LocalProjection::new(LonLat::new(0.0, 0.0)),
            lines
                .iter()
                .map(|(l, tags)| {
                    (
                        LineStringM::new(l.iter().map(|&(x, y)| PointM::new(x, y)).collect())
                            .unwrap(),
                        tags.iter()
                            .map(|(k, v)| (k.to_string(), v.to_string()))
                            .collect::<BTreeMap<_, _>>(),
                    )
                })
                .collect(),
        )
        .unwrap()
    }

    fn square() -> StreetNetwork {
        net(&[
            (&[(0.0, 0.0), (100.0, 0.0)], &[]),
            (&[(100.0, 0.0), (100.0, 100.0)], &[]),
            (&[(100.0, 100.0), (0.0, 100.0)], &[]),
            (&[(0.0, 100.0), (0.0, 0.0)], &[]),
        ])
    }

    #[test]
    fn square_block_inner_ring() {
        let g = square();
        let blocks: Vec<Block> = enumerate_blocks(&g)
            .into_iter()
            .filter(|b| !b.is_outer)
            .collect();
        let set =
            generate_sidewalks(&g, &blocks, &SidewalkOptions::default(), &FullRegime).unwrap();
        // the corners are degree-2 street nodes, so the ring is one sidewalk
        assert_eq!(set.sidewalks.len(), 1);
        assert!(
            (set.total_length() - 368.0).abs() < 1e-9,
            "{}",
            set.total_length()
        );
        for s in &set.sidewalks {
            for p in s.geometry.points() {
                let inside = (4.0..=96.0).contains(&p.x) && (4.0..=96.0).contains(&p.y);
                assert!(inside, "{p:?}");
            }
        }
    }

    #[test]
    fn outer_face_sidewalks_are_optional() {
        let g = square();
        let blocks = enumerate_blocks(&g);
        let with =
            generate_sidewalks(&g, &blocks, &SidewalkOptions::default(), &FullRegime).unwrap();
        let opts = SidewalkOptions {
            emit_outer: false,
            ..Default::default()
        };
        let without = generate_sidewalks(&g, &blocks, &opts, &FullRegime).unwrap();
        assert_eq!(with.sidewalks.len(), 2);
        assert_eq!(without.sidewalks.len(), 1);
        // outer ring: 108 x 108 square
        let outer = with.total_length() - without.total_length();
        assert!((outer - 432.0).abs() < 1e-9, "{outer}");
    }

    #[test]
    fn zero_offset_rejected() {
        let g = square();
        let blocks = enumerate_blocks(&g);
        let opts = SidewalkOptions {
            default_offset: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            generate_sidewalks(&g, &blocks, &opts, &FullRegime),
            Err(PedError::InvalidOffset(_))
        ));
    }

    #[test]
    fn left_tag_gives_one_line_on_the_left() {
        let g = net(&[(&[(0.0, 0.0), (100.0, 0.0)], &[("sidewalk", "left")])]);
        let blocks = enumerate_blocks(&g);
        let set =
            generate_sidewalks(&g, &blocks, &SidewalkOptions::default(), &MetadataRegime).unwrap();
        assert_eq!(set.sidewalks.len(), 1);
        let s = &set.sidewalks[0];
        assert_eq!(s.sides, vec![(EdgeId(0), Side::Left)]);
        assert!(s.geometry.points().iter().all(|p| (p.y - 4.0).abs() < 1e-9));
        assert!((s.geometry.length() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn isolated_street_wraps_dead_ends() {
        let g = net(&[(&[(0.0, 0.0), (100.0, 0.0)], &[])]);
        let blocks = enumerate_blocks(&g);
        let set =
            generate_sidewalks(&g, &blocks, &SidewalkOptions::default(), &FullRegime).unwrap();
        assert_eq!(set.sidewalks.len(), 2);
        // two straight sides plus a half circle of radius 4 at each end
        let expected = 200.0 + 2.0 * std::f64::consts::PI * 4.0;
        assert!(
            (set.total_length() - expected).abs() < 0.1,
            "{}",
            set.total_length()
        );
        let (a, b) = (&set.sidewalks[0].geometry, &set.sidewalks[1].geometry);
        assert_eq!(a.last(), b.first());
        assert_eq!(b.last(), a.first());
    }

    #[test]
    fn pass_through_nodes_are_merged() {
        // a square block whose south side is digitized as two ways
        let g = net(&[
            (&[(0.0, 0.0), (50.0, 0.0)], &[]),
            (&[(50.0, 0.0), (100.0, 0.0)], &[]),
            (&[(100.0, 0.0), (100.0, 100.0)], &[]),
            (&[(100.0, 100.0), (0.0, 100.0)], &[]),
            (&[(0.0, 100.0), (0.0, 0.0)], &[]),
        ]);
        let blocks: Vec<Block> = enumerate_blocks(&g)
            .into_iter()
            .filter(|b| !b.is_outer)
            .collect();
        let set =
            generate_sidewalks(&g, &blocks, &SidewalkOptions::default(), &FullRegime).unwrap();
        // corners are degree 2 as well, so the whole ring merges
        assert_eq!(set.sidewalks.len(), 1);
        let ring = &set.sidewalks[0].geometry;
        assert_eq!(ring.first(), ring.last());
        assert!((ring.length() - 368.0).abs() < 1e-9);
    }

    #[test]
    fn tagged_offset_is_used() {
        let g = net(&[(
            &[(0.0, 0.0), (100.0, 0.0)],
            &[("sidewalk", "right"), ("sidewalk_offset", "6")],
        )]);
        let blocks = enumerate_blocks(&g);
        let set =
            generate_sidewalks(&g, &blocks, &SidewalkOptions::default(), &MetadataRegime).unwrap();
        assert_eq!(set.sidewalks.len(), 1);
        assert!(set.sidewalks[0]
            .geometry
            .points()
            .iter()
            .all(|p| (p.y + 6.0).abs() < 1e-9));
    }

    #[test]
    fn tiny_block_is_degenerate() {
        let g = net(&[
            (&[(0.0, 0.0), (2.0, 0.0)], &[]),
            (&[(2.0, 0.0), (0.0, 1.0)], &[]),
            (&[(0.0, 1.0), (0.0, 0.0)], &[]),
        ]);
        let blocks: Vec<Block> = enumerate_blocks(&g)
            .into_iter()
            .filter(|b| !b.is_outer)
            .collect();
        let set =
            generate_sidewalks(&g, &blocks, &SidewalkOptions::default(), &FullRegime).unwrap();
        assert!(set.sidewalks.is_empty());
        assert!(matches!(
            set.warnings[0],
            SidewalkWarning::DegenerateBlock { .. }
        ));
    }
}
