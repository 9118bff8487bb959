use std::collections::HashMap;
use std::f64::consts::TAU;

use crate::geo::{signed_area, GeoError, PointM, PolygonM};
use crate::net::{HalfEdge, NodeId, StreetNetwork};

/// A face of the street graph, traced as a closed right-turn walk.
///
/// Bounded faces are traversed clockwise, so the face interior lies to the
/// right of every half-edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub half_edges: Vec<HalfEdge>,
    /// Boundary vertices in traversal order (open ring).
    pub ring: Vec<PointM>,
    pub signed_area: f64,
    /// The unbounded face of its component (counter-clockwise or zero area).
    pub is_outer: bool,
}

impl Block {
    pub fn start_node(&self, g: &StreetNetwork) -> NodeId {
        g.tail(self.half_edges[0])
    }

    pub fn perimeter(&self, g: &StreetNetwork) -> f64 {
        self.half_edges
            .iter()
            .map(|h| g.edge(h.edge).length())
            .sum()
    }

    /// Boundary polygon, if the face has non-zero area.
    pub fn boundary(&self) -> Result<PolygonM, GeoError> {
        PolygonM::new(self.ring.clone())
    }
}

/// Enumerates every face of the (planar, noded) street graph. Each half-edge
/// appears in exactly one block.
pub fn enumerate_blocks(g: &StreetNetwork) -> Vec<Block> {
    let outgoing = g.outgoing_all();
    let angle: HashMap<HalfEdge, f64> = outgoing
        .iter()
        .flatten()
        .map(|&h| (h, g.departure_angle(h)))
        .collect();

    // Right-most turn: smallest counter-clockwise sweep from the reverse
    // bearing, with the U-turn counting as a full turn.
    let next = |h: HalfEdge| -> HalfEdge {
        let v = g.head(h);
        let back = h.twin();
        let base = angle[&back];
        let mut best = back;
        let mut best_sweep = TAU;
        for &o in &outgoing[v.0] {
            if o == back {
                continue;
            }
            let mut sweep = (angle[&o] - base).rem_euclid(TAU);
            if sweep == 0.0 {
                sweep = TAU;
            }
            if sweep < best_sweep {
                best_sweep = sweep;
                best = o;
            }
        }
        best
    };

    let mut used: HashMap<HalfEdge, bool> = HashMap::new();
    let mut blocks = Vec::new();
    for e in g.edges() {
        for forward in [true, false] {
            let start = HalfEdge {
                edge: e.id,
                forward,
            };
            if used.contains_key(&start) {
                continue;
            }
            let mut cycle = Vec::new();
            let mut h = start;
            loop {
                used.insert(h, true);
                cycle.push(h);
                h = next(h);
                if h == start {
                    break;
                }
            }
            let mut ring = Vec::new();
            for &h in &cycle {
                let geom = g.half_edge_geometry(h);
                let pts = geom.points();
                ring.extend_from_slice(&pts[..pts.len() - 1]);
            }
            let area = signed_area(&ring);
            blocks.push(Block {
                half_edges: cycle,
                ring,
                signed_area: area,
                is_outer: area >= 0.0,
            });
        }
    }
    blocks
}

/// Number of connected components (isolated nodes included).
pub fn component_count(g: &StreetNetwork) -> usize {
    let n = g.nodes().len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut comps = n;
    for e in g.edges() {
        let (a, b) = (find(&mut parent, e.from.0), find(&mut parent, e.to.0));
        if a != b {
            parent[a] = b;
            comps -= 1;
        }
    }
    comps
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{LineStringM, LocalProjection, LonLat};
    use crate::net::network_from_lines;
    use std::collections::BTreeMap;

    fn net(lines: &[&[(f64, f64)]]) -> StreetNetwork {
        network_from_lines(
            LocalProjection::new(LonLat::new(0.0, 0.0)),
            lines
                .iter()
                .map(|l| {
                    (
                        LineStringM::new(l.iter().map(|&(x, y)| PointM::new(x, y)).collect())
                            .unwrap(),
                        BTreeMap::new(),
                    )
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn square_has_inner_and_outer_face() {
        let g = net(&[
            &[(0.0, 0.0), (1.0, 0.0)],
            &[(1.0, 0.0), (1.0, 1.0)],
            &[(1.0, 1.0), (0.0, 1.0)],
            &[(0.0, 1.0), (0.0, 0.0)],
        ]);
        let b = enumerate_blocks(&g);
        assert_eq!(b.len(), 2);
        assert_eq!(b.iter().filter(|b| b.is_outer).count(), 1);
        let inner = b.iter().find(|b| !b.is_outer).unwrap();
        assert!((inner.signed_area + 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_squares_sharing_an_edge() {
        let g = net(&[
            &[(0.0, 0.0), (1.0, 0.0)],
            &[(1.0, 0.0), (2.0, 0.0)],
            &[(2.0, 0.0), (2.0, 1.0)],
            &[(2.0, 1.0), (1.0, 1.0)],
            &[(1.0, 1.0), (0.0, 1.0)],
            &[(0.0, 1.0), (0.0, 0.0)],
            &[(1.0, 0.0), (1.0, 1.0)],
        ]);
        assert_eq!(g.nodes().len(), 6);
        assert_eq!(g.edges().len(), 7);
        assert_eq!(enumerate_blocks(&g).len(), 3);
    }

    #[test]
    fn tree_has_one_face() {
        let g = net(&[
            &[(0.0, 0.0), (1.0, 0.0)],
            &[(1.0, 0.0), (2.0, 0.0)],
            &[(1.0, 0.0), (1.0, 1.0)],
        ]);
        let b = enumerate_blocks(&g);
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].half_edges.len(), 6);
        assert!(b[0].is_outer);
    }

    #[test]
    fn block_cycles_are_closed() {
        let g = net(&[
            &[(0.0, 0.0), (1.0, 0.0)],
            &[(1.0, 0.0), (1.0, 1.0)],
            &[(1.0, 1.0), (0.0, 0.0)],
            &[(1.0, 1.0), (2.0, 2.0)],
        ]);
        for b in enumerate_blocks(&g) {
            for w in b.half_edges.windows(2) {
                assert_eq!(g.head(w[0]), g.tail(w[1]));
            }
            assert_eq!(g.head(*b.half_edges.last().unwrap()), b.start_node(&g));
        }
    }
}
