//! Street centerline ingest.
//!
//! A [`StreetNetwork`] is a noded planar multigraph: every edge endpoint is a
//! node, and any coordinate shared by two features (or visited twice by one)
//! becomes a node as well.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::TAU;

use geojson::{
    Feature, FeatureCollection, GeoJson, Geometry, GeometryValue, JsonObject, JsonValue,
};
use serde::{Deserialize, Serialize};

use crate::geo::{segment_intersection, GeoError, LineStringM, LocalProjection, LonLat, PointM};

/// Coordinates closer than this (in degrees) are the same node.
pub const SNAP_DEGREES: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum NetError {
    #[error("feature {index}: {reason}")]
    MalformedFeature { index: usize, reason: String },
    #[error("invalid GeoJSON: {0}")]
    Json(String),
    #[error("unknown node {0}")]
    UnknownNode(usize),
    #[error(transparent)]
    Geo(#[from] GeoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeId(pub usize);

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SidewalkPresence {
    None,
    Left,
    Right,
    Both,
    #[default]
    Unknown,
}

impl SidewalkPresence {
    pub fn parse(tag: &str) -> Self {
        match tag.trim().to_ascii_lowercase().as_str() {
            "left" => Self::Left,
            "right" => Self::Right,
            "both" | "yes" => Self::Both,
            "no" | "none" | "separate" => Self::None,
            _ => Self::Unknown,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SidewalkMeta {
    pub presence: SidewalkPresence,
    /// Centerline-to-sidewalk distance in meters, when tagged.
    pub offset: Option<f64>,
}

impl SidewalkMeta {
    pub fn is_tagged(&self) -> bool {
        self.presence != SidewalkPresence::Unknown || self.offset.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreetNode {
    pub id: NodeId,
    pub pos: PointM,
    pub lonlat: LonLat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreetEdge {
    pub id: EdgeId,
    pub from: NodeId,
    pub to: NodeId,
    pub geometry: LineStringM,
    pub tags: BTreeMap<String, String>,
    pub sidewalk: SidewalkMeta,
}

impl StreetEdge {
    pub fn length(&self) -> f64 {
        self.geometry.length()
    }
}

/// One traversal direction of a street edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HalfEdge {
    pub edge: EdgeId,
    pub forward: bool,
}

impl HalfEdge {
    pub fn twin(self) -> HalfEdge {
        HalfEdge {
            edge: self.edge,
            forward: !self.forward,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StreetNetwork {
    pub projection: LocalProjection,
    nodes: Vec<StreetNode>,
    edges: Vec<StreetEdge>,
}

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// Projection origin; defaults to the center of the input's bounds.
    pub origin: Option<LonLat>,
    /// Keep only features whose `highway` tag is in this list.
    pub highway_include: Option<Vec<String>>,
    /// Split features where their geometries cross without sharing a vertex.
    pub planarize: bool,
}

/// Directed, truncated street geometry leaving an intersection.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockExtent {
    pub edge: EdgeId,
    pub half_edge: HalfEdge,
    pub geometry: LineStringM,
}

impl StreetNetwork {
    pub fn empty(projection: LocalProjection) -> Self {
        Self {
            projection,
            nodes: Vec::new(),
            edges: Vec::new(),
        }
    }

    pub fn nodes(&self) -> &[StreetNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[StreetEdge] {
        &self.edges
    }

    pub fn node(&self, id: NodeId) -> Option<&StreetNode> {
        self.nodes.get(id.0)
    }

    pub fn edge(&self, id: EdgeId) -> &StreetEdge {
        &self.edges[id.0]
    }

    /// Undirected degree; self-loops count twice.
    pub fn degree(&self, id: NodeId) -> usize {
        self.edges
            .iter()
            .map(|e| usize::from(e.from == id) + usize::from(e.to == id))
            .sum()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes.len()];
        for e in &self.edges {
            deg[e.from.0] += 1;
            deg[e.to.0] += 1;
        }
        deg
    }

    pub fn tail(&self, h: HalfEdge) -> NodeId {
        let e = self.edge(h.edge);
        if h.forward {
            e.from
        } else {
            e.to
        }
    }

    pub fn head(&self, h: HalfEdge) -> NodeId {
        self.tail(h.twin())
    }

    /// Geometry of a half-edge in its direction of travel.
    pub fn half_edge_geometry(&self, h: HalfEdge) -> LineStringM {
        let g = &self.edge(h.edge).geometry;
        if h.forward {
            g.clone()
        } else {
            g.reversed()
        }
    }

    /// Bearing (radians, CCW from east) of the first segment of `h`.
    pub fn departure_angle(&self, h: HalfEdge) -> f64 {
        let pts = self.edge(h.edge).geometry.points();
        let (a, b) = if h.forward {
            (pts[0], pts[1])
        } else {
            (pts[pts.len() - 1], pts[pts.len() - 2])
        };
        (b - a).angle().rem_euclid(TAU)
    }

    /// Half-edges leaving `node`, sorted counter-clockwise by departure angle.
    pub fn outgoing(&self, node: NodeId) -> Vec<HalfEdge> {
        let mut out: Vec<(f64, HalfEdge)> = Vec::new();
        for e in &self.edges {
            if e.from == node {
                let h = HalfEdge {
                    edge: e.id,
                    forward: true,
                };
                out.push((self.departure_angle(h), h));
            }
            if e.to == node {
                let h = HalfEdge {
                    edge: e.id,
                    forward: false,
                };
                out.push((self.departure_angle(h), h));
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out.into_iter().map(|(_, h)| h).collect()
    }

    /// All outgoing lists at once, indexed by node.
    pub fn outgoing_all(&self) -> Vec<Vec<HalfEdge>> {
        let mut out: Vec<Vec<(f64, HalfEdge)>> = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            for forward in [true, false] {
                let h = HalfEdge {
                    edge: e.id,
                    forward,
                };
                out[self.tail(h).0].push((self.departure_angle(h), h));
            }
        }
        out.into_iter()
            .map(|mut v| {
                v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                v.into_iter().map(|(_, h)| h).collect()
            })
            .collect()
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length()).sum()
    }

    /// Serializes back to a GeoJSON FeatureCollection of LineStrings.
    pub fn to_geojson(&self) -> FeatureCollection {
        let features = self
            .edges
            .iter()
            .map(|e| {
                let pts = e.geometry.points();
                let n = pts.len();
                let coords: Vec<[f64; 2]> = pts
                    .iter()
                    .enumerate()
                    .map(|(i, &p)| {
                        let ll = if i == 0 {
                            self.nodes[e.from.0].lonlat
                        } else if i == n - 1 {
                            self.nodes[e.to.0].lonlat
                        } else {
                            self.projection.inverse(p)
                        };
                        [ll.lon, ll.lat]
                    })
                    .collect();
                let mut props = JsonObject::new();
                for (k, v) in &e.tags {
                    props.insert(k.clone(), JsonValue::String(v.clone()));
                }
                Feature {
                    bbox: None,
                    geometry: Some(Geometry::new_line_string(coords)),
                    id: None,
                    properties: Some(props),
                    foreign_members: None,
                }
            })
            .collect();
        FeatureCollection {
            bbox: None,
            features,
            foreign_members: None,
        }
    }
}

/// Nodes of degree >= 3, sorted by id.
pub fn intersections(g: &StreetNetwork) -> Vec<NodeId> {
    g.degrees()
        .iter()
        .enumerate()
        .filter(|(_, &d)| d >= 3)
        .map(|(i, _)| NodeId(i))
        .collect()
}

/// Street geometry leaving `node` along each incident edge, cut at half the
/// edge length.
pub fn half_block_extents(g: &StreetNetwork, node: NodeId) -> Result<Vec<BlockExtent>, NetError> {
    if g.node(node).is_none() || g.degree(node) == 0 {
        return Err(NetError::UnknownNode(node.0));
    }
    g.outgoing(node)
        .into_iter()
        .map(|h| {
            let geom = g.half_edge_geometry(h);
            let half = geom.length() / 2.0;
            Ok(BlockExtent {
                edge: h.edge,
                half_edge: h,
                geometry: geom.substring(0.0, half)?,
            })
        })
        .collect()
}

/// A raw input line: coordinates plus tags. Coordinates are identified by an
/// integer key so shared vertices can be detected exactly.
struct RawLine {
    verts: Vec<(VertexKey, PointM, LonLat)>,
    tags: BTreeMap<String, String>,
    sidewalk: SidewalkMeta,
}

type VertexKey = (i64, i64);

fn lonlat_key(ll: LonLat) -> VertexKey {
    (
        (ll.lon / SNAP_DEGREES).round() as i64,
        (ll.lat / SNAP_DEGREES).round() as i64,
    )
}

fn meter_key(p: PointM) -> VertexKey {
    ((p.x * 1e3).round() as i64, (p.y * 1e3).round() as i64)
}

/// Parses a GeoJSON document (FeatureCollection or single Feature) of
/// LineStrings into a noded street network.
pub fn parse_street_network(doc: &str, opts: &ParseOptions) -> Result<StreetNetwork, NetError> {
    let gj: GeoJson = doc
        .parse()
        .map_err(|e: geojson::Error| NetError::Json(e.to_string()))?;
    let features = match gj {
        GeoJson::FeatureCollection(fc) => fc.features,
        GeoJson::Feature(f) => vec![f],
        GeoJson::Geometry(_) => {
            return Err(NetError::Json("expected a FeatureCollection".into()));
        }
    };

    let mut lines: Vec<(Vec<LonLat>, BTreeMap<String, String>, SidewalkMeta)> = Vec::new();
    for (index, f) in features.iter().enumerate() {
        let malformed = |reason: String| NetError::MalformedFeature { index, reason };
        let coords = match f.geometry.as_ref().map(|g| &g.value) {
            Some(GeometryValue::LineString { coordinates }) => coordinates,
            Some(other) => {
                return Err(malformed(format!(
                    "expected LineString, got {}",
                    other.type_name()
                )))
            }
            None => return Err(malformed("missing geometry".into())),
        };
        if coords.len() < 2 {
            return Err(malformed(format!(
                "LineString has {} coordinate(s)",
                coords.len()
            )));
        }
        let mut pts = Vec::with_capacity(coords.len());
        for c in coords {
            if c.len() < 2 || !c[0].is_finite() || !c[1].is_finite() {
                return Err(malformed("invalid coordinate".into()));
            }
            pts.push(LonLat::new(c[0], c[1]));
        }
        let tags = tags_of(f);
        if let Some(include) = &opts.highway_include {
            match tags.get("highway") {
                Some(h) if include.iter().any(|i| i == h) => {}
                _ => continue,
            }
        }
        let sidewalk = sidewalk_meta(&tags).map_err(malformed)?;
        lines.push((pts, tags, sidewalk));
    }

    if opts.planarize {
        planarize(&mut lines);
    }

    let origin = opts.origin.unwrap_or_else(|| bounds_center(&lines));
    let projection = LocalProjection::new(origin);
    let mut raw = Vec::with_capacity(lines.len());
    for (pts, tags, sidewalk) in lines {
        let mut verts = Vec::with_capacity(pts.len());
        for ll in pts {
            verts.push((lonlat_key(ll), projection.forward(ll)?, ll));
        }
        raw.push(RawLine {
            verts,
            tags,
            sidewalk,
        });
    }
    Ok(build(projection, raw))
}

/// Builds a network from planar lines already in meters (test fixtures,
/// synthetic cities). Vertices within 1 mm are merged.
pub fn network_from_lines(
    projection: LocalProjection,
    lines: Vec<(LineStringM, BTreeMap<String, String>)>,
) -> Result<StreetNetwork, NetError> {
    let mut raw = Vec::with_capacity(lines.len());
    for (index, (line, tags)) in lines.into_iter().enumerate() {
        let sidewalk =
            sidewalk_meta(&tags).map_err(|reason| NetError::MalformedFeature { index, reason })?;
        let verts = line
            .points()
            .iter()
            .map(|&p| (meter_key(p), p, projection.inverse(p)))
            .collect();
        raw.push(RawLine {
            verts,
            tags,
            sidewalk,
        });
    }
    Ok(build(projection, raw))
}

fn build(projection: LocalProjection, raw: Vec<RawLine>) -> StreetNetwork {
    // A vertex becomes a node when it is an endpoint or is used more than once.
    let mut uses: HashMap<VertexKey, usize> = HashMap::new();
    for line in &raw {
        let n = line.verts.len();
        for (i, v) in line.verts.iter().enumerate() {
            let w = if i == 0 || i == n - 1 { 2 } else { 1 };
            *uses.entry(v.0).or_default() += w;
        }
    }

    let mut net = StreetNetwork::empty(projection);
    let mut node_of: HashMap<VertexKey, NodeId> = HashMap::new();
    let mut node_for =
        |net: &mut StreetNetwork, key: VertexKey, pos: PointM, ll: LonLat| -> NodeId {
            *node_of.entry(key).or_insert_with(|| {
                let id = NodeId(net.nodes.len());
                net.nodes.push(StreetNode {
                    id,
                    pos,
                    lonlat: ll,
                });
                id
            })
        };

    for line in raw {
        let mut verts = line.verts;
        verts.dedup_by_key(|v| v.0);
        if verts.len() < 2 {
            continue;
        }
        let mut start = 0;
        for i in 1..verts.len() {
            let is_node = i == verts.len() - 1 || uses[&verts[i].0] >= 2;
            if !is_node {
                continue;
            }
            let piece = &verts[start..=i];
            start = i;
            let from = node_for(&mut net, piece[0].0, piece[0].1, piece[0].2);
            let last = piece.len() - 1;
            let to = node_for(&mut net, piece[last].0, piece[last].1, piece[last].2);
            let mut pts: Vec<PointM> = piece.iter().map(|v| v.1).collect();
            pts[0] = net.nodes[from.0].pos;
            pts[last] = net.nodes[to.0].pos;
            let Ok(geometry) = LineStringM::new_dedup(pts, 0.0) else {
                continue;
            };
            let id = EdgeId(net.edges.len());
            net.edges.push(StreetEdge {
                id,
                from,
                to,
                geometry,
                tags: line.tags.clone(),
                sidewalk: line.sidewalk,
            });
        }
    }
    net
}

fn tags_of(f: &Feature) -> BTreeMap<String, String> {
    let mut tags = BTreeMap::new();
    if let Some(props) = &f.properties {
        for (k, v) in props {
            let s = match v {
                JsonValue::String(s) => s.clone(),
                JsonValue::Null => continue,
                other => other.to_string(),
            };
            tags.insert(k.clone(), s);
        }
    }
    tags
}

fn sidewalk_meta(tags: &BTreeMap<String, String>) -> Result<SidewalkMeta, String> {
    let presence = tags
        .get("sidewalk")
        .map(|s| SidewalkPresence::parse(s))
        .unwrap_or_default();
    let offset = match tags.get("sidewalk_offset") {
        None => None,
        Some(raw) => {
            let v: f64 = raw
                .trim()
                .parse()
                .map_err(|_| format!("sidewalk_offset {raw:?} is not a number"))?;
            if !(v > 0.0) || !v.is_finite() {
                return Err(format!("sidewalk_offset must be > 0, got {v}"));
            }
            Some(v)
        }
    };
    Ok(SidewalkMeta { presence, offset })
}

fn bounds_center(lines: &[(Vec<LonLat>, BTreeMap<String, String>, SidewalkMeta)]) -> LonLat {
    let mut lo = LonLat::new(f64::INFINITY, f64::INFINITY);
    let mut hi = LonLat::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (pts, _, _) in lines {
        for p in pts {
            lo.lon = lo.lon.min(p.lon);
            lo.lat = lo.lat.min(p.lat);
            hi.lon = hi.lon.max(p.lon);
            hi.lat = hi.lat.max(p.lat);
        }
    }
    if lo.lon.is_finite() {
        LonLat::new((lo.lon + hi.lon) / 2.0, (lo.lat + hi.lat) / 2.0)
    } else {
        LonLat::default()
    }
}

/// Inserts a shared vertex wherever two segments cross. Works in degrees,
/// which is adequate at street scale and keeps inserted vertices bit-identical
/// in both lines.
fn planarize(lines: &mut [(Vec<LonLat>, BTreeMap<String, String>, SidewalkMeta)]) {
    let to_p = |l: LonLat| PointM::new(l.lon, l.lat);
    // (line, segment) -> list of (t, point)
    let mut inserts: HashMap<(usize, usize), Vec<(f64, LonLat)>> = HashMap::new();
    let segs: Vec<(usize, usize, PointM, PointM)> = lines
        .iter()
        .enumerate()
        .flat_map(|(li, (pts, _, _))| {
            pts.windows(2)
                .enumerate()
                .map(move |(si, w)| (li, si, to_p(w[0]), to_p(w[1])))
        })
        .collect();
    for i in 0..segs.len() {
        for j in (i + 1)..segs.len() {
            let (li, si, a0, a1) = segs[i];
            let (lj, sj, b0, b1) = segs[j];
            if li == lj && si.abs_diff(sj) <= 1 {
                continue;
            }
            if a0.x.max(a1.x) < b0.x.min(b1.x)
                || b0.x.max(b1.x) < a0.x.min(a1.x)
                || a0.y.max(a1.y) < b0.y.min(b1.y)
                || b0.y.max(b1.y) < a0.y.min(a1.y)
            {
                continue;
            }
            let Some((s, u)) = segment_intersection(a0, a1, b0, b1) else {
                continue;
            };
            const END: f64 = 1e-9;
            let interior_a = s > END && s < 1.0 - END;
            let interior_b = u > END && u < 1.0 - END;
            if !interior_a && !interior_b {
                continue;
            }
            let p = a0.lerp(a1, s);
            let ll = LonLat::new(p.x, p.y);
            // snap to an existing endpoint when the crossing touches one
            let ll = if !interior_a {
                if s < 0.5 {
                    LonLat::new(a0.x, a0.y)
                } else {
                    LonLat::new(a1.x, a1.y)
                }
            } else if !interior_b {
                if u < 0.5 {
                    LonLat::new(b0.x, b0.y)
                } else {
                    LonLat::new(b1.x, b1.y)
                }
            } else {
                ll
            };
            if interior_a {
                inserts.entry((li, si)).or_default().push((s, ll));
            }
            if interior_b {
                inserts.entry((lj, sj)).or_default().push((u, ll));
            }
        }
    }
    for (li, (pts, _, _)) in lines.iter_mut().enumerate() {
        let mut out = Vec::with_capacity(pts.len());
        for (si, w) in pts.windows(2).enumerate() {
            out.push(w[0]);
            if let Some(ins) = inserts.get_mut(&(li, si)) {
                ins.sort_by(|a, b| a.0.total_cmp(&b.0));
                out.extend(ins.iter().map(|x| x.1));
            }
        }
        out.push(*pts.last().expect("line has vertices"));
        *pts = out;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fc(lines: &[&[(f64, f64)]]) -> String {
        let feats: Vec<String> = lines
            .iter()
            .map(|l| {
                let coords: Vec<String> = l.iter().map(|(x, y)| format!("[{x},{y}]")).collect();
                format!(
                    r#"{{"type":"Feature","properties":{{"highway":"residential"}},"geometry":{{"type":"LineString","coordinates":[{}]}}}}"#,
                    coords.join(",")
                )
            })
            .collect();
        format!(
            r#"{{"type":"FeatureCollection","features":[{}]}}"#,
            feats.join(",")
        )
    }

    #[test]
    fn empty_collection_gives_empty_network() {
        let g = parse_street_network(&fc(&[]), &ParseOptions::default()).unwrap();
        assert_eq!(g.nodes().len(), 0);
        assert_eq!(g.edges().len(), 0);
    }

    #[test]
    fn shared_endpoint_is_merged() {
        let doc = fc(&[&[(0.0, 0.0), (0.001, 0.0)], &[(0.001, 0.0), (0.001, 0.001)]]);
        let g = parse_street_network(&doc, &ParseOptions::default()).unwrap();
        assert_eq!(g.nodes().len(), 3);
        assert_eq!(g.edges().len(), 2);
    }

    #[test]
    fn single_coordinate_is_malformed() {
        let doc = fc(&[&[(0.0, 0.0)]]);
        assert!(matches!(
            parse_street_network(&doc, &ParseOptions::default()),
            Err(NetError::MalformedFeature { index: 0, .. })
        ));
    }

    #[test]
    fn non_linestring_is_malformed() {
        let doc = r#"{"type":"FeatureCollection","features":[{"type":"Feature","properties":{},"geometry":{"type":"Point","coordinates":[0,0]}}]}"#;
        assert!(matches!(
            parse_street_network(doc, &ParseOptions::default()),
            Err(NetError::MalformedFeature { .. })
        ));
    }

    #[test]
    fn shared_interior_vertex_splits_edges() {
        // a straight way passing through the end of a side street
        let doc = fc(&[
            &[(0.0, 0.0), (0.001, 0.0), (0.002, 0.0)],
            &[(0.001, 0.0), (0.001, 0.001)],
        ]);
        let g = parse_street_network(&doc, &ParseOptions::default()).unwrap();
        assert_eq!(g.edges().len(), 3);
        assert_eq!(intersections(&g).len(), 1);
    }

    #[test]
    fn planarize_splits_crossing_lines() {
        let doc = fc(&[
            &[(0.0, 0.0), (0.002, 0.0)],
            &[(0.001, -0.001), (0.001, 0.001)],
        ]);
        let plain = parse_street_network(&doc, &ParseOptions::default()).unwrap();
        assert_eq!(plain.edges().len(), 2);
        let opts = ParseOptions {
            planarize: true,
            ..Default::default()
        };
        let g = parse_street_network(&doc, &opts).unwrap();
        assert_eq!(g.edges().len(), 4);
        assert_eq!(intersections(&g).len(), 1);
        assert!((g.total_length() - plain.total_length()).abs() < 1e-6);
    }

    #[test]
    fn sidewalk_tags_parsed() {
        let doc = r#"{"type":"FeatureCollection","features":[{"type":"Feature","properties":{"sidewalk":"left","sidewalk_offset":5.5},"geometry":{"type":"LineString","coordinates":[[0,0],[0.001,0]]}}]}"#;
        let g = parse_street_network(doc, &ParseOptions::default()).unwrap();
        let m = g.edges()[0].sidewalk;
        assert_eq!(m.presence, SidewalkPresence::Left);
        assert_eq!(m.offset, Some(5.5));
        let bad = doc.replace("5.5", "-1");
        assert!(parse_street_network(&bad, &ParseOptions::default()).is_err());
    }

    #[test]
    fn highway_filter_drops_features() {
        let doc = fc(&[&[(0.0, 0.0), (0.001, 0.0)]]);
        let opts = ParseOptions {
            highway_include: Some(vec!["primary".into()]),
            ..Default::default()
        };
        let g = parse_street_network(&doc, &opts).unwrap();
        assert!(g.edges().is_empty());
    }

    fn lattice(n: usize, spacing: f64) -> StreetNetwork {
        let mut lines = Vec::new();
        for i in 0..n {
            for j in 0..n - 1 {
                let y = i as f64 * spacing;
                let (x0, x1) = (j as f64 * spacing, (j + 1) as f64 * spacing);
                lines.push(vec![PointM::new(x0, y), PointM::new(x1, y)]);
                lines.push(vec![PointM::new(y, x0), PointM::new(y, x1)]);
            }
        }
        let proj = LocalProjection::new(LonLat::new(0.0, 0.0));
        network_from_lines(
            proj,
            lines
                .into_iter()
                .map(|l| (LineStringM::new(l).unwrap(), BTreeMap::new()))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn lattice_intersections() {
        let g = lattice(3, 100.0);
        assert_eq!(g.nodes().len(), 9);
        assert_eq!(g.edges().len(), 12);
        let ix = intersections(&g);
        assert_eq!(ix.len(), 5);
        let mut degs: Vec<usize> = ix.iter().map(|&n| g.degree(n)).collect();
        degs.sort();
        assert_eq!(degs, vec![3, 3, 3, 3, 4]);
        assert!(ix.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn single_edge_has_no_intersections() {
        let g = lattice(2, 100.0);
        let proj = g.projection;
        let one = network_from_lines(
            proj,
            vec![(
                LineStringM::new(vec![PointM::new(0.0, 0.0), PointM::new(10.0, 0.0)]).unwrap(),
                BTreeMap::new(),
            )],
        )
        .unwrap();
        assert!(intersections(&one).is_empty());
    }

    #[test]
    fn half_extents_are_half_length_and_outward() {
        let proj = LocalProjection::new(LonLat::new(0.0, 0.0));
        let g = network_from_lines(
            proj,
            vec![
                (
                    LineStringM::new(vec![PointM::new(0.0, 0.0), PointM::new(100.0, 0.0)]).unwrap(),
                    BTreeMap::new(),
                ),
                (
                    // curved, 3 vertices, 60 m total
                    LineStringM::new(vec![
                        PointM::new(0.0, 0.0),
                        PointM::new(0.0, 20.0),
                        PointM::new(-40.0, 20.0),
                    ])
                    .unwrap(),
                    BTreeMap::new(),
                ),
            ],
        )
        .unwrap();
        let center = NodeId(0);
        let ext = half_block_extents(&g, center).unwrap();
        assert_eq!(ext.len(), 2);
        for e in &ext {
            assert_eq!(e.geometry.first(), PointM::new(0.0, 0.0));
        }
        let straight = ext.iter().find(|e| e.edge == EdgeId(0)).unwrap();
        assert!((straight.geometry.length() - 50.0).abs() < 1e-9);
        let curved = ext.iter().find(|e| e.edge == EdgeId(1)).unwrap();
        assert!((curved.geometry.length() - 30.0).abs() < 1e-9);
        let end = curved.geometry.last();
        assert!((end.x + 10.0).abs() < 1e-9 && (end.y - 20.0).abs() < 1e-9);
        assert!(matches!(
            half_block_extents(&g, NodeId(99)),
            Err(NetError::UnknownNode(99))
        ));
    }
}
