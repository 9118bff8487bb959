//! GeoJSON serialization of pedestrian graphs with OpenSidewalks-style tags.
//!
//! Edges are LineStrings tagged `highway=footway` and `footway` ∈ {sidewalk,
//! crossing, link}; curb nodes carry `barrier=kerb`. Every node is written as
//! a Point so kinds and corner labels survive a roundtrip.

use std::collections::HashMap;

use geojson::{
    Feature, FeatureCollection, GeoJson, Geometry, GeometryValue, JsonObject, JsonValue,
};
use sha2::{Digest, Sha256};

use crate::geo::{LineStringM, LocalProjection, LonLat, PointM};
use crate::graph::{CornerId, EdgeKind, GraphError, NodeKind, PedGraph, PedNodeId};

/// Coordinate rounding, degrees (about 1 mm).
pub const COORD_DECIMALS: i32 = 8;
const ORIGIN_KEY: &str = "pednet:origin";

#[derive(Debug, thiserror::Error)]
pub enum SchemaError {
    #[error("invalid GeoJSON: {0}")]
    Json(String),
    #[error("feature {index}: {reason}")]
    MalformedFeature { index: usize, reason: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Geo(#[from] crate::geo::GeoError),
}

fn round_deg(v: f64) -> f64 {
    let k = 10f64.powi(COORD_DECIMALS);
    (v * k).round() / k
}

fn lonlat(proj: &LocalProjection, p: PointM) -> [f64; 2] {
    let ll = proj.inverse(p);
    [round_deg(ll.lon), round_deg(ll.lat)]
}

/// Content hash of kind plus rounded coordinates, as 16 hex digits.
pub fn feature_id(kind: &str, coords: &[[f64; 2]]) -> String {
    let mut h = Sha256::new();
    h.update(kind.as_bytes());
    for c in coords {
        h.update(c[0].to_le_bytes());
        h.update(c[1].to_le_bytes());
    }
    let d = h.finalize();
    d[..8].iter().map(|b| format!("{b:02x}")).collect()
}

fn node_kind_str(k: NodeKind) -> &'static str {
    match k {
        NodeKind::SidewalkPt => "sidewalk_pt",
        NodeKind::Curb => "curb",
        NodeKind::CrossingPt => "crossing_pt",
        NodeKind::Unknown => "unknown",
    }
}

fn feature(geometry: Geometry, id: String, props: JsonObject) -> Feature {
    Feature {
        bbox: None,
        geometry: Some(geometry),
        id: Some(geojson::feature::Id::String(id)),
        properties: Some(props),
        foreign_members: None,
    }
}

pub fn graph_to_geojson(g: &PedGraph) -> FeatureCollection {
    let proj = &g.projection;
    let mut features = Vec::with_capacity(g.node_count() + g.edge_count());
    for (_, e) in g.edges() {
        let coords: Vec<[f64; 2]> = e
            .geometry
            .points()
            .iter()
            .map(|&p| lonlat(proj, p))
            .collect();
        let mut props = JsonObject::new();
        props.insert("highway".into(), "footway".into());
        if e.kind != EdgeKind::Unknown {
            props.insert("footway".into(), e.kind.as_str().into());
        }
        if let Some(c) = e.confidence {
            let v = (c * 1000.0).round() / 1000.0;
            props.insert("confidence".into(), JsonValue::from(v));
        }
        let id = feature_id(e.kind.as_str(), &coords);
        features.push(feature(Geometry::new_line_string(coords), id, props));
    }
    for (_, n) in g.nodes() {
        let c = lonlat(proj, n.pos);
        let mut props = JsonObject::new();
        props.insert("pednet:kind".into(), node_kind_str(n.kind).into());
        if n.kind == NodeKind::Curb {
            props.insert("barrier".into(), "kerb".into());
        }
        if n.kind == NodeKind::CrossingPt {
            props.insert("highway".into(), "crossing".into());
        }
        if let Some(cid) = &n.corner {
            props.insert("corner".into(), cid.0.clone().into());
        }
        let id = feature_id(node_kind_str(n.kind), &[c]);
        features.push(feature(Geometry::new_point(c), id, props));
    }
    let o = proj.origin();
    let mut fm = JsonObject::new();
    fm.insert(ORIGIN_KEY.into(), JsonValue::from(vec![o.lon, o.lat]));
    FeatureCollection {
        bbox: None,
        features,
        foreign_members: Some(fm),
    }
}

/// Pretty JSON with a trailing newline.
pub fn graph_to_string(g: &PedGraph) -> String {
    let mut s =
        serde_json::to_string_pretty(&GeoJson::from(graph_to_geojson(g))).expect("serializable");
    s.push('\n');
    s
}

fn prop<'a>(f: &'a Feature, key: &str) -> Option<&'a str> {
    f.properties.as_ref()?.get(key)?.as_str()
}

fn parse_node_kind(f: &Feature) -> NodeKind {
    match prop(f, "pednet:kind") {
        Some("sidewalk_pt") => NodeKind::SidewalkPt,
        Some("curb") => NodeKind::Curb,
        Some("crossing_pt") => NodeKind::CrossingPt,
        Some(_) => NodeKind::Unknown,
        None if prop(f, "barrier") == Some("kerb") => NodeKind::Curb,
        None if prop(f, "highway") == Some("crossing") => NodeKind::CrossingPt,
        None => NodeKind::Unknown,
    }
}

fn parse_edge_kind(f: &Feature) -> EdgeKind {
    match prop(f, "footway") {
        Some("sidewalk") => EdgeKind::Sidewalk,
        Some("crossing") => EdgeKind::Crossing,
        Some("link") => EdgeKind::Link,
        _ => EdgeKind::Unknown,
    }
}

type Key = (i64, i64);

fn key(c: [f64; 2]) -> Key {
    let k = 10f64.powi(COORD_DECIMALS);
    ((c[0] * k).round() as i64, (c[1] * k).round() as i64)
}

/// Reads a graph written by [`graph_to_geojson`] (or any footway
/// FeatureCollection). `origin` overrides the stored projection origin;
/// without either, the bounds center is used. Line endpoints without a Point
/// feature become `Unknown` nodes.
pub fn graph_from_geojson(doc: &str, origin: Option<LonLat>) -> Result<PedGraph, SchemaError> {
    let gj: GeoJson = doc
        .parse()
        .map_err(|e: geojson::Error| SchemaError::Json(e.to_string()))?;
    let fc = match gj {
        GeoJson::FeatureCollection(fc) => fc,
        _ => return Err(SchemaError::Json("expected a FeatureCollection".into())),
    };
    let stored = fc
        .foreign_members
        .as_ref()
        .and_then(|m| m.get(ORIGIN_KEY))
        .and_then(|v| v.as_array())
        .and_then(|a| Some(LonLat::new(a.first()?.as_f64()?, a.get(1)?.as_f64()?)));

    let mut points = Vec::new();
    let mut lines = Vec::new();
    for (index, f) in fc.features.iter().enumerate() {
        let bad = |reason: &str| SchemaError::MalformedFeature {
            index,
            reason: reason.to_string(),
        };
        let coord = |c: &[f64]| -> Result<[f64; 2], SchemaError> {
            if c.len() < 2 || !c[0].is_finite() || !c[1].is_finite() {
                return Err(bad("invalid coordinate"));
            }
            Ok([c[0], c[1]])
        };
        match f.geometry.as_ref().map(|g| &g.value) {
            Some(GeometryValue::Point { coordinates }) => {
                points.push((coord(coordinates.as_slice())?, f))
            }
            Some(GeometryValue::LineString { coordinates }) => {
                if coordinates.len() < 2 {
                    return Err(bad("LineString needs two coordinates"));
                }
                let cs = coordinates
                    .iter()
                    .map(|c| coord(c.as_slice()))
                    .collect::<Result<Vec<_>, _>>()?;
                lines.push((cs, f));
            }
            Some(_) => return Err(bad("expected Point or LineString")),
            None => return Err(bad("missing geometry")),
        }
    }

    let origin = origin.or(stored).unwrap_or_else(|| {
        let all = points
            .iter()
            .map(|p| p.0)
            .chain(lines.iter().flat_map(|l| l.0.iter().copied()));
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for c in all {
            for i in 0..2 {
                lo[i] = lo[i].min(c[i]);
                hi[i] = hi[i].max(c[i]);
            }
        }
        if lo[0].is_finite() {
            LonLat::new((lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0)
        } else {
            LonLat::new(0.0, 0.0)
        }
    });
    let proj = LocalProjection::new(origin);
    let mut g = PedGraph::new(proj);
    let mut by_key: HashMap<Key, PedNodeId> = HashMap::new();
    for (c, f) in &points {
        let pos = proj.forward(LonLat::new(c[0], c[1]))?;
        let id = g.add_node(pos, parse_node_kind(f));
        g.node_mut(id).expect("added").corner = prop(f, "corner").map(|s| CornerId(s.to_string()));
        by_key.entry(key(*c)).or_insert(id);
    }
    for (cs, f) in &lines {
        let pts = cs
            .iter()
            .map(|c| proj.forward(LonLat::new(c[0], c[1])))
            .collect::<Result<Vec<_>, _>>()?;
        let mut end = |c: [f64; 2], p: PointM, g: &mut PedGraph| {
            *by_key
                .entry(key(c))
                .or_insert_with(|| g.add_node(p, NodeKind::Unknown))
        };
        let a = end(cs[0], pts[0], &mut g);
        let b = end(cs[cs.len() - 1], pts[pts.len() - 1], &mut g);
        let (pa, pb) = (g.node(a).expect("node").pos, g.node(b).expect("node").pos);
        let geom = LineStringM::new_dedup(pts, 0.0)?.with_endpoints(pa, pb)?;
        let eid = g.add_edge(a, b, geom, parse_edge_kind(f))?;
        let conf = f
            .properties
            .as_ref()
            .and_then(|p| p.get("confidence"))
            .and_then(|v| v.as_f64());
        g.edge_mut(eid).expect("added").confidence = conf;
    }
    Ok(g)
}
