use pednet_core::geo::LonLat;
use pednet_core::graph::{EdgeKind, NodeKind, PedGraph};
use pednet_core::pedestrianfer::{build_hypothesis, HypothesisConfig};
use pednet_core::schema::{graph_from_geojson, graph_to_string, SchemaError};
use pednet_core::synthetic::grid_city;

fn hypothesis() -> PedGraph {
    let streets = grid_city(3, 2, 90.0, LonLat::new(-122.3, 47.6)).unwrap();
    build_hypothesis(&streets, &HypothesisConfig::default(), &[])
        .unwrap()
        .graph
}

fn sorted<T: Ord>(mut v: Vec<T>) -> Vec<T> {
    v.sort();
    v
}

type Signature = (
    Vec<NodeKind>,
    Vec<(EdgeKind, NodeKind, NodeKind)>,
    Vec<usize>,
);

/// Node kinds, edge kinds with endpoint kinds, and corner sizes: an
/// isomorphism invariant that ignores ids.
fn signature(g: &PedGraph) -> Signature {
    let nodes = sorted(g.nodes().map(|(_, n)| n.kind).collect());
    let edges = sorted(
        g.edges()
            .map(|(_, e)| {
                let (a, b) = (g.node(e.from).unwrap().kind, g.node(e.to).unwrap().kind);
                (e.kind, a.min(b), a.max(b))
            })
            .collect(),
    );
    let corners = sorted(g.corners().values().map(Vec::len).collect());
    (nodes, edges, corners)
}

#[test]
fn roundtrip_is_isomorphic() {
    let g = hypothesis();
    let text = graph_to_string(&g);
    let back = graph_from_geojson(&text, None).unwrap();
    assert_eq!(back.node_count(), g.node_count());
    assert_eq!(back.edge_count(), g.edge_count());
    assert_eq!(signature(&back), signature(&g));
    for kind in [EdgeKind::Sidewalk, EdgeKind::Crossing, EdgeKind::Link] {
        assert!((back.total_length(kind) - g.total_length(kind)).abs() < 0.05);
    }
    assert_eq!(graph_to_string(&back), text);
}

#[test]
fn output_carries_footway_tags() {
    let text = graph_to_string(&hypothesis());
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    let feats = doc["features"].as_array().unwrap();
    let footways: Vec<&str> = feats
        .iter()
        .filter_map(|f| f["properties"]["footway"].as_str())
        .collect();
    for want in ["sidewalk", "crossing", "link"] {
        assert!(footways.contains(&want), "missing footway={want}");
    }
    assert!(feats.iter().any(|f| f["properties"]["barrier"] == "kerb"));
    let ids: std::collections::HashSet<&str> =
        feats.iter().map(|f| f["id"].as_str().unwrap()).collect();
    assert_eq!(ids.len(), feats.len());
}

#[test]
fn malformed_documents_are_rejected() {
    assert!(matches!(
        graph_from_geojson("{", None),
        Err(SchemaError::Json(_))
    ));
    let short = r#"{"type":"FeatureCollection","features":[{"type":"Feature","properties":{"footway":"sidewalk"},"geometry":{"type":"LineString","coordinates":[[0,0]]}}]}"#;
    assert!(matches!(
        graph_from_geojson(short, None),
        Err(SchemaError::MalformedFeature { index: 0, .. })
    ));
}
