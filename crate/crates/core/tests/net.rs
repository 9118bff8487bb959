use approx::assert_abs_diff_eq;
use geojson::GeoJson;
use pednet_core::geo::{LonLat, PointM};
use pednet_core::net::{
    half_block_extents, intersections, parse_street_network, NetError, NodeId, ParseOptions,
    SidewalkPresence,
};
use pednet_core::synthetic::grid_city;

fn fc(features: &[&str]) -> String {
    format!(
        r#"{{"type":"FeatureCollection","features":[{}]}}"#,
        features.join(",")
    )
}

fn street(coords: &str, props: &str) -> String {
    format!(
        r#"{{"type":"Feature","properties":{props},"geometry":{{"type":"LineString","coordinates":{coords}}}}}"#
    )
}

fn parse(doc: &str) -> Result<pednet_core::net::StreetNetwork, NetError> {
    parse_street_network(doc, &ParseOptions::default())
}

#[test]
fn shared_endpoint_gives_three_nodes() {
    let doc = fc(&[
        &street("[[-122.30, 47.60], [-122.299, 47.60]]", "{}"),
        &street("[[-122.299, 47.60], [-122.299, 47.601]]", "{}"),
    ]);
    let g = parse(&doc).unwrap();
    assert_eq!((g.nodes().len(), g.edges().len()), (3, 2));
}

#[test]
fn degenerate_inputs() {
    let g = parse(&fc(&[])).unwrap();
    assert_eq!((g.nodes().len(), g.edges().len()), (0, 0));
    let one = fc(&[&street("[[-122.30, 47.60]]", "{}")]);
    assert!(matches!(
        parse(&one),
        Err(NetError::MalformedFeature { index: 0, .. })
    ));
    let point = fc(&[
        r#"{"type":"Feature","properties":{},"geometry":{"type":"Point","coordinates":[0,0]}}"#,
    ]);
    assert!(matches!(
        parse(&point),
        Err(NetError::MalformedFeature { .. })
    ));
    assert!(matches!(parse("not json"), Err(NetError::Json(_))));
}

#[test]
fn sidewalk_metadata_is_parsed() {
    let doc = fc(&[&street(
        "[[-122.30, 47.60], [-122.299, 47.60]]",
        r#"{"highway":"residential","sidewalk":"left","sidewalk_offset":"5.5"}"#,
    )]);
    let g = parse(&doc).unwrap();
    let e = &g.edges()[0];
    assert_eq!(e.sidewalk.presence, SidewalkPresence::Left);
    assert_eq!(e.sidewalk.offset, Some(5.5));
}

#[test]
fn lattice_and_t_junction_intersections() {
    let g = grid_city(2, 2, 100.0, LonLat::new(-122.3, 47.6)).unwrap();
    let ix = intersections(&g);
    assert_eq!(ix.len(), 5);
    let degrees: Vec<usize> = ix.iter().map(|&n| g.degree(n)).collect();
    assert_eq!(degrees.iter().filter(|&&d| d == 4).count(), 1);
    assert_eq!(degrees.iter().filter(|&&d| d == 3).count(), 4);

    let t = fc(&[
        &street("[[-122.300, 47.600], [-122.299, 47.600]]", "{}"),
        &street("[[-122.299, 47.600], [-122.298, 47.600]]", "{}"),
        &street("[[-122.299, 47.600], [-122.299, 47.601]]", "{}"),
    ]);
    let g = parse(&t).unwrap();
    let ix = intersections(&g);
    assert_eq!(ix.len(), 1);
    assert_eq!(g.degree(ix[0]), 3);
}

#[test]
fn half_extents_straight_and_curved() {
    let g = grid_city(1, 1, 100.0, LonLat::new(-122.3, 47.6)).unwrap();
    for ext in half_block_extents(&g, NodeId(0)).unwrap() {
        assert_abs_diff_eq!(ext.geometry.length(), 50.0, epsilon = 1e-9);
        assert!(ext.geometry.first().dist(g.nodes()[0].pos) < 1e-9);
    }
    assert!(matches!(
        half_block_extents(&g, NodeId(99)),
        Err(NetError::UnknownNode(99))
    ));

    // 3-vertex edge, 30 m + 30 m, built in meters and written back out
    let proj = pednet_core::geo::LocalProjection::new(LonLat::new(-122.3, 47.6));
    let ll = |x: f64, y: f64| {
        let q = proj.inverse(PointM::new(x, y));
        format!("[{}, {}]", q.lon, q.lat)
    };
    let doc = fc(&[&street(
        &format!("[{}, {}, {}]", ll(0.0, 0.0), ll(30.0, 0.0), ll(30.0, 30.0)),
        "{}",
    )]);
    let opts = ParseOptions {
        origin: Some(LonLat::new(-122.3, 47.6)),
        ..ParseOptions::default()
    };
    let g = parse_street_network(&doc, &opts).unwrap();
    let start = g.nodes().iter().find(|n| n.pos.norm() < 1e-6).unwrap().id;
    let ext = &half_block_extents(&g, start).unwrap()[0];
    assert_abs_diff_eq!(ext.geometry.length(), 30.0, epsilon = 1e-6);
    assert!(ext.geometry.last().dist(PointM::new(30.0, 0.0)) < 1e-6);
}

#[test]
fn reparse_of_serialized_network_is_isomorphic() {
    let g = grid_city(3, 2, 80.0, LonLat::new(-122.3, 47.6)).unwrap();
    let text = GeoJson::from(g.to_geojson()).to_string();
    let opts = ParseOptions {
        origin: Some(g.projection.origin()),
        ..ParseOptions::default()
    };
    let h = parse_street_network(&text, &opts).unwrap();
    assert_eq!(h.nodes().len(), g.nodes().len());
    assert_eq!(h.edges().len(), g.edges().len());
    let mut dg = g.degrees();
    let mut dh = h.degrees();
    dg.sort();
    dh.sort();
    assert_eq!(dg, dh);
    assert!((g.total_length() - h.total_length()).abs() < 1e-6);
}

#[test]
fn pass_through_vertices_keep_total_length() {
    // one street digitized as two pieces meeting at a degree-2 node
    let split = fc(&[
        &street("[[-122.300, 47.600], [-122.299, 47.600]]", "{}"),
        &street("[[-122.299, 47.600], [-122.298, 47.6005]]", "{}"),
    ]);
    let whole = fc(&[&street(
        "[[-122.300, 47.600], [-122.299, 47.600], [-122.298, 47.6005]]",
        "{}",
    )]);
    let opts = ParseOptions {
        origin: Some(LonLat::new(-122.299, 47.6)),
        ..ParseOptions::default()
    };
    let a = parse_street_network(&split, &opts).unwrap();
    let b = parse_street_network(&whole, &opts).unwrap();
    assert!((a.total_length() - b.total_length()).abs() < 1e-9);
}
