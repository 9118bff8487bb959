use std::f64::consts::{PI, TAU};

use approx::assert_abs_diff_eq;
use pednet_core::geo::{
    apply_affine, buffer_geometry, offset_linestring, point_in_ring, AffineParams, BufferInput,
    LineStringM, LocalProjection, LonLat, PointM, PolygonM, Side,
};
use proptest::prelude::*;

fn p(x: f64, y: f64) -> PointM {
    PointM::new(x, y)
}

fn line(pts: &[(f64, f64)]) -> LineStringM {
    LineStringM::new(pts.iter().map(|&(x, y)| p(x, y)).collect()).unwrap()
}

fn assert_points(got: &[PointM], want: &[(f64, f64)], tol: f64) {
    assert_eq!(got.len(), want.len(), "{got:?}");
    for (g, w) in got.iter().zip(want) {
        assert_abs_diff_eq!(g.x, w.0, epsilon = tol);
        assert_abs_diff_eq!(g.y, w.1, epsilon = tol);
    }
}

/// Winding number by summing signed angles subtended by each edge.
fn winding_number(q: PointM, ring: &[PointM]) -> i32 {
    let mut total = 0.0;
    for i in 0..ring.len() {
        let a = ring[i] - q;
        let b = ring[(i + 1) % ring.len()] - q;
        total += a.cross(b).atan2(a.dot(b));
    }
    (total / TAU).round() as i32
}

/// Star-shaped ring: one vertex per sorted angle, radius in [0.2, 1] x scale.
fn star_ring(angles: &mut [f64], radii: &[f64], center: PointM, scale: f64) -> Vec<PointM> {
    angles.sort_by(f64::total_cmp);
    angles
        .iter()
        .zip(radii)
        .map(|(&t, &r)| center + p(t.cos(), t.sin()) * (r * scale))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn point_in_polygon_agrees_with_winding_number(
        mut angles in prop::collection::vec(0.0..TAU, 3..12),
        radii in prop::collection::vec(0.2f64..1.0, 12),
        cx in -50.0f64..50.0,
        cy in -50.0f64..50.0,
        scale in 1.0f64..30.0,
        qx in -1.2f64..1.2,
        qy in -1.2f64..1.2,
    ) {
        angles.dedup();
        prop_assume!(angles.len() >= 3);
        let center = p(cx, cy);
        let ring = star_ring(&mut angles, &radii, center, scale);
        prop_assume!(pednet_core::geo::signed_area(&ring).abs() > 1e-6);
        let q = center + p(qx, qy) * scale;
        let even_odd = point_in_ring(q, &ring);
        prop_assert_eq!(even_odd, winding_number(q, &ring) != 0);
    }
}

proptest! {
    #[test]
    fn affine_composition(
        e1 in prop::array::uniform6(-3.0f64..3.0),
        e2 in prop::array::uniform6(-3.0f64..3.0),
        pts in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 1..20),
    ) {
        let mk = |e: [f64; 6]| AffineParams { a: e[0], b: e[1], c: e[2], d: e[3], t1: e[4], t2: e[5] };
        let (p1, p2) = (mk(e1), mk(e2));
        let xs: Vec<PointM> = pts.iter().map(|&(x, y)| p(x, y)).collect();
        let two_step = apply_affine(&p2, &apply_affine(&p1, &xs));
        let composed = apply_affine(&p2.compose(&p1), &xs);
        for (a, b) in two_step.iter().zip(&composed) {
            prop_assert!(a.dist(*b) < 1e-9);
        }
    }

    #[test]
    fn straight_offset_roundtrip(
        x0 in -100.0f64..100.0, y0 in -100.0f64..100.0,
        angle in 0.0f64..TAU, len in 1.0f64..200.0, d in 0.0f64..20.0,
    ) {
        let a = p(x0, y0);
        let b = a + p(angle.cos(), angle.sin()) * len;
        let l = LineStringM::new(vec![a, b]).unwrap();
        let back = offset_linestring(&offset_linestring(&l, d, Side::Left).unwrap(), d, Side::Right).unwrap();
        for (g, w) in back.points().iter().zip(l.points()) {
            prop_assert!(g.dist(*w) < 1e-6);
        }
    }

    #[test]
    fn buffer_area_grows_with_radius(r in 0.1f64..10.0, dr in 0.01f64..5.0, len in 1.0f64..50.0) {
        let l = line(&[(0.0, 0.0), (len, 0.0)]);
        let small = buffer_geometry(BufferInput::Line(&l), r).unwrap().area();
        let large = buffer_geometry(BufferInput::Line(&l), r + dr).unwrap().area();
        prop_assert!(large > small);
    }
}

#[test]
fn offset_examples() {
    let l = line(&[(0.0, 0.0), (10.0, 0.0)]);
    assert_points(
        offset_linestring(&l, 2.0, Side::Left).unwrap().points(),
        &[(0.0, 2.0), (10.0, 2.0)],
        1e-6,
    );
    let bent = line(&[(0.0, 0.0), (10.0, 0.0), (10.0, 10.0)]);
    assert_points(
        offset_linestring(&bent, 2.0, Side::Left).unwrap().points(),
        &[(0.0, 2.0), (8.0, 2.0), (8.0, 10.0)],
        1e-6,
    );
    assert_eq!(offset_linestring(&bent, 0.0, Side::Right).unwrap(), bent);
}

#[test]
fn buffer_area_examples() {
    let disc = buffer_geometry(BufferInput::Point(p(3.0, -1.0)), 2.0).unwrap();
    let want = PI * 4.0;
    assert!((disc.area() - want).abs() / want < 0.01, "{}", disc.area());
    let seg = line(&[(0.0, 0.0), (10.0, 0.0)]);
    let cap = buffer_geometry(BufferInput::Line(&seg), 2.0).unwrap();
    let want = 40.0 + 4.0 * PI;
    assert!((cap.area() - want).abs() / want < 0.01, "{}", cap.area());
    assert!(buffer_geometry(BufferInput::Point(p(0.0, 0.0)), 0.0).is_err());
}

#[test]
fn affine_examples() {
    let pts = [p(1.0, 1.0), p(-2.0, 5.0)];
    assert_eq!(apply_affine(&AffineParams::identity(), &pts), pts.to_vec());
    assert_eq!(
        apply_affine(&AffineParams::translation(5.0, -3.0), &[p(1.0, 1.0)]),
        vec![p(6.0, -2.0)]
    );
    let rot = AffineParams {
        a: 0.0,
        b: -1.0,
        c: 1.0,
        d: 0.0,
        t1: 0.0,
        t2: 0.0,
    };
    assert_eq!(apply_affine(&rot, &[p(1.0, 0.0)]), vec![p(0.0, 1.0)]);
}

#[test]
fn projection_examples() {
    let proj = LocalProjection::new(LonLat::new(-122.33, 47.61));
    let o = proj.forward(LonLat::new(-122.33, 47.61)).unwrap();
    assert_abs_diff_eq!(o.x, 0.0, epsilon = 1e-9);
    assert_abs_diff_eq!(o.y, 0.0, epsilon = 1e-9);
    let q = LonLat::new(-122.3172, 47.6173);
    let back = proj.inverse(proj.forward(q).unwrap());
    assert!((back.lon - q.lon).abs() < 1e-9 && (back.lat - q.lat).abs() < 1e-9);

    // WGS84 equatorial radius times the angle
    let eq = LocalProjection::new(LonLat::new(0.0, 0.0));
    let x = eq.forward(LonLat::new(0.001, 0.0)).unwrap().x;
    let want = 6_378_137.0 * 0.001f64.to_radians();
    assert!((x - want).abs() < 0.1, "{x} vs {want}");
    assert!(eq.forward(LonLat::new(2.0, 0.0)).is_err());
}

#[test]
fn polygon_contains_matches_ring_test() {
    let sq = PolygonM::new(vec![p(0.0, 0.0), p(4.0, 0.0), p(4.0, 4.0), p(0.0, 4.0)]).unwrap();
    assert!(sq.contains(p(2.0, 2.0)));
    assert!(!sq.contains(p(5.0, 2.0)));
    assert_abs_diff_eq!(sq.area(), 16.0, epsilon = 1e-12);
}
