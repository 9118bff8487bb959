use approx::assert_abs_diff_eq;
use pednet_core::eval::{
    components, f1_score, instance_corner_metrics, lint_graph, match_edges, pixel_metrics,
    EvalError, LintKind,
};
use pednet_core::geo::{LineStringM, LocalProjection, LonLat, PointM};
use pednet_core::graph::{EdgeKind, NodeKind, PedGraph};
use pednet_core::pedestrianfer::{build_hypothesis, HypothesisConfig};
use pednet_core::raster::{GridFrame, LabelRaster, RasterClass};
use pednet_core::synthetic::{grid_city, translate_graph};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn p(x: f64, y: f64) -> PointM {
    PointM::new(x, y)
}

fn origin() -> LonLat {
    LonLat::new(-122.3, 47.6)
}

type Segment = ((f64, f64), (f64, f64), EdgeKind);

/// One edge of `kind` per segment.
fn graph_of(segments: &[Segment]) -> PedGraph {
    let mut g = PedGraph::new(LocalProjection::new(origin()));
    for &((x0, y0), (x1, y1), kind) in segments {
        let nk = if kind == EdgeKind::Sidewalk {
            NodeKind::SidewalkPt
        } else {
            NodeKind::Curb
        };
        let a = g.add_node(p(x0, y0), nk);
        let b = g.add_node(p(x1, y1), nk);
        g.add_edge(
            a,
            b,
            LineStringM::new(vec![p(x0, y0), p(x1, y1)]).unwrap(),
            kind,
        )
        .unwrap();
    }
    g
}

/// Nine parallel 100 m sidewalks, 50 m apart: 900 m in total.
fn nine_sidewalks() -> Vec<Segment> {
    (0..9)
        .map(|i| {
            (
                (0.0, i as f64 * 50.0),
                (100.0, i as f64 * 50.0),
                EdgeKind::Sidewalk,
            )
        })
        .collect()
}

fn hypothesis() -> PedGraph {
    let streets = grid_city(2, 2, 100.0, origin()).unwrap();
    build_hypothesis(&streets, &HypothesisConfig::default(), &[])
        .unwrap()
        .graph
}

#[test]
fn identical_graphs_score_one() {
    let g = hypothesis();
    let r = match_edges(&g, &g, 3.0, 0.7).unwrap();
    for c in [r.sidewalk, r.crossing] {
        assert_eq!((c.precision, c.recall, c.f1), (1.0, 1.0, 1.0));
        assert!(!c.empty_pred && !c.empty_gt);
    }
}

#[test]
fn ten_meter_shift_scores_zero() {
    let gt = graph_of(&nine_sidewalks());
    let pred = translate_graph(&gt, p(0.0, 10.0)).unwrap();
    let r = match_edges(&pred, &gt, 3.0, 0.7).unwrap();
    assert_eq!(
        (r.sidewalk.precision, r.sidewalk.recall, r.sidewalk.f1),
        (0.0, 0.0, 0.0)
    );
    // the same shift passes once the tolerance exceeds it
    let r = match_edges(&pred, &gt, 10.5, 0.7).unwrap();
    assert_eq!(r.sidewalk.f1, 1.0);
}

#[test]
fn extra_false_sidewalk_lowers_precision() {
    let gt = graph_of(&nine_sidewalks());
    let mut segs = nine_sidewalks();
    segs.push(((0.0, 1000.0), (100.0, 1000.0), EdgeKind::Sidewalk));
    let pred = graph_of(&segs);
    let s = match_edges(&pred, &gt, 3.0, 0.7).unwrap().sidewalk;
    assert_abs_diff_eq!(s.total_m, 1000.0, epsilon = 1e-9);
    assert_abs_diff_eq!(s.matched_m, 900.0, epsilon = 1e-9);
    assert_abs_diff_eq!(s.precision, 0.9, epsilon = 1e-12);
    assert_abs_diff_eq!(s.recall, 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(s.f1, 1.8 / 1.9, epsilon = 1e-12);
}

#[test]
fn empty_graph_conventions() {
    let g = graph_of(&nine_sidewalks());
    let empty = graph_of(&[]);
    let r = match_edges(&empty, &g, 3.0, 0.7).unwrap().sidewalk;
    assert!(r.empty_pred && r.precision == 0.0 && r.recall == 0.0);
    let r = match_edges(&g, &empty, 3.0, 0.7).unwrap().sidewalk;
    assert!(r.empty_gt && r.recall == 0.0 && r.precision == 0.0);
    let r = match_edges(&empty, &empty, 3.0, 0.7).unwrap();
    assert_eq!(
        (r.crossing.precision, r.crossing.recall, r.crossing.f1),
        (1.0, 1.0, 1.0)
    );
    assert!(match_edges(&g, &g, 0.0, 0.7).is_err());
    assert!(match_edges(&g, &g, 3.0, 1.5).is_err());
}

fn random_segments() -> impl Strategy<Value = Vec<Segment>> {
    let seg = (
        0.0f64..200.0,
        0.0f64..200.0,
        5.0f64..60.0,
        0.0f64..std::f64::consts::TAU,
        any::<bool>(),
    )
        .prop_map(|(x, y, len, t, crossing)| {
            let kind = if crossing {
                EdgeKind::Crossing
            } else {
                EdgeKind::Sidewalk
            };
            ((x, y), (x + len * t.cos(), y + len * t.sin()), kind)
        });
    prop::collection::vec(seg, 1..12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn f1_identity_and_self_match(a in random_segments(), b in random_segments()) {
        let (ga, gb) = (graph_of(&a), graph_of(&b));
        let r = match_edges(&ga, &gb, 3.0, 0.7).unwrap();
        for c in [r.sidewalk, r.crossing] {
            if c.precision + c.recall > 0.0 {
                let want = 2.0 * c.precision * c.recall / (c.precision + c.recall);
                prop_assert!((c.f1 - want).abs() <= 1e-12);
            }
            prop_assert!((0.0..=1.0).contains(&c.precision) && (0.0..=1.0).contains(&c.recall));
        }
        let own = match_edges(&ga, &ga, 3.0, 0.7).unwrap();
        prop_assert_eq!(own.sidewalk.f1, 1.0);
        prop_assert_eq!(own.crossing.f1, 1.0);
    }

    #[test]
    fn precision_shrinks_with_tolerance(a in random_segments(), b in random_segments()) {
        let (ga, gb) = (graph_of(&a), graph_of(&b));
        let mut prev = f64::INFINITY;
        for tol in [20.0, 10.0, 5.0, 3.0, 1.0, 0.5] {
            let pr = match_edges(&ga, &gb, tol, 0.7).unwrap().sidewalk.precision;
            prop_assert!(pr <= prev + 1e-12, "tol {}: {} > {}", tol, pr, prev);
            prev = pr;
        }
    }
}

#[test]
fn f1_score_examples() {
    assert_eq!(f1_score(0.0, 0.0), 0.0);
    assert_abs_diff_eq!(f1_score(0.9, 1.0), 1.8 / 1.9, epsilon = 1e-15);
}

fn labels(w: usize, h: usize, values: Vec<u8>) -> LabelRaster {
    let frame = GridFrame::new(p(0.0, h as f64), 1.0, 1.0, w, h).unwrap();
    LabelRaster {
        frame,
        bbox: None,
        values,
    }
}

#[test]
fn pixel_metrics_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..200 {
        let pred: Vec<u8> = (0..64).map(|_| rng.gen_range(0..4)).collect();
        let gt: Vec<u8> = (0..64).map(|_| rng.gen_range(0..4)).collect();
        let m = pixel_metrics(&labels(8, 8, pred.clone()), &labels(8, 8, gt.clone())).unwrap();

        let correct = pred.iter().zip(&gt).filter(|(a, b)| a == b).count();
        assert_eq!(m.accuracy, correct as f64 / 64.0);
        let mut present = Vec::new();
        for class in RasterClass::ALL {
            let c = class as u8;
            let (mut tp, mut fp, mut fn_) = (0u32, 0u32, 0u32);
            for (&a, &b) in pred.iter().zip(&gt) {
                match (a == c, b == c) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    _ => {}
                }
            }
            let want = (tp + fp + fn_ > 0).then(|| tp as f64 / (tp + fp + fn_) as f64);
            assert_eq!(m.iou[class.name()], want);
            present.extend(want);
        }
        let miou = present.iter().sum::<f64>() / present.len() as f64;
        assert_eq!(m.miou, miou);
    }
}

#[test]
fn pixel_metric_examples() {
    let a = labels(4, 4, vec![1; 16]);
    let m = pixel_metrics(&a, &a).unwrap();
    assert_eq!((m.miou, m.accuracy), (1.0, 1.0));
    assert_eq!(m.iou["background"], None);

    let disjoint = labels(4, 4, (0..16).map(|i| if i < 8 { 1 } else { 0 }).collect());
    let other = labels(4, 4, (0..16).map(|i| if i < 8 { 0 } else { 1 }).collect());
    assert_eq!(
        pixel_metrics(&disjoint, &other).unwrap().iou["sidewalk"],
        Some(0.0)
    );

    // pred holds exactly half of gt's crossing pixels and nothing else
    let gt = labels(8, 8, (0..64).map(|i| if i < 32 { 2 } else { 0 }).collect());
    let pred = labels(8, 8, (0..64).map(|i| if i < 16 { 2 } else { 0 }).collect());
    assert_eq!(
        pixel_metrics(&pred, &gt).unwrap().iou["crossing"],
        Some(0.5)
    );

    assert_eq!(
        pixel_metrics(&labels(2, 2, vec![0; 4]), &labels(4, 1, vec![0; 4])),
        Err(EvalError::ShapeMismatch(2, 2, 4, 1))
    );
}

/// Draws axis-aligned corner-bulb boxes `(col, row, w, h)` on a 20 x 20 grid.
fn bulbs(boxes: &[(usize, usize, usize, usize)]) -> LabelRaster {
    let mut v = vec![0u8; 400];
    for &(c, r, w, h) in boxes {
        for row in r..r + h {
            for col in c..c + w {
                v[row * 20 + col] = RasterClass::CornerBulb as u8;
            }
        }
    }
    labels(20, 20, v)
}

#[test]
fn instance_metric_examples() {
    let gt = bulbs(&[(1, 1, 4, 4), (10, 10, 5, 5)]);
    assert_eq!(components(&gt, RasterClass::CornerBulb).len(), 2);
    let m = instance_corner_metrics(&gt, &gt, 0.5).unwrap();
    assert_eq!((m.precision, m.recall, m.matches), (1.0, 1.0, 2));

    let one = bulbs(&[(1, 1, 4, 4)]);
    let pred = bulbs(&[(1, 1, 4, 4), (12, 2, 3, 3)]);
    let m = instance_corner_metrics(&pred, &one, 0.5).unwrap();
    assert_eq!((m.precision, m.recall), (0.5, 1.0));

    let empty = bulbs(&[]);
    let m = instance_corner_metrics(&empty, &one, 0.5).unwrap();
    assert!(m.empty_pred);
    assert_eq!((m.precision, m.recall), (0.0, 0.0));

    // diagonal neighbours are separate 4-connected components
    let diag = bulbs(&[(0, 0, 1, 1), (1, 1, 1, 1)]);
    assert_eq!(components(&diag, RasterClass::CornerBulb).len(), 2);

    // a 4x4 box against a 4x2 half has IoU 0.5: matched at 0.5, not at 0.6
    let half = bulbs(&[(1, 1, 4, 2)]);
    assert_eq!(
        instance_corner_metrics(&half, &one, 0.5).unwrap().matches,
        1
    );
    assert_eq!(
        instance_corner_metrics(&half, &one, 0.6).unwrap().matches,
        0
    );
    assert!(instance_corner_metrics(&half, &one, 0.0).is_err());
}

#[test]
fn lint_examples() {
    let streets = grid_city(2, 2, 100.0, origin()).unwrap();
    let g = build_hypothesis(&streets, &HypothesisConfig::default(), &[])
        .unwrap()
        .graph;
    assert!(lint_graph(&g, &streets, 2.0).is_empty());

    // a crossing between two bare sidewalk points
    let mut bad = g.clone();
    let a = bad.add_node(p(300.0, 300.0), NodeKind::SidewalkPt);
    let b = bad.add_node(p(310.0, 300.0), NodeKind::SidewalkPt);
    bad.add_edge(
        a,
        b,
        LineStringM::new(vec![p(300.0, 300.0), p(310.0, 300.0)]).unwrap(),
        EdgeKind::Crossing,
    )
    .unwrap();
    let v = lint_graph(&bad, &streets, 2.0);
    assert_eq!(v.len(), 1, "{v:?}");
    assert_eq!(v[0].kind, LintKind::DisconnectedCrossing);

    // a curb moved onto the middle of a street
    let e = &streets.edges()[0];
    let mid = (e.geometry.first() + e.geometry.last()) * 0.5;
    let (ax, ay) = (e.geometry.first(), e.geometry.last());
    let oracle = {
        let d = ay - ax;
        let t = ((mid - ax).dot(d) / d.dot(d)).clamp(0.0, 1.0);
        (ax + d * t).dist(mid)
    };
    assert!(oracle < 2.0);
    let mut misplaced = g.clone();
    let curb = misplaced
        .nodes()
        .find(|(_, n)| n.kind == NodeKind::Curb)
        .map(|(id, _)| id)
        .unwrap();
    misplaced
        .move_nodes(&[(curb, mid)].into_iter().collect())
        .unwrap();
    let v = lint_graph(&misplaced, &streets, 2.0);
    assert_eq!(v.len(), 1, "{v:?}");
    assert_eq!(v[0].kind, LintKind::MisplacedCurb);
    assert_eq!(v[0].feature, format!("node/{}", curb.0));

    let mut untagged = g.clone();
    untagged.add_node(p(500.0, 500.0), NodeKind::Unknown);
    let v = lint_graph(&untagged, &streets, 2.0);
    assert_eq!(
        v.iter().map(|x| x.kind).collect::<Vec<_>>(),
        [LintKind::MissingTag]
    );
}
