//! Graph matching scores, pixel and instance metrics, and annotation lint.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::geo::{point_segment_distance, PointM};
use crate::graph::{EdgeKind, NodeKind, PedGraph};
use crate::net::StreetNetwork;
use crate::raster::{LabelRaster, RasterClass};

pub const SAMPLE_STEP_M: f64 = 0.5;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error("raster shapes differ: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("invalid evaluation parameter: {0}")]
    InvalidParameter(String),
}

pub fn f1_score(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMatch {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Matched and total predicted length, meters.
    pub matched_m: f64,
    pub total_m: f64,
    /// Matched and total ground-truth length, meters.
    pub gt_matched_m: f64,
    pub gt_total_m: f64,
    pub empty_pred: bool,
    pub empty_gt: bool,
}

impl ClassMatch {
    /// Ratios from summed lengths (use this to merge tiles).
    pub fn from_lengths(matched_m: f64, total_m: f64, gt_matched_m: f64, gt_total_m: f64) -> Self {
        let empty_pred = total_m <= 0.0;
        let empty_gt = gt_total_m <= 0.0;
        let (precision, recall) = match (empty_pred, empty_gt) {
            (true, true) => (1.0, 1.0),
            _ => (
                if empty_pred { 0.0 } else { matched_m / total_m },
                if empty_gt {
                    0.0
                } else {
                    gt_matched_m / gt_total_m
                },
            ),
        };
        let f1 = if empty_pred && empty_gt {
            1.0
        } else {
            f1_score(precision, recall)
        };
        Self {
            precision,
            recall,
            f1,
            matched_m,
            total_m,
            gt_matched_m,
            gt_total_m,
            empty_pred,
            empty_gt,
        }
    }

    pub fn merge(&self, o: &ClassMatch) -> ClassMatch {
        Self::from_lengths(
            self.matched_m + o.matched_m,
            self.total_m + o.total_m,
            self.gt_matched_m + o.gt_matched_m,
            self.gt_total_m + o.gt_total_m,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeMatchReport {
    pub sidewalk: ClassMatch,
    pub crossing: ClassMatch,
}

/// Uniform-grid bucket index over segments.
struct SegmentIndex {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
    segs: Vec<(PointM, PointM)>,
}

impl SegmentIndex {
    fn new(segs: Vec<(PointM, PointM)>, cell: f64) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, (a, b)) in segs.iter().enumerate() {
            let (x0, x1) = (a.x.min(b.x), a.x.max(b.x));
            let (y0, y1) = (a.y.min(b.y), a.y.max(b.y));
            for cx in (x0 / cell).floor() as i64..=(x1 / cell).floor() as i64 {
                for cy in (y0 / cell).floor() as i64..=(y1 / cell).floor() as i64 {
                    buckets.entry((cx, cy)).or_default().push(i);
                }
            }
        }
        Self {
            cell,
            buckets,
            segs,
        }
    }

    /// True when some segment lies within `tol` (`tol <= cell`).
    fn within(&self, p: PointM, tol: f64) -> bool {
        let cx = (p.x / self.cell).floor() as i64;
        let cy = (p.y / self.cell).floor() as i64;
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(list) = self.buckets.get(&(cx + dx, cy + dy)) {
                    if list.iter().any(|&i| {
                        let (a, b) = self.segs[i];
                        point_segment_distance(p, a, b) <= tol
                    }) {
                        return true;
                    }
                }
            }
        }
        false
    }
}

fn class_lines(g: &PedGraph, kind: EdgeKind) -> Vec<&[PointM]> {
    g.edges()
        .filter(|(_, e)| e.kind == kind)
        .map(|(_, e)| e.geometry.points())
        .collect()
}

/// Sum of lengths of edges with at least `coverage` of their length within
/// `tol` of `other`. Coverage is measured at the midpoints of 0.5 m pieces.
fn matched_length(
    lines: &[&[PointM]],
    other: &SegmentIndex,
    tol: f64,
    coverage: f64,
) -> (f64, f64) {
    let mut matched = 0.0;
    let mut total = 0.0;
    for pts in lines {
        let mut len = 0.0;
        let mut inside = 0.0;
        for w in pts.windows(2) {
            let l = w[0].dist(w[1]);
            if l == 0.0 {
                continue;
            }
            let n = (l / SAMPLE_STEP_M).ceil().max(1.0) as usize;
            let piece = l / n as f64;
            for k in 0..n {
                let p = w[0].lerp(w[1], (k as f64 + 0.5) / n as f64);
                if other.within(p, tol) {
                    inside += piece;
                }
            }
            len += l;
        }
        total += len;
        if len > 0.0 && inside >= coverage * len - 1e-9 {
            matched += len;
        }
    }
    (matched, total)
}

fn match_class(
    pred: &PedGraph,
    gt: &PedGraph,
    kind: EdgeKind,
    tol: f64,
    coverage: f64,
) -> ClassMatch {
    let p = class_lines(pred, kind);
    let g = class_lines(gt, kind);
    let segs = |lines: &[&[PointM]]| -> Vec<(PointM, PointM)> {
        lines
            .iter()
            .flat_map(|l| l.windows(2).map(|w| (w[0], w[1])))
            .collect()
    };
    let gi = SegmentIndex::new(segs(&g), tol);
    let pi = SegmentIndex::new(segs(&p), tol);
    let (pm, pt) = matched_length(&p, &gi, tol, coverage);
    let (gm, gtot) = matched_length(&g, &pi, tol, coverage);
    ClassMatch::from_lengths(pm, pt, gm, gtot)
}

/// Buffered-length assignment of predicted to ground-truth edges, per class.
/// Links are not scored.
pub fn match_edges(
    pred: &PedGraph,
    gt: &PedGraph,
    tol: f64,
    coverage: f64,
) -> Result<EdgeMatchReport, EvalError> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(EvalError::InvalidParameter(format!(
            "tol must be > 0, got {tol}"
        )));
    }
    if !(coverage > 0.0 && coverage <= 1.0) {
        return Err(EvalError::InvalidParameter(format!(
            "coverage must be in (0, 1], got {coverage}"
        )));
    }
    Ok(EdgeMatchReport {
        sidewalk: match_class(pred, gt, EdgeKind::Sidewalk, tol, coverage),
        crossing: match_class(pred, gt, EdgeKind::Crossing, tol, coverage),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PixelMetrics {
    /// IoU per class name; `None` when the class is absent from both rasters.
    pub iou: BTreeMap<String, Option<f64>>,
    pub miou: f64,
    pub accuracy: f64,
    /// `confusion[gt][pred]` pixel counts.
    pub confusion: [[u64; 4]; 4],
}

impl PixelMetrics {
    pub fn from_confusion(confusion: [[u64; 4]; 4]) -> Self {
        let total: u64 = confusion.iter().flatten().sum();
        let correct: u64 = (0..4).map(|c| confusion[c][c]).sum();
        let mut iou = BTreeMap::new();
        let mut present = Vec::new();
        for class in RasterClass::ALL {
            let c = class as usize;
            let tp = confusion[c][c];
            let fn_: u64 = (0..4).filter(|&p| p != c).map(|p| confusion[c][p]).sum();
            let fp: u64 = (0..4).filter(|&g| g != c).map(|g| confusion[g][c]).sum();
            let denom = tp + fp + fn_;
            let v = (denom > 0).then(|| tp as f64 / denom as f64);
            if let Some(v) = v {
                present.push(v);
            }
            iou.insert(class.name().to_string(), v);
        }
        let miou = if present.is_empty() {
            1.0
        } else {
            present.iter().sum::<f64>() / present.len() as f64
        };
        let accuracy = if total == 0 {
            1.0
        } else {
            correct as f64 / total as f64
        };
        Self {
            iou,
            miou,
            accuracy,
            confusion,
        }
    }
}

pub fn confusion_matrix(pred: &LabelRaster, gt: &LabelRaster) -> Result<[[u64; 4]; 4], EvalError> {
    if (pred.width(), pred.height()) != (gt.width(), gt.height()) {
        return Err(EvalError::ShapeMismatch(
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height(),
        ));
    }
    let mut m = [[0u64; 4]; 4];
    for (&p, &g) in pred.values.iter().zip(&gt.values) {
        m[(g as usize).min(3)][(p as usize).min(3)] += 1;
    }
    Ok(m)
}

pub fn pixel_metrics(pred: &LabelRaster, gt: &LabelRaster) -> Result<PixelMetrics, EvalError> {
    Ok(PixelMetrics::from_confusion(confusion_matrix(pred, gt)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceMetrics {
    pub precision: f64,
    pub recall: f64,
    pub matches: usize,
    pub pred_components: usize,
    pub gt_components: usize,
    pub empty_pred: bool,
    pub empty_gt: bool,
}

/// 4-connected components of pixels equal to `class`, as index lists.
pub fn components(r: &LabelRaster, class: RasterClass) -> Vec<Vec<usize>> {
    let (w, h) = (r.width(), r.height());
    let target = class as u8;
    let mut seen = vec![false; r.values.len()];
    let mut out = Vec::new();
    for start in 0..r.values.len() {
        if seen[start] || r.values[start] != target {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            let mut push = |j: usize| {
                if !seen[j] && r.values[j] == target {
                    seen[j] = true;
                    comp.push(j);
                    stack.push(j);
                }
            };
            if x > 0 {
                push(i - 1);
            }
            if x + 1 < w {
                push(i + 1);
            }
            if y > 0 {
                push(i - w);
            }
            if y + 1 < h {
                push(i + w);
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

fn iou_sorted(a: &[usize], b: &[usize]) -> f64 {
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Corner-bulb instances matched one-to-one, greedily by descending IoU.
pub fn instance_corner_metrics(
    pred: &LabelRaster,
    gt: &LabelRaster,
    iou_thresh: f64,
) -> Result<InstanceMetrics, EvalError> {
    if (pred.width(), pred.height()) != (gt.width(), gt.height()) {
        return Err(EvalError::ShapeMismatch(
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height(),
        ));
    }
    if !(iou_thresh > 0.0 && iou_thresh <= 1.0) {
        return Err(EvalError::InvalidParameter(format!(
            "iou_thresh must be in (0, 1], got {iou_thresh}"
        )));
    }
    let pc = components(pred, RasterClass::CornerBulb);
    let gc = components(gt, RasterClass::CornerBulb);
    let mut pairs = Vec::new();
    for (i, a) in pc.iter().enumerate() {
        for (j, b) in gc.iter().enumerate() {
            let v = iou_sorted(a, b);
            if v >= iou_thresh {
                pairs.push((v, i, j));
            }
        }
    }
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_p = vec![false; pc.len()];
    let mut used_g = vec![false; gc.len()];
    let mut matches = 0;
    for (_, i, j) in pairs {
        if !used_p[i] && !used_g[j] {
            used_p[i] = true;
            used_g[j] = true;
            matches += 1;
        }
    }
    let ratio = |m: usize, n: usize| if n == 0 { 0.0 } else { m as f64 / n as f64 };
    Ok(InstanceMetrics {
        precision: ratio(matches, pc.len()),
        recall: ratio(matches, gc.len()),
        matches,
        pred_components: pc.len(),
        gt_components: gc.len(),
        empty_pred: pc.is_empty(),
        empty_gt: gc.is_empty(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LintKind {
    DisconnectedCrossing,
    MisplacedCurb,
    MissingTag,
    WrongClassification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LintViolation {
    pub kind: LintKind,
    /// `node/<id>` or `edge/<id>`.
    pub feature: String,
    pub detail: String,
}

pub const DEFAULT_D_ROAD: f64 = 1.0;

/// True when `curb` hangs off the sidewalk network through a link.
fn linked_to_sidewalk(g: &PedGraph, curb: crate::graph::PedNodeId) -> bool {
    if g.node(curb).map(|n| n.kind) != Some(NodeKind::Curb) {
        return false;
    }
    g.incident_of_kind(curb, EdgeKind::Link)
        .into_iter()
        .any(|l| {
            let other = g.edge(l).expect("incident").other(curb);
            g.node(other).map(|n| n.kind) == Some(NodeKind::SidewalkPt)
                && !g.incident_of_kind(other, EdgeKind::Sidewalk).is_empty()
        })
}

/// Checks a pedestrian graph against common annotation errors.
pub fn lint_graph(g: &PedGraph, streets: &StreetNetwork, d_road: f64) -> Vec<LintViolation> {
    let mut out = Vec::new();
    for (id, e) in g.edges() {
        let feature = format!("edge/{}", id.0);
        if e.kind == EdgeKind::Unknown {
            out.push(LintViolation {
                kind: LintKind::MissingTag,
                feature: feature.clone(),
                detail: "edge has no footway kind".into(),
            });
            continue;
        }
        let k0 = g.node(e.from).map(|n| n.kind);
        let k1 = g.node(e.to).map(|n| n.kind);
        match e.kind {
            EdgeKind::Crossing => {
                let ends = [e.from, e.to].map(|n| linked_to_sidewalk(g, n));
                if !(ends[0] && ends[1]) {
                    out.push(LintViolation {
                        kind: LintKind::DisconnectedCrossing,
                        feature,
                        detail: "crossing end lacks a curb linked to a sidewalk".into(),
                    });
                }
            }
            EdgeKind::Link => {
                let ok = matches!(
                    (k0, k1),
                    (Some(NodeKind::Curb), Some(NodeKind::SidewalkPt))
                        | (Some(NodeKind::SidewalkPt), Some(NodeKind::Curb))
                );
                if !ok {
                    out.push(LintViolation {
                        kind: LintKind::WrongClassification,
                        feature,
                        detail: "link does not join a curb to a sidewalk point".into(),
                    });
                }
            }
            EdgeKind::Sidewalk => {
                if k0 == Some(NodeKind::Curb) || k1 == Some(NodeKind::Curb) {
                    out.push(LintViolation {
                        kind: LintKind::WrongClassification,
                        feature,
                        detail: "sidewalk edge ends at a curb".into(),
                    });
                }
            }
            EdgeKind::Unknown => {}
        }
    }
    for (id, n) in g.nodes() {
        let feature = format!("node/{}", id.0);
        match n.kind {
            NodeKind::Unknown => out.push(LintViolation {
                kind: LintKind::MissingTag,
                feature,
                detail: "node has no kind".into(),
            }),
            NodeKind::Curb => {
                for (eid, e) in streets.edges().iter().enumerate() {
                    let d = e.geometry.distance_to(n.pos);
                    let near_end = [e.geometry.first(), e.geometry.last()]
                        .iter()
                        .any(|p| p.dist(n.pos) < d_road);
                    if d < d_road && !near_end {
                        out.push(LintViolation {
                            kind: LintKind::MisplacedCurb,
                            feature: feature.clone(),
                            detail: format!("curb {d:.2} m from street {eid} centerline"),
                        });
                        break;
                    }
                }
            }
            _ => {}
        }
    }
    out
}
