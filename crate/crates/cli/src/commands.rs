//! Subcommand implementations. Every command writes its files as
//! `<name>.partial` first and renames them once the whole command succeeds,
//! so a failure leaves only `.partial` artifacts behind.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use geojson::{GeoJson, GeometryValue};
use pednet_core::eval::{
    instance_corner_metrics, lint_graph, match_edges, pixel_metrics, EdgeMatchReport,
};
use pednet_core::geo::{LocalProjection, LonLat, PointM};
use pednet_core::graph::{EdgeKind, PedGraph};
use pednet_core::net::{parse_street_network, ParseOptions, StreetNetwork};
use pednet_core::pedestrianfer::{build_hypothesis, Hypothesis};
use pednet_core::raster::tiles::tiles_covering;
use pednet_core::raster::{
    frame_around, labels_from_rasters, make_probability_rasters, read_class_raster,
    read_label_raster, resolve_cache_dir, write_class_raster, write_label_raster, FetchOptions,
    GridFrame, LabelRaster, ProbabilityRasters, RasterClass, RasterError, TileFetcher,
};
use pednet_core::refine::{refine_graph, RasterSet, RefineError, Refined};
use pednet_core::schema::{graph_from_geojson, graph_to_string};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::http::HttpTransport;

pub const HYPOTHESIS_FILE: &str = "hypothesis.geojson";
pub const REFINED_FILE: &str = "refined.geojson";
pub const REPORT_FILE: &str = "report.json";
pub const LINT_FILE: &str = "lint.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const MASKS_DIR: &str = "masks";
pub const LABELS_FILE: &str = "labels.png";

const CLASSES: [RasterClass; 3] = [
    RasterClass::Sidewalk,
    RasterClass::Crossing,
    RasterClass::CornerBulb,
];

pub struct Context {
    pub config: PipelineConfig,
    pub out_dir: PathBuf,
}

/// Outputs awaiting their final rename.
struct Staging {
    dir: PathBuf,
    pending: Vec<(PathBuf, PathBuf)>,
}

impl Staging {
    fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            pending: Vec::new(),
        })
    }

    fn partial_path(&self, name: &str) -> (PathBuf, PathBuf) {
        (
            self.dir.join(format!("{name}.partial")),
            self.dir.join(name),
        )
    }

    fn file(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let (tmp, dst) = self.partial_path(name);
        fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
        self.pending.push((tmp, dst.clone()));
        Ok(dst)
    }

    /// A fresh `.partial` directory; returns its current path.
    fn dir(&mut self, name: &str) -> Result<PathBuf, CliError> {
        let (tmp, dst) = self.partial_path(name);
        if tmp.exists() {
            fs::remove_dir_all(&tmp).map_err(|e| CliError::io(&tmp, e))?;
        }
        fs::create_dir_all(&tmp).map_err(|e| CliError::io(&tmp, e))?;
        self.pending.push((tmp.clone(), dst));
        Ok(tmp)
    }

    fn commit(self) -> Result<Vec<PathBuf>, CliError> {
        let mut out = Vec::with_capacity(self.pending.len());
        for (tmp, dst) in self.pending {
            if dst.is_dir() {
                fs::remove_dir_all(&dst).map_err(|e| CliError::io(&dst, e))?;
            }
            fs::rename(&tmp, &dst).map_err(|e| CliError::io(&dst, e))?;
            out.push(dst);
        }
        Ok(out)
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn invalid_input(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::new("InvalidInput", format!("{}: {e}", path.display()))
}

fn to_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

pub fn load_streets(
    cfg: &PipelineConfig,
    path: &Path,
    origin: Option<LonLat>,
) -> Result<StreetNetwork, CliError> {
    let text = read_text(path)?;
    let doc = if text.trim().is_empty() {
        r#"{"type":"FeatureCollection","features":[]}"#
    } else {
        text.as_str()
    };
    let opts = ParseOptions {
        origin: origin.or(cfg.projection.origin()),
        highway_include: cfg.streets.highway_include.clone(),
        planarize: cfg.streets.planarize,
    };
    parse_street_network(doc, &opts).map_err(|e| invalid_input(path, e))
}

/// Point features of a GeoJSON file, projected.
pub fn load_points(path: &Path, proj: &LocalProjection) -> Result<Vec<PointM>, CliError> {
    let gj: GeoJson = read_text(path)?
        .parse()
        .map_err(|e| invalid_input(path, e))?;
    let geoms: Vec<geojson::Geometry> = match gj {
        GeoJson::FeatureCollection(fc) => {
            fc.features.into_iter().filter_map(|f| f.geometry).collect()
        }
        GeoJson::Feature(f) => f.geometry.into_iter().collect(),
        GeoJson::Geometry(g) => vec![g],
    };
    let mut out = Vec::new();
    for g in geoms {
        let coords: Vec<Vec<f64>> = match g.value {
            GeometryValue::Point { coordinates } => vec![coordinates.as_slice().to_vec()],
            GeometryValue::MultiPoint { coordinates } => coordinates
                .into_iter()
                .map(|c| c.as_slice().to_vec())
                .collect(),
            _ => continue,
        };
        for c in coords {
            if c.len() < 2 {
                return Err(invalid_input(path, "invalid coordinate"));
            }
            out.push(
                proj.forward(LonLat::new(c[0], c[1]))
                    .map_err(|e| invalid_input(path, e))?,
            );
        }
    }
    Ok(out)
}

pub fn load_graph(path: &Path, origin: Option<LonLat>) -> Result<PedGraph, CliError> {
    graph_from_geojson(&read_text(path)?, origin).map_err(|e| invalid_input(path, e))
}

fn infer(
    cfg: &PipelineConfig,
    streets: &Path,
    known: Option<&Path>,
) -> Result<Hypothesis, CliError> {
    let net = load_streets(cfg, streets, None)?;
    let known_pts = match known {
        Some(p) => load_points(p, &net.projection)?,
        None => Vec::new(),
    };
    let h = build_hypothesis(&net, &cfg.hypothesis, &known_pts)
        .map_err(|e| CliError::new("InferenceFailed", e.to_string()))?;
    for w in &h.warnings {
        eprintln!("warning: {w}");
    }
    Ok(h)
}

/// Streets to hypothesized pedestrian graph.
pub fn cmd_infer(ctx: &Context, streets: &Path, known: Option<&Path>) -> Result<PathBuf, CliError> {
    let h = infer(&ctx.config, streets, known)?;
    let mut st = Staging::new(&ctx.out_dir)?;
    let path = st.file(HYPOTHESIS_FILE, graph_to_string(&h.graph).as_bytes())?;
    st.commit()?;
    Ok(path)
}

fn raster_error(e: RasterError) -> CliError {
    CliError::new("RasterFailed", e.to_string())
}

fn union_frame(a: &GridFrame, b: &GridFrame, res: f64) -> Result<GridFrame, CliError> {
    let (amin, amax) = a.bounds();
    let (bmin, bmax) = b.bounds();
    GridFrame::from_bounds(
        PointM::new(amin.x.min(bmin.x), amin.y.min(bmin.y)),
        PointM::new(amax.x.max(bmax.x), amax.y.max(bmax.y)),
        res,
    )
    .map_err(raster_error)
}

fn render(
    cfg: &PipelineConfig,
    g: &PedGraph,
    frame: &GridFrame,
) -> Result<(ProbabilityRasters, LabelRaster), CliError> {
    let r = &cfg.raster;
    let hard = make_probability_rasters(g, frame, &r.style, 0.0).map_err(raster_error)?;
    let labels = labels_from_rasters(&hard, &r.style.class_precedence);
    let soft = make_probability_rasters(g, frame, &r.style, r.blur_sigma / r.resolution)
        .map_err(raster_error)?;
    Ok((soft, labels))
}

fn write_masks(
    dir: &Path,
    rasters: &ProbabilityRasters,
    labels: &LabelRaster,
) -> Result<(), CliError> {
    for r in rasters.iter() {
        write_class_raster(&dir.join(format!("{}.png", r.class.name())), r)
            .map_err(raster_error)?;
    }
    write_label_raster(&dir.join(LABELS_FILE), labels).map_err(raster_error)
}

/// Fetches the imagery tiles covering `frame` when a template is configured.
fn fetch_tiles(
    cfg: &PipelineConfig,
    frame: &GridFrame,
    proj: &LocalProjection,
) -> Result<Vec<String>, CliError> {
    let Some(template) = &cfg.tiles.template else {
        return Ok(Vec::new());
    };
    let mut opts = FetchOptions::new(
        template.clone(),
        resolve_cache_dir(cfg.tiles.cache_dir.as_deref()),
    );
    opts.concurrency = cfg.tiles.concurrency;
    opts.offline = cfg.tiles.offline;
    opts.revalidate = cfg.tiles.revalidate;
    let transport = HttpTransport::new().map_err(|e| CliError::new("TileFetchFailed", e))?;
    let fetcher = TileFetcher::new(opts, Arc::new(transport)).map_err(raster_error)?;
    let tiles = tiles_covering(frame.bbox(proj).into(), cfg.tiles.zoom).map_err(raster_error)?;
    fetcher.fetch(&tiles).map_err(|e| match e {
        RasterError::OfflineCacheMiss(_) => CliError::new("OfflineCacheMiss", e.to_string()),
        _ => CliError::new("TileFetchFailed", e.to_string()),
    })?;
    Ok(tiles.iter().map(|t| t.to_string()).collect())
}

/// Pedestrian graph to label and class-probability masks (plus imagery
/// tiles when configured).
pub fn cmd_rasterize(ctx: &Context, graph: &Path) -> Result<PathBuf, CliError> {
    let cfg = &ctx.config;
    let g = load_graph(graph, cfg.projection.origin())?;
    let frame =
        frame_around(&g, cfg.raster.resolution, cfg.raster.padding).map_err(raster_error)?;
    let (soft, labels) = render(cfg, &g, &frame)?;
    let tiles = fetch_tiles(cfg, &frame, &g.projection)?;
    let mut st = Staging::new(&ctx.out_dir)?;
    let dir = st.dir(MASKS_DIR)?;
    write_masks(&dir, &soft, &labels)?;
    if !tiles.is_empty() {
        let p = dir.join("tiles.json");
        fs::write(
            &p,
            to_json(&json!({ "zoom": cfg.tiles.zoom, "tiles": tiles })),
        )
        .map_err(|e| CliError::io(&p, e))?;
    }
    let out = st.commit()?;
    Ok(out.into_iter().next().expect("one output"))
}

/// Reads `<dir>/<class>.png` for every class.
pub fn load_masks(dir: &Path, proj: &LocalProjection) -> Result<RasterSet, CliError> {
    let mut set = RasterSet::new();
    for class in CLASSES {
        let path = dir.join(format!("{}.png", class.name()));
        match read_class_raster(&path, proj) {
            Ok(r) if r.class == class => {
                set.insert(r);
            }
            Ok(r) => {
                return Err(invalid_input(
                    &path,
                    format!("holds {} raster", r.class.name()),
                ));
            }
            Err(e @ (RasterError::MissingSidecar(_) | RasterError::Io(_))) => {
                return Err(CliError::new(
                    "MissingClassRaster",
                    format!(
                        "{}: {}: {e}",
                        RefineError::MissingClassRaster(class),
                        path.display()
                    ),
                ));
            }
            Err(e) => return Err(invalid_input(&path, e)),
        }
    }
    Ok(set)
}

fn refine(cfg: &PipelineConfig, hypo: &PedGraph, rasters: &RasterSet) -> Result<Refined, CliError> {
    let r = refine_graph(hypo, rasters, &cfg.refine).map_err(|e| match e {
        RefineError::MissingClassRaster(_) => CliError::new("MissingClassRaster", e.to_string()),
        _ => CliError::new("RefineFailed", e.to_string()),
    })?;
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    Ok(r)
}

fn refine_summary(r: &Refined) -> Value {
    let fits: BTreeMap<&str, Value> = r
        .fits
        .iter()
        .map(|(id, f)| {
            let t = f.translation();
            let v =
                json!({ "g_identity": f.g_identity, "g_best": f.g_best, "shift_px": [t.x, t.y] });
            (id.0.as_str(), v)
        })
        .collect();
    json!({
        "pruned": r.pruned.iter().map(|c| c.0.as_str()).collect::<Vec<_>>(),
        "corners": fits,
        "warnings": r.warnings,
    })
}

/// Hypothesis plus masks to refined graph with edge confidences.
pub fn cmd_refine(ctx: &Context, hypothesis: &Path, masks: &Path) -> Result<PathBuf, CliError> {
    let hypo = load_graph(hypothesis, ctx.config.projection.origin())?;
    let rasters = load_masks(masks, &hypo.projection)?;
    let r = refine(&ctx.config, &hypo, &rasters)?;
    let mut st = Staging::new(&ctx.out_dir)?;
    let path = st.file(REFINED_FILE, graph_to_string(&r.graph).as_bytes())?;
    st.file("refine.json", to_json(&refine_summary(&r)).as_bytes())?;
    st.commit()?;
    Ok(path)
}

fn eval_error(e: impl std::fmt::Display) -> CliError {
    CliError::new("EvalFailed", e.to_string())
}

fn edge_report(
    cfg: &PipelineConfig,
    pred: &PedGraph,
    gt: &PedGraph,
) -> Result<EdgeMatchReport, CliError> {
    match_edges(pred, gt, cfg.eval.tol, cfg.eval.coverage).map_err(eval_error)
}

fn pixel_report(
    cfg: &PipelineConfig,
    pred: &LabelRaster,
    gt: &LabelRaster,
) -> Result<Value, CliError> {
    let px = pixel_metrics(pred, gt).map_err(eval_error)?;
    let inst = instance_corner_metrics(pred, gt, cfg.eval.iou_thresh).map_err(eval_error)?;
    Ok(json!({ "pixel": px, "corner_instances": inst }))
}

fn eval_params(cfg: &PipelineConfig) -> Value {
    json!({ "tol": cfg.eval.tol, "coverage": cfg.eval.coverage, "iou_thresh": cfg.eval.iou_thresh })
}

/// Predicted vs ground-truth graph (and optionally label rasters).
pub fn cmd_eval(
    ctx: &Context,
    pred: &Path,
    gt: &Path,
    labels: Option<(&Path, &Path)>,
) -> Result<PathBuf, CliError> {
    let cfg = &ctx.config;
    let p = load_graph(pred, cfg.projection.origin())?;
    let g = load_graph(gt, Some(p.projection.origin()))?;
    let report = edge_report(cfg, &p, &g)?;
    let mut v = json!({
        "sidewalk": report.sidewalk,
        "crossing": report.crossing,
        "params": eval_params(cfg),
    });
    if let Some((pl, gl)) = labels {
        let pr = read_label_raster(pl, &p.projection).map_err(|e| invalid_input(pl, e))?;
        let gr = read_label_raster(gl, &p.projection).map_err(|e| invalid_input(gl, e))?;
        v["raster"] = pixel_report(cfg, &pr, &gr)?;
    }
    let mut st = Staging::new(&ctx.out_dir)?;
    let path = st.file(REPORT_FILE, to_json(&v).as_bytes())?;
    st.commit()?;
    Ok(path)
}

/// Writes one JSON violation per line; returns the path and the count.
pub fn cmd_lint(ctx: &Context, graph: &Path, streets: &Path) -> Result<(PathBuf, usize), CliError> {
    let g = load_graph(graph, ctx.config.projection.origin())?;
    let net = load_streets(&ctx.config, streets, Some(g.projection.origin()))?;
    let violations = lint_graph(&g, &net, ctx.config.eval.d_road);
    let mut body = String::new();
    for v in &violations {
        body.push_str(&serde_json::to_string(v).expect("serializable"));
        body.push('\n');
    }
    let mut st = Staging::new(&ctx.out_dir)?;
    let path = st.file(LINT_FILE, body.as_bytes())?;
    st.commit()?;
    Ok((path, violations.len()))
}

fn graph_stats(g: &PedGraph) -> Value {
    json!({
        "nodes": g.node_count(),
        "edges": g.edge_count(),
        "corners": g.corners().len(),
        "sidewalk_m": g.total_length(EdgeKind::Sidewalk),
        "crossing_m": g.total_length(EdgeKind::Crossing),
    })
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn file_digest(path: &Path) -> Result<String, CliError> {
    Ok(sha256_hex(
        &fs::read(path).map_err(|e| CliError::io(path, e))?,
    ))
}

/// Digests of every file under `dir`, keyed by path relative to `dir`.
fn digests(dir: &Path, prefix: &str, out: &mut BTreeMap<String, String>) -> Result<(), CliError> {
    let mut entries: Vec<_> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .collect();
    entries.sort();
    for p in entries {
        let name = p.file_name().expect("entry").to_string_lossy().into_owned();
        if p.is_dir() {
            digests(&p, &format!("{prefix}{name}/"), out)?;
        } else {
            out.insert(format!("{prefix}{name}"), file_digest(&p)?);
        }
    }
    Ok(())
}

fn input_entry(path: &Path) -> Result<Value, CliError> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let sha256 = if path.is_dir() {
        let mut d = BTreeMap::new();
        digests(path, "", &mut d)?;
        sha256_hex(serde_json::to_string(&d).expect("serializable").as_bytes())
    } else {
        file_digest(path)?
    };
    Ok(json!({ "name": name, "sha256": sha256 }))
}

pub struct PipelineInputs<'a> {
    pub streets: &'a Path,
    pub ground_truth: Option<&'a Path>,
    pub masks: Option<&'a Path>,
    pub known_crossings: Option<&'a Path>,
}

/// infer, then masks (provided, or rendered from ground truth), refine and
/// evaluate. Writes every artifact plus a manifest to the output directory.
pub fn cmd_pipeline(ctx: &Context, inputs: &PipelineInputs) -> Result<PathBuf, CliError> {
    let cfg = &ctx.config;
    let mut st = Staging::new(&ctx.out_dir)?;
    let h = infer(cfg, inputs.streets, inputs.known_crossings)?;
    let hypo = h.graph;
    st.file(HYPOTHESIS_FILE, graph_to_string(&hypo).as_bytes())?;

    let origin = Some(hypo.projection.origin());
    let gt = inputs
        .ground_truth
        .map(|p| load_graph(p, origin))
        .transpose()?;
    let (rasters, gt_labels, frame) = match (inputs.masks, &gt) {
        (Some(dir), _) => {
            let set = load_masks(dir, &hypo.projection)?;
            let frame = set.require(RasterClass::CornerBulb).expect("loaded").frame;
            let labels = read_label_raster(&dir.join(LABELS_FILE), &hypo.projection).ok();
            (set, labels, frame)
        }
        (None, Some(gt)) => {
            let res = cfg.raster.resolution;
            let fa = frame_around(&hypo, res, cfg.raster.padding).map_err(raster_error)?;
            let frame = match frame_around(gt, res, cfg.raster.padding) {
                Ok(fb) => union_frame(&fa, &fb, res)?,
                Err(_) => fa,
            };
            let (soft, labels) = render(cfg, gt, &frame)?;
            let dir = st.dir(MASKS_DIR)?;
            write_masks(&dir, &soft, &labels)?;
            (RasterSet::from(soft), Some(labels), frame)
        }
        (None, None) => {
            return Err(CliError::new(
                "InvalidInput",
                "pipeline needs --masks or --gt to obtain class rasters",
            ))
        }
    };

    let refined = refine(cfg, &hypo, &rasters)?;
    st.file(REFINED_FILE, graph_to_string(&refined.graph).as_bytes())?;

    let mut report = json!({
        "hypothesis": graph_stats(&hypo),
        "refined": graph_stats(&refined.graph),
        "refine": refine_summary(&refined),
        "params": eval_params(cfg),
    });
    if let Some(gt) = &gt {
        report["hypothesis"]["match"] = json!(edge_report(cfg, &hypo, gt)?);
        report["refined"]["match"] = json!(edge_report(cfg, &refined.graph, gt)?);
        report["ground_truth"] = graph_stats(gt);
    }
    if let Some(gl) = &gt_labels {
        let (_, pred_labels) = render(cfg, &refined.graph, &frame)?;
        report["refined"]["raster"] = pixel_report(cfg, &pred_labels, gl)?;
    }
    st.file(REPORT_FILE, to_json(&report).as_bytes())?;

    let mut inputs_v = json!({ "streets": input_entry(inputs.streets)? });
    for (key, p) in [
        ("ground_truth", inputs.ground_truth),
        ("masks", inputs.masks),
        ("known_crossings", inputs.known_crossings),
    ] {
        if let Some(p) = p {
            inputs_v[key] = input_entry(p)?;
        }
    }
    let mut outputs = BTreeMap::new();
    for (tmp, dst) in &st.pending {
        let name = dst
            .file_name()
            .expect("named")
            .to_string_lossy()
            .into_owned();
        if tmp.is_dir() {
            digests(tmp, &format!("{name}/"), &mut outputs)?;
        } else {
            outputs.insert(name, file_digest(tmp)?);
        }
    }
    let manifest = json!({
        "tool": "pednet",
        "version": env!("CARGO_PKG_VERSION"),
        "command": "pipeline",
        "config": cfg,
        "inputs": inputs_v,
        "outputs": outputs,
    });
    st.file(MANIFEST_FILE, to_json(&manifest).as_bytes())?;
    st.commit()?;
    Ok(ctx.out_dir.join(REPORT_FILE))
}
