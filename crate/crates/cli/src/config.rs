//! Pipeline configuration: a TOML file plus `--set key=value` overrides.

use std::path::{Path, PathBuf};

use pednet_core::eval::DEFAULT_D_ROAD;
use pednet_core::geo::LonLat;
use pednet_core::pedestrianfer::HypothesisConfig;
use pednet_core::raster::RasterStyle;
use pednet_core::refine::RefineParams;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Seed for every randomized stage; copied into `refine.seed`.
    pub seed: u64,
    /// Worker threads; `None` uses all cores.
    pub jobs: Option<usize>,
    pub projection: ProjectionConfig,
    pub streets: StreetsConfig,
    pub hypothesis: HypothesisConfig,
    pub raster: RasterConfig,
    pub refine: RefineParams,
    pub eval: EvalConfig,
    pub tiles: TilesConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProjectionConfig {
    /// `[lon, lat]` of the local projection origin; defaults to the input's
    /// bounds center.
    pub origin: Option<[f64; 2]>,
}

impl ProjectionConfig {
    pub fn origin(&self) -> Option<LonLat> {
        self.origin.map(|[lon, lat]| LonLat::new(lon, lat))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StreetsConfig {
    pub highway_include: Option<Vec<String>>,
    pub planarize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RasterConfig {
    /// Meters per pixel.
    pub resolution: f64,
    /// Margin around the graph, meters.
    pub padding: f64,
    /// Gaussian blur applied to synthesized masks, meters.
    pub blur_sigma: f64,
    pub style: RasterStyle,
}

impl Default for RasterConfig {
    fn default() -> Self {
        Self {
            resolution: 0.25,
            padding: 20.0,
            blur_sigma: 1.0,
            style: RasterStyle::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub tol: f64,
    pub coverage: f64,
    pub d_road: f64,
    pub iou_thresh: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            tol: 3.0,
            coverage: 0.7,
            d_road: DEFAULT_D_ROAD,
            iou_thresh: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TilesConfig {
    /// Imagery URL template with `{z}/{x}/{y}` or `{q}`; unset disables
    /// tile fetching.
    pub template: Option<String>,
    pub cache_dir: Option<PathBuf>,
    pub zoom: u8,
    pub concurrency: usize,
    pub revalidate: bool,
    pub offline: bool,
}

impl Default for TilesConfig {
    fn default() -> Self {
        Self {
            template: None,
            cache_dir: None,
            zoom: 20,
            concurrency: 4,
            revalidate: false,
            offline: false,
        }
    }
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::new("InvalidConfig", msg)
}

/// Parses the right-hand side of `key=value` as a TOML value, falling back
/// to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn apply_override(root: &mut toml::Table, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| config_error(format!("override {spec:?} is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(config_error(format!("bad override key {key:?}")));
    }
    let mut table = root;
    for part in &parts[..parts.len() - 1] {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| config_error(format!("override {key:?}: {part} is not a table")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

impl PipelineConfig {
    /// Reads `path` (if any), applies overrides in order, and validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::new("Io", format!("{}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| config_error(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut cfg: PipelineConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| config_error(e.to_string()))?;
        cfg.refine.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.refine.seed = seed;
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.refine
            .validate()
            .map_err(|e| config_error(e.to_string()))?;
        self.raster
            .style
            .validate()
            .map_err(|e| config_error(e.to_string()))?;
        let r = &self.raster;
        if !(r.resolution > 0.0 && r.resolution.is_finite()) {
            return Err(config_error(format!(
                "raster.resolution must be > 0, got {}",
                r.resolution
            )));
        }
        if !(r.padding >= 0.0 && r.blur_sigma >= 0.0) {
            return Err(config_error(
                "raster.padding and raster.blur_sigma must be >= 0",
            ));
        }
        let e = &self.eval;
        if !(e.tol > 0.0) || !(e.coverage > 0.0 && e.coverage <= 1.0) || !(e.d_road >= 0.0) {
            return Err(config_error(
                "eval needs tol > 0, coverage in (0, 1], d_road >= 0",
            ));
        }
        if !(e.iou_thresh > 0.0 && e.iou_thresh <= 1.0) {
            return Err(config_error("eval.iou_thresh must be in (0, 1]"));
        }
        if self.jobs == Some(0) || self.tiles.concurrency == 0 {
            return Err(config_error("jobs and tiles.concurrency must be >= 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = PipelineConfig::load(None, &[]).unwrap();
        assert_eq!(cfg, PipelineConfig::default());
    }

    #[test]
    fn overrides_are_typed() {
        let cfg = PipelineConfig::load(
            None,
            &[
                "refine.iterations=50".into(),
                "hypothesis.regime=full".into(),
                "seed=7".into(),
                "projection.origin=[-122.3, 47.6]".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.refine.iterations, 50);
        assert_eq!(cfg.hypothesis.regime, "full");
        assert_eq!(cfg.refine.seed, 7);
        assert_eq!(cfg.projection.origin, Some([-122.3, 47.6]));
    }

    #[test]
    fn unknown_key_rejected() {
        let err = PipelineConfig::load(None, &["refine.iterationz=5".into()]).unwrap_err();
        assert_eq!(err.code, "InvalidConfig");
        assert!(PipelineConfig::load(None, &["bogus=1".into()]).is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(PipelineConfig::load(None, &["eval.coverage=0".into()]).is_err());
        assert!(PipelineConfig::load(None, &["refine.det_min=5".into()]).is_err());
        assert!(PipelineConfig::load(None, &["noequals".into()]).is_err());
    }
}
