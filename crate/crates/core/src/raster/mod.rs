//! Georeferenced class grids: annotation rasterization, synthetic probability
//! masks, PNG + sidecar I/O, and slippy-tile helpers.

mod fetch;
mod io;
mod rasterize;
mod synth;
pub mod tiles;

pub use fetch::{
    resolve_cache_dir, FetchOptions, TileFetcher, TileTransport, TransportResponse, CACHE_ENV,
};
pub use io::{
    read_class_raster, read_label_raster, sidecar_path, write_class_raster, write_label_raster,
    Sidecar,
};
pub use rasterize::{
    fill_capsule, fill_disc, fill_polygon, rasterize_annotations, rasterize_in_frame, Annotation,
    Shape,
};
pub use synth::{
    corner_bulb_shapes, frame_around, gaussian_blur, labels_from_rasters, make_probability_rasters,
    ProbabilityRasters,
};
pub use tiles::{lonlat_to_tile, quadkey_to_tile, tile_to_quadkey, TileCoord};

use serde::{Deserialize, Serialize};

use crate::geo::{GeoError, LocalProjection, LonLat, PointM};

#[derive(Debug, thiserror::Error)]
pub enum RasterError {
    #[error("bounding box is empty at this resolution")]
    EmptyBBox,
    #[error("invalid resolution {0}")]
    InvalidResolution(f64),
    #[error("unknown class {0:?}")]
    UnknownClass(String),
    #[error("invalid raster style: {0}")]
    InvalidStyle(String),
    #[error("latitude {0} outside the tiling range")]
    LatitudeOutOfRange(f64),
    #[error("invalid quadkey {0:?}")]
    InvalidQuadkey(String),
    #[error("missing sidecar {0}")]
    MissingSidecar(String),
    #[error("malformed raster file {path}: {reason}")]
    Format { path: String, reason: String },
    #[error("raster has no geographic bounds")]
    NoBounds,
    #[error("HTTP {status} for tile {tile}")]
    Http { status: u16, tile: String },
    #[error("tile {0} not cached and offline mode is on")]
    OfflineCacheMiss(String),
    #[error("transport error for tile {tile}: {reason}")]
    Transport { tile: String, reason: String },
    #[error("invalid tile url template {0:?}")]
    InvalidTemplate(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Geo(#[from] GeoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum RasterClass {
    Background = 0,
    Sidewalk = 1,
    Crossing = 2,
    CornerBulb = 3,
}

impl RasterClass {
    pub const ALL: [RasterClass; 4] = [
        Self::Background,
        Self::Sidewalk,
        Self::Crossing,
        Self::CornerBulb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Background => "background",
            Self::Sidewalk => "sidewalk",
            Self::Crossing => "crossing",
            Self::CornerBulb => "corner_bulb",
        }
    }

    pub fn parse(s: &str) -> Result<Self, RasterError> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| RasterError::UnknownClass(s.to_string()))
    }

    pub fn from_index(v: u8) -> Option<Self> {
        Self::ALL.get(v as usize).copied()
    }
}

/// Geographic bounds `[west, south, east, north]` in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub west: f64,
    pub south: f64,
    pub east: f64,
    pub north: f64,
}

impl From<[f64; 4]> for BBox {
    fn from(v: [f64; 4]) -> Self {
        Self {
            west: v[0],
            south: v[1],
            east: v[2],
            north: v[3],
        }
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.west, b.south, b.east, b.north]
    }
}

impl BBox {
    pub fn center(&self) -> LonLat {
        LonLat::new(
            (self.west + self.east) / 2.0,
            (self.south + self.north) / 2.0,
        )
    }
}

/// Pixel grid in local meters. Row 0 is the north edge; pixel `(col, row)`
/// covers `[col, col+1) x [row, row+1)` in continuous pixel coordinates, with
/// its center at `(col + 0.5, row + 0.5)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridFrame {
    /// World position of the north-west corner.
    pub origin: PointM,
    pub res_x: f64,
    pub res_y: f64,
    pub width: usize,
    pub height: usize,
}

impl GridFrame {
    pub fn new(
        origin: PointM,
        res_x: f64,
        res_y: f64,
        width: usize,
        height: usize,
    ) -> Result<Self, RasterError> {
        for r in [res_x, res_y] {
            if !(r > 0.0) || !r.is_finite() {
                return Err(RasterError::InvalidResolution(r));
            }
        }
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyBBox);
        }
        Ok(Self {
            origin,
            res_x,
            res_y,
            width,
            height,
        })
    }

    /// Smallest grid at `res` covering the box `[min, max]`.
    pub fn from_bounds(min: PointM, max: PointM, res: f64) -> Result<Self, RasterError> {
        if !(res > 0.0) || !res.is_finite() {
            return Err(RasterError::InvalidResolution(res));
        }
        let w = ((max.x - min.x) / res - 1e-9).ceil();
        let h = ((max.y - min.y) / res - 1e-9).ceil();
        if !(w >= 1.0 && h >= 1.0) {
            return Err(RasterError::EmptyBBox);
        }
        Self::new(PointM::new(min.x, max.y), res, res, w as usize, h as usize)
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Continuous pixel coordinates of a world point.
    pub fn to_pixel(&self, p: PointM) -> PointM {
        PointM::new(
            (p.x - self.origin.x) / self.res_x,
            (self.origin.y - p.y) / self.res_y,
        )
    }

    pub fn to_world(&self, px: PointM) -> PointM {
        PointM::new(
            self.origin.x + px.x * self.res_x,
            self.origin.y - px.y * self.res_y,
        )
    }

    pub fn pixel_center(&self, col: usize, row: usize) -> PointM {
        self.to_world(PointM::new(col as f64 + 0.5, row as f64 + 0.5))
    }

    /// World-space `(min, max)` corners.
    pub fn bounds(&self) -> (PointM, PointM) {
        let max_x = self.origin.x + self.width as f64 * self.res_x;
        let min_y = self.origin.y - self.height as f64 * self.res_y;
        (
            PointM::new(self.origin.x, min_y),
            PointM::new(max_x, self.origin.y),
        )
    }

    /// Geographic bounds: edge midpoints taken through the projection.
    pub fn bbox(&self, proj: &LocalProjection) -> BBox {
        let (min, max) = self.bounds();
        let c = PointM::new((min.x + max.x) / 2.0, (min.y + max.y) / 2.0);
        BBox {
            west: proj.inverse(PointM::new(min.x, c.y)).lon,
            east: proj.inverse(PointM::new(max.x, c.y)).lon,
            south: proj.inverse(PointM::new(c.x, min.y)).lat,
            north: proj.inverse(PointM::new(c.x, max.y)).lat,
        }
    }

    /// Inverse of [`GridFrame::bbox`] for a grid of the given size.
    pub fn from_bbox(
        b: &BBox,
        width: usize,
        height: usize,
        proj: &LocalProjection,
    ) -> Result<Self, RasterError> {
        let c = b.center();
        let min_x = proj.forward(LonLat::new(b.west, c.lat))?.x;
        let max_x = proj.forward(LonLat::new(b.east, c.lat))?.x;
        let min_y = proj.forward(LonLat::new(c.lon, b.south))?.y;
        let max_y = proj.forward(LonLat::new(c.lon, b.north))?.y;
        if width == 0 || height == 0 || !(max_x > min_x) || !(max_y > min_y) {
            return Err(RasterError::EmptyBBox);
        }
        Self::new(
            PointM::new(min_x, max_y),
            (max_x - min_x) / width as f64,
            (max_y - min_y) / height as f64,
            width,
            height,
        )
    }
}

/// Per-pixel probabilities of one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassRaster {
    pub class: RasterClass,
    pub frame: GridFrame,
    pub bbox: Option<BBox>,
    /// Row-major, `width * height` values in `[0, 1]`.
    pub values: Vec<f32>,
}

impl ClassRaster {
    pub fn filled(class: RasterClass, frame: GridFrame, value: f32) -> Self {
        Self {
            class,
            frame,
            bbox: None,
            values: vec![value.clamp(0.0, 1.0); frame.len()],
        }
    }

    pub fn width(&self) -> usize {
        self.frame.width
    }

    pub fn height(&self) -> usize {
        self.frame.height
    }

    pub fn get(&self, col: usize, row: usize) -> f32 {
        self.values[row * self.frame.width + col]
    }

    pub fn set(&mut self, col: usize, row: usize, v: f32) {
        self.values[row * self.frame.width + col] = v.clamp(0.0, 1.0);
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().map(|&v| v as f64).sum()
    }
}

/// Per-pixel class labels (0..=3).
#[derive(Debug, Clone, PartialEq)]
pub struct LabelRaster {
    pub frame: GridFrame,
    pub bbox: Option<BBox>,
    pub values: Vec<u8>,
}

impl LabelRaster {
    pub fn background(frame: GridFrame) -> Self {
        Self {
            frame,
            bbox: None,
            values: vec![0; frame.len()],
        }
    }

    pub fn width(&self) -> usize {
        self.frame.width
    }

    pub fn height(&self) -> usize {
        self.frame.height
    }

    pub fn count(&self, class: RasterClass) -> usize {
        self.values.iter().filter(|&&v| v == class as u8).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LineHalfwidths {
    pub sidewalk: f64,
    pub crossing: f64,
    pub corner_bulb: f64,
}

impl Default for LineHalfwidths {
    fn default() -> Self {
        Self {
            sidewalk: 1.5,
            crossing: 1.5,
            corner_bulb: 1.5,
        }
    }
}

impl LineHalfwidths {
    pub fn get(&self, class: RasterClass) -> f64 {
        match class {
            RasterClass::Sidewalk => self.sidewalk,
            RasterClass::Crossing => self.crossing,
            RasterClass::CornerBulb | RasterClass::Background => self.corner_bulb,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RasterStyle {
    /// Radius of the disc drawn for point features, meters.
    pub point_radius: f64,
    pub line_halfwidth: LineHalfwidths,
    /// Drawing order; later classes overwrite earlier ones.
    pub class_precedence: Vec<RasterClass>,
}

impl Default for RasterStyle {
    fn default() -> Self {
        Self {
            point_radius: 2.0,
            line_halfwidth: LineHalfwidths::default(),
            class_precedence: vec![
                RasterClass::Sidewalk,
                RasterClass::CornerBulb,
                RasterClass::Crossing,
            ],
        }
    }
}

impl RasterStyle {
    pub fn validate(&self) -> Result<(), RasterError> {
        let radii = [
            self.point_radius,
            self.line_halfwidth.sidewalk,
            self.line_halfwidth.crossing,
            self.line_halfwidth.corner_bulb,
        ];
        if radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(RasterError::InvalidStyle("radii must be > 0".into()));
        }
        for c in [
            RasterClass::Sidewalk,
            RasterClass::Crossing,
            RasterClass::CornerBulb,
        ] {
            if !self.class_precedence.contains(&c) {
                return Err(RasterError::InvalidStyle(format!(
                    "class_precedence is missing {}",
                    c.name()
                )));
            }
        }
        Ok(())
    }
}
