use rayon::prelude::*;

use super::rasterize::{fill_capsule, fill_disc, fill_polygon};
use super::{ClassRaster, GridFrame, LabelRaster, RasterClass, RasterError, RasterStyle};
use crate::geo::{convex_hull, PointM};
use crate::graph::{EdgeKind, PedGraph};

/// Probability rasters standing in for a segmentation model's output.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityRasters {
    pub sidewalk: ClassRaster,
    pub crossing: ClassRaster,
    pub corner_bulb: ClassRaster,
}

impl ProbabilityRasters {
    pub fn get(&self, class: RasterClass) -> Option<&ClassRaster> {
        match class {
            RasterClass::Sidewalk => Some(&self.sidewalk),
            RasterClass::Crossing => Some(&self.crossing),
            RasterClass::CornerBulb => Some(&self.corner_bulb),
            RasterClass::Background => None,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &ClassRaster> {
        [&self.sidewalk, &self.crossing, &self.corner_bulb].into_iter()
    }
}

/// Convex hull of each corner's nodes, as (hull vertices) lists.
pub fn corner_bulb_shapes(g: &PedGraph) -> Vec<Vec<PointM>> {
    g.corners()
        .values()
        .map(|ids| {
            let pts: Vec<PointM> = ids
                .iter()
                .filter_map(|&n| g.node(n))
                .map(|n| n.pos)
                .collect();
            convex_hull(&pts)
        })
        .collect()
}

/// Marks the hull buffered by `r`.
fn mark_bulb(frame: &GridFrame, hull: &[PointM], r: f64, mask: &mut [f32]) {
    match hull.len() {
        0 => {}
        1 => fill_disc(frame, hull[0], r, |i| mask[i] = 1.0),
        _ => {
            if hull.len() >= 3 {
                fill_polygon(frame, hull, |i| mask[i] = 1.0);
            }
            for k in 0..hull.len() {
                let (a, b) = (hull[k], hull[(k + 1) % hull.len()]);
                fill_capsule(frame, a, b, r, |i| mask[i] = 1.0);
            }
        }
    }
}

/// Renders `gt` into one hard mask per class and blurs each with a Gaussian
/// of `blur_sigma` pixels. Links are drawn with crossings; corner bulbs are
/// the buffered hulls of each corner's nodes.
pub fn make_probability_rasters(
    gt: &PedGraph,
    frame: &GridFrame,
    style: &RasterStyle,
    blur_sigma: f64,
) -> Result<ProbabilityRasters, RasterError> {
    style.validate()?;
    if !(blur_sigma >= 0.0) || !blur_sigma.is_finite() {
        return Err(RasterError::InvalidStyle(format!(
            "blur sigma must be >= 0, got {blur_sigma}"
        )));
    }
    let bbox = Some(frame.bbox(&gt.projection));
    let mut sidewalk = vec![0.0f32; frame.len()];
    let mut crossing = vec![0.0f32; frame.len()];
    for (_, e) in gt.edges() {
        let (mask, r) = match e.kind {
            EdgeKind::Sidewalk => (&mut sidewalk, style.line_halfwidth.sidewalk),
            EdgeKind::Crossing | EdgeKind::Link => (&mut crossing, style.line_halfwidth.crossing),
            EdgeKind::Unknown => continue,
        };
        for (a, b) in e.geometry.segments() {
            fill_capsule(frame, a, b, r, |i| mask[i] = 1.0);
        }
    }
    let mut bulb = vec![0.0f32; frame.len()];
    for hull in corner_bulb_shapes(gt) {
        mark_bulb(frame, &hull, style.point_radius, &mut bulb);
    }
    let make = |class, values: Vec<f32>| ClassRaster {
        class,
        frame: *frame,
        bbox,
        values: gaussian_blur(&values, frame.width, frame.height, blur_sigma),
    };
    Ok(ProbabilityRasters {
        sidewalk: make(RasterClass::Sidewalk, sidewalk),
        crossing: make(RasterClass::Crossing, crossing),
        corner_bulb: make(RasterClass::CornerBulb, bulb),
    })
}

/// Frame covering every node and edge vertex of `g`, grown by `padding`
/// meters on each side.
pub fn frame_around(g: &PedGraph, resolution: f64, padding: f64) -> Result<GridFrame, RasterError> {
    let pts = g.nodes().map(|(_, n)| n.pos).chain(
        g.edges()
            .flat_map(|(_, e)| e.geometry.points().iter().copied()),
    );
    let (mut lo, mut hi) = (
        PointM::new(f64::INFINITY, f64::INFINITY),
        PointM::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
    );
    for p in pts {
        lo = PointM::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = PointM::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    if !lo.x.is_finite() {
        return Err(RasterError::EmptyBBox);
    }
    let pad = PointM::new(padding, padding);
    GridFrame::from_bounds(lo - pad, hi + pad, resolution)
}

/// Hard label raster: a pixel takes the last class in `precedence` whose
/// raster is at least 0.5 there.
pub fn labels_from_rasters(
    rasters: &ProbabilityRasters,
    precedence: &[RasterClass],
) -> LabelRaster {
    let mut out = LabelRaster::background(rasters.sidewalk.frame);
    out.bbox = rasters.sidewalk.bbox;
    for &class in precedence {
        let Some(r) = rasters.get(class) else {
            continue;
        };
        for (o, &v) in out.values.iter_mut().zip(&r.values) {
            if v >= 0.5 {
                *o = class as u8;
            }
        }
    }
    out
}

/// Separable Gaussian blur with a normalized kernel of radius ceil(4 sigma)
/// and zero padding. `sigma == 0` returns the input unchanged.
pub fn gaussian_blur(values: &[f32], width: usize, height: usize, sigma: f64) -> Vec<f32> {
    if sigma <= 0.0 {
        return values.to_vec();
    }
    let radius = (4.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i as f64).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= total);

    let r = radius as usize;
    // scatter form: masks are mostly zero
    let conv = |src: &[f64], dst: &mut [f64], n: usize| {
        dst.iter_mut().for_each(|d| *d = 0.0);
        for (i, &v) in src.iter().enumerate().take(n) {
            if v == 0.0 {
                continue;
            }
            let lo = i.saturating_sub(r);
            let hi = (i + r).min(n - 1);
            for j in lo..=hi {
                dst[j] += v * kernel[j + r - i];
            }
        }
    };
    let mut tmp = vec![0.0f64; values.len()];
    tmp.par_chunks_mut(width)
        .enumerate()
        .for_each(|(row, out)| {
            let line: Vec<f64> = values[row * width..(row + 1) * width]
                .iter()
                .map(|&v| v as f64)
                .collect();
            conv(&line, out, width);
        });
    // columns: transpose, convolve rows, transpose back
    let mut cols = vec![0.0f64; values.len()];
    cols.par_chunks_mut(height)
        .enumerate()
        .for_each(|(col, out)| {
            let line: Vec<f64> = (0..height).map(|row| tmp[row * width + col]).collect();
            conv(&line, out, height);
        });
    let mut out = vec![0.0f32; values.len()];
    out.par_chunks_mut(width).enumerate().for_each(|(row, o)| {
        for (col, v) in o.iter_mut().enumerate() {
            *v = cols[col * height + row].clamp(0.0, 1.0) as f32;
        }
    });
    out
}
