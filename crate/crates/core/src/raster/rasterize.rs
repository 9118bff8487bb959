use super::{GridFrame, LabelRaster, RasterClass, RasterError, RasterStyle};
use crate::geo::{point_segment_distance, LineStringM, PointM, PolygonM};

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Point(PointM),
    Line(LineStringM),
    Polygon(PolygonM),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub class: RasterClass,
    pub shape: Shape,
}

/// Inclusive pixel index range whose centers may fall in `[lo, hi]` (world).
fn pixel_range(frame: &GridFrame, lo: PointM, hi: PointM) -> Option<(usize, usize, usize, usize)> {
    let a = frame.to_pixel(PointM::new(lo.x, hi.y));
    let b = frame.to_pixel(PointM::new(hi.x, lo.y));
    let c0 = (a.x - 0.5).ceil().max(0.0);
    let c1 = (b.x - 0.5).floor().min(frame.width as f64 - 1.0);
    let r0 = (a.y - 0.5).ceil().max(0.0);
    let r1 = (b.y - 0.5).floor().min(frame.height as f64 - 1.0);
    if c1 < c0 || r1 < r0 {
        return None;
    }
    Some((c0 as usize, c1 as usize, r0 as usize, r1 as usize))
}

/// Calls `f(index)` for every pixel whose center is within `r` of `c`.
pub fn fill_disc(frame: &GridFrame, c: PointM, r: f64, mut f: impl FnMut(usize)) {
    let d = PointM::new(r, r);
    let Some((c0, c1, r0, r1)) = pixel_range(frame, c - d, c + d) else {
        return;
    };
    for row in r0..=r1 {
        for col in c0..=c1 {
            if frame.pixel_center(col, row).dist(c) <= r {
                f(row * frame.width + col);
            }
        }
    }
}

/// Calls `f(index)` for every pixel whose center is within `r` of the
/// segment `a`-`b`.
pub fn fill_capsule(frame: &GridFrame, a: PointM, b: PointM, r: f64, mut f: impl FnMut(usize)) {
    let lo = PointM::new(a.x.min(b.x) - r, a.y.min(b.y) - r);
    let hi = PointM::new(a.x.max(b.x) + r, a.y.max(b.y) + r);
    let Some((c0, c1, r0, r1)) = pixel_range(frame, lo, hi) else {
        return;
    };
    for row in r0..=r1 {
        for col in c0..=c1 {
            if point_segment_distance(frame.pixel_center(col, row), a, b) <= r {
                f(row * frame.width + col);
            }
        }
    }
}

/// Calls `f(index)` for every pixel whose center is inside `ring` under the
/// even-odd rule. Scanline fill in pixel coordinates.
pub fn fill_polygon(frame: &GridFrame, ring: &[PointM], mut f: impl FnMut(usize)) {
    if ring.len() < 3 {
        return;
    }
    let px: Vec<PointM> = ring.iter().map(|&p| frame.to_pixel(p)).collect();
    let n = px.len();
    let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in &px {
        y_lo = y_lo.min(p.y);
        y_hi = y_hi.max(p.y);
    }
    let r0 = (y_lo - 0.5).ceil().max(0.0) as usize;
    let r1 = (y_hi - 0.5).floor().min(frame.height as f64 - 1.0);
    if r1 < 0.0 {
        return;
    }
    let mut xs: Vec<f64> = Vec::new();
    for row in r0..=(r1 as usize) {
        let yc = row as f64 + 0.5;
        xs.clear();
        for i in 0..n {
            let (a, b) = (px[i], px[(i + 1) % n]);
            if (a.y > yc) != (b.y > yc) {
                xs.push(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
            }
        }
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks_exact(2) {
            // centers with x in [x0, x1)
            let c0 = (pair[0] - 0.5).ceil().max(0.0);
            let c1 = ((pair[1] - 0.5).ceil() - 1.0).min(frame.width as f64 - 1.0);
            if c1 < c0 {
                continue;
            }
            for col in c0 as usize..=c1 as usize {
                f(row * frame.width + col);
            }
        }
    }
}

/// Marks the footprint of one shape (points as discs, lines as buffered
/// capsule unions, polygons filled).
pub(crate) fn mark_shape(frame: &GridFrame, shape: &Shape, radius: f64, mask: &mut [bool]) {
    match shape {
        Shape::Point(p) => fill_disc(frame, *p, radius, |i| mask[i] = true),
        Shape::Line(l) => {
            for (a, b) in l.segments() {
                fill_capsule(frame, a, b, radius, |i| mask[i] = true);
            }
        }
        Shape::Polygon(poly) => fill_polygon(frame, poly.vertices(), |i| mask[i] = true),
    }
}

/// Label raster of annotations over the world box `[min, max]`.
pub fn rasterize_annotations(
    features: &[Annotation],
    min: PointM,
    max: PointM,
    resolution: f64,
    style: &RasterStyle,
) -> Result<LabelRaster, RasterError> {
    let frame = GridFrame::from_bounds(min, max, resolution)?;
    rasterize_in_frame(features, &frame, style)
}

pub fn rasterize_in_frame(
    features: &[Annotation],
    frame: &GridFrame,
    style: &RasterStyle,
) -> Result<LabelRaster, RasterError> {
    style.validate()?;
    let mut out = LabelRaster::background(*frame);
    for &class in &style.class_precedence {
        if class == RasterClass::Background {
            continue;
        }
        let mut mask = vec![false; frame.len()];
        for a in features.iter().filter(|a| a.class == class) {
            let r = match a.shape {
                Shape::Point(_) => style.point_radius,
                _ => style.line_halfwidth.get(class),
            };
            mark_shape(frame, &a.shape, r, &mut mask);
        }
        for (v, m) in out.values.iter_mut().zip(&mask) {
            if *m {
                *v = class as u8;
            }
        }
    }
    // background annotations only erase when listed explicitly
    if style.class_precedence.contains(&RasterClass::Background) {
        let mut mask = vec![false; frame.len()];
        for a in features
            .iter()
            .filter(|a| a.class == RasterClass::Background)
        {
            mark_shape(frame, &a.shape, style.point_radius, &mut mask);
        }
        for (v, m) in out.values.iter_mut().zip(&mask) {
            if *m {
                *v = 0;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn frame(res: f64) -> GridFrame {
        GridFrame::from_bounds(PointM::new(-20.0, -20.0), PointM::new(20.0, 20.0), res).unwrap()
    }

    #[test]
    fn disc_count_near_area() {
        let f = frame(0.25);
        let mut n = 0;
        fill_disc(&f, PointM::new(0.3, -0.2), 2.0, |_| n += 1);
        let expected = PI * 4.0 / 0.0625;
        assert!((n as f64 - expected).abs() / expected < 0.05, "{n}");
    }

    #[test]
    fn polygon_fill_counts_centers() {
        let f = frame(1.0);
        let sq = [
            PointM::new(0.0, 0.0),
            PointM::new(10.0, 0.0),
            PointM::new(10.0, 10.0),
            PointM::new(0.0, 10.0),
        ];
        let mut n = 0;
        fill_polygon(&f, &sq, |_| n += 1);
        assert_eq!(n, 100);
    }

    #[test]
    fn empty_features_all_background() {
        let r = rasterize_annotations(
            &[],
            PointM::new(0.0, 0.0),
            PointM::new(5.0, 5.0),
            0.5,
            &RasterStyle::default(),
        )
        .unwrap();
        assert!(r.values.iter().all(|&v| v == 0));
    }

    #[test]
    fn precedence_overwrites() {
        let feats = vec![
            Annotation {
                class: RasterClass::Crossing,
                shape: Shape::Point(PointM::new(0.0, 0.0)),
            },
            Annotation {
                class: RasterClass::Sidewalk,
                shape: Shape::Point(PointM::new(0.0, 0.0)),
            },
        ];
        let r = rasterize_in_frame(&feats, &frame(0.5), &RasterStyle::default()).unwrap();
        assert!(r.count(RasterClass::Crossing) > 0);
        assert_eq!(r.count(RasterClass::Sidewalk), 0);
    }
}
