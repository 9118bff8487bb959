use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::RefineError;
use crate::geo::{convex_hull, AffineParams, PointM, PolygonM};
use crate::raster::{fill_polygon, ClassRaster};

/// Fallback buffer radius for corners with fewer than three usable nodes.
pub const FALLBACK_RADIUS_PX: f64 = 2.0;
const FALLBACK_ARC: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RefineParams {
    /// SPSA iterations.
    pub iterations: usize,
    /// Step gain numerator; `None` calibrates it so the first step is about
    /// `first_step_px` pixels.
    pub a: Option<f64>,
    pub first_step_px: f64,
    /// Perturbation size in pixels.
    pub c: f64,
    /// Stability constant; `None` means `iterations / 10`.
    pub a_stab: Option<f64>,
    pub alpha: f64,
    pub gamma: f64,
    /// Per-iteration cap on the parameter step norm, pixels.
    pub max_step_px: f64,
    pub det_min: f64,
    pub det_max: f64,
    /// Bound on each entry of `A - I`; `None` leaves the linear part free
    /// apart from the det bounds.
    pub max_linear_dev: Option<f64>,
    pub prune_threshold: f64,
    pub confidence_halfwidth: f64,
    /// Corner optimizer name.
    pub optimizer: String,
    pub seed: u64,
}

impl Default for RefineParams {
    fn default() -> Self {
        Self {
            iterations: 300,
            a: None,
            first_step_px: 2.0,
            c: 1.0,
            a_stab: None,
            alpha: 0.602,
            gamma: 0.101,
            max_step_px: 4.0,
            det_min: 0.25,
            det_max: 4.0,
            max_linear_dev: None,
            prune_threshold: 0.5,
            confidence_halfwidth: 1.5,
            optimizer: "spsa".into(),
            seed: 0,
        }
    }
}

impl RefineParams {
    pub fn validate(&self) -> Result<(), RefineError> {
        let bad = |m: &str| Err(RefineError::InvalidParams(m.to_string()));
        if self.iterations == 0 {
            return bad("iterations must be >= 1");
        }
        if let Some(a) = self.a {
            if !(a > 0.0) {
                return bad("a must be > 0");
            }
        }
        if !(self.c > 0.0) || !(self.first_step_px > 0.0) || !(self.max_step_px > 0.0) {
            return bad("c, first_step_px and max_step_px must be > 0");
        }
        if !(0.0 < self.gamma && self.gamma < self.alpha && self.alpha <= 1.0) {
            return bad("need 0 < gamma < alpha <= 1");
        }
        if self.a_stab.is_some_and(|v| !(v >= 0.0)) {
            return bad("a_stab must be >= 0");
        }
        if !(0.0 < self.det_min
            && self.det_min <= 1.0
            && 1.0 <= self.det_max
            && self.det_max.is_finite())
        {
            return bad("need 0 < det_min <= 1 <= det_max");
        }
        if self.max_linear_dev.is_some_and(|v| !(v >= 0.0)) {
            return bad("max_linear_dev must be >= 0");
        }
        if !(0.0..=1.0).contains(&self.prune_threshold) {
            return bad("prune_threshold must lie in [0, 1]");
        }
        if !(self.confidence_halfwidth > 0.0) {
            return bad("confidence_halfwidth must be > 0");
        }
        Ok(())
    }

    fn stability(&self) -> f64 {
        self.a_stab.unwrap_or(self.iterations as f64 / 10.0)
    }
}

/// Closed polygon through a corner's node positions (pixel space), ordered by
/// angle around their centroid. Fewer than three points, or collinear ones,
/// give the hull of 2 px discs around them instead.
pub fn corner_polygon(points: &[PointM]) -> Option<PolygonM> {
    let pts: Vec<PointM> = points.iter().copied().filter(|p| p.is_finite()).collect();
    if pts.is_empty() {
        return None;
    }
    if pts.len() >= 3 {
        let n = pts.len() as f64;
        let c = pts.iter().fold(PointM::default(), |acc, &p| acc + p) * (1.0 / n);
        let mut sorted = pts.clone();
        sorted.sort_by(|a, b| (*a - c).angle().total_cmp(&(*b - c).angle()));
        if let Ok(poly) = PolygonM::new(sorted) {
            if poly.area() > 1e-9 && poly.is_simple() {
                return Some(poly);
            }
        }
    }
    let mut ring = Vec::with_capacity(pts.len() * FALLBACK_ARC);
    for p in &pts {
        for k in 0..FALLBACK_ARC {
            let t = std::f64::consts::TAU * k as f64 / FALLBACK_ARC as f64;
            ring.push(*p + PointM::new(t.cos(), t.sin()) * FALLBACK_RADIUS_PX);
        }
    }
    PolygonM::new(convex_hull(&ring)).ok()
}

/// The probabilities under a polygon: every pixel whose center is inside it
/// and inside the raster.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProbabilitySample {
    pub values: Vec<f32>,
}

impl ProbabilitySample {
    pub fn m(&self) -> usize {
        self.values.len()
    }
}

/// Polygon vertices are in pixel coordinates.
pub fn sample_polygon(raster: &ClassRaster, ring: &[PointM]) -> ProbabilitySample {
    let f = &raster.frame;
    let world: Vec<PointM> = ring.iter().map(|&p| f.to_world(p)).collect();
    let mut values = Vec::new();
    fill_polygon(f, &world, |i| values.push(raster.values[i]));
    ProbabilitySample { values }
}

pub fn objective_g(s: &ProbabilitySample) -> f64 {
    s.values.iter().map(|&v| v as f64).sum()
}

pub fn mean_mu(s: &ProbabilitySample) -> f64 {
    if s.values.is_empty() {
        0.0
    } else {
        objective_g(s) / s.m() as f64
    }
}

/// Result of fitting one corner. The warp is `x' = A (x - center) + center + t`
/// in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornerFit {
    /// `a, b, c, d` hold `A`; `t1, t2` hold the translation of `center`.
    pub params: AffineParams,
    pub center: PointM,
    pub g_identity: f64,
    pub g_best: f64,
}

impl CornerFit {
    pub fn identity(center: PointM, g: f64) -> Self {
        Self {
            params: AffineParams::identity(),
            center,
            g_identity: g,
            g_best: g,
        }
    }

    pub fn apply(&self, p: PointM) -> PointM {
        self.to_affine().apply(p)
    }

    /// The same warp as a plain `A x + t` map.
    pub fn to_affine(&self) -> AffineParams {
        let p = &self.params;
        AffineParams::about(p.a, p.b, p.c, p.d, PointM::new(p.t1, p.t2), self.center)
    }

    pub fn translation(&self) -> PointM {
        PointM::new(self.params.t1, self.params.t2)
    }
}

/// Pixel-space objective for one corner: the warped node polygon's
/// probability mass.
struct Problem<'a> {
    raster: &'a ClassRaster,
    points: &'a [PointM],
    center: PointM,
    /// Scale turning linear entries into pixel units.
    radius: f64,
}

impl Problem<'_> {
    fn affine(&self, th: &[f64; 6]) -> CornerFit {
        let r = self.radius;
        CornerFit {
            params: AffineParams {
                a: 1.0 + th[0] / r,
                b: th[1] / r,
                c: th[2] / r,
                d: 1.0 + th[3] / r,
                t1: th[4],
                t2: th[5],
            },
            center: self.center,
            g_identity: 0.0,
            g_best: 0.0,
        }
    }

    fn theta(&self, fit: &CornerFit) -> [f64; 6] {
        let (p, r) = (&fit.params, self.radius);
        [
            (p.a - 1.0) * r,
            p.b * r,
            p.c * r,
            (p.d - 1.0) * r,
            p.t1,
            p.t2,
        ]
    }

    fn g(&self, th: &[f64; 6]) -> f64 {
        let fit = self.affine(th);
        let warped: Vec<PointM> = self.points.iter().map(|&p| fit.apply(p)).collect();
        match corner_polygon(&warped) {
            Some(poly) => objective_g(&sample_polygon(self.raster, poly.vertices())),
            None => 0.0,
        }
    }

    /// Pulls `th` back into the feasible set: det(A) within bounds (the
    /// previous linear part is kept when det <= 0) and every warped point
    /// strictly inside the raster.
    fn project(&self, th: &mut [f64; 6], prev: &[f64; 6], params: &RefineParams) {
        if let Some(dev) = params.max_linear_dev {
            let lim = dev * self.radius;
            th[..4].iter_mut().for_each(|v| *v = v.clamp(-lim, lim));
        }
        let mut fit = self.affine(th);
        let det = fit.params.det();
        if !(det > 0.0) || !det.is_finite() {
            th[..4].copy_from_slice(&prev[..4]);
            fit = self.affine(th);
        } else if det < params.det_min || det > params.det_max {
            let target = det.clamp(params.det_min, params.det_max);
            let k = (target / det).sqrt();
            let p = &mut fit.params;
            p.a *= k;
            p.b *= k;
            p.c *= k;
            p.d *= k;
            let t = self.theta(&fit);
            th[..4].copy_from_slice(&t[..4]);
        }
        let w = self.raster.frame.width as f64;
        let h = self.raster.frame.height as f64;
        let eps = 1e-6;
        let warped: Vec<PointM> = self.points.iter().map(|&p| fit.apply(p)).collect();
        let (lo, hi) = crate::geo::bounds_of(&warped);
        let shift = |lo: f64, hi: f64, max: f64| {
            if hi - lo >= max - 2.0 * eps {
                (max / 2.0) - (lo + hi) / 2.0
            } else if lo <= eps {
                eps - lo + eps
            } else if hi >= max - eps {
                max - eps - hi - eps
            } else {
                0.0
            }
        };
        th[4] += shift(lo.x, hi.x, w);
        th[5] += shift(lo.y, hi.y, h);
    }
}

const SHRINK_STEPS: usize = 20;

impl Problem<'_> {
    /// Shrinks the translation, then the linear part, toward the identity
    /// while `g_best` is still reached. On flat regions many warps tie; this
    /// picks one close to the identity.
    fn shrink(&self, th: &[f64; 6], g_best: f64, params: &RefineParams) -> ([f64; 6], f64) {
        let mut out = (*th, g_best);
        for range in [4..6, 0..4] {
            for k in 0..SHRINK_STEPS {
                let s = k as f64 / SHRINK_STEPS as f64;
                let mut cand = out.0;
                range.clone().for_each(|i| cand[i] *= s);
                let g = self.g(&cand);
                if g >= g_best && self.is_feasible(&cand, params) {
                    out = (cand, g);
                    break;
                }
            }
        }
        out
    }

    fn is_feasible(&self, th: &[f64; 6], params: &RefineParams) -> bool {
        let mut t = *th;
        self.project(&mut t, th, params);
        t == *th
    }
}

fn rademacher(rng: &mut ChaCha8Rng) -> [f64; 6] {
    std::array::from_fn(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
}

/// Maximizes the corner-bulb mass under the warped node polygon with SPSA
/// over all six affine entries. Points are pixel coordinates. Returns the
/// best parameters seen, starting from the identity, so `g_best >= g_identity`.
pub fn spsa_optimize(
    raster: &ClassRaster,
    points: &[PointM],
    params: &RefineParams,
    rng: &mut ChaCha8Rng,
) -> CornerFit {
    let n = points.len().max(1) as f64;
    let center = points.iter().fold(PointM::default(), |acc, &p| acc + p) * (1.0 / n);
    let radius = points
        .iter()
        .map(|p| p.dist(center))
        .fold(0.0, f64::max)
        .max(FALLBACK_RADIUS_PX);
    let prob = Problem {
        raster,
        points,
        center,
        radius,
    };
    let mut theta = [0.0f64; 6];
    let g0 = prob.g(&theta);
    let mut best = (theta, g0);

    let a_stab = params.stability();
    let a = match params.a {
        Some(a) => a,
        None => {
            // average gradient norm over a few perturbations at the start
            let trials = 4;
            let mut norm = 0.0;
            for _ in 0..trials {
                let delta = rademacher(rng);
                let plus: [f64; 6] = std::array::from_fn(|i| theta[i] + params.c * delta[i]);
                let minus: [f64; 6] = std::array::from_fn(|i| theta[i] - params.c * delta[i]);
                let diff = prob.g(&plus) - prob.g(&minus);
                norm += (diff / (2.0 * params.c)).abs() * 6f64.sqrt();
            }
            norm /= trials as f64;
            if norm <= 0.0 {
                return CornerFit::identity(center, g0);
            }
            params.first_step_px * (a_stab + 1.0).powf(params.alpha) / norm
        }
    };

    for k in 0..params.iterations {
        let ak = a / (a_stab + k as f64 + 1.0).powf(params.alpha);
        let ck = params.c / (k as f64 + 1.0).powf(params.gamma);
        let delta = rademacher(rng);
        let plus: [f64; 6] = std::array::from_fn(|i| theta[i] + ck * delta[i]);
        let minus: [f64; 6] = std::array::from_fn(|i| theta[i] - ck * delta[i]);
        let (gp, gm) = (prob.g(&plus), prob.g(&minus));
        for (cand, g) in [(plus, gp), (minus, gm)] {
            if g > best.1 && prob.is_feasible(&cand, params) {
                best = (cand, g);
            }
        }
        // ascent on g (descent on -g)
        let mut step: [f64; 6] = std::array::from_fn(|i| ak * (gp - gm) / (2.0 * ck * delta[i]));
        let norm = step.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > params.max_step_px {
            step.iter_mut()
                .for_each(|v| *v *= params.max_step_px / norm);
        }
        let prev = theta;
        for i in 0..6 {
            theta[i] += step[i];
        }
        prob.project(&mut theta, &prev, params);
        let g = prob.g(&theta);
        if g > best.1 {
            best = (theta, g);
        }
    }
    let (theta, g_best) = prob.shrink(&best.0, best.1, params);
    CornerFit {
        g_identity: g0,
        g_best,
        ..prob.affine(&theta)
    }
}
