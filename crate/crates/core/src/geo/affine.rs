use serde::{Deserialize, Serialize};

use super::PointM;

/// A 2x2 linear map plus translation: `p' = A p + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub t1: f64,
    pub t2: f64,
}

impl Default for AffineParams {
    fn default() -> Self {
        Self::identity()
    }
}

impl AffineParams {
    pub const fn identity() -> Self {
        Self {
            a: 1.0,
            b: 0.0,
            c: 0.0,
            d: 1.0,
            t1: 0.0,
            t2: 0.0,
        }
    }

    pub const fn translation(t1: f64, t2: f64) -> Self {
        Self {
            a: 1.0,
            b: 0.0,
            c: 0.0,
            d: 1.0,
            t1,
            t2,
        }
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn apply(&self, p: PointM) -> PointM {
        PointM::new(
            self.a * p.x + self.b * p.y + self.t1,
            self.c * p.x + self.d * p.y + self.t2,
        )
    }

    /// `self ∘ inner`: applying the result equals applying `inner` first.
    pub fn compose(&self, inner: &AffineParams) -> AffineParams {
        AffineParams {
            a: self.a * inner.a + self.b * inner.c,
            b: self.a * inner.b + self.b * inner.d,
            c: self.c * inner.a + self.d * inner.c,
            d: self.c * inner.b + self.d * inner.d,
            t1: self.a * inner.t1 + self.b * inner.t2 + self.t1,
            t2: self.c * inner.t1 + self.d * inner.t2 + self.t2,
        }
    }

    /// The same map expressed on coordinates relative to `center`:
    /// `p' = A (p - center) + center + t_local`. Returns `t_local`.
    pub fn translation_about(&self, center: PointM) -> PointM {
        let moved = self.apply(center);
        moved - center
    }

    /// Builds the map `p -> A (p - center) + center + t`.
    pub fn about(a: f64, b: f64, c: f64, d: f64, t: PointM, center: PointM) -> AffineParams {
        let lin = AffineParams {
            a,
            b,
            c,
            d,
            t1: 0.0,
            t2: 0.0,
        };
        let ac = lin.apply(center);
        AffineParams {
            t1: center.x + t.x - ac.x,
            t2: center.y + t.y - ac.y,
            ..lin
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.a, self.b, self.c, self.d, self.t1, self.t2]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Applies `A p + t` to every point.
pub fn apply_affine(params: &AffineParams, pts: &[PointM]) -> Vec<PointM> {
    pts.iter().map(|&p| params.apply(p)).collect()
}
