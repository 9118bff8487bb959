//! Local transverse Mercator projection on the WGS84 ellipsoid.
//!
//! Uses the Krüger n-series to sixth order (Karney 2011), which is accurate
//! to a few nanometres within a few thousand kilometres of the central
//! meridian; far more than the 100 km working radius enforced here.

use serde::{Deserialize, Serialize};

use super::{GeoError, PointM};

const WGS84_A: f64 = 6_378_137.0;
const WGS84_F: f64 = 1.0 / 298.257_223_563;
const MEAN_RADIUS: f64 = 6_371_008.8;

/// Maximum distance from the origin accepted by [`LocalProjection::forward`].
pub const MAX_RANGE_M: f64 = 100_000.0;

/// Longitude/latitude in degrees (EPSG:4326 axis order lon, lat).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LonLat {
    pub lon: f64,
    pub lat: f64,
}

impl LonLat {
    pub const fn new(lon: f64, lat: f64) -> Self {
        Self { lon, lat }
    }
}

struct Series {
    a_rect: f64,
    e: f64,
    alpha: [f64; 6],
    beta: [f64; 6],
}

fn series() -> &'static Series {
    use std::sync::OnceLock;
    static S: OnceLock<Series> = OnceLock::new();
    S.get_or_init(|| {
        let n = WGS84_F / (2.0 - WGS84_F);
        let n2 = n * n;
        let n3 = n2 * n;
        let n4 = n3 * n;
        let n5 = n4 * n;
        let n6 = n5 * n;
        let a_rect = WGS84_A / (1.0 + n) * (1.0 + n2 / 4.0 + n4 / 64.0 + n6 / 256.0);
        let alpha = [
            n / 2.0 - 2.0 * n2 / 3.0 + 5.0 * n3 / 16.0 + 41.0 * n4 / 180.0 - 127.0 * n5 / 288.0
                + 7891.0 * n6 / 37800.0,
            13.0 * n2 / 48.0 - 3.0 * n3 / 5.0 + 557.0 * n4 / 1440.0 + 281.0 * n5 / 630.0
                - 1_983_433.0 * n6 / 1_935_360.0,
            61.0 * n3 / 240.0 - 103.0 * n4 / 140.0
                + 15061.0 * n5 / 26880.0
                + 167_603.0 * n6 / 181_440.0,
            49561.0 * n4 / 161_280.0 - 179.0 * n5 / 168.0 + 6_601_661.0 * n6 / 7_257_600.0,
            34729.0 * n5 / 80640.0 - 3_418_889.0 * n6 / 1_995_840.0,
            212_378_941.0 * n6 / 319_334_400.0,
        ];
        let beta = [
            n / 2.0 - 2.0 * n2 / 3.0 + 37.0 * n3 / 96.0 - n4 / 360.0 - 81.0 * n5 / 512.0
                + 96199.0 * n6 / 604_800.0,
            n2 / 48.0 + n3 / 15.0 - 437.0 * n4 / 1440.0 + 46.0 * n5 / 105.0
                - 1_118_711.0 * n6 / 3_870_720.0,
            17.0 * n3 / 480.0 - 37.0 * n4 / 840.0 - 209.0 * n5 / 4480.0 + 5569.0 * n6 / 90720.0,
            4397.0 * n4 / 161_280.0 - 11.0 * n5 / 504.0 - 830_251.0 * n6 / 7_257_600.0,
            4583.0 * n5 / 161_280.0 - 108_847.0 * n6 / 3_991_680.0,
            20_648_693.0 * n6 / 638_668_800.0,
        ];
        let e = (WGS84_F * (2.0 - WGS84_F)).sqrt();
        Series {
            a_rect,
            e,
            alpha,
            beta,
        }
    })
}

/// Transverse Mercator easting/northing (scale 1 on the central meridian).
fn tm_forward(lat_deg: f64, dlon_deg: f64) -> (f64, f64) {
    let s = series();
    let phi = lat_deg.to_radians();
    let lam = dlon_deg.to_radians();
    let sin_phi = phi.sin();
    let t = (sin_phi.atanh() - s.e * (s.e * sin_phi).atanh()).sinh();
    let xi_p = t.atan2(lam.cos());
    let eta_p = (lam.sin() / (1.0 + t * t).sqrt()).atanh();
    let mut xi = xi_p;
    let mut eta = eta_p;
    for (j, a) in s.alpha.iter().enumerate() {
        let k = 2.0 * (j as f64 + 1.0);
        xi += a * (k * xi_p).sin() * (k * eta_p).cosh();
        eta += a * (k * xi_p).cos() * (k * eta_p).sinh();
    }
    (s.a_rect * eta, s.a_rect * xi)
}

fn tm_inverse(easting: f64, northing: f64) -> (f64, f64) {
    let s = series();
    let xi = northing / s.a_rect;
    let eta = easting / s.a_rect;
    let mut xi_p = xi;
    let mut eta_p = eta;
    for (j, b) in s.beta.iter().enumerate() {
        let k = 2.0 * (j as f64 + 1.0);
        xi_p -= b * (k * xi).sin() * (k * eta).cosh();
        eta_p -= b * (k * xi).cos() * (k * eta).sinh();
    }
    let tau_p = xi_p.sin() / (eta_p.sinh().hypot(xi_p.cos()));
    let lam = eta_p.sinh().atan2(xi_p.cos());
    // Newton iteration from conformal to geodetic latitude.
    let e2 = s.e * s.e;
    let mut tau = tau_p;
    for _ in 0..8 {
        let sqrt1 = (1.0 + tau * tau).sqrt();
        let sigma = (s.e * (s.e * tau / sqrt1).atanh()).sinh();
        let tau_i = tau * (1.0 + sigma * sigma).sqrt() - sigma * sqrt1;
        let dtau = (tau_p - tau_i) / (1.0 + tau_i * tau_i).sqrt() * (1.0 + (1.0 - e2) * tau * tau)
            / ((1.0 - e2) * sqrt1);
        tau += dtau;
        if dtau.abs() < 1e-15 {
            break;
        }
    }
    (tau.atan().to_degrees(), lam.to_degrees())
}

/// Haversine distance on the mean sphere. Only used for range checks.
pub fn approx_distance_m(a: LonLat, b: LonLat) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dp = p2 - p1;
    let dl = (b.lon - a.lon).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * MEAN_RADIUS * h.sqrt().min(1.0).asin()
}

/// Transverse Mercator anchored at `origin`; `forward(origin) == (0, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalProjection {
    origin: LonLat,
    northing0: f64,
}

impl LocalProjection {
    pub fn new(origin: LonLat) -> Self {
        let (_, northing0) = tm_forward(origin.lat, 0.0);
        Self { origin, northing0 }
    }

    pub fn origin(&self) -> LonLat {
        self.origin
    }

    pub fn forward(&self, p: LonLat) -> Result<PointM, GeoError> {
        let d = approx_distance_m(self.origin, p);
        if !(p.lat.abs() < 85.0) || !(d <= MAX_RANGE_M) {
            return Err(GeoError::OutOfProjectionRange {
                lon: p.lon,
                lat: p.lat,
                distance_m: d,
                limit_m: MAX_RANGE_M,
            });
        }
        let dlon = wrap_lon(p.lon - self.origin.lon);
        let (e, n) = tm_forward(p.lat, dlon);
        Ok(PointM::new(e, n - self.northing0))
    }

    pub fn inverse(&self, p: PointM) -> LonLat {
        let (lat, dlon) = tm_inverse(p.x, p.y + self.northing0);
        LonLat::new(wrap_lon(self.origin.lon + dlon), lat)
    }
}

fn wrap_lon(lon: f64) -> f64 {
    if (-180.0..=180.0).contains(&lon) {
        lon
    } else {
        (lon + 180.0).rem_euclid(360.0) - 180.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_maps_to_zero() {
        let proj = LocalProjection::new(LonLat::new(-122.33, 47.61));
        let p = proj.forward(LonLat::new(-122.33, 47.61)).unwrap();
        assert_eq!(p, PointM::new(0.0, 0.0));
    }

    #[test]
    fn roundtrip_near_seattle() {
        let proj = LocalProjection::new(LonLat::new(-122.30, 47.60));
        let q = LonLat::new(-122.33, 47.61);
        let back = proj.inverse(proj.forward(q).unwrap());
        assert!((back.lon - q.lon).abs() < 1e-9);
        assert!((back.lat - q.lat).abs() < 1e-9);
    }

    #[test]
    fn equator_arc_length() {
        // WGS84 equatorial arc: a * dlon(rad) = 111.319 m per millidegree
        let proj = LocalProjection::new(LonLat::new(0.0, 0.0));
        let p = proj.forward(LonLat::new(0.001, 0.0)).unwrap();
        let expected = WGS84_A * 0.001_f64.to_radians();
        assert!((p.x - expected).abs() < 1e-3, "{} vs {}", p.x, expected);
        assert!((p.x - 111.32).abs() < 0.1);
        assert!(p.y.abs() < 1e-9);
    }

    #[test]
    fn rejects_far_points() {
        let proj = LocalProjection::new(LonLat::new(0.0, 0.0));
        assert!(matches!(
            proj.forward(LonLat::new(1.5, 0.0)),
            Err(GeoError::OutOfProjectionRange { .. })
        ));
        let polar = LocalProjection::new(LonLat::new(0.0, 84.9));
        assert!(polar.forward(LonLat::new(0.0, 85.0)).is_err());
    }
}
