//! Web-Mercator slippy tiles and Bing-style quadkeys.

use std::f64::consts::PI;
use std::fmt;

use super::RasterError;
use crate::geo::LonLat;

pub const MAX_LATITUDE: f64 = 85.051_128_779_806_59;
pub const MAX_ZOOM: u8 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TileCoord {
    pub z: u8,
    pub x: u32,
    pub y: u32,
}

impl TileCoord {
    pub fn new(z: u8, x: u32, y: u32) -> Option<Self> {
        let n = 1u64 << z.min(MAX_ZOOM);
        (z <= MAX_ZOOM && (x as u64) < n && (y as u64) < n).then_some(Self { z, x, y })
    }

    pub fn quadkey(&self) -> String {
        tile_to_quadkey(*self)
    }

    /// Geographic bounds `[west, south, east, north]`.
    pub fn bounds(&self) -> [f64; 4] {
        let n = (1u64 << self.z) as f64;
        let lon = |x: f64| x / n * 360.0 - 180.0;
        let lat = |y: f64| (PI * (1.0 - 2.0 * y / n)).sinh().atan().to_degrees();
        [
            lon(self.x as f64),
            lat(self.y as f64 + 1.0),
            lon(self.x as f64 + 1.0),
            lat(self.y as f64),
        ]
    }
}

impl fmt::Display for TileCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.z, self.x, self.y)
    }
}

pub fn lonlat_to_tile(p: LonLat, z: u8) -> Result<TileCoord, RasterError> {
    if !(p.lat.abs() <= MAX_LATITUDE) {
        return Err(RasterError::LatitudeOutOfRange(p.lat));
    }
    let z = z.min(MAX_ZOOM);
    let n = (1u64 << z) as f64;
    let lat = p.lat.to_radians();
    let fx = (p.lon + 180.0) / 360.0 * n;
    let fy = (1.0 - (lat.tan() + 1.0 / lat.cos()).ln() / PI) / 2.0 * n;
    let clamp = |v: f64| v.floor().clamp(0.0, n - 1.0) as u32;
    Ok(TileCoord {
        z,
        x: clamp(fx),
        y: clamp(fy),
    })
}

pub fn tile_to_quadkey(t: TileCoord) -> String {
    (1..=t.z)
        .rev()
        .map(|level| {
            let mask = 1u32 << (level - 1);
            let digit = u8::from(t.x & mask != 0) + 2 * u8::from(t.y & mask != 0);
            char::from(b'0' + digit)
        })
        .collect()
}

pub fn quadkey_to_tile(q: &str) -> Result<TileCoord, RasterError> {
    if q.len() > MAX_ZOOM as usize {
        return Err(RasterError::InvalidQuadkey(q.to_string()));
    }
    let (mut x, mut y) = (0u32, 0u32);
    for ch in q.chars() {
        let d = ch
            .to_digit(4)
            .ok_or_else(|| RasterError::InvalidQuadkey(q.to_string()))?;
        x = (x << 1) | (d & 1);
        y = (y << 1) | (d >> 1);
    }
    Ok(TileCoord {
        z: q.len() as u8,
        x,
        y,
    })
}

/// All tiles at zoom `z` touching the box.
pub fn tiles_covering(bbox: [f64; 4], z: u8) -> Result<Vec<TileCoord>, RasterError> {
    let nw = lonlat_to_tile(LonLat::new(bbox[0], bbox[3]), z)?;
    let se = lonlat_to_tile(LonLat::new(bbox[2], bbox[1]), z)?;
    let mut out = Vec::new();
    for y in nw.y..=se.y {
        for x in nw.x..=se.x {
            out.push(TileCoord { z: nw.z, x, y });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn root_tile() {
        let t = lonlat_to_tile(LonLat::new(12.0, -33.0), 0).unwrap();
        assert_eq!((t.x, t.y), (0, 0));
        assert_eq!(t.quadkey(), "");
    }

    #[test]
    fn null_island_zoom_one() {
        let t = lonlat_to_tile(LonLat::new(0.0, 0.0), 1).unwrap();
        assert_eq!((t.x, t.y), (1, 1));
        assert_eq!(t.quadkey(), "3");
    }

    #[test]
    fn polar_latitude_rejected() {
        assert!(matches!(
            lonlat_to_tile(LonLat::new(0.0, 86.0), 5),
            Err(RasterError::LatitudeOutOfRange(_))
        ));
    }

    #[test]
    fn bad_quadkey() {
        assert!(quadkey_to_tile("0124").is_err());
    }
}
