//! Spherical-earth geometry for sighting locations and synthesized routes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("coordinate out of range: lat={lat}, lon={lon}")]
pub struct InvalidCoordinate {
    pub lat: f64,
    pub lon: f64,
}

/// A WGS84-style latitude/longitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, InvalidCoordinate> {
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) || lat.is_nan() || lon.is_nan() {
            return Err(InvalidCoordinate { lat, lon });
        }
        Ok(GeoPoint { lat, lon })
    }

    pub fn is_valid(&self) -> bool {
        GeoPoint::new(self.lat, self.lon).is_ok()
    }

    /// Great-circle distance in meters (haversine).
    pub fn haversine(&self, other: &GeoPoint) -> f64 {
        let (lat1, lat2) = (self.lat.to_radians(), other.lat.to_radians());
        let d_lat = lat2 - lat1;
        let d_lon = (other.lon - self.lon).to_radians();
        let a = (d_lat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (d_lon / 2.0).sin().powi(2);
        2.0 * EARTH_RADIUS_M * a.sqrt().atan2((1.0 - a).sqrt())
    }

    /// The point reached by travelling `distance_m` along the initial
    /// `bearing_deg` (clockwise from north).
    pub fn destination(&self, bearing_deg: f64, distance_m: f64) -> GeoPoint {
        let delta = distance_m / EARTH_RADIUS_M;
        let theta = bearing_deg.to_radians();
        let lat1 = self.lat.to_radians();
        let lon1 = self.lon.to_radians();
        let lat2 = (lat1.sin() * delta.cos() + lat1.cos() * delta.sin() * theta.cos()).asin();
        let lon2 = lon1 + (theta.sin() * delta.sin() * lat1.cos()).atan2(delta.cos() - lat1.sin() * lat2.sin());
        let lon2 = (lon2.to_degrees() + 540.0).rem_euclid(360.0) - 180.0;
        GeoPoint { lat: lat2.to_degrees(), lon: lon2 }
    }

    /// Linear interpolation in coordinate space; adequate for the sub-km
    /// spacing of trace samples.
    pub fn lerp(&self, other: &GeoPoint, frac: f64) -> GeoPoint {
        GeoPoint { lat: self.lat + (other.lat - self.lat) * frac, lon: self.lon + (other.lon - self.lon) * frac }
    }
}

/// Sum of haversine distances between consecutive points.
pub fn path_length<'a>(points: impl IntoIterator<Item = &'a GeoPoint>) -> f64 {
    let mut total = 0.0;
    let mut prev: Option<&GeoPoint> = None;
    for p in points {
        if let Some(q) = prev {
            total += q.haversine(p);
        }
        prev = Some(p);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn destination_then_haversine_recovers_distance() {
        let origin = GeoPoint::new(49.8728, 8.6512).unwrap();
        for bearing in [0.0, 45.0, 90.0, 200.0, 315.0] {
            let p = origin.destination(bearing, 1234.5);
            assert!((origin.haversine(&p) - 1234.5).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(GeoPoint::new(90.5, 0.0).is_err());
        assert!(GeoPoint::new(0.0, -180.1).is_err());
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
    }
}
