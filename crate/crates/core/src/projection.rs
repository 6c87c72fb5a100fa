//! Per-subject planar projection.
//!
//! The latitude/longitude bounding box of a subject's records is mapped onto
//! an isosceles trapezoid: the two parallel sides are the east-west extents at
//! the lowest and highest latitude, and the legs are the north-south extent.
//! The origin sits at `(lat_min, lon_min)`.
//!
//! The height of the trapezoid is `d1 * sin(acos((d3 - d2) / (2 d1)))`. A
//! commonly reproduced variant of this formula writes `d3 - d1` in the
//! numerator, which does not describe the trapezoid and can leave the domain
//! of `acos`; the geometric form is used here.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6.371e6;

/// Records outside the frame by less than this many degrees are clamped.
const FRAME_TOLERANCE_DEG: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpsRecord {
    /// Seconds since the Unix epoch.
    pub t: f64,
    pub lat: f64,
    pub lon: f64,
    pub accuracy: Option<f64>,
}

impl GpsRecord {
    pub fn new(t: f64, lat: f64, lon: f64, accuracy: Option<f64>) -> Result<Self> {
        let rec = GpsRecord { t, lat, lon, accuracy };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.t.is_finite() {
            return Err(Error::InvalidRecord(format!("non-finite timestamp {}", self.t)));
        }
        if !(-90.0..=90.0).contains(&self.lat) {
            return Err(Error::InvalidRecord(format!("latitude {} out of range", self.lat)));
        }
        if !(-180.0..=180.0).contains(&self.lon) {
            return Err(Error::InvalidRecord(format!("longitude {} out of range", self.lon)));
        }
        if let Some(acc) = self.accuracy {
            if !(acc >= 0.0) {
                return Err(Error::InvalidRecord(format!("accuracy {acc} is negative")));
            }
        }
        Ok(())
    }
}

/// A location in the projected plane, in meters, with its timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarPoint {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

impl PlanarPoint {
    pub fn new(x: f64, y: f64, t: f64) -> Self {
        PlanarPoint { x, y, t }
    }

    pub fn dist(&self, other: &PlanarPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionFrame {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    /// Leg length: north-south extent.
    pub d1: f64,
    /// East-west extent along `lat_max`.
    pub d2: f64,
    /// East-west extent along `lat_min`.
    pub d3: f64,
    pub earth_radius: f64,
}

impl ProjectionFrame {
    /// Builds the frame spanning every record.
    pub fn build(records: &[GpsRecord]) -> Result<Self> {
        let first = records.first().ok_or(Error::EmptyTrace)?;
        let (mut lat_min, mut lat_max) = (first.lat, first.lat);
        let (mut lon_min, mut lon_max) = (first.lon, first.lon);
        for r in records {
            lat_min = lat_min.min(r.lat);
            lat_max = lat_max.max(r.lat);
            lon_min = lon_min.min(r.lon);
            lon_max = lon_max.max(r.lon);
        }
        Ok(Self::from_bounds(lat_min, lat_max, lon_min, lon_max))
    }

    pub fn from_bounds(lat_min: f64, lat_max: f64, lon_min: f64, lon_max: f64) -> Self {
        let r = EARTH_RADIUS_M;
        let lon_span = (lon_max - lon_min).to_radians();
        let d1 = (lat_max - lat_min).to_radians() * r;
        let d2 = lon_span * r * (std::f64::consts::FRAC_PI_2 - lat_max.to_radians()).sin();
        let d3 = lon_span * r * (std::f64::consts::FRAC_PI_2 - lat_min.to_radians()).sin();
        ProjectionFrame {
            lat_min,
            lat_max,
            lon_min,
            lon_max,
            d1,
            d2,
            d3,
            earth_radius: r,
        }
    }

    /// Height of the trapezoid (zero for a degenerate frame).
    pub fn height(&self) -> f64 {
        if self.d1 <= 0.0 {
            return 0.0;
        }
        let arg = ((self.d3 - self.d2) / (2.0 * self.d1)).clamp(-1.0, 1.0);
        self.d1 * arg.acos().sin()
    }

    pub fn project(&self, rec: &GpsRecord) -> Result<PlanarPoint> {
        let tol = FRAME_TOLERANCE_DEG;
        if rec.lat < self.lat_min - tol
            || rec.lat > self.lat_max + tol
            || rec.lon < self.lon_min - tol
            || rec.lon > self.lon_max + tol
        {
            return Err(Error::OutOfFrame { lat: rec.lat, lon: rec.lon });
        }
        let lat = rec.lat.clamp(self.lat_min, self.lat_max);
        let lon = rec.lon.clamp(self.lon_min, self.lon_max);

        // Zero spans collapse the frame onto a segment or a point.
        let w_lat = fraction(lat, self.lat_min, self.lat_max);
        let w_lon = fraction(lon, self.lon_min, self.lon_max);

        let x = w_lat * (self.d3 - self.d2) / 2.0 + w_lon * (self.d3 * (1.0 - w_lat) + self.d2 * w_lat);
        let y = w_lat * self.height();
        Ok(PlanarPoint { x, y, t: rec.t })
    }

    pub fn project_all(&self, records: &[GpsRecord]) -> Result<Vec<PlanarPoint>> {
        records.iter().map(|r| self.project(r)).collect()
    }
}

fn fraction(v: f64, lo: f64, hi: f64) -> f64 {
    let span = hi - lo;
    if span > 0.0 {
        ((v - lo) / span).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn rec(lat: f64, lon: f64) -> GpsRecord {
        GpsRecord::new(0.0, lat, lon, None).unwrap()
    }

    // Independent great-circle oracle.
    fn haversine(a: &GpsRecord, b: &GpsRecord) -> f64 {
        let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
        let dp = p2 - p1;
        let dl = (b.lon - a.lon).to_radians();
        let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
        2.0 * EARTH_RADIUS_M * h.sqrt().asin()
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(matches!(ProjectionFrame::build(&[]), Err(Error::EmptyTrace)));
    }

    #[test]
    fn single_record_is_degenerate() {
        let f = ProjectionFrame::build(&[rec(39.9, 116.3)]).unwrap();
        assert_eq!((f.d1, f.d2, f.d3), (0.0, 0.0, 0.0));
        let p = f.project(&rec(39.9, 116.3)).unwrap();
        assert_eq!((p.x, p.y), (0.0, 0.0));
    }

    #[test]
    fn leg_length_is_arc_length() {
        let f = ProjectionFrame::build(&[rec(0.0, 0.0), rec(0.01, 0.01)]).unwrap();
        let expected = 0.01 * std::f64::consts::PI / 180.0 * 6.371e6;
        assert_relative_eq!(f.d1, expected, max_relative = 1e-12);
        assert_relative_eq!(f.d1, 1111.949, epsilon = 0.01);
    }

    #[test]
    fn hemisphere_ordering_of_parallel_sides() {
        let south = ProjectionFrame::build(&[rec(-10.0, 20.0), rec(-9.0, 21.0)]).unwrap();
        assert!(south.d2 > south.d3);
        let north = ProjectionFrame::build(&[rec(9.0, 20.0), rec(10.0, 21.0)]).unwrap();
        assert!(north.d2 < north.d3);
    }

    #[test]
    fn corners_land_on_trapezoid_vertices() {
        let f = ProjectionFrame::build(&[rec(40.0, -75.0), rec(40.2, -74.7)]).unwrap();
        let o = f.project(&rec(40.0, -75.0)).unwrap();
        assert_eq!((o.x, o.y), (0.0, 0.0));
        let top_left = f.project(&rec(40.2, -75.0)).unwrap();
        assert_relative_eq!(top_left.x, (f.d3 - f.d2) / 2.0, max_relative = 1e-12);
        assert_relative_eq!(top_left.y, f.height(), max_relative = 1e-12);
        let bottom_right = f.project(&rec(40.0, -74.7)).unwrap();
        assert_relative_eq!(bottom_right.x, f.d3, max_relative = 1e-12);
        assert_eq!(bottom_right.y, 0.0);
        // the leg from origin to top-left has length d1
        assert_relative_eq!(o.dist(&top_left), f.d1, max_relative = 1e-9);
    }

    #[test]
    fn equatorial_neighbours_match_great_circle() {
        let a = rec(0.0005, 10.0);
        let b = rec(0.0005, 10.001);
        let f = ProjectionFrame::build(&[rec(0.0, 10.0), rec(0.001, 10.001)]).unwrap();
        let planar = f.project(&a).unwrap().dist(&f.project(&b).unwrap());
        let gc = haversine(&a, &b);
        assert!((planar - gc).abs() / gc < 0.01);
    }

    #[test]
    fn out_of_frame_is_rejected_but_rounding_is_clamped() {
        let f = ProjectionFrame::build(&[rec(1.0, 1.0), rec(2.0, 2.0)]).unwrap();
        assert!(matches!(f.project(&rec(2.1, 1.5)), Err(Error::OutOfFrame { .. })));
        let p = f.project(&rec(2.0 + 1e-12, 1.5)).unwrap();
        assert_relative_eq!(p.y, f.height(), max_relative = 1e-12);
    }

    #[test]
    fn zero_longitude_span_maps_to_segment() {
        let f = ProjectionFrame::build(&[rec(1.0, 5.0), rec(2.0, 5.0)]).unwrap();
        let p = f.project(&rec(1.5, 5.0)).unwrap();
        assert_eq!(p.x, 0.0);
        assert_relative_eq!(p.y, f.d1 / 2.0, max_relative = 1e-9);
    }

    #[test]
    fn invalid_records() {
        assert!(GpsRecord::new(0.0, 91.0, 0.0, None).is_err());
        assert!(GpsRecord::new(0.0, 0.0, -181.0, None).is_err());
        assert!(GpsRecord::new(f64::NAN, 0.0, 0.0, None).is_err());
        assert!(GpsRecord::new(0.0, 0.0, 0.0, Some(-1.0)).is_err());
    }

    proptest! {
        #[test]
        fn planar_distance_tracks_haversine(
            lat0 in -70.0f64..70.0, lon0 in -179.0f64..178.0,
            a in (0.0f64..1.0, 0.0f64..1.0), b in (0.0f64..1.0, 0.0f64..1.0),
        ) {
            let f = ProjectionFrame::from_bounds(lat0, lat0 + 1.0, lon0, lon0 + 1.0);
            let ra = rec(lat0 + a.0, lon0 + a.1);
            let rb = rec(lat0 + b.0, lon0 + b.1);
            let gc = haversine(&ra, &rb);
            prop_assume!(gc > 1.0);
            let planar = f.project(&ra).unwrap().dist(&f.project(&rb).unwrap());
            prop_assert!((planar - gc).abs() / gc < 0.01);
        }

        #[test]
        fn monotone_axes(
            lat in 30.0f64..31.0, lon in 10.0f64..11.0, step in 1e-4f64..0.1,
        ) {
            let f = ProjectionFrame::from_bounds(30.0, 31.2, 10.0, 11.2);
            let p = f.project(&rec(lat, lon)).unwrap();
            let east = f.project(&rec(lat, lon + step)).unwrap();
            let north = f.project(&rec(lat + step, lon)).unwrap();
            let north_other_lon = f.project(&rec(lat + step, lon + step)).unwrap();
            prop_assert!(east.x > p.x);
            prop_assert!(north.y > p.y);
            prop_assert_eq!(north.y, north_other_lon.y);
        }
    }
}
