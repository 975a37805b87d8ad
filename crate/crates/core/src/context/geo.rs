//! Geographic values: decimal-degree positions, the DMS view of a single
//! coordinate, and great-circle distance.
//!
//! Decimal degrees (DD) are the canonical internal representation. DMS exists
//! only as a conversion target for display and input.

use std::fmt;

/// Mean Earth radius used for every distance computed by this crate.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeoError {
    #[error("latitude {0} outside [-90, 90]")]
    LatitudeOutOfRange(f64),
    #[error("longitude {0} outside [-180, 180]")]
    LongitudeOutOfRange(f64),
    #[error("malformed {representation} value: {reason}")]
    MalformedRepresentation {
        representation: RepresentationId,
        reason: String,
    },
    #[error("conversion source and target are both {0}")]
    SameRepresentation(RepresentationId),
}

/// A position in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoValue {
    latitude: f64,
    longitude: f64,
}

impl GeoValue {
    pub fn new(latitude: f64, longitude: f64) -> Result<Self, GeoError> {
        if !(-90.0..=90.0).contains(&latitude) {
            return Err(GeoError::LatitudeOutOfRange(latitude));
        }
        if !(-180.0..=180.0).contains(&longitude) {
            return Err(GeoError::LongitudeOutOfRange(longitude));
        }
        Ok(Self {
            latitude,
            longitude,
        })
    }

    pub fn latitude(&self) -> f64 {
        self.latitude
    }

    pub fn longitude(&self) -> f64 {
        self.longitude
    }

    /// Great-circle distance in kilometres (haversine, R = 6371 km).
    pub fn distance_km(&self, other: &GeoValue) -> f64 {
        great_circle_distance_km(*self, *other)
    }
}

pub fn great_circle_distance_km(a: GeoValue, b: GeoValue) -> f64 {
    let (phi1, phi2) = (a.latitude.to_radians(), b.latitude.to_radians());
    let d_phi = phi2 - phi1;
    let d_lambda = (b.longitude - a.longitude).to_radians();
    let h = (d_phi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (d_lambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.clamp(0.0, 1.0).sqrt().asin()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RepresentationId {
    /// Decimal degrees.
    Dd,
    /// Degrees, minutes and seconds.
    Dms,
}

impl fmt::Display for RepresentationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RepresentationId::Dd => "DD",
            RepresentationId::Dms => "DMS",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Latitude,
    Longitude,
}

impl Axis {
    fn limit(self) -> f64 {
        match self {
            Axis::Latitude => 90.0,
            Axis::Longitude => 180.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hemisphere {
    N,
    S,
    E,
    W,
}

impl Hemisphere {
    pub fn axis(self) -> Axis {
        match self {
            Hemisphere::N | Hemisphere::S => Axis::Latitude,
            Hemisphere::E | Hemisphere::W => Axis::Longitude,
        }
    }

    fn is_negative(self) -> bool {
        matches!(self, Hemisphere::S | Hemisphere::W)
    }
}

/// One coordinate in decimal degrees, tagged with its axis so that the DMS
/// hemisphere can be recovered.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoComponent {
    pub axis: Axis,
    pub degrees: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmsValue {
    pub degrees: u32,
    pub minutes: u32,
    pub seconds: f64,
    pub hemisphere: Hemisphere,
}

impl DmsValue {
    pub fn new(degrees: u32, minutes: u32, seconds: f64, hemisphere: Hemisphere) -> Self {
        Self {
            degrees,
            minutes,
            seconds,
            hemisphere,
        }
    }

    fn check(&self) -> Result<(), GeoError> {
        let malformed = |reason: String| GeoError::MalformedRepresentation {
            representation: RepresentationId::Dms,
            reason,
        };
        if self.minutes >= 60 {
            return Err(malformed(format!(
                "minutes {} not in [0, 60)",
                self.minutes
            )));
        }
        if !(0.0..60.0).contains(&self.seconds) {
            return Err(malformed(format!(
                "seconds {} not in [0, 60)",
                self.seconds
            )));
        }
        let limit = self.hemisphere.axis().limit();
        if self.unsigned_degrees() > limit {
            return Err(malformed(format!("magnitude exceeds {limit} degrees")));
        }
        Ok(())
    }

    fn unsigned_degrees(&self) -> f64 {
        f64::from(self.degrees) + f64::from(self.minutes) / 60.0 + self.seconds / 3600.0
    }

    pub fn to_decimal(&self) -> Result<GeoComponent, GeoError> {
        self.check()?;
        let magnitude = self.unsigned_degrees();
        Ok(GeoComponent {
            axis: self.hemisphere.axis(),
            degrees: if self.hemisphere.is_negative() {
                -magnitude
            } else {
                magnitude
            },
        })
    }
}

impl GeoComponent {
    pub fn to_dms(&self) -> Result<DmsValue, GeoError> {
        let limit = self.axis.limit();
        if !self.degrees.is_finite() || self.degrees.abs() > limit {
            return Err(GeoError::MalformedRepresentation {
                representation: RepresentationId::Dd,
                reason: format!("{} outside [-{limit}, {limit}]", self.degrees),
            });
        }
        let hemisphere = match (self.axis, self.degrees < 0.0) {
            (Axis::Latitude, false) => Hemisphere::N,
            (Axis::Latitude, true) => Hemisphere::S,
            (Axis::Longitude, false) => Hemisphere::E,
            (Axis::Longitude, true) => Hemisphere::W,
        };
        let magnitude = self.degrees.abs();
        let mut degrees = magnitude.trunc();
        let minutes_f = (magnitude - degrees) * 60.0;
        let mut minutes = minutes_f.trunc();
        let mut seconds = ((minutes_f - minutes) * 60.0 * 1e6).round() / 1e6;
        // rounding can push seconds (and then minutes) to a full unit
        if seconds >= 60.0 {
            seconds -= 60.0;
            minutes += 1.0;
        }
        if minutes >= 60.0 {
            minutes -= 60.0;
            degrees += 1.0;
        }
        Ok(DmsValue {
            degrees: degrees as u32,
            minutes: minutes as u32,
            seconds,
            hemisphere,
        })
    }
}

/// A coordinate under one of the supported representations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coordinate {
    Dd(GeoComponent),
    Dms(DmsValue),
}

impl Coordinate {
    pub fn representation(&self) -> RepresentationId {
        match self {
            Coordinate::Dd(_) => RepresentationId::Dd,
            Coordinate::Dms(_) => RepresentationId::Dms,
        }
    }
}

pub fn convert_representation(
    value: &Coordinate,
    from: RepresentationId,
    to: RepresentationId,
) -> Result<Coordinate, GeoError> {
    if from == to {
        return Err(GeoError::SameRepresentation(from));
    }
    if value.representation() != from {
        return Err(GeoError::MalformedRepresentation {
            representation: from,
            reason: format!("value is in {}", value.representation()),
        });
    }
    match value {
        Coordinate::Dms(dms) => dms.to_decimal().map(Coordinate::Dd),
        Coordinate::Dd(dd) => dd.to_dms().map(Coordinate::Dms),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dms(d: u32, m: u32, s: f64, h: Hemisphere) -> Coordinate {
        Coordinate::Dms(DmsValue::new(d, m, s, h))
    }

    fn to_dd(c: Coordinate) -> Result<f64, GeoError> {
        match convert_representation(&c, RepresentationId::Dms, RepresentationId::Dd)? {
            Coordinate::Dd(dd) => Ok(dd.degrees),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dms_origin_is_zero() {
        assert_eq!(to_dd(dms(0, 0, 0.0, Hemisphere::N)).unwrap(), 0.0);
    }

    #[test]
    fn dms_to_dd_matches_hand_computation() {
        // 31 + 37/60 + 46.2/3600
        let expected = 31.0 + 37.0 / 60.0 + 46.2 / 3600.0;
        let dd = to_dd(dms(31, 37, 46.2, Hemisphere::N)).unwrap();
        assert!((dd - expected).abs() < 1e-12);
        assert!((dd - 31.629500).abs() < 5e-7);
        assert!((to_dd(dms(31, 37, 46.2, Hemisphere::S)).unwrap() + expected).abs() < 1e-12);
    }

    #[test]
    fn minutes_out_of_range_is_malformed() {
        assert!(matches!(
            to_dd(dms(10, 75, 0.0, Hemisphere::N)),
            Err(GeoError::MalformedRepresentation { .. })
        ));
        assert!(matches!(
            to_dd(dms(10, 0, 60.0, Hemisphere::E)),
            Err(GeoError::MalformedRepresentation { .. })
        ));
        assert!(to_dd(dms(90, 0, 1.0, Hemisphere::N)).is_err());
    }

    #[test]
    fn wrong_source_representation_is_rejected() {
        let c = dms(1, 0, 0.0, Hemisphere::N);
        assert!(convert_representation(&c, RepresentationId::Dd, RepresentationId::Dms).is_err());
        assert!(matches!(
            convert_representation(&c, RepresentationId::Dms, RepresentationId::Dms),
            Err(GeoError::SameRepresentation(_))
        ));
    }

    #[test]
    fn dd_to_dms_carries_rounded_seconds() {
        let c = GeoComponent {
            axis: Axis::Longitude,
            degrees: -(12.0 - 1e-12),
        };
        let d = c.to_dms().unwrap();
        assert_eq!(
            (d.degrees, d.minutes, d.seconds, d.hemisphere),
            (12, 0, 0.0, Hemisphere::W)
        );
    }

    #[test]
    fn coincident_points_have_zero_distance() {
        let p = GeoValue::new(33.57, -7.59).unwrap();
        assert_eq!(great_circle_distance_km(p, p), 0.0);
    }

    #[test]
    fn geo_bounds_enforced() {
        assert!(GeoValue::new(90.1, 0.0).is_err());
        assert!(GeoValue::new(0.0, -180.5).is_err());
        assert!(GeoValue::new(-90.0, 180.0).is_ok());
    }
}
