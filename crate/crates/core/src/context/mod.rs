//! Context metamodel: parameters organised in sub-contexts, categories and
//! entities; immutable per-request snapshots; derived parameters and
//! representation conversion.

mod derivation;
pub mod geo;
mod model;
mod snapshot;
mod value;

pub use derivation::{DerivationFn, DerivationRegistry, GREAT_CIRCLE_DISTANCE_KM};
pub use geo::{
    convert_representation, great_circle_distance_km, Axis, Coordinate, DmsValue, GeoComponent,
    GeoError, GeoValue, Hemisphere, RepresentationId, EARTH_RADIUS_KM,
};
pub use model::{
    is_valid_path, validate_model, Category, ContextModel, DerivationSpec, Entity,
    ParameterDescriptor, ParameterKind, SubContext,
};
pub use snapshot::{
    compute_derived, ContextSchema, ContextSnapshot, SnapshotBuilder, SnapshotEntry,
};
pub use value::{TypedValue, ValueError, ValueType};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ContextError {
    #[error("context information unavailable: {0}")]
    Unavailable(String),
    #[error("unknown derivation function `{0}`")]
    UnknownFunction(String),
    #[error("`{0}` is not a parameter of the context model")]
    UnknownPath(String),
    #[error("`{0}` is not a derived parameter")]
    NotDerived(String),
    #[error("`{path}` expects a {expected} value, got {found}")]
    TypeMismatch {
        path: String,
        expected: ValueType,
        found: ValueType,
    },
    #[error("derivation of `{path}` failed: {reason}")]
    Derivation { path: String, reason: String },
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use chrono::{TimeZone, Utc};

    use super::*;

    fn schema() -> Arc<ContextSchema> {
        let model = ContextModel::new("test")
            .with_entity(Entity::new(
                "User",
                vec![
                    ParameterDescriptor::simple("user.language", ValueType::String),
                    ParameterDescriptor::complex(
                        "user.gps",
                        ValueType::Geo,
                        [RepresentationId::Dd],
                    ),
                    ParameterDescriptor::complex(
                        "user.hotel",
                        ValueType::Geo,
                        [RepresentationId::Dd],
                    ),
                    ParameterDescriptor::derived(
                        "user.distanceFromHotel",
                        ValueType::Number,
                        GREAT_CIRCLE_DISTANCE_KM,
                        ["user.gps", "user.hotel"],
                    )
                    .with_unit("km"),
                ],
            ))
            .with_sub_context(SubContext::new("device").with_category(
                "hardware",
                vec![ParameterDescriptor::simple(
                    "device.hardware.battery.level",
                    ValueType::Number,
                )],
            ));
        Arc::new(ContextSchema::new(model, DerivationRegistry::with_builtins()).unwrap())
    }

    fn at() -> chrono::DateTime<Utc> {
        Utc.with_ymd_and_hms(2024, 5, 1, 13, 0, 0).unwrap()
    }

    fn geo(lat: f64, lon: f64) -> GeoValue {
        GeoValue::new(lat, lon).unwrap()
    }

    #[test]
    fn resolve_returns_stored_values() {
        let s = ContextSnapshot::builder("svc", at(), schema())
            .with("user.language", "fr")
            .unwrap()
            .with("device.hardware.battery.level", 15.0)
            .unwrap()
            .build();
        assert_eq!(s.resolve("user.language").unwrap(), &TypedValue::from("fr"));
        assert_eq!(
            s.resolve("device.hardware.battery.level").unwrap(),
            &TypedValue::Number(15.0)
        );
        // repeated lookups are stable
        assert_eq!(
            s.resolve("user.language").unwrap(),
            s.resolve("user.language").unwrap()
        );
    }

    #[test]
    fn resolve_missing_path_is_unavailable() {
        let s = ContextSnapshot::builder("svc", at(), schema()).build();
        assert_eq!(
            s.resolve("user.gps"),
            Err(ContextError::Unavailable("user.gps".into()))
        );
    }

    #[test]
    fn builder_rejects_unknown_paths_and_wrong_types() {
        let b = ContextSnapshot::builder("svc", at(), schema());
        assert!(matches!(
            b.with("nope.x", 1.0),
            Err(ContextError::UnknownPath(_))
        ));
        let b = ContextSnapshot::builder("svc", at(), schema());
        assert!(matches!(
            b.with("user.language", 1.0),
            Err(ContextError::TypeMismatch { .. })
        ));
    }

    #[test]
    fn derived_distance_is_zero_for_same_point() {
        let p = geo(33.59, -7.61);
        let s = ContextSnapshot::builder("svc", at(), schema())
            .with("user.gps", p)
            .unwrap()
            .with("user.hotel", p)
            .unwrap()
            .build();
        assert_eq!(
            s.resolve_or_derive("user.distanceFromHotel").unwrap(),
            TypedValue::Number(0.0)
        );
    }

    #[test]
    fn derived_distance_one_degree_of_latitude() {
        let s = ContextSnapshot::builder("svc", at(), schema())
            .with("user.gps", geo(0.0, 0.0))
            .unwrap()
            .with("user.hotel", geo(1.0, 0.0))
            .unwrap()
            .build();
        let d = s
            .resolve_or_derive("user.distanceFromHotel")
            .unwrap()
            .as_number()
            .unwrap();
        assert!((d - 111.195).abs() < 0.01, "{d}");
    }

    #[test]
    fn derived_with_missing_input_is_unavailable() {
        let s = ContextSnapshot::builder("svc", at(), schema())
            .with("user.hotel", geo(1.0, 0.0))
            .unwrap()
            .build();
        assert_eq!(
            s.resolve_or_derive("user.distanceFromHotel"),
            Err(ContextError::Unavailable("user.gps".into()))
        );
        // plain resolve never derives
        assert!(s.resolve("user.distanceFromHotel").is_err());
    }

    #[test]
    fn unregistered_function_is_reported() {
        let s = ContextSnapshot::builder("svc", at(), schema()).build();
        let d = ParameterDescriptor::derived("user.x", ValueType::Number, "noSuchFn", ["user.gps"]);
        assert_eq!(
            compute_derived(&d, &s),
            Err(ContextError::UnknownFunction("noSuchFn".into()))
        );
    }

    #[test]
    fn digest_ignores_timestamps_but_not_values() {
        let a = ContextSnapshot::builder("svc", at(), schema())
            .with("user.language", "fr")
            .unwrap()
            .build();
        let b = ContextSnapshot::builder("svc", at() + chrono::Duration::seconds(5), schema())
            .with("user.language", "fr")
            .unwrap()
            .build();
        let c = ContextSnapshot::builder("svc", at(), schema())
            .with("user.language", "en")
            .unwrap()
            .build();
        assert_eq!(a.digest(), b.digest());
        assert_ne!(a.digest(), c.digest());
        assert!(a.is_subset_of(&b));
        assert!(!a.is_subset_of(&c));
    }
}
