use std::sync::Arc;

use parking_lot::Mutex;

use super::*;
use crate::context::{ContextModel, DerivationRegistry, Entity, ParameterDescriptor};

struct Fixture {
    manager: ContextManager,
    time: Arc<SimulatedSource>,
    stub: Arc<StubTransport>,
}

fn schema() -> Arc<ContextSchema> {
    let model = ContextModel::new("t")
        .with_entity(Entity::new(
            "Device",
            vec![
                ParameterDescriptor::simple("device.hardware.battery.level", ValueType::Number),
                ParameterDescriptor::simple("device.connexionMode", ValueType::String),
            ],
        ))
        .with_entity(Entity::new(
            "User",
            vec![ParameterDescriptor::simple(
                "user.language",
                ValueType::String,
            )],
        ))
        .with_entity(Entity::new(
            "Environment",
            vec![
                ParameterDescriptor::simple("environment.time", ValueType::String),
                ParameterDescriptor::simple("environment.weather", ValueType::String),
            ],
        ));
    Arc::new(ContextSchema::new(model, DerivationRegistry::with_builtins()).unwrap())
}

fn fixture() -> Fixture {
    let clock: Arc<dyn Clock> = Arc::new(StepClock::default());
    let manager = ContextManager::new(schema(), Arc::clone(&clock));
    let time = Arc::new(SimulatedSource::new());
    let stub = Arc::new(StubTransport::new(clock));
    manager
        .register_provider(
            ProviderDescriptor::entity(
                "DeviceProvider",
                ["device.hardware.battery.level", "device.connexionMode"],
                ProviderInterface::LOCAL_NOTIFICATION,
            ),
            ProviderSource::Push,
        )
        .unwrap();
    manager
        .register_provider(
            ProviderDescriptor::entity(
                "UserProvider",
                ["user.language"],
                ProviderInterface::LOCAL_NOTIFICATION,
            ),
            ProviderSource::Push,
        )
        .unwrap();
    manager
        .register_provider(
            ProviderDescriptor::parameter(
                "TimeProvider",
                ["environment.time"],
                ProviderInterface::LOCAL_QUERY,
            ),
            ProviderSource::Query(time.clone()),
        )
        .unwrap();
    manager
        .register_provider(
            ProviderDescriptor::parameter(
                "WeatherProvider",
                ["environment.weather"],
                ProviderInterface::REMOTE_QUERY,
            ),
            ProviderSource::Remote(stub.clone()),
        )
        .unwrap();
    manager
        .register_provider(
            ProviderDescriptor::context(
                "RestaurantsSearchingProvider",
                "RestaurantsSearching",
                [
                    "DeviceProvider",
                    "UserProvider",
                    "TimeProvider",
                    "WeatherProvider",
                ],
            ),
            ProviderSource::Aggregate,
        )
        .unwrap();
    Fixture {
        manager,
        time,
        stub,
    }
}

#[test]
fn registration_order_is_recorded() {
    let f = fixture();
    assert_eq!(
        f.manager.provider_ids(),
        [
            "DeviceProvider",
            "UserProvider",
            "TimeProvider",
            "WeatherProvider",
            "RestaurantsSearchingProvider"
        ]
    );
}

#[test]
fn registration_errors() {
    let f = fixture();
    let m = &f.manager;
    assert_eq!(
        m.register_provider(
            ProviderDescriptor::entity(
                "UserProvider",
                ["user.language"],
                ProviderInterface::LOCAL_NOTIFICATION
            ),
            ProviderSource::Push,
        ),
        Err(ProviderError::DuplicateId("UserProvider".into()))
    );
    assert_eq!(
        m.register_provider(
            ProviderDescriptor::context("X", "Other", ["Ghost"]),
            ProviderSource::Aggregate
        ),
        Err(ProviderError::UnknownAggregate("Ghost".into()))
    );
    assert!(matches!(
        m.register_provider(
            ProviderDescriptor::parameter(
                "Bad",
                ["no.such"],
                ProviderInterface::LOCAL_NOTIFICATION
            ),
            ProviderSource::Push,
        ),
        Err(ProviderError::UnknownPath { .. })
    ));
    assert!(matches!(
        m.register_provider(
            ProviderDescriptor::parameter(
                "Mismatch",
                ["environment.time"],
                ProviderInterface::LOCAL_QUERY
            ),
            ProviderSource::Push,
        ),
        Err(ProviderError::InvalidDescriptor { .. })
    ));
    assert!(matches!(
        m.register_provider(
            ProviderDescriptor::parameter(
                "Uses",
                ["environment.time"],
                ProviderInterface::LOCAL_NOTIFICATION
            )
            .using(["Ghost"]),
            ProviderSource::Push,
        ),
        Err(ProviderError::UnknownAggregate(_))
    ));
}

#[test]
fn overlapping_siblings_conflict() {
    let f = fixture();
    let m = &f.manager;
    m.register_provider(
        ProviderDescriptor::parameter(
            "ClockA",
            ["environment.time"],
            ProviderInterface::LOCAL_NOTIFICATION,
        ),
        ProviderSource::Push,
    )
    .unwrap();
    m.register_provider(
        ProviderDescriptor::parameter(
            "ClockB",
            ["environment.time"],
            ProviderInterface::LOCAL_NOTIFICATION,
        ),
        ProviderSource::Push,
    )
    .unwrap();
    assert!(matches!(
        m.register_provider(ProviderDescriptor::context("Both", "Other", ["ClockA", "ClockB"]), ProviderSource::Aggregate),
        Err(ProviderError::PathConflict { ref path, .. }) if path == "environment.time"
    ));
}

#[test]
fn query_modes() {
    let f = fixture();
    f.stub
        .set("WeatherProvider", "environment.weather", "sunny".into());
    let (v, _) = f
        .manager
        .query("WeatherProvider", "environment.weather")
        .unwrap();
    assert_eq!(v, TypedValue::from("sunny"));

    assert!(matches!(
        f.manager
            .query("DeviceProvider", "device.hardware.battery.level"),
        Err(ProviderError::WrongMode { .. })
    ));
    assert_eq!(
        f.manager.query("TimeProvider", "environment.time"),
        Err(ProviderError::Unavailable("environment.time".into()))
    );
    f.stub.set_unreachable("WeatherProvider", true);
    assert!(matches!(
        f.manager.query("WeatherProvider", "environment.weather"),
        Err(ProviderError::ProviderUnreachable { .. })
    ));
}

#[test]
fn remote_values_are_typed_by_the_model() {
    let f = fixture();
    f.stub.set(
        "WeatherProvider",
        "environment.weather",
        serde_json::json!(42),
    );
    assert!(matches!(
        f.manager.query("WeatherProvider", "environment.weather"),
        Err(ProviderError::ProviderUnreachable { .. })
    ));
}

#[test]
fn publish_delivers_once_per_subscriber_in_order() {
    let f = fixture();
    let log = Arc::new(Mutex::new(Vec::new()));
    let subs: Vec<_> = (0..3)
        .map(|i| {
            let log = Arc::clone(&log);
            f.manager
                .subscribe(
                    "DeviceProvider",
                    "device.hardware.battery.level",
                    move |n| {
                        log.lock().push((i, n.value.clone()));
                    },
                )
                .unwrap()
        })
        .collect();
    let delivered = f
        .manager
        .publish(
            "DeviceProvider",
            "device.hardware.battery.level",
            15.0.into(),
        )
        .unwrap();
    assert_eq!(delivered, 3);
    let order: Vec<_> = log.lock().iter().map(|(i, _)| *i).collect();
    assert_eq!(order, [0, 1, 2]);
    assert!(subs.iter().all(|s| s.delivered_count() == 1));
}

#[test]
fn publish_errors() {
    let f = fixture();
    assert!(matches!(
        f.manager
            .publish("TimeProvider", "environment.time", "13:00".into()),
        Err(ProviderError::WrongMode { .. })
    ));
    assert!(matches!(
        f.manager
            .publish("DeviceProvider", "device.nope", 1.0.into()),
        Err(ProviderError::UnknownPath { .. })
    ));
    assert!(matches!(
        f.manager.publish(
            "DeviceProvider",
            "device.hardware.battery.level",
            "low".into()
        ),
        Err(ProviderError::TypeMismatch { .. })
    ));
}

#[test]
fn three_publishes_three_deliveries() {
    let f = fixture();
    let sub = f
        .manager
        .subscribe("UserProvider", "user.language", |_| {})
        .unwrap();
    for lang in ["fr", "en", "fr"] {
        f.manager
            .publish("UserProvider", "user.language", lang.into())
            .unwrap();
    }
    assert_eq!(sub.delivered_count(), 3);
}

#[test]
fn unsubscribe_stops_delivery() {
    let f = fixture();
    let sub = f
        .manager
        .subscribe("UserProvider", "user.language", |_| {})
        .unwrap();
    f.manager.unsubscribe(&sub);
    f.manager
        .publish("UserProvider", "user.language", "fr".into())
        .unwrap();
    assert_eq!(sub.delivered_count(), 0);
    assert!(!sub.is_active());
}

#[test]
fn subscribe_on_query_provider_is_wrong_mode() {
    let f = fixture();
    assert!(matches!(
        f.manager
            .subscribe("TimeProvider", "environment.time", |_| {}),
        Err(ProviderError::WrongMode { .. })
    ));
}

#[test]
fn snapshot_combines_pushed_and_polled_values() {
    let f = fixture();
    f.manager
        .publish(
            "DeviceProvider",
            "device.hardware.battery.level",
            15.0.into(),
        )
        .unwrap();
    f.time.set("environment.time", "13:00".into());
    let s = f.manager.snapshot("RestaurantsSearching").unwrap();
    assert_eq!(
        s.resolve("device.hardware.battery.level").unwrap(),
        &TypedValue::Number(15.0)
    );
    assert_eq!(
        s.resolve("environment.time").unwrap(),
        &TypedValue::from("13:00")
    );
    assert_eq!(s.entry("environment.time").unwrap().source, "TimeProvider");
    assert!(s.resolve("device.connexionMode").is_err());
}

#[test]
fn failing_remote_provider_degrades_snapshot() {
    let f = fixture();
    f.stub
        .set("WeatherProvider", "environment.weather", "sunny".into());
    f.time.set("environment.time", "13:00".into());
    assert!(f
        .manager
        .snapshot("RestaurantsSearching")
        .unwrap()
        .resolve("environment.weather")
        .is_ok());
    f.stub.set_unreachable("WeatherProvider", true);
    let s = f.manager.snapshot("RestaurantsSearching").unwrap();
    assert!(s.resolve("environment.weather").is_err());
    assert!(s.resolve("environment.time").is_ok());
}

#[test]
fn unknown_service_snapshot() {
    let f = fixture();
    assert_eq!(
        f.manager.snapshot("NoSuchService").unwrap_err(),
        ProviderError::UnknownService("NoSuchService".into())
    );
}

#[test]
fn snapshots_are_isolated_from_later_publishes() {
    let f = fixture();
    f.manager
        .publish("UserProvider", "user.language", "fr".into())
        .unwrap();
    let s = f.manager.snapshot("RestaurantsSearching").unwrap();
    f.manager
        .publish("UserProvider", "user.language", "en".into())
        .unwrap();
    f.manager
        .retract("DeviceProvider", "device.connexionMode")
        .unwrap();
    assert_eq!(s.resolve("user.language").unwrap(), &TypedValue::from("fr"));
}

#[test]
fn retract_removes_value_and_notifies() {
    let f = fixture();
    let sub = f
        .manager
        .subscribe("UserProvider", "user.language", |n| {
            assert!(n.value.is_none())
        })
        .unwrap();
    f.manager.retract("UserProvider", "user.language").unwrap();
    assert_eq!(sub.delivered_count(), 1);
    assert!(f
        .manager
        .snapshot("RestaurantsSearching")
        .unwrap()
        .resolve("user.language")
        .is_err());
}

#[test]
fn supplier_lookup() {
    let f = fixture();
    assert_eq!(
        f.manager
            .supplier_of("RestaurantsSearching", "environment.time")
            .unwrap()
            .id,
        "TimeProvider"
    );
    assert_eq!(
        f.manager
            .notification_paths("RestaurantsSearching")
            .unwrap(),
        [
            (
                "DeviceProvider".to_string(),
                "device.connexionMode".to_string()
            ),
            (
                "DeviceProvider".to_string(),
                "device.hardware.battery.level".to_string()
            ),
            ("UserProvider".to_string(), "user.language".to_string()),
        ]
    );
}
