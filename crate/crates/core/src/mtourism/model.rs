use std::sync::Arc;

use serde_json::Value as Json;

use crate::context::{
    ContextModel, ContextSchema, DerivationRegistry, Entity, ParameterDescriptor, RepresentationId,
    SubContext, TypedValue, ValueType, GREAT_CIRCLE_DISTANCE_KM,
};
use crate::provider::{
    Clock, ContextManager, Mode, ProviderDescriptor, ProviderError, ProviderInterface,
    ProviderSource, SimulatedSource, StubTransport,
};

pub const SERVICE: &str = "RestaurantsSearching";
pub const OPERATION: &str = "search";
pub const CONTEXT_PROVIDER: &str = "RestaurantsSearchingProvider";

/// The M-tourism context: the device (software and hardware categories), the
/// tourist and the environment.
pub fn context_model() -> ContextModel {
    let geo = |path: &str| {
        ParameterDescriptor::complex(
            path,
            ValueType::Geo,
            [RepresentationId::Dd, RepresentationId::Dms],
        )
    };
    ContextModel::new("M-tourism")
        .with_sub_context(
            SubContext::new("device")
                .with_category(
                    "software",
                    vec![ParameterDescriptor::simple(
                        "device.software.os",
                        ValueType::String,
                    )],
                )
                .with_category(
                    "hardware",
                    vec![ParameterDescriptor::simple(
                        "device.hardware.battery.level",
                        ValueType::Number,
                    )
                    .with_unit("%")],
                )
                .with_parameter(ParameterDescriptor::simple(
                    "device.connexionMode",
                    ValueType::String,
                )),
        )
        .with_entity(Entity::new(
            "User",
            vec![
                ParameterDescriptor::simple("user.language", ValueType::String),
                ParameterDescriptor::simple("user.preferences", ValueType::Record),
                geo("user.gps"),
                geo("user.hotel"),
                ParameterDescriptor::derived(
                    "user.distanceFromHotel",
                    ValueType::Number,
                    GREAT_CIRCLE_DISTANCE_KM,
                    ["user.gps", "user.hotel"],
                )
                .with_unit("km"),
            ],
        ))
        .with_sub_context(
            SubContext::new("environment")
                .with_parameter(ParameterDescriptor::simple(
                    "environment.time",
                    ValueType::String,
                ))
                .with_parameter(ParameterDescriptor::simple(
                    "environment.weather",
                    ValueType::String,
                )),
        )
}

pub fn schema() -> Arc<ContextSchema> {
    Arc::new(
        ContextSchema::new(context_model(), DerivationRegistry::with_builtins())
            .expect("M-tourism model is valid"),
    )
}

/// Handles on the simulated sources behind the Restaurants Searching
/// context provider.
#[derive(Debug)]
pub struct ScenarioProviders {
    manager: Arc<ContextManager>,
    time: Arc<SimulatedSource>,
    weather: Arc<StubTransport>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SetError {
    #[error("no provider supplies `{0}`")]
    NoSupplier(String),
    #[error("`{path}`: {reason}")]
    BadValue { path: String, reason: String },
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

impl ScenarioProviders {
    /// Registers the device, user, location, time and weather providers and
    /// the context provider aggregating them for the search service.
    pub fn install(
        manager: Arc<ContextManager>,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, ProviderError> {
        let time = Arc::new(SimulatedSource::new());
        let weather = Arc::new(StubTransport::new(clock));
        let local_push = ProviderInterface::LOCAL_NOTIFICATION;
        manager.register_provider(
            ProviderDescriptor::entity(
                "DeviceProvider",
                [
                    "device.hardware.battery.level",
                    "device.connexionMode",
                    "device.software.os",
                ],
                local_push,
            ),
            ProviderSource::Push,
        )?;
        manager.register_provider(
            ProviderDescriptor::entity(
                "UserProvider",
                ["user.language", "user.preferences", "user.hotel"],
                local_push,
            ),
            ProviderSource::Push,
        )?;
        manager.register_provider(
            ProviderDescriptor::parameter("LocationProvider", ["user.gps"], local_push),
            ProviderSource::Push,
        )?;
        manager.register_provider(
            ProviderDescriptor::parameter(
                "TimeProvider",
                ["environment.time"],
                ProviderInterface::LOCAL_QUERY,
            ),
            ProviderSource::Query(time.clone()),
        )?;
        manager.register_provider(
            ProviderDescriptor::parameter(
                "WeatherProvider",
                ["environment.weather"],
                ProviderInterface::REMOTE_QUERY,
            )
            .using(["LocationProvider"]),
            ProviderSource::Remote(weather.clone()),
        )?;
        manager.register_provider(
            ProviderDescriptor::context(
                CONTEXT_PROVIDER,
                SERVICE,
                [
                    "DeviceProvider",
                    "UserProvider",
                    "LocationProvider",
                    "TimeProvider",
                    "WeatherProvider",
                ],
            ),
            ProviderSource::Aggregate,
        )?;
        Ok(Self {
            manager,
            time,
            weather,
        })
    }

    pub fn manager(&self) -> &Arc<ContextManager> {
        &self.manager
    }

    pub fn weather(&self) -> &Arc<StubTransport> {
        &self.weather
    }

    /// Checks that `path` has a supplier and `value` fits its type.
    pub fn typed(&self, path: &str, value: &Json) -> Result<TypedValue, SetError> {
        self.manager
            .supplier_of(SERVICE, path)
            .map_err(|_| SetError::NoSupplier(path.to_owned()))?;
        let descriptor = self
            .manager
            .schema()
            .descriptor(path)
            .ok_or_else(|| SetError::NoSupplier(path.to_owned()))?;
        TypedValue::from_json(descriptor.value_type, value).map_err(|e| SetError::BadValue {
            path: path.to_owned(),
            reason: e.to_string(),
        })
    }

    /// Feeds a value to whichever provider supplies `path`: pushed
    /// providers publish it, the time source holds it for the next poll and
    /// the weather stub answers with it.
    pub fn set(&self, path: &str, value: &Json) -> Result<(), SetError> {
        let typed = self.typed(path, value)?;
        let supplier = self.manager.supplier_of(SERVICE, path)?;
        match supplier.interface.mode {
            Mode::Notification => {
                self.manager.publish(&supplier.id, path, typed)?;
            }
            Mode::Query if supplier.id == "WeatherProvider" => {
                self.weather.set(&supplier.id, path, value.clone())
            }
            Mode::Query => self.time.set(path, typed),
        }
        Ok(())
    }

    pub fn unset(&self, path: &str) -> Result<(), SetError> {
        let supplier = self
            .manager
            .supplier_of(SERVICE, path)
            .map_err(|_| SetError::NoSupplier(path.to_owned()))?;
        match supplier.interface.mode {
            Mode::Notification => {
                self.manager.retract(&supplier.id, path)?;
            }
            Mode::Query if supplier.id == "WeatherProvider" => {
                self.weather.unset(&supplier.id, path)
            }
            Mode::Query => self.time.unset(path),
        }
        Ok(())
    }
}
