//! The Restaurants Searching scenario: core service, adaptation behaviors,
//! simulated providers and a scripted runner.

pub mod behaviors;
pub mod data;
mod model;
pub mod scenario;

use std::sync::Arc;

use crate::cas::{load_strategy_document, CasAdaptationStrategy, CasError, DocumentError};
use crate::provider::{Clock, ContextManager, ProviderError, StepClock};
use crate::weaver::{AcasRuntime, CoreService, Invocation, NotifyMode, RuntimeError, Weaver};
use crate::Document;

pub use behaviors::adaptation_registry;
pub use data::{load_restaurants, search_restaurants, Restaurant, SearchRequest};
pub use model::{
    context_model, schema, ScenarioProviders, SetError, CONTEXT_PROVIDER, OPERATION, SERVICE,
};
pub use scenario::{run_scenario, RunOptions, ScenarioScript, SetupError, Transcript};

/// The unadapted Restaurants Searching service over `dataset`.
pub fn core_service(dataset: Arc<Vec<Restaurant>>) -> CoreService {
    CoreService::new(SERVICE).with_operation(OPERATION, move |request: Document| {
        let request = SearchRequest::from_document(&request)?;
        Ok(search_restaurants(&dataset, &request))
    })
}

/// Loads a strategy document checked against the M-tourism model and the
/// scenario behaviors.
pub fn load_cas(bytes: &[u8]) -> Result<CasAdaptationStrategy, DocumentError> {
    load_strategy_document(bytes, &context_model(), &adaptation_registry())
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DemoError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Cas(#[from] CasError),
}

/// Everything a scenario runs against: simulated providers, the weaver with
/// the search service, and invalidation wired to pushed context.
#[derive(Debug)]
pub struct Demo {
    providers: ScenarioProviders,
    runtime: AcasRuntime,
}

impl Demo {
    pub fn new(
        dataset: Arc<Vec<Restaurant>>,
        cas: CasAdaptationStrategy,
    ) -> Result<Self, DemoError> {
        let clock: Arc<dyn Clock> = Arc::new(StepClock::default());
        let manager = Arc::new(ContextManager::new(schema(), Arc::clone(&clock)));
        let providers = ScenarioProviders::install(Arc::clone(&manager), clock)?;
        let weaver = Arc::new(Weaver::new(Arc::new(adaptation_registry())));
        weaver.register_service(core_service(dataset));
        weaver.register_cas(cas)?;
        let runtime = AcasRuntime::new(manager, weaver);
        runtime.watch(SERVICE)?;
        Ok(Self { providers, runtime })
    }

    pub fn providers(&self) -> &ScenarioProviders {
        &self.providers
    }

    pub fn runtime(&self) -> &AcasRuntime {
        &self.runtime
    }

    pub fn search(&self, request: Document, mode: NotifyMode) -> Result<Invocation, RuntimeError> {
        self.runtime.invoke(SERVICE, OPERATION, request, mode)
    }
}
