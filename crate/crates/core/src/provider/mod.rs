//! Context providers and the Context Manager.
//!
//! Providers come in three kinds: parameter and entity providers supply
//! context paths, and a context provider aggregates them on behalf of one
//! service. Each supplying provider is either local or remote and either
//! query based (polled when a snapshot is taken) or notification based
//! (pushes values with [`ContextManager::publish`]).

mod clock;
mod remote;
mod source;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use parking_lot::{Mutex, RwLock};

use crate::context::{ContextSchema, ContextSnapshot, TypedValue, ValueType};

pub use clock::{Clock, StepClock, SystemClock};
pub use remote::{
    RemoteRequest, RemoteResponse, RemoteTransport, StubTransport, FAILURE_NO_VALUE,
    FAILURE_UNREACHABLE,
};
pub use source::{QuerySource, SimulatedSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProviderKind {
    Context,
    Entity,
    Parameter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Locality {
    Local,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Query,
    Notification,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProviderInterface {
    pub locality: Locality,
    pub mode: Mode,
}

impl ProviderInterface {
    pub const LOCAL_QUERY: Self = Self::new(Locality::Local, Mode::Query);
    pub const LOCAL_NOTIFICATION: Self = Self::new(Locality::Local, Mode::Notification);
    pub const REMOTE_QUERY: Self = Self::new(Locality::Remote, Mode::Query);

    pub const fn new(locality: Locality, mode: Mode) -> Self {
        Self { locality, mode }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProviderDescriptor {
    pub id: String,
    pub kind: ProviderKind,
    pub supplies_paths: BTreeSet<String>,
    pub interface: ProviderInterface,
    /// Context providers only.
    pub aggregates: Vec<String>,
    /// Recorded and checked for existence; carries no runtime behavior.
    pub uses_or_derives_from: Vec<String>,
    /// The service a context provider gathers context for.
    pub service: Option<String>,
}

impl ProviderDescriptor {
    fn supplier<I, S>(
        id: impl Into<String>,
        kind: ProviderKind,
        paths: I,
        interface: ProviderInterface,
    ) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            id: id.into(),
            kind,
            supplies_paths: paths.into_iter().map(Into::into).collect(),
            interface,
            aggregates: Vec::new(),
            uses_or_derives_from: Vec::new(),
            service: None,
        }
    }

    pub fn parameter<I, S>(id: impl Into<String>, paths: I, interface: ProviderInterface) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::supplier(id, ProviderKind::Parameter, paths, interface)
    }

    pub fn entity<I, S>(id: impl Into<String>, paths: I, interface: ProviderInterface) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::supplier(id, ProviderKind::Entity, paths, interface)
    }

    pub fn context<I, S>(id: impl Into<String>, service: impl Into<String>, aggregates: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            aggregates: aggregates.into_iter().map(Into::into).collect(),
            service: Some(service.into()),
            ..Self::supplier(
                id,
                ProviderKind::Context,
                Vec::<String>::new(),
                ProviderInterface::LOCAL_QUERY,
            )
        }
    }

    pub fn using<I, S>(mut self, ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.uses_or_derives_from = ids.into_iter().map(Into::into).collect();
        self
    }
}

/// Where a supplying provider's values come from.
#[derive(Clone)]
pub enum ProviderSource {
    /// Local query-mode source, read on every snapshot.
    Query(Arc<dyn QuerySource>),
    /// Remote query-mode source reached through a transport.
    Remote(Arc<dyn RemoteTransport>),
    /// Notification mode: the manager caches the last published value.
    Push,
    /// Context providers have no source of their own.
    Aggregate,
}

impl fmt::Debug for ProviderSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProviderSource::Query(_) => "Query",
            ProviderSource::Remote(_) => "Remote",
            ProviderSource::Push => "Push",
            ProviderSource::Aggregate => "Aggregate",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProviderError {
    #[error("provider `{0}` is already registered")]
    DuplicateId(String),
    #[error("provider aggregates unregistered provider `{0}`")]
    UnknownAggregate(String),
    #[error("`{path}` is supplied by both `{first}` and `{second}`")]
    PathConflict {
        path: String,
        first: String,
        second: String,
    },
    #[error("invalid provider descriptor `{id}`: {reason}")]
    InvalidDescriptor { id: String, reason: String },
    #[error("unknown provider `{0}`")]
    UnknownProvider(String),
    #[error("provider `{provider}` does not supply `{path}`")]
    UnknownPath { provider: String, path: String },
    #[error("provider `{provider}` is {actual:?}-mode")]
    WrongMode { provider: String, actual: Mode },
    #[error("no value available for `{0}`")]
    Unavailable(String),
    #[error("remote provider `{provider}` unreachable: {code}")]
    ProviderUnreachable { provider: String, code: String },
    #[error("`{path}` expects a {expected} value")]
    TypeMismatch { path: String, expected: ValueType },
    #[error("no context provider is registered for service `{0}`")]
    UnknownService(String),
}

/// A change delivered to subscribers. `value` is `None` when the value was
/// retracted.
#[derive(Debug, Clone, PartialEq)]
pub struct Notification {
    pub provider_id: String,
    pub path: String,
    pub value: Option<TypedValue>,
    pub timestamp: DateTime<Utc>,
}

pub type NotificationHandler = Arc<dyn Fn(&Notification) + Send + Sync>;

/// Handle to an active subscription.
#[derive(Debug, Clone)]
pub struct Subscription {
    pub id: u64,
    pub provider_id: String,
    pub path: String,
    delivered: Arc<AtomicU64>,
    active: Arc<AtomicBool>,
}

impl Subscription {
    pub fn delivered_count(&self) -> u64 {
        self.delivered.load(Ordering::SeqCst)
    }

    pub fn is_active(&self) -> bool {
        self.active.load(Ordering::SeqCst)
    }
}

struct Slot {
    subscription: Subscription,
    handler: NotificationHandler,
}

#[derive(Default)]
struct PushState {
    latest: BTreeMap<String, (TypedValue, DateTime<Utc>)>,
    slots: Vec<Slot>,
}

struct ProviderEntry {
    descriptor: ProviderDescriptor,
    source: ProviderSource,
    state: Mutex<PushState>,
    /// Held for the whole publish, so deliveries of one provider never overlap.
    delivery: Mutex<()>,
}

/// Provider registry plus per-request snapshot assembly.
pub struct ContextManager {
    schema: Arc<ContextSchema>,
    clock: Arc<dyn Clock>,
    providers: RwLock<Vec<Arc<ProviderEntry>>>,
    next_subscription: AtomicU64,
}

impl fmt::Debug for ContextManager {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids: Vec<_> = self
            .providers
            .read()
            .iter()
            .map(|p| p.descriptor.id.clone())
            .collect();
        f.debug_struct("ContextManager")
            .field("providers", &ids)
            .finish()
    }
}

impl ContextManager {
    pub fn new(schema: Arc<ContextSchema>, clock: Arc<dyn Clock>) -> Self {
        Self {
            schema,
            clock,
            providers: RwLock::new(Vec::new()),
            next_subscription: AtomicU64::new(1),
        }
    }

    pub fn schema(&self) -> &Arc<ContextSchema> {
        &self.schema
    }

    fn entry(&self, id: &str) -> Result<Arc<ProviderEntry>, ProviderError> {
        self.providers
            .read()
            .iter()
            .find(|p| p.descriptor.id == id)
            .cloned()
            .ok_or_else(|| ProviderError::UnknownProvider(id.to_owned()))
    }

    pub fn descriptor(&self, id: &str) -> Option<ProviderDescriptor> {
        self.entry(id).ok().map(|e| e.descriptor.clone())
    }

    /// Registered provider ids in registration order.
    pub fn provider_ids(&self) -> Vec<String> {
        self.providers
            .read()
            .iter()
            .map(|p| p.descriptor.id.clone())
            .collect()
    }

    pub fn register_provider(
        &self,
        descriptor: ProviderDescriptor,
        source: ProviderSource,
    ) -> Result<String, ProviderError> {
        let invalid = |reason: &str| ProviderError::InvalidDescriptor {
            id: descriptor.id.clone(),
            reason: reason.to_owned(),
        };
        let mut providers = self.providers.write();
        let find = |id: &str| providers.iter().find(|p| p.descriptor.id == id);
        if find(&descriptor.id).is_some() {
            return Err(ProviderError::DuplicateId(descriptor.id));
        }
        for id in &descriptor.uses_or_derives_from {
            if find(id).is_none() {
                return Err(ProviderError::UnknownAggregate(id.clone()));
            }
        }
        match descriptor.kind {
            ProviderKind::Context => {
                if descriptor.aggregates.is_empty() {
                    return Err(invalid(
                        "a context provider aggregates at least one provider",
                    ));
                }
                if descriptor.service.is_none() {
                    return Err(invalid("a context provider names its service"));
                }
                if !matches!(source, ProviderSource::Aggregate) {
                    return Err(invalid("a context provider has no value source"));
                }
                if let Some(service) = &descriptor.service {
                    if providers
                        .iter()
                        .any(|p| p.descriptor.service.as_ref() == Some(service))
                    {
                        return Err(invalid("service already has a context provider"));
                    }
                }
                let mut owner: BTreeMap<&str, &str> = BTreeMap::new();
                for id in &descriptor.aggregates {
                    let child =
                        find(id).ok_or_else(|| ProviderError::UnknownAggregate(id.clone()))?;
                    if child.descriptor.kind == ProviderKind::Context {
                        return Err(invalid(
                            "context providers aggregate entity or parameter providers",
                        ));
                    }
                    for path in &child.descriptor.supplies_paths {
                        if let Some(first) = owner.insert(path, id) {
                            return Err(ProviderError::PathConflict {
                                path: path.clone(),
                                first: first.to_owned(),
                                second: id.clone(),
                            });
                        }
                    }
                }
            }
            ProviderKind::Entity | ProviderKind::Parameter => {
                if !descriptor.aggregates.is_empty() {
                    return Err(invalid("only context providers aggregate"));
                }
                if descriptor.supplies_paths.is_empty() {
                    return Err(invalid("a supplying provider supplies at least one path"));
                }
                for p in &descriptor.supplies_paths {
                    if !self.schema.contains(p) {
                        return Err(ProviderError::UnknownPath {
                            provider: descriptor.id.clone(),
                            path: p.clone(),
                        });
                    }
                }
                let ok = matches!(
                    (&source, descriptor.interface),
                    (
                        ProviderSource::Push,
                        ProviderInterface {
                            mode: Mode::Notification,
                            ..
                        }
                    ) | (ProviderSource::Query(_), ProviderInterface::LOCAL_QUERY)
                        | (ProviderSource::Remote(_), ProviderInterface::REMOTE_QUERY)
                );
                if !ok {
                    return Err(invalid(
                        "value source does not match the provider interface",
                    ));
                }
            }
        }
        let id = descriptor.id.clone();
        providers.push(Arc::new(ProviderEntry {
            descriptor,
            source,
            state: Mutex::new(PushState::default()),
            delivery: Mutex::new(()),
        }));
        Ok(id)
    }

    fn check_supplies(entry: &ProviderEntry, path: &str) -> Result<(), ProviderError> {
        if entry.descriptor.supplies_paths.contains(path) {
            Ok(())
        } else {
            Err(ProviderError::UnknownPath {
                provider: entry.descriptor.id.clone(),
                path: path.to_owned(),
            })
        }
    }

    fn wrong_mode(entry: &ProviderEntry) -> ProviderError {
        ProviderError::WrongMode {
            provider: entry.descriptor.id.clone(),
            actual: entry.descriptor.interface.mode,
        }
    }

    fn read_remote(
        &self,
        entry: &ProviderEntry,
        transport: &dyn RemoteTransport,
        path: &str,
    ) -> Result<(TypedValue, DateTime<Utc>), ProviderError> {
        let response = transport.request(&RemoteRequest {
            provider_id: entry.descriptor.id.clone(),
            path: path.to_owned(),
        });
        let unreachable = |code: String| ProviderError::ProviderUnreachable {
            provider: entry.descriptor.id.clone(),
            code,
        };
        match response {
            RemoteResponse::Failure { failure } if failure == FAILURE_NO_VALUE => {
                Err(ProviderError::Unavailable(path.to_owned()))
            }
            RemoteResponse::Failure { failure } => Err(unreachable(failure)),
            RemoteResponse::Value { value, timestamp } => {
                let at = DateTime::parse_from_rfc3339(&timestamp)
                    .map_err(|_| unreachable(format!("bad timestamp `{timestamp}`")))?
                    .with_timezone(&Utc);
                let expected = self.value_type(path);
                let value = TypedValue::from_json(expected, &value)
                    .map_err(|e| unreachable(e.to_string()))?;
                Ok((value, at))
            }
        }
    }

    fn value_type(&self, path: &str) -> ValueType {
        self.schema
            .descriptor(path)
            .map(|d| d.value_type)
            .expect("supplied paths are validated at registration")
    }

    fn read(
        &self,
        entry: &ProviderEntry,
        path: &str,
    ) -> Result<(TypedValue, DateTime<Utc>), ProviderError> {
        match &entry.source {
            ProviderSource::Query(src) => src
                .read(path)
                .map(|v| (v, self.clock.now()))
                .ok_or_else(|| ProviderError::Unavailable(path.to_owned())),
            ProviderSource::Remote(t) => self.read_remote(entry, t.as_ref(), path),
            ProviderSource::Push => entry
                .state
                .lock()
                .latest
                .get(path)
                .cloned()
                .ok_or_else(|| ProviderError::Unavailable(path.to_owned())),
            ProviderSource::Aggregate => Err(ProviderError::UnknownPath {
                provider: entry.descriptor.id.clone(),
                path: path.to_owned(),
            }),
        }
    }

    /// Polls a query-mode provider for its current value.
    pub fn query(
        &self,
        provider_id: &str,
        path: &str,
    ) -> Result<(TypedValue, DateTime<Utc>), ProviderError> {
        let entry = self.entry(provider_id)?;
        if entry.descriptor.interface.mode != Mode::Query
            || entry.descriptor.kind == ProviderKind::Context
        {
            return Err(Self::wrong_mode(&entry));
        }
        Self::check_supplies(&entry, path)?;
        self.read(&entry, path)
    }

    fn push(
        &self,
        provider_id: &str,
        path: &str,
        value: Option<TypedValue>,
    ) -> Result<usize, ProviderError> {
        let entry = self.entry(provider_id)?;
        if entry.descriptor.interface.mode != Mode::Notification {
            return Err(Self::wrong_mode(&entry));
        }
        Self::check_supplies(&entry, path)?;
        if let Some(v) = &value {
            let expected = self.value_type(path);
            if v.value_type() != expected {
                return Err(ProviderError::TypeMismatch {
                    path: path.to_owned(),
                    expected,
                });
            }
        }
        let _delivery = entry.delivery.lock();
        let timestamp = self.clock.now();
        let targets: Vec<(Subscription, NotificationHandler)> = {
            let mut state = entry.state.lock();
            match &value {
                Some(v) => state.latest.insert(path.to_owned(), (v.clone(), timestamp)),
                None => state.latest.remove(path),
            };
            state
                .slots
                .iter()
                .filter(|s| s.subscription.path == path)
                .map(|s| (s.subscription.clone(), Arc::clone(&s.handler)))
                .collect()
        };
        let notification = Notification {
            provider_id: provider_id.to_owned(),
            path: path.to_owned(),
            value,
            timestamp,
        };
        let mut delivered = 0;
        for (sub, handler) in targets {
            if !sub.is_active() {
                continue;
            }
            handler(&notification);
            sub.delivered.fetch_add(1, Ordering::SeqCst);
            delivered += 1;
        }
        Ok(delivered)
    }

    /// Stores `value` as the provider's latest for `path` and notifies every
    /// subscriber of that path once, in subscription order. Returns the number
    /// of deliveries.
    pub fn publish(
        &self,
        provider_id: &str,
        path: &str,
        value: TypedValue,
    ) -> Result<usize, ProviderError> {
        self.push(provider_id, path, Some(value))
    }

    /// Clears the provider's value for `path`; subscribers are notified with
    /// `value: None`.
    pub fn retract(&self, provider_id: &str, path: &str) -> Result<usize, ProviderError> {
        self.push(provider_id, path, None)
    }

    pub fn subscribe(
        &self,
        provider_id: &str,
        path: &str,
        handler: impl Fn(&Notification) + Send + Sync + 'static,
    ) -> Result<Subscription, ProviderError> {
        let entry = self.entry(provider_id)?;
        if entry.descriptor.interface.mode != Mode::Notification {
            return Err(Self::wrong_mode(&entry));
        }
        Self::check_supplies(&entry, path)?;
        let subscription = Subscription {
            id: self.next_subscription.fetch_add(1, Ordering::SeqCst),
            provider_id: provider_id.to_owned(),
            path: path.to_owned(),
            delivered: Arc::new(AtomicU64::new(0)),
            active: Arc::new(AtomicBool::new(true)),
        };
        entry.state.lock().slots.push(Slot {
            subscription: subscription.clone(),
            handler: Arc::new(handler),
        });
        Ok(subscription)
    }

    pub fn unsubscribe(&self, subscription: &Subscription) {
        subscription.active.store(false, Ordering::SeqCst);
        if let Ok(entry) = self.entry(&subscription.provider_id) {
            entry
                .state
                .lock()
                .slots
                .retain(|s| s.subscription.id != subscription.id);
        }
    }

    fn context_provider(&self, service_id: &str) -> Result<Arc<ProviderEntry>, ProviderError> {
        self.providers
            .read()
            .iter()
            .find(|p| p.descriptor.service.as_deref() == Some(service_id))
            .cloned()
            .ok_or_else(|| ProviderError::UnknownService(service_id.to_owned()))
    }

    /// The supplying providers aggregated for `service_id`, in aggregation order.
    pub fn service_providers(
        &self,
        service_id: &str,
    ) -> Result<Vec<ProviderDescriptor>, ProviderError> {
        let ctx = self.context_provider(service_id)?;
        ctx.descriptor
            .aggregates
            .iter()
            .map(|id| self.entry(id).map(|e| e.descriptor.clone()))
            .collect()
    }

    /// The provider that supplies `path` for `service_id`.
    pub fn supplier_of(
        &self,
        service_id: &str,
        path: &str,
    ) -> Result<ProviderDescriptor, ProviderError> {
        self.service_providers(service_id)?
            .into_iter()
            .find(|d| d.supplies_paths.contains(path))
            .ok_or_else(|| ProviderError::Unavailable(path.to_owned()))
    }

    /// Assembles the context of one invocation: query providers are polled
    /// now, notification providers contribute their last published value.
    /// A failing provider only removes its own entries.
    pub fn snapshot(&self, service_id: &str) -> Result<ContextSnapshot, ProviderError> {
        let ctx = self.context_provider(service_id)?;
        let captured_at = self.clock.now();
        let mut builder =
            ContextSnapshot::builder(service_id, captured_at, Arc::clone(&self.schema));
        for id in &ctx.descriptor.aggregates {
            let entry = self.entry(id)?;
            for path in &entry.descriptor.supplies_paths {
                if let Ok((value, at)) = self.read(&entry, path) {
                    // paths and types were checked when the value entered the manager
                    let _ = builder.insert(path.clone(), value, id.clone(), at);
                }
            }
        }
        Ok(builder.build())
    }

    /// Paths supplied by notification-mode providers of `service_id`, with
    /// their provider ids.
    pub fn notification_paths(
        &self,
        service_id: &str,
    ) -> Result<Vec<(String, String)>, ProviderError> {
        Ok(self
            .service_providers(service_id)?
            .into_iter()
            .filter(|d| d.interface.mode == Mode::Notification)
            .flat_map(|d| {
                let id = d.id.clone();
                d.supplies_paths.into_iter().map(move |p| (id.clone(), p))
            })
            .collect())
    }
}

#[cfg(test)]
mod tests;
