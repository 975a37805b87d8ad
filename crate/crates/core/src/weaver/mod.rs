//! The adaptation weaver.
//!
//! For each invocation the weaver is notified with the service id and the
//! captured context, selects the strategies whose context views are fully
//! available, evaluates their conditions and composes the matching
//! adaptation behaviors around the core handler. The composed chain is a
//! [`WovenService`].

mod runtime;
mod trace;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};

use crate::adaptation::{
    AdaptationBinding, AdaptationError, AdaptationRegistry, AdviceKind, ArgValue, Behavior,
    BoundArg, BoundArgs,
};
use crate::cas::{CasAdaptationStrategy, CasError, CasRegistry, CvsAdaptationStrategy};
use crate::context::ContextSnapshot;
use crate::Document;

pub use runtime::{AcasRuntime, Invocation, RuntimeError};
pub use trace::{ConditionOutcome, TraceRecord, WeaveTrace};

pub type Handler = Arc<dyn Fn(Document) -> Result<Document, String> + Send + Sync>;

/// A business service: named operations mapping a request document to a
/// response document. Handlers never see the context.
#[derive(Clone)]
pub struct CoreService {
    pub service_id: String,
    operations: BTreeMap<String, Handler>,
}

impl CoreService {
    pub fn new(service_id: impl Into<String>) -> Self {
        Self {
            service_id: service_id.into(),
            operations: BTreeMap::new(),
        }
    }

    pub fn with_operation<F>(mut self, name: impl Into<String>, handler: F) -> Self
    where
        F: Fn(Document) -> Result<Document, String> + Send + Sync + 'static,
    {
        self.operations.insert(name.into(), Arc::new(handler));
        self
    }

    pub fn has_operation(&self, name: &str) -> bool {
        self.operations.contains_key(name)
    }

    /// Calls the unadapted handler.
    pub fn call(&self, operation: &str, request: Document) -> Result<Document, InvokeError> {
        let handler =
            self.operations
                .get(operation)
                .ok_or_else(|| InvokeError::UnknownOperation {
                    service: self.service_id.clone(),
                    operation: operation.to_owned(),
                })?;
        handler(request).map_err(|cause| InvokeError::ServiceFailure {
            service: self.service_id.clone(),
            operation: operation.to_owned(),
            cause,
        })
    }
}

impl fmt::Debug for CoreService {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoreService")
            .field("service_id", &self.service_id)
            .field("operations", &self.operations.keys().collect::<Vec<_>>())
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InvokeError {
    #[error("service `{service}` has no operation `{operation}`")]
    UnknownOperation { service: String, operation: String },
    #[error("adaptation `{name}` failed: {cause}")]
    AdaptationFailure { name: String, cause: String },
    #[error("{service}.{operation} failed: {cause}")]
    ServiceFailure {
        service: String,
        operation: String,
        cause: String,
    },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WeaveError {
    #[error("no service `{0}` with a registered strategy bundle")]
    UnknownService(String),
    #[error("adaptation `{0}` is not registered")]
    UnknownAdaptation(String),
    #[error("adaptation `{name}` is registered as {registered} but bound as {bound}")]
    AdviceMismatch {
        name: String,
        registered: AdviceKind,
        bound: AdviceKind,
    },
    #[error("snapshot belongs to `{snapshot}`, not `{service}`")]
    SnapshotMismatch { service: String, snapshot: String },
}

impl From<CasError> for WeaveError {
    fn from(e: CasError) -> Self {
        match e {
            CasError::UnknownService(s) => WeaveError::UnknownService(s),
            other => WeaveError::UnknownService(other.to_string()),
        }
    }
}

/// The strategies of `cas` whose view paths all resolve in `snapshot`, in
/// declaration order. A derived path counts as available when it can be
/// computed.
pub fn select_pertinent<'a>(
    cas: &'a CasAdaptationStrategy,
    snapshot: &ContextSnapshot,
) -> Vec<&'a CvsAdaptationStrategy> {
    cas.cvs_strategies
        .iter()
        .filter(|cvs| {
            cas.required_paths(&cvs.view)
                .map(|paths| paths.iter().all(|p| snapshot.resolve_or_derive(p).is_ok()))
                .unwrap_or(false)
        })
        .collect()
}

/// A binding selected for an invocation, with its behavior and arguments.
#[derive(Debug, Clone)]
pub struct ActiveBinding {
    pub strategy: String,
    pub strategy_order: usize,
    pub binding: AdaptationBinding,
    pub args: BoundArgs,
    behavior: Behavior,
}

impl ActiveBinding {
    fn sort_key(&self) -> (i64, usize, usize) {
        (
            self.binding.priority,
            self.binding.declaration_index,
            self.strategy_order,
        )
    }

    pub fn advice(&self) -> AdviceKind {
        self.behavior.kind()
    }

    fn name(&self) -> &str {
        &self.binding.adaptation.name
    }

    fn failure(&self, e: AdaptationError) -> InvokeError {
        match e {
            AdaptationError::Proceed(inner) => *inner,
            other => InvokeError::AdaptationFailure {
                name: self.name().to_owned(),
                cause: other.to_string(),
            },
        }
    }
}

/// A core service adapted to one context: the ordered bindings to apply
/// around its handler.
#[derive(Debug)]
pub struct WovenService {
    core: Arc<CoreService>,
    active: Vec<ActiveBinding>,
    snapshot: Arc<ContextSnapshot>,
    snapshot_digest: String,
}

impl WovenService {
    pub fn core(&self) -> &Arc<CoreService> {
        &self.core
    }

    /// Bindings sorted by (priority, declaration index, strategy order).
    pub fn active_bindings(&self) -> &[ActiveBinding] {
        &self.active
    }

    pub fn snapshot_digest(&self) -> &str {
        &self.snapshot_digest
    }

    pub fn snapshot(&self) -> &Arc<ContextSnapshot> {
        &self.snapshot
    }

    /// Runs `operation`: before-behaviors transform the request in order,
    /// around-behaviors nest with the earliest outermost, the replace
    /// behavior (if any) or else the core handler answers, and
    /// after-behaviors transform the response in order.
    pub fn invoke(&self, operation: &str, request: Document) -> Result<Document, InvokeError> {
        let matching: Vec<&ActiveBinding> = self
            .active
            .iter()
            .filter(|a| a.binding.rule.matches_operation(operation))
            .collect();
        let of_kind =
            |kind: AdviceKind| matching.iter().copied().filter(move |a| a.advice() == kind);
        let replace = of_kind(AdviceKind::Replace).next();
        if replace.is_none() && !self.core.has_operation(operation) {
            return Err(InvokeError::UnknownOperation {
                service: self.core.service_id.clone(),
                operation: operation.to_owned(),
            });
        }
        let snapshot = self.snapshot.as_ref();

        let mut request = request;
        for b in of_kind(AdviceKind::Before) {
            let Behavior::Before(f) = &b.behavior else {
                unreachable!()
            };
            request = f(request, &b.args, snapshot).map_err(|e| b.failure(e))?;
        }

        let center = |req: Document| -> Result<Document, InvokeError> {
            match replace {
                Some(b) => {
                    let Behavior::Replace(f) = &b.behavior else {
                        unreachable!()
                    };
                    f(req, &b.args, snapshot).map_err(|e| b.failure(e))
                }
                None => self.core.call(operation, req),
            }
        };
        let arounds: Vec<&ActiveBinding> = of_kind(AdviceKind::Around).collect();
        fn nest(
            arounds: &[&ActiveBinding],
            snapshot: &ContextSnapshot,
            center: &dyn Fn(Document) -> Result<Document, InvokeError>,
            req: Document,
        ) -> Result<Document, InvokeError> {
            match arounds.split_first() {
                None => center(req),
                Some((outer, inner)) => {
                    let Behavior::Around(f) = &outer.behavior else {
                        unreachable!()
                    };
                    let mut proceed = |r: Document| nest(inner, snapshot, center, r);
                    f(req, &outer.args, snapshot, &mut proceed).map_err(|e| outer.failure(e))
                }
            }
        }
        let mut response = nest(&arounds, snapshot, &center, request)?;

        for b in of_kind(AdviceKind::After) {
            let Behavior::After(f) = &b.behavior else {
                unreachable!()
            };
            response = f(response, &b.args, snapshot).map_err(|e| b.failure(e))?;
        }
        Ok(response)
    }
}

fn bind_args(binding: &AdaptationBinding, snapshot: &ContextSnapshot) -> Result<BoundArgs, String> {
    let mut out = BTreeMap::new();
    for (name, arg) in &binding.adaptation.args {
        let bound = match arg {
            ArgValue::Literal(s) => BoundArg::Literal(s.clone()),
            ArgValue::Path(p) => {
                BoundArg::Context(snapshot.resolve_or_derive(p).map_err(|_| name.clone())?)
            }
        };
        out.insert(name.clone(), bound);
    }
    Ok(BoundArgs::new(out))
}

/// Evaluates the bindings of the selected strategies against `snapshot` and
/// composes the ones that apply.
///
/// Condition errors skip the binding (recorded in the trace). When several
/// replace bindings survive, only the earliest in sort order is kept.
pub fn weave(
    core: Arc<CoreService>,
    selected: &[&CvsAdaptationStrategy],
    snapshot: Arc<ContextSnapshot>,
    registry: &AdaptationRegistry,
) -> Result<(WovenService, WeaveTrace), WeaveError> {
    let mut trace = WeaveTrace::default();
    let mut included: Vec<(ActiveBinding, usize)> = Vec::new();
    for (strategy_order, cvs) in selected.iter().enumerate() {
        let strategy = &cvs.strategy;
        for binding in &strategy.bindings {
            let mut record = TraceRecord {
                strategy: strategy.name.clone(),
                binding: binding.declaration_index,
                condition: ConditionOutcome::False,
                applied: false,
            };
            if !binding.rule.matches_service(&core.service_id) {
                record.condition = ConditionOutcome::Skipped("rule-mismatch".into());
                trace.records.push(record);
                continue;
            }
            match binding.condition.evaluate(&snapshot) {
                Ok(true) => {}
                Ok(false) => {
                    trace.records.push(record);
                    continue;
                }
                Err(e) => {
                    record.condition = ConditionOutcome::Skipped(e.trace_reason());
                    trace.records.push(record);
                    continue;
                }
            }
            let args = match bind_args(binding, &snapshot) {
                Ok(args) => args,
                Err(arg) => {
                    record.condition = ConditionOutcome::Skipped(format!("unbound-arg:{arg}"));
                    trace.records.push(record);
                    continue;
                }
            };
            let name = &binding.adaptation.name;
            let behavior = registry
                .get(name)
                .ok_or_else(|| WeaveError::UnknownAdaptation(name.clone()))?
                .clone();
            if behavior.kind() != binding.rule.advice {
                return Err(WeaveError::AdviceMismatch {
                    name: name.clone(),
                    registered: behavior.kind(),
                    bound: binding.rule.advice,
                });
            }
            record.condition = ConditionOutcome::True;
            record.applied = true;
            trace.records.push(record);
            included.push((
                ActiveBinding {
                    strategy: strategy.name.clone(),
                    strategy_order,
                    binding: binding.clone(),
                    args,
                    behavior,
                },
                trace.records.len() - 1,
            ));
        }
    }
    included.sort_by_key(|(a, _)| a.sort_key());

    let mut seen_replace = false;
    let mut active = Vec::with_capacity(included.len());
    for (a, record) in included {
        if a.advice() == AdviceKind::Replace {
            if seen_replace {
                trace.records[record].applied = false;
                continue;
            }
            seen_replace = true;
        }
        active.push(a);
    }

    let snapshot_digest = snapshot.digest();
    Ok((
        WovenService {
            core,
            active,
            snapshot,
            snapshot_digest,
        },
        trace,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NotifyMode {
    /// Select and weave for this request.
    #[default]
    Sync,
    /// Reuse the decision cached for an identical snapshot.
    Async,
}

impl std::str::FromStr for NotifyMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sync" => Ok(NotifyMode::Sync),
            "async" => Ok(NotifyMode::Async),
            other => Err(format!("unknown mode `{other}` (expected sync or async)")),
        }
    }
}

/// The outcome of a notification: the woven service to invoke and how it was
/// decided.
#[derive(Debug, Clone)]
pub struct Decision {
    pub woven: Arc<WovenService>,
    pub trace: Arc<WeaveTrace>,
    pub cache_hit: bool,
}

struct CachedDecision {
    bundle: Arc<CasAdaptationStrategy>,
    woven: Arc<WovenService>,
    trace: Arc<WeaveTrace>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
}

/// Request notifier, decision maker and service reconfigurator in one:
/// holds core services, their strategy bundles and the adaptation registry.
pub struct Weaver {
    services: RwLock<HashMap<String, Arc<CoreService>>>,
    bundles: CasRegistry,
    registry: Arc<AdaptationRegistry>,
    cache: Mutex<HashMap<(String, String), CachedDecision>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl fmt::Debug for Weaver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Weaver")
            .field("services", &self.services.read().keys().collect::<Vec<_>>())
            .field("stats", &self.stats())
            .finish()
    }
}

impl Weaver {
    pub fn new(registry: Arc<AdaptationRegistry>) -> Self {
        Self {
            services: RwLock::new(HashMap::new()),
            bundles: CasRegistry::new(),
            registry,
            cache: Mutex::new(HashMap::new()),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    pub fn registry(&self) -> &Arc<AdaptationRegistry> {
        &self.registry
    }

    pub fn register_service(&self, core: CoreService) {
        self.bundles.declare_service(core.service_id.clone());
        self.services
            .write()
            .insert(core.service_id.clone(), Arc::new(core));
    }

    pub fn service(&self, service_id: &str) -> Option<Arc<CoreService>> {
        self.services.read().get(service_id).cloned()
    }

    /// Activates `cas` for its service, replacing any previous bundle.
    /// Invocations already holding the old bundle finish with it.
    pub fn register_cas(&self, cas: CasAdaptationStrategy) -> Result<(), CasError> {
        let service = cas.service_id.clone();
        self.bundles.register_cas(cas)?;
        self.invalidate(&service);
        Ok(())
    }

    pub fn bundle(&self, service_id: &str) -> Option<Arc<CasAdaptationStrategy>> {
        self.bundles.current(service_id)
    }

    fn decide(
        &self,
        core: Arc<CoreService>,
        bundle: &CasAdaptationStrategy,
        snapshot: Arc<ContextSnapshot>,
    ) -> Result<(Arc<WovenService>, Arc<WeaveTrace>), WeaveError> {
        let selected = select_pertinent(bundle, &snapshot);
        let (woven, trace) = weave(core, &selected, snapshot, &self.registry)?;
        Ok((Arc::new(woven), Arc::new(trace)))
    }

    pub fn notify(
        &self,
        service_id: &str,
        snapshot: Arc<ContextSnapshot>,
        mode: NotifyMode,
    ) -> Result<Decision, WeaveError> {
        let unknown = || WeaveError::UnknownService(service_id.to_owned());
        let core = self.service(service_id).ok_or_else(unknown)?;
        let bundle = self.bundles.current(service_id).ok_or_else(unknown)?;
        if snapshot.service_id() != service_id {
            return Err(WeaveError::SnapshotMismatch {
                service: service_id.to_owned(),
                snapshot: snapshot.service_id().to_owned(),
            });
        }
        if mode == NotifyMode::Sync {
            let (woven, trace) = self.decide(core, &bundle, snapshot)?;
            return Ok(Decision {
                woven,
                trace,
                cache_hit: false,
            });
        }

        let key = (service_id.to_owned(), snapshot.digest());
        if let Some(hit) = self.cache.lock().get(&key) {
            if Arc::ptr_eq(&hit.bundle, &bundle) {
                self.hits.fetch_add(1, Ordering::SeqCst);
                return Ok(Decision {
                    woven: Arc::clone(&hit.woven),
                    trace: Arc::clone(&hit.trace),
                    cache_hit: true,
                });
            }
        }
        self.misses.fetch_add(1, Ordering::SeqCst);
        let (woven, trace) = self.decide(core, &bundle, snapshot)?;
        self.cache.lock().insert(
            key,
            CachedDecision {
                bundle,
                woven: Arc::clone(&woven),
                trace: Arc::clone(&trace),
            },
        );
        Ok(Decision {
            woven,
            trace,
            cache_hit: false,
        })
    }

    /// Drops every cached decision for `service_id`. Unknown services are a
    /// no-op.
    pub fn invalidate(&self, service_id: &str) {
        self.cache.lock().retain(|(s, _), _| s != service_id);
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::SeqCst),
            misses: self.misses.load(Ordering::SeqCst),
        }
    }
}
