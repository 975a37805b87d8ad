use std::sync::Arc;

use parking_lot::Mutex;

use super::{InvokeError, NotifyMode, WeaveError, WeaveTrace, Weaver};
use crate::provider::{ContextManager, ProviderError, Subscription};
use crate::Document;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RuntimeError {
    #[error(transparent)]
    Context(#[from] ProviderError),
    #[error(transparent)]
    Weave(#[from] WeaveError),
    #[error(transparent)]
    Invoke(#[from] InvokeError),
}

/// Result of one adapted invocation.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub response: Document,
    pub trace: Arc<WeaveTrace>,
    pub cache_hit: bool,
}

/// The context manager and the weaver wired together: each invocation takes
/// a fresh snapshot, notifies the weaver and runs the woven service.
#[derive(Debug)]
pub struct AcasRuntime {
    manager: Arc<ContextManager>,
    weaver: Arc<Weaver>,
    subscriptions: Mutex<Vec<Subscription>>,
}

impl AcasRuntime {
    pub fn new(manager: Arc<ContextManager>, weaver: Arc<Weaver>) -> Self {
        Self {
            manager,
            weaver,
            subscriptions: Mutex::new(Vec::new()),
        }
    }

    pub fn manager(&self) -> &Arc<ContextManager> {
        &self.manager
    }

    pub fn weaver(&self) -> &Arc<Weaver> {
        &self.weaver
    }

    /// Subscribes cache invalidation for `service_id` to every
    /// notification-mode path of its context provider.
    pub fn watch(&self, service_id: &str) -> Result<(), ProviderError> {
        for (provider, path) in self.manager.notification_paths(service_id)? {
            let weaver = Arc::clone(&self.weaver);
            let service = service_id.to_owned();
            let sub = self
                .manager
                .subscribe(&provider, &path, move |_| weaver.invalidate(&service))?;
            self.subscriptions.lock().push(sub);
        }
        Ok(())
    }

    pub fn invoke(
        &self,
        service_id: &str,
        operation: &str,
        request: Document,
        mode: NotifyMode,
    ) -> Result<Invocation, RuntimeError> {
        let snapshot = Arc::new(self.manager.snapshot(service_id)?);
        let decision = self.weaver.notify(service_id, snapshot, mode)?;
        let response = decision.woven.invoke(operation, request)?;
        Ok(Invocation {
            response,
            trace: decision.trace,
            cache_hit: decision.cache_hit,
        })
    }
}

impl Drop for AcasRuntime {
    fn drop(&mut self) {
        for sub in self.subscriptions.lock().drain(..) {
            self.manager.unsubscribe(&sub);
        }
    }
}
