use std::collections::BTreeMap;

use parking_lot::RwLock;

use crate::context::TypedValue;

/// A local query-mode value source.
pub trait QuerySource: Send + Sync {
    /// Current value of `path`, if the source has one.
    fn read(&self, path: &str) -> Option<TypedValue>;
}

/// In-memory query source whose values are set by tests and scenario scripts
/// (the simulated clock and sensors).
#[derive(Debug, Default)]
pub struct SimulatedSource {
    values: RwLock<BTreeMap<String, TypedValue>>,
}

impl SimulatedSource {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&self, path: impl Into<String>, value: TypedValue) {
        self.values.write().insert(path.into(), value);
    }

    pub fn unset(&self, path: &str) {
        self.values.write().remove(path);
    }
}

impl QuerySource for SimulatedSource {
    fn read(&self, path: &str) -> Option<TypedValue> {
        self.values.read().get(path).cloned()
    }
}
