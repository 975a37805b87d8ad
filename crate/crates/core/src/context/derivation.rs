use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::value::TypedValue;

pub const GREAT_CIRCLE_DISTANCE_KM: &str = "greatCircleDistanceKm";

pub type DerivationFn = Arc<dyn Fn(&[TypedValue]) -> Result<TypedValue, String> + Send + Sync>;

/// Named functions that derived parameters are computed with.
///
/// Populated at startup and then frozen inside a [`super::ContextSchema`],
/// which only ever reads from it.
#[derive(Clone, Default)]
pub struct DerivationRegistry {
    functions: BTreeMap<String, DerivationFn>,
}

impl DerivationRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry holding `greatCircleDistanceKm(geoA, geoB)`.
    pub fn with_builtins() -> Self {
        let mut registry = Self::new();
        registry.register(GREAT_CIRCLE_DISTANCE_KM, |args: &[TypedValue]| match args {
            [TypedValue::Geo(a), TypedValue::Geo(b)] => Ok(TypedValue::Number(a.distance_km(b))),
            _ => Err(format!("expected two geo arguments, got {}", args.len())),
        });
        registry
    }

    /// Registers or replaces `name`.
    pub fn register<F>(&mut self, name: impl Into<String>, f: F)
    where
        F: Fn(&[TypedValue]) -> Result<TypedValue, String> + Send + Sync + 'static,
    {
        self.functions.insert(name.into(), Arc::new(f));
    }

    pub fn contains(&self, name: &str) -> bool {
        self.functions.contains_key(name)
    }

    pub fn get(&self, name: &str) -> Option<&DerivationFn> {
        self.functions.get(name)
    }
}

impl fmt::Debug for DerivationRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.functions.keys()).finish()
    }
}
