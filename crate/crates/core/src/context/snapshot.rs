use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use sha2::{Digest, Sha256};

use super::derivation::DerivationRegistry;
use super::model::{validate_model, ContextModel, ParameterDescriptor, ParameterKind};
use super::value::TypedValue;
use super::ContextError;
use crate::diagnostic::Diagnostic;

/// A validated context model bundled with the derivation functions its
/// derived parameters use. Immutable once built.
#[derive(Debug)]
pub struct ContextSchema {
    model: ContextModel,
    derivations: DerivationRegistry,
    index: HashMap<String, ParameterDescriptor>,
}

impl ContextSchema {
    pub fn new(
        model: ContextModel,
        derivations: DerivationRegistry,
    ) -> Result<Self, Vec<Diagnostic>> {
        let diags = validate_model(&model, &derivations);
        if !diags.is_empty() {
            return Err(diags);
        }
        let index = model
            .descriptors()
            .into_iter()
            .map(|d| (d.path.clone(), d.clone()))
            .collect();
        Ok(Self {
            model,
            derivations,
            index,
        })
    }

    pub fn model(&self) -> &ContextModel {
        &self.model
    }

    pub fn derivations(&self) -> &DerivationRegistry {
        &self.derivations
    }

    pub fn descriptor(&self, path: &str) -> Option<&ParameterDescriptor> {
        self.index.get(path)
    }

    pub fn contains(&self, path: &str) -> bool {
        self.index.contains_key(path)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotEntry {
    pub value: TypedValue,
    pub source: String,
    pub timestamp: DateTime<Utc>,
}

/// The context of one service invocation, captured once and never mutated.
#[derive(Debug, Clone)]
pub struct ContextSnapshot {
    service_id: String,
    captured_at: DateTime<Utc>,
    entries: BTreeMap<String, SnapshotEntry>,
    schema: Arc<ContextSchema>,
}

impl ContextSnapshot {
    pub fn builder(
        service_id: impl Into<String>,
        captured_at: DateTime<Utc>,
        schema: Arc<ContextSchema>,
    ) -> SnapshotBuilder {
        SnapshotBuilder {
            snapshot: ContextSnapshot {
                service_id: service_id.into(),
                captured_at,
                entries: BTreeMap::new(),
                schema,
            },
        }
    }

    pub fn service_id(&self) -> &str {
        &self.service_id
    }

    pub fn captured_at(&self) -> DateTime<Utc> {
        self.captured_at
    }

    pub fn schema(&self) -> &Arc<ContextSchema> {
        &self.schema
    }

    pub fn entries(&self) -> &BTreeMap<String, SnapshotEntry> {
        &self.entries
    }

    pub fn entry(&self, path: &str) -> Option<&SnapshotEntry> {
        self.entries.get(path)
    }

    /// The stored value at `path`.
    pub fn resolve(&self, path: &str) -> Result<&TypedValue, ContextError> {
        self.entries
            .get(path)
            .map(|e| &e.value)
            .ok_or_else(|| ContextError::Unavailable(path.to_owned()))
    }

    /// The stored value at `path`, or, for a derived parameter with no stored
    /// value, the value computed from its inputs.
    pub fn resolve_or_derive(&self, path: &str) -> Result<TypedValue, ContextError> {
        if let Some(e) = self.entries.get(path) {
            return Ok(e.value.clone());
        }
        match self.schema.descriptor(path) {
            Some(d) if d.kind == ParameterKind::Derived => compute_derived(d, self),
            _ => Err(ContextError::Unavailable(path.to_owned())),
        }
    }

    /// Hex SHA-256 over the (path, value) pairs. Timestamps are excluded, so
    /// two snapshots with the same values share a digest.
    pub fn digest(&self) -> String {
        let mut buf = Vec::new();
        buf.extend_from_slice(self.service_id.as_bytes());
        buf.push(0);
        for (path, entry) in &self.entries {
            buf.extend_from_slice(path.as_bytes());
            buf.push(0);
            entry.value.encode_canonical(&mut buf);
        }
        hex::encode(Sha256::digest(&buf))
    }

    /// True when every entry of `self` is present with an equal value in
    /// `other`.
    pub fn is_subset_of(&self, other: &ContextSnapshot) -> bool {
        self.entries
            .iter()
            .all(|(p, e)| other.entries.get(p).is_some_and(|o| o.value == e.value))
    }
}

pub struct SnapshotBuilder {
    snapshot: ContextSnapshot,
}

impl SnapshotBuilder {
    pub fn insert(
        &mut self,
        path: impl Into<String>,
        value: TypedValue,
        source: impl Into<String>,
        timestamp: DateTime<Utc>,
    ) -> Result<&mut Self, ContextError> {
        let path = path.into();
        let Some(descriptor) = self.snapshot.schema.descriptor(&path) else {
            return Err(ContextError::UnknownPath(path));
        };
        if descriptor.value_type != value.value_type() {
            return Err(ContextError::TypeMismatch {
                path,
                expected: descriptor.value_type,
                found: value.value_type(),
            });
        }
        self.snapshot.entries.insert(
            path,
            SnapshotEntry {
                value,
                source: source.into(),
                timestamp,
            },
        );
        Ok(self)
    }

    /// Shorthand for tests and fixtures: source "fixture", timestamp = capture time.
    pub fn with(mut self, path: &str, value: impl Into<TypedValue>) -> Result<Self, ContextError> {
        let at = self.snapshot.captured_at;
        self.insert(path, value.into(), "fixture", at)?;
        Ok(self)
    }

    pub fn build(self) -> ContextSnapshot {
        self.snapshot
    }
}

/// Applies the derivation function of `descriptor` to its resolved inputs.
/// Inputs that are themselves derived are computed recursively.
pub fn compute_derived(
    descriptor: &ParameterDescriptor,
    snapshot: &ContextSnapshot,
) -> Result<TypedValue, ContextError> {
    let Some(spec) = &descriptor.derivation else {
        return Err(ContextError::NotDerived(descriptor.path.clone()));
    };
    let function = snapshot
        .schema
        .derivations()
        .get(&spec.function)
        .ok_or_else(|| ContextError::UnknownFunction(spec.function.clone()))?;
    let inputs = spec
        .inputs
        .iter()
        .map(|p| snapshot.resolve_or_derive(p))
        .collect::<Result<Vec<_>, _>>()?;
    function(&inputs).map_err(|reason| ContextError::Derivation {
        path: descriptor.path.clone(),
        reason,
    })
}
