//! Context-aware service adaptation.
//!
//! A service's context is described by a [`context::ContextModel`] and
//! gathered per request by the [`provider::ContextManager`] into an immutable
//! [`context::ContextSnapshot`]. Adaptation strategies, grouped per service and
//! per context view in a [`cas::CasAdaptationStrategy`], decide which
//! adaptation behaviors the [`weaver::Weaver`] composes around the core
//! service handler for that invocation.

pub mod adaptation;
pub mod cas;
pub mod condition;
pub mod context;
mod diagnostic;
pub mod mtourism;
pub mod provider;
pub mod weaver;

pub use diagnostic::{render as render_diagnostics, Diagnostic};

/// Structured request and response documents exchanged with services.
pub type Document = serde_json::Value;
