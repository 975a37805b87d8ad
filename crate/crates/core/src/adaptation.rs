//! Adaptation artifacts: when to adapt (a condition), where and how (a rule),
//! and what to apply (a named adaptation behavior with arguments).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::condition::AdaptationCondition;
use crate::context::{is_valid_path, ContextModel, ContextSnapshot, TypedValue};
use crate::diagnostic::Diagnostic;
use crate::weaver::InvokeError;
use crate::Document;

pub const WILDCARD: &str = "*";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AdviceKind {
    /// Transforms the request before the service runs.
    Before,
    /// Transforms the response after the service ran.
    After,
    /// Wraps the call and decides whether and how to proceed.
    Around,
    /// Answers instead of the core handler.
    Replace,
}

impl AdviceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AdviceKind::Before => "before",
            AdviceKind::After => "after",
            AdviceKind::Around => "around",
            AdviceKind::Replace => "replace",
        }
    }
}

impl fmt::Display for AdviceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AdviceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "before" => Ok(AdviceKind::Before),
            "after" => Ok(AdviceKind::After),
            "around" => Ok(AdviceKind::Around),
            "replace" => Ok(AdviceKind::Replace),
            other => Err(format!("unknown advice kind `{other}`")),
        }
    }
}

/// Where an adaptation is woven: a service/operation pattern (exact name or
/// `*`) and an advice kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdaptationRule {
    pub target_service: String,
    pub target_operation: String,
    pub advice: AdviceKind,
}

impl AdaptationRule {
    pub fn new(
        service: impl Into<String>,
        operation: impl Into<String>,
        advice: AdviceKind,
    ) -> Self {
        Self {
            target_service: service.into(),
            target_operation: operation.into(),
            advice,
        }
    }

    pub fn matches_service(&self, service: &str) -> bool {
        self.target_service == WILDCARD || self.target_service == service
    }

    pub fn matches_operation(&self, operation: &str) -> bool {
        self.target_operation == WILDCARD || self.target_operation == operation
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArgValue {
    /// Kept as written; behaviors interpret it.
    Literal(String),
    /// Resolved against the invocation's snapshot at weave time.
    Path(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adaptation {
    pub name: String,
    pub args: BTreeMap<String, ArgValue>,
}

impl Adaptation {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            args: BTreeMap::new(),
        }
    }

    pub fn with_literal(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.args
            .insert(name.into(), ArgValue::Literal(value.into()));
        self
    }

    pub fn with_path(mut self, name: impl Into<String>, path: impl Into<String>) -> Self {
        self.args.insert(name.into(), ArgValue::Path(path.into()));
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationBinding {
    pub condition: AdaptationCondition,
    pub rule: AdaptationRule,
    pub adaptation: Adaptation,
    /// Lower runs earlier.
    pub priority: i64,
    pub declaration_index: usize,
}

impl AdaptationBinding {
    /// A binding whose declaration index is assigned by the owning strategy.
    pub fn new(
        condition: AdaptationCondition,
        rule: AdaptationRule,
        adaptation: Adaptation,
        priority: i64,
    ) -> Self {
        Self {
            condition,
            rule,
            adaptation,
            priority,
            declaration_index: 0,
        }
    }

    pub fn order_key(&self) -> (i64, usize) {
        (self.priority, self.declaration_index)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimpleAdaptationStrategy {
    pub name: String,
    pub bindings: Vec<AdaptationBinding>,
}

impl SimpleAdaptationStrategy {
    /// Numbers `bindings` in the order given.
    pub fn new(name: impl Into<String>, bindings: Vec<AdaptationBinding>) -> Self {
        let bindings = bindings
            .into_iter()
            .enumerate()
            .map(|(i, b)| AdaptationBinding {
                declaration_index: i,
                ..b
            })
            .collect();
        Self {
            name: name.into(),
            bindings,
        }
    }

    /// Bindings sorted by (priority, declaration index).
    pub fn ordered_bindings(&self) -> Vec<&AdaptationBinding> {
        let mut v: Vec<_> = self.bindings.iter().collect();
        v.sort_by_key(|b| b.order_key());
        v
    }
}

/// Failure raised by an adaptation behavior.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AdaptationError {
    #[error("{0}")]
    Failed(String),
    #[error("argument `{name}`: {reason}")]
    BadArgument { name: String, reason: String },
    /// An error from the wrapped call, passed through an around behavior.
    #[error(transparent)]
    Proceed(Box<InvokeError>),
}

impl From<InvokeError> for AdaptationError {
    fn from(e: InvokeError) -> Self {
        AdaptationError::Proceed(Box::new(e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundArg {
    Literal(String),
    Context(TypedValue),
}

/// Adaptation arguments after context references were resolved.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundArgs(BTreeMap<String, BoundArg>);

impl BoundArgs {
    pub fn new(args: BTreeMap<String, BoundArg>) -> Self {
        Self(args)
    }

    pub fn get(&self, name: &str) -> Option<&BoundArg> {
        self.0.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &BoundArg)> {
        self.0.iter()
    }

    /// Numeric argument, or `default` when absent.
    pub fn number_or(&self, name: &str, default: f64) -> Result<f64, AdaptationError> {
        let bad = |reason: String| AdaptationError::BadArgument {
            name: name.to_owned(),
            reason,
        };
        match self.0.get(name) {
            None => Ok(default),
            Some(BoundArg::Literal(s)) => s
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(format!("`{s}` is not a number"))),
            Some(BoundArg::Context(v)) => v
                .as_number()
                .ok_or_else(|| bad(format!("{v} is not a number"))),
        }
    }

    pub fn string(&self, name: &str) -> Option<String> {
        match self.0.get(name)? {
            BoundArg::Literal(s) => Some(s.clone()),
            BoundArg::Context(TypedValue::String(s)) => Some(s.clone()),
            BoundArg::Context(other) => Some(other.to_string()),
        }
    }
}

pub type Proceed<'a> = &'a mut dyn FnMut(Document) -> Result<Document, InvokeError>;

type TransformFn = dyn Fn(Document, &BoundArgs, &ContextSnapshot) -> Result<Document, AdaptationError>
    + Send
    + Sync;
type AroundFn = dyn Fn(Document, &BoundArgs, &ContextSnapshot, Proceed<'_>) -> Result<Document, AdaptationError>
    + Send
    + Sync;

/// An adaptation aspect. Behaviors get all state through their arguments and
/// must be reentrant.
#[derive(Clone)]
pub enum Behavior {
    /// request -> request
    Before(Arc<TransformFn>),
    /// response -> response
    After(Arc<TransformFn>),
    /// (request, proceed) -> response
    Around(Arc<AroundFn>),
    /// request -> response; the core handler is not called.
    Replace(Arc<TransformFn>),
}

impl Behavior {
    pub fn before<F>(f: F) -> Self
    where
        F: Fn(Document, &BoundArgs, &ContextSnapshot) -> Result<Document, AdaptationError>
            + Send
            + Sync
            + 'static,
    {
        Behavior::Before(Arc::new(f))
    }

    pub fn after<F>(f: F) -> Self
    where
        F: Fn(Document, &BoundArgs, &ContextSnapshot) -> Result<Document, AdaptationError>
            + Send
            + Sync
            + 'static,
    {
        Behavior::After(Arc::new(f))
    }

    pub fn around<F>(f: F) -> Self
    where
        F: Fn(
                Document,
                &BoundArgs,
                &ContextSnapshot,
                Proceed<'_>,
            ) -> Result<Document, AdaptationError>
            + Send
            + Sync
            + 'static,
    {
        Behavior::Around(Arc::new(f))
    }

    pub fn replace<F>(f: F) -> Self
    where
        F: Fn(Document, &BoundArgs, &ContextSnapshot) -> Result<Document, AdaptationError>
            + Send
            + Sync
            + 'static,
    {
        Behavior::Replace(Arc::new(f))
    }

    pub fn kind(&self) -> AdviceKind {
        match self {
            Behavior::Before(_) => AdviceKind::Before,
            Behavior::After(_) => AdviceKind::After,
            Behavior::Around(_) => AdviceKind::Around,
            Behavior::Replace(_) => AdviceKind::Replace,
        }
    }
}

impl fmt::Debug for Behavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Behavior::{}", self.kind())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("adaptation `{0}` is already registered")]
pub struct DuplicateAdaptation(pub String);

/// Named adaptation behaviors available to weaving.
#[derive(Debug, Clone, Default)]
pub struct AdaptationRegistry {
    behaviors: BTreeMap<String, Behavior>,
}

impl AdaptationRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(
        &mut self,
        name: impl Into<String>,
        behavior: Behavior,
    ) -> Result<(), DuplicateAdaptation> {
        let name = name.into();
        if self.behaviors.contains_key(&name) {
            return Err(DuplicateAdaptation(name));
        }
        self.behaviors.insert(name, behavior);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Behavior> {
        self.behaviors.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.behaviors.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.behaviors.keys().map(String::as_str)
    }
}

pub fn register_adaptation(
    registry: &mut AdaptationRegistry,
    name: impl Into<String>,
    behavior: Behavior,
) -> Result<(), DuplicateAdaptation> {
    registry.register(name, behavior)
}

fn valid_target(s: &str) -> bool {
    s == WILDCARD || (is_valid_path(s) && !s.contains('.'))
}

/// Checks a strategy against the context model and the adaptation registry;
/// an empty result means it can be activated.
pub fn validate_strategy(
    strategy: &SimpleAdaptationStrategy,
    model: &ContextModel,
    registry: &AdaptationRegistry,
) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    if strategy.bindings.is_empty() {
        diags.push(Diagnostic::new(
            &strategy.name,
            "empty strategy",
            "a strategy needs at least one binding",
        ));
    }
    let known = |p: &str| model.descriptor(p).is_some();
    for binding in &strategy.bindings {
        let subject = format!("{}#{}", strategy.name, binding.declaration_index);
        for path in binding.condition.paths() {
            if !known(path) {
                diags.push(Diagnostic::new(
                    &subject,
                    "unknown condition path",
                    format!("`{path}` is not a parameter of the context model"),
                ));
            }
        }
        let rule = &binding.rule;
        if !valid_target(&rule.target_service) || !valid_target(&rule.target_operation) {
            diags.push(Diagnostic::new(
                &subject,
                "invalid rule target",
                format!(
                    "`{}.{}` is not an identifier or `*`",
                    rule.target_service, rule.target_operation
                ),
            ));
        }
        match registry.get(&binding.adaptation.name) {
            None => diags.push(Diagnostic::new(
                &subject,
                "unknown adaptation",
                format!("`{}` is not registered", binding.adaptation.name),
            )),
            Some(b) if b.kind() != rule.advice => diags.push(Diagnostic::new(
                &subject,
                "advice mismatch",
                format!(
                    "`{}` is a {} behavior but the rule asks for {}",
                    binding.adaptation.name,
                    b.kind(),
                    rule.advice
                ),
            )),
            Some(_) => {}
        }
        for (name, arg) in &binding.adaptation.args {
            if let ArgValue::Path(p) = arg {
                if !known(p) {
                    diags.push(Diagnostic::new(
                        &subject,
                        "unresolvable argument",
                        format!("argument `{name}` refers to unknown path `{p}`"),
                    ));
                }
            }
        }
    }
    diags
}
