//! Context views and per-service strategy bundles.
//!
//! A [`CasAdaptationStrategy`] pairs every context view of a service with the
//! strategy that adapts the service to that view. Bundles are loaded from and
//! written to an XML strategy document (see [`document`]).

pub mod document;

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use parking_lot::RwLock;

use crate::adaptation::{validate_strategy, AdaptationRegistry, SimpleAdaptationStrategy};
use crate::context::ContextModel;
use crate::diagnostic::Diagnostic;

pub use document::{
    load_strategy_document, parse_strategy_document, serialize_strategy, DocumentError,
};

/// A named set of context parameters relevant to one adaptation concern.
/// Sub-views are referenced by name within the owning bundle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextView {
    pub name: String,
    pub required_paths: BTreeSet<String>,
    pub sub_views: Vec<String>,
}

impl ContextView {
    pub fn new<I, S>(name: impl Into<String>, paths: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            name: name.into(),
            required_paths: paths.into_iter().map(Into::into).collect(),
            sub_views: Vec::new(),
        }
    }

    pub fn with_sub_view(mut self, name: impl Into<String>) -> Self {
        self.sub_views.push(name.into());
        self
    }
}

/// The strategy adapting a service to one view.
#[derive(Debug, Clone, PartialEq)]
pub struct CvsAdaptationStrategy {
    pub view: String,
    pub strategy: SimpleAdaptationStrategy,
}

/// All views of one service and their strategies. Strategy order is the
/// declaration order used to break priority ties across strategies.
#[derive(Debug, Clone, PartialEq)]
pub struct CasAdaptationStrategy {
    pub service_id: String,
    pub views: Vec<ContextView>,
    pub cvs_strategies: Vec<CvsAdaptationStrategy>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CasError {
    #[error("context view cycle through `{0}`")]
    CycleDetected(String),
    #[error("unknown context view `{0}`")]
    UnknownView(String),
    #[error("no core service `{0}` is registered")]
    UnknownService(String),
}

impl CasAdaptationStrategy {
    pub fn new(service_id: impl Into<String>) -> Self {
        Self {
            service_id: service_id.into(),
            views: Vec::new(),
            cvs_strategies: Vec::new(),
        }
    }

    pub fn with_view(mut self, view: ContextView) -> Self {
        self.views.push(view);
        self
    }

    pub fn with_strategy(
        mut self,
        view: impl Into<String>,
        strategy: SimpleAdaptationStrategy,
    ) -> Self {
        self.cvs_strategies.push(CvsAdaptationStrategy {
            view: view.into(),
            strategy,
        });
        self
    }

    pub fn view(&self, name: &str) -> Option<&ContextView> {
        self.views.iter().find(|v| v.name == name)
    }

    /// Effective path set of the named view.
    pub fn required_paths(&self, view: &str) -> Result<BTreeSet<String>, CasError> {
        let v = self
            .view(view)
            .ok_or_else(|| CasError::UnknownView(view.to_owned()))?;
        required_paths(v, &self.views)
    }
}

/// Own paths of `view` plus those of its sub-views, transitively. Sub-view
/// names are looked up in `catalog`.
pub fn required_paths(
    view: &ContextView,
    catalog: &[ContextView],
) -> Result<BTreeSet<String>, CasError> {
    fn walk<'a>(
        view: &'a ContextView,
        catalog: &'a [ContextView],
        stack: &mut Vec<&'a str>,
        out: &mut BTreeSet<String>,
    ) -> Result<(), CasError> {
        if stack.contains(&view.name.as_str()) {
            return Err(CasError::CycleDetected(view.name.clone()));
        }
        stack.push(&view.name);
        out.extend(view.required_paths.iter().cloned());
        for sub in &view.sub_views {
            let child = catalog
                .iter()
                .find(|v| &v.name == sub)
                .ok_or_else(|| CasError::UnknownView(sub.clone()))?;
            walk(child, catalog, stack, out)?;
        }
        stack.pop();
        Ok(())
    }
    let mut out = BTreeSet::new();
    walk(view, catalog, &mut Vec::new(), &mut out)?;
    Ok(out)
}

/// Validates views, strategies and their coherence: every unguarded
/// condition path of a strategy must lie within its view's effective paths.
pub fn validate_cas(
    cas: &CasAdaptationStrategy,
    model: &ContextModel,
    registry: &AdaptationRegistry,
) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut names = BTreeSet::new();
    for view in &cas.views {
        if !names.insert(view.name.as_str()) {
            diags.push(Diagnostic::new(
                &view.name,
                "duplicate view",
                "view names must be unique",
            ));
        }
        for p in &view.required_paths {
            if model.descriptor(p).is_none() {
                diags.push(Diagnostic::new(
                    &view.name,
                    "unknown view path",
                    format!("`{p}` is not a parameter of the context model"),
                ));
            }
        }
        match required_paths(view, &cas.views) {
            Ok(paths) if paths.is_empty() => diags.push(Diagnostic::new(
                &view.name,
                "empty view",
                "a view needs at least one path",
            )),
            Ok(_) => {}
            Err(e @ CasError::CycleDetected(_)) => {
                diags.push(Diagnostic::new(&view.name, "view cycle", e.to_string()))
            }
            Err(e) => diags.push(Diagnostic::new(
                &view.name,
                "unknown sub-view",
                e.to_string(),
            )),
        }
    }

    let mut strategy_names = BTreeSet::new();
    for cvs in &cas.cvs_strategies {
        let name = &cvs.strategy.name;
        if !strategy_names.insert(name.as_str()) {
            diags.push(Diagnostic::new(
                name,
                "duplicate strategy",
                "strategy names must be unique",
            ));
        }
        diags.extend(validate_strategy(&cvs.strategy, model, registry));
        let Ok(scope) = cas.required_paths(&cvs.view) else {
            if cas.view(&cvs.view).is_none() {
                diags.push(Diagnostic::new(
                    name,
                    "unknown view",
                    format!("strategy refers to undeclared view `{}`", cvs.view),
                ));
            }
            continue;
        };
        for binding in &cvs.strategy.bindings {
            for path in binding.condition.unguarded_paths() {
                if !scope.contains(path) {
                    diags.push(Diagnostic::new(
                        format!("{name}#{}", binding.declaration_index),
                        "path outside view",
                        format!(
                            "`{path}` is not in view `{}` and not guarded by exists()",
                            cvs.view
                        ),
                    ));
                }
            }
        }
    }
    diags
}

/// serviceId -> active bundle. Replacing a bundle swaps one `Arc`, so a
/// reader holds either the old or the new bundle in full.
#[derive(Debug, Default)]
pub struct CasRegistry {
    services: RwLock<BTreeSet<String>>,
    bundles: RwLock<HashMap<String, Arc<CasAdaptationStrategy>>>,
}

impl CasRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Makes `service_id` eligible for bundle registration.
    pub fn declare_service(&self, service_id: impl Into<String>) {
        self.services.write().insert(service_id.into());
    }

    pub fn register_cas(
        &self,
        cas: CasAdaptationStrategy,
    ) -> Result<Arc<CasAdaptationStrategy>, CasError> {
        if !self.services.read().contains(&cas.service_id) {
            return Err(CasError::UnknownService(cas.service_id));
        }
        let cas = Arc::new(cas);
        self.bundles
            .write()
            .insert(cas.service_id.clone(), Arc::clone(&cas));
        Ok(cas)
    }

    pub fn current(&self, service_id: &str) -> Option<Arc<CasAdaptationStrategy>> {
        self.bundles.read().get(service_id).cloned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptation::{Adaptation, AdaptationBinding, AdaptationRule, AdviceKind, Behavior};
    use crate::condition::parse_condition;
    use crate::context::{Entity, ParameterDescriptor, ValueType};

    fn model() -> ContextModel {
        ContextModel::new("m").with_entity(Entity::new(
            "All",
            vec![
                ParameterDescriptor::simple("device.hardware.battery.level", ValueType::Number),
                ParameterDescriptor::simple("environment.time", ValueType::String),
                ParameterDescriptor::simple("user.language", ValueType::String),
            ],
        ))
    }

    fn registry() -> AdaptationRegistry {
        let mut r = AdaptationRegistry::new();
        r.register("noop", Behavior::after(|d, _, _| Ok(d)))
            .unwrap();
        r
    }

    fn strategy(name: &str, cond: &str) -> SimpleAdaptationStrategy {
        SimpleAdaptationStrategy::new(
            name,
            vec![AdaptationBinding::new(
                parse_condition(cond).unwrap(),
                AdaptationRule::new("Svc", "*", AdviceKind::After),
                Adaptation::new("noop"),
                10,
            )],
        )
    }

    #[test]
    fn single_view_paths() {
        let v = ContextView::new("BatteryState", ["device.hardware.battery.level"]);
        let paths = required_paths(&v, &[]).unwrap();
        assert_eq!(
            paths.into_iter().collect::<Vec<_>>(),
            ["device.hardware.battery.level"]
        );
    }

    #[test]
    fn nested_views_union() {
        let catalog = vec![
            ContextView::new("Location", ["user.gps"]),
            ContextView::new("Time", ["environment.time"]),
            ContextView::new("Visit", Vec::<String>::new())
                .with_sub_view("Location")
                .with_sub_view("Time"),
        ];
        let paths = required_paths(&catalog[2], &catalog).unwrap();
        assert_eq!(
            paths.into_iter().collect::<Vec<_>>(),
            ["environment.time", "user.gps"]
        );
    }

    #[test]
    fn self_reference_is_a_cycle() {
        let v = ContextView::new("Loop", ["a.b"]).with_sub_view("Loop");
        assert_eq!(
            required_paths(&v, std::slice::from_ref(&v)),
            Err(CasError::CycleDetected("Loop".into()))
        );
    }

    #[test]
    fn diamond_is_not_a_cycle() {
        let catalog = vec![
            ContextView::new("Leaf", ["a.b"]),
            ContextView::new("L", ["c.d"]).with_sub_view("Leaf"),
            ContextView::new("R", ["e.f"]).with_sub_view("Leaf"),
            ContextView::new("Top", ["g.h"])
                .with_sub_view("L")
                .with_sub_view("R"),
        ];
        assert_eq!(required_paths(&catalog[3], &catalog).unwrap().len(), 4);
    }

    #[test]
    fn condition_paths_must_stay_in_view() {
        let cas = CasAdaptationStrategy::new("Svc")
            .with_view(ContextView::new(
                "Battery",
                ["device.hardware.battery.level"],
            ))
            .with_strategy(
                "Battery",
                strategy("ok", "device.hardware.battery.level < 20"),
            )
            .with_strategy(
                "Battery",
                strategy("guarded", "exists(user.language) and user.language == 'fr'"),
            )
            .with_strategy("Battery", strategy("escapes", "user.language == 'fr'"));
        let diags = validate_cas(&cas, &model(), &registry());
        assert_eq!(diags.len(), 1, "{diags:?}");
        assert_eq!(diags[0].rule, "path outside view");
        assert_eq!(diags[0].subject, "escapes#0");
    }

    #[test]
    fn structural_view_problems() {
        let cas = CasAdaptationStrategy::new("Svc")
            .with_view(ContextView::new("A", ["nope.path"]))
            .with_view(ContextView::new("A", ["user.language"]))
            .with_view(ContextView::new("B", Vec::<String>::new()))
            .with_view(ContextView::new("C", ["user.language"]).with_sub_view("Missing"))
            .with_strategy("Z", strategy("s", "user.language == 'fr'"));
        let rules: BTreeSet<_> = validate_cas(&cas, &model(), &registry())
            .iter()
            .map(|d| d.rule)
            .collect();
        for r in [
            "duplicate view",
            "unknown view path",
            "empty view",
            "unknown sub-view",
            "unknown view",
        ] {
            assert!(rules.contains(r), "missing {r}: {rules:?}");
        }
    }

    #[test]
    fn registry_requires_declared_service_and_replaces_atomically() {
        let reg = CasRegistry::new();
        assert_eq!(
            reg.register_cas(CasAdaptationStrategy::new("Svc")),
            Err(CasError::UnknownService("Svc".into()))
        );
        reg.declare_service("Svc");
        let old = reg.register_cas(CasAdaptationStrategy::new("Svc")).unwrap();
        let held = reg.current("Svc").unwrap();
        let new = reg
            .register_cas(
                CasAdaptationStrategy::new("Svc").with_view(ContextView::new("V", ["a.b"])),
            )
            .unwrap();
        // a holder of the old bundle keeps it whole
        assert!(Arc::ptr_eq(&held, &old));
        assert!(held.views.is_empty());
        assert!(Arc::ptr_eq(&reg.current("Svc").unwrap(), &new));
    }
}
