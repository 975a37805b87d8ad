use std::collections::{BTreeMap, BTreeSet, HashMap};

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use super::derivation::DerivationRegistry;
use super::geo::RepresentationId;
use super::value::ValueType;
use crate::diagnostic::Diagnostic;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParameterKind {
    /// Sensed or supplied directly.
    Simple,
    /// Computed from other parameters by a registered function.
    Derived,
    /// Has several representations (a GPS position in DD or DMS).
    Complex,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivationSpec {
    pub function: String,
    pub inputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterDescriptor {
    pub path: String,
    pub kind: ParameterKind,
    pub value_type: ValueType,
    pub unit: Option<String>,
    pub representations: Vec<RepresentationId>,
    pub derivation: Option<DerivationSpec>,
}

impl ParameterDescriptor {
    pub fn simple(path: impl Into<String>, value_type: ValueType) -> Self {
        Self {
            path: path.into(),
            kind: ParameterKind::Simple,
            value_type,
            unit: None,
            representations: Vec::new(),
            derivation: None,
        }
    }

    pub fn complex(
        path: impl Into<String>,
        value_type: ValueType,
        representations: impl IntoIterator<Item = RepresentationId>,
    ) -> Self {
        Self {
            kind: ParameterKind::Complex,
            representations: representations.into_iter().collect(),
            ..Self::simple(path, value_type)
        }
    }

    pub fn derived<I, S>(
        path: impl Into<String>,
        value_type: ValueType,
        function: impl Into<String>,
        inputs: I,
    ) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            kind: ParameterKind::Derived,
            derivation: Some(DerivationSpec {
                function: function.into(),
                inputs: inputs.into_iter().map(Into::into).collect(),
            }),
            ..Self::simple(path, value_type)
        }
    }

    pub fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.unit = Some(unit.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Category {
    pub name: String,
    pub parameters: Vec<ParameterDescriptor>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SubContext {
    pub name: String,
    pub categories: Vec<Category>,
    pub parameters: Vec<ParameterDescriptor>,
    pub children: Vec<SubContext>,
}

/// An entity (User, Device, ...) and the parameters describing it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Entity {
    pub name: String,
    pub parameters: Vec<ParameterDescriptor>,
}

/// The context of a service: sub-contexts (recursively split into
/// categories) and entities, each owning parameter descriptors addressed by
/// globally unique dotted paths.
///
/// The sub-context tree is owned, so it cannot contain cycles.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContextModel {
    pub name: String,
    pub sub_contexts: Vec<SubContext>,
    pub entities: Vec<Entity>,
}

impl ContextModel {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn with_sub_context(mut self, sub: SubContext) -> Self {
        self.sub_contexts.push(sub);
        self
    }

    pub fn with_entity(mut self, entity: Entity) -> Self {
        self.entities.push(entity);
        self
    }

    /// All descriptors, entities first, then sub-contexts depth first.
    pub fn descriptors(&self) -> Vec<&ParameterDescriptor> {
        fn walk<'a>(sub: &'a SubContext, out: &mut Vec<&'a ParameterDescriptor>) {
            out.extend(sub.parameters.iter());
            for cat in &sub.categories {
                out.extend(cat.parameters.iter());
            }
            for child in &sub.children {
                walk(child, out);
            }
        }
        let mut out = Vec::new();
        for entity in &self.entities {
            out.extend(entity.parameters.iter());
        }
        for sub in &self.sub_contexts {
            walk(sub, &mut out);
        }
        out
    }

    pub fn descriptor(&self, path: &str) -> Option<&ParameterDescriptor> {
        self.descriptors().into_iter().find(|d| d.path == path)
    }
}

impl SubContext {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn with_parameter(mut self, p: ParameterDescriptor) -> Self {
        self.parameters.push(p);
        self
    }

    pub fn with_category(
        mut self,
        name: impl Into<String>,
        params: Vec<ParameterDescriptor>,
    ) -> Self {
        self.categories.push(Category {
            name: name.into(),
            parameters: params,
        });
        self
    }

    pub fn with_child(mut self, child: SubContext) -> Self {
        self.children.push(child);
        self
    }
}

impl Entity {
    pub fn new(name: impl Into<String>, parameters: Vec<ParameterDescriptor>) -> Self {
        Self {
            name: name.into(),
            parameters,
        }
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// True for `segment(.segment)*` where each segment is an identifier.
pub fn is_valid_path(path: &str) -> bool {
    !path.is_empty() && path.split('.').all(is_identifier)
}

/// Checks every structural rule of the context metamodel; an empty result
/// means the model is well formed.
pub fn validate_model(model: &ContextModel, derivations: &DerivationRegistry) -> Vec<Diagnostic> {
    let mut diags = Vec::new();

    let mut entity_names = BTreeSet::new();
    for entity in &model.entities {
        if !entity_names.insert(entity.name.as_str()) {
            diags.push(Diagnostic::new(
                &entity.name,
                "duplicate entity",
                "entity names must be unique within a model",
            ));
        }
    }
    fn check_categories(sub: &SubContext, diags: &mut Vec<Diagnostic>) {
        let mut seen = BTreeSet::new();
        for cat in &sub.categories {
            if !seen.insert(cat.name.as_str()) {
                diags.push(Diagnostic::new(
                    format!("{}/{}", sub.name, cat.name),
                    "duplicate category",
                    "category names must be unique within a sub-context",
                ));
            }
        }
        for child in &sub.children {
            check_categories(child, diags);
        }
    }
    for sub in &model.sub_contexts {
        check_categories(sub, &mut diags);
    }

    let descriptors = model.descriptors();
    let mut by_path: BTreeMap<&str, &ParameterDescriptor> = BTreeMap::new();
    for d in &descriptors {
        if !is_valid_path(&d.path) {
            diags.push(Diagnostic::new(
                &d.path,
                "invalid path",
                "expected dotted identifiers",
            ));
        }
        if by_path.insert(d.path.as_str(), d).is_some() {
            diags.push(Diagnostic::new(
                &d.path,
                "duplicate path",
                "parameter paths must be unique within a model",
            ));
        }
        match (d.kind, &d.derivation) {
            (ParameterKind::Derived, None) => diags.push(Diagnostic::new(
                &d.path,
                "missing derivation",
                "derived parameters need a derivation",
            )),
            (ParameterKind::Simple | ParameterKind::Complex, Some(_)) => {
                diags.push(Diagnostic::new(
                    &d.path,
                    "unexpected derivation",
                    "only derived parameters carry a derivation",
                ))
            }
            _ => {}
        }
        match (d.kind, d.representations.is_empty()) {
            (ParameterKind::Complex, true) => diags.push(Diagnostic::new(
                &d.path,
                "missing representations",
                "complex parameters need at least one representation",
            )),
            (ParameterKind::Simple | ParameterKind::Derived, false) => diags.push(Diagnostic::new(
                &d.path,
                "unexpected representations",
                "only complex parameters carry representations",
            )),
            _ => {}
        }
        if let Some(spec) = &d.derivation {
            if !derivations.contains(&spec.function) {
                diags.push(Diagnostic::new(
                    &d.path,
                    "unknown derivation function",
                    format!("`{}` is not registered", spec.function),
                ));
            }
        }
    }

    let mut graph = DiGraph::<&str, ()>::new();
    let nodes: HashMap<&str, _> = by_path.keys().map(|p| (*p, graph.add_node(*p))).collect();
    for d in by_path.values() {
        let Some(spec) = &d.derivation else { continue };
        for input in &spec.inputs {
            match nodes.get(input.as_str()) {
                Some(&to) => {
                    graph.add_edge(nodes[d.path.as_str()], to, ());
                }
                None => diags.push(Diagnostic::new(
                    &d.path,
                    "unknown derivation input",
                    format!("input `{input}` is not a parameter of this model"),
                )),
            }
        }
    }
    for scc in tarjan_scc(&graph) {
        let cyclic = scc.len() > 1 || graph.contains_edge(scc[0], scc[0]);
        if cyclic {
            let mut members: Vec<&str> = scc.iter().map(|n| graph[*n]).collect();
            members.sort_unstable();
            diags.push(Diagnostic::new(
                members[0],
                "derivation cycle",
                format!(
                    "derivation inputs form a cycle through {}",
                    members.join(", ")
                ),
            ));
        }
    }

    diags
}

#[cfg(test)]
mod tests {
    use super::*;

    fn registry() -> DerivationRegistry {
        DerivationRegistry::with_builtins()
    }

    #[test]
    fn duplicate_paths_are_reported_once() {
        let model =
            ContextModel::new("m")
                .with_entity(Entity::new(
                    "User",
                    vec![ParameterDescriptor::simple(
                        "user.language",
                        ValueType::String,
                    )],
                ))
                .with_sub_context(SubContext::new("user").with_parameter(
                    ParameterDescriptor::simple("user.language", ValueType::String),
                ));
        let diags = validate_model(&model, &registry());
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].rule, "duplicate path");
        assert_eq!(diags[0].subject, "user.language");
    }

    #[test]
    fn self_derivation_is_a_cycle() {
        let model = ContextModel::new("m").with_sub_context(SubContext::new("env").with_parameter(
            ParameterDescriptor::derived(
                "env.d",
                ValueType::Number,
                "greatCircleDistanceKm",
                ["env.d"],
            ),
        ));
        let diags = validate_model(&model, &registry());
        assert_eq!(diags.len(), 1, "{diags:?}");
        assert_eq!(diags[0].rule, "derivation cycle");
    }

    #[test]
    fn two_node_cycle_reported_once() {
        let model = ContextModel::new("m").with_sub_context(
            SubContext::new("env")
                .with_parameter(ParameterDescriptor::derived(
                    "env.a",
                    ValueType::Number,
                    "greatCircleDistanceKm",
                    ["env.b"],
                ))
                .with_parameter(ParameterDescriptor::derived(
                    "env.b",
                    ValueType::Number,
                    "greatCircleDistanceKm",
                    ["env.a"],
                )),
        );
        let diags = validate_model(&model, &registry());
        assert_eq!(
            diags
                .iter()
                .filter(|d| d.rule == "derivation cycle")
                .count(),
            1
        );
    }

    #[test]
    fn kind_consistency_rules() {
        let mut bad_complex = ParameterDescriptor::simple("a.b", ValueType::Geo);
        bad_complex.kind = ParameterKind::Complex;
        let mut bad_derived = ParameterDescriptor::simple("a.c", ValueType::Number);
        bad_derived.kind = ParameterKind::Derived;
        let unknown_fn = ParameterDescriptor::derived("a.d", ValueType::Number, "nope", ["a.b"]);
        let model = ContextModel::new("m").with_sub_context(
            SubContext::new("a")
                .with_parameter(bad_complex)
                .with_parameter(bad_derived)
                .with_parameter(unknown_fn),
        );
        let rules: Vec<_> = validate_model(&model, &registry())
            .into_iter()
            .map(|d| d.rule)
            .collect();
        assert!(rules.contains(&"missing representations"));
        assert!(rules.contains(&"missing derivation"));
        assert!(rules.contains(&"unknown derivation function"));
    }

    #[test]
    fn duplicate_categories_flagged() {
        let model = ContextModel::new("m").with_sub_context(
            SubContext::new("device")
                .with_category("hardware", vec![])
                .with_category("hardware", vec![]),
        );
        let diags = validate_model(&model, &registry());
        assert_eq!(diags[0].rule, "duplicate category");
    }

    #[test]
    fn path_syntax() {
        assert!(is_valid_path("device.hardware.battery.level"));
        assert!(!is_valid_path("device..level"));
        assert!(!is_valid_path("1device"));
        assert!(!is_valid_path(""));
    }
}
