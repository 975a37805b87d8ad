#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::Arc;

use acas_core::adaptation::{
    Adaptation, AdaptationBinding, AdaptationRule, AdviceKind, SimpleAdaptationStrategy, WILDCARD,
};
use acas_core::cas::{CasAdaptationStrategy, ContextView};
use acas_core::condition::AdaptationCondition;
use acas_core::context::{ContextSnapshot, GeoValue, TypedValue, ValueType};
use acas_core::mtourism::{self, SERVICE};
use chrono::{TimeZone, Utc};
use proptest::prelude::*;
use proptest::sample::Index;
use serde_json::json;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

pub fn fixture(name: &str) -> Vec<u8> {
    std::fs::read(fixture_path(name)).unwrap()
}

pub fn fixture_str(name: &str) -> String {
    String::from_utf8(fixture(name)).unwrap()
}

pub fn dataset() -> Arc<Vec<mtourism::Restaurant>> {
    Arc::new(mtourism::load_restaurants(&fixture("restaurants.json")).unwrap())
}

/// Context paths of the M-tourism model that a snapshot can hold directly.
pub const STORED_PATHS: &[&str] = &[
    "device.software.os",
    "device.hardware.battery.level",
    "device.connexionMode",
    "user.language",
    "user.preferences",
    "user.gps",
    "user.hotel",
    "environment.time",
    "environment.weather",
];

pub const DERIVED_PATH: &str = "user.distanceFromHotel";

pub fn all_paths() -> Vec<&'static str> {
    let mut v = STORED_PATHS.to_vec();
    v.push(DERIVED_PATH);
    v
}

pub fn sample_value(path: &str) -> TypedValue {
    match path {
        "device.hardware.battery.level" => TypedValue::Number(15.0),
        "user.preferences" => TypedValue::Record(
            json!({ "cuisines": ["moroccan"] })
                .as_object()
                .unwrap()
                .clone(),
        ),
        "user.gps" => GeoValue::new(31.6295, -7.9811).unwrap().into(),
        "user.hotel" => GeoValue::new(31.6258, -7.9892).unwrap().into(),
        "environment.time" => "13:00".into(),
        _ => "x".into(),
    }
}

pub fn snapshot_of(paths: &BTreeSet<&str>) -> ContextSnapshot {
    let mut b = ContextSnapshot::builder(
        SERVICE,
        Utc.timestamp_opt(0, 0).unwrap(),
        mtourism::schema(),
    );
    for p in paths {
        b = b.with(p, sample_value(p)).unwrap();
    }
    b.build()
}

/// Availability as the selection rule states it, computed without the
/// library: stored paths are available when present, the derived distance
/// when both its inputs are.
pub fn available(path: &str, present: &BTreeSet<&str>) -> bool {
    if path == DERIVED_PATH {
        present.contains("user.gps") && present.contains("user.hotel")
    } else {
        present.contains(path)
    }
}

/// Effective path set of a view, computed independently of the library.
pub fn effective_paths(cas: &CasAdaptationStrategy, view: &str) -> BTreeSet<String> {
    let v = cas.views.iter().find(|v| v.name == view).unwrap();
    let mut out: BTreeSet<String> = v.required_paths.clone();
    for sub in &v.sub_views {
        out.extend(effective_paths(cas, sub));
    }
    out
}

/// Great-circle distance from the angle between unit vectors. A different
/// formula from the library's haversine, on the same 6371 km sphere.
pub fn vector_distance_km(a: (f64, f64), b: (f64, f64)) -> f64 {
    let unit = |(lat, lon): (f64, f64)| {
        let (lat, lon) = (lat.to_radians(), lon.to_radians());
        [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
    };
    let (u, v) = (unit(a), unit(b));
    let cross = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    let sin = (cross[0].powi(2) + cross[1].powi(2) + cross[2].powi(2)).sqrt();
    let cos = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    6371.0 * sin.atan2(cos)
}

pub fn point() -> impl Strategy<Value = (f64, f64)> {
    (-90.0..=90.0f64, -180.0..=180.0f64)
}

// Boolean formulas with a three-valued reference evaluator.

#[derive(Debug, Clone)]
pub enum Formula {
    /// Flag index and whether the atom reads the flag negated.
    Atom(usize, AtomForm),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
}

#[derive(Debug, Clone, Copy)]
pub enum AtomForm {
    EqTrue,
    NeFalse,
    EqFalse,
    NeTrue,
}

pub const FLAGS: [&str; 3] = ["flags.a", "flags.b", "flags.c"];

pub fn formula(depth: u32) -> impl Strategy<Value = Formula> {
    let atom = (
        0..FLAGS.len(),
        prop_oneof![
            Just(AtomForm::EqTrue),
            Just(AtomForm::NeFalse),
            Just(AtomForm::EqFalse),
            Just(AtomForm::NeTrue)
        ],
    )
        .prop_map(|(i, f)| Formula::Atom(i, f));
    atom.prop_recursive(depth, 32, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|f| Formula::Not(Box::new(f))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Formula::And(Box::new(a), Box::new(b))),
            (inner.clone(), inner).prop_map(|(a, b)| Formula::Or(Box::new(a), Box::new(b))),
        ]
    })
}

impl Formula {
    /// Surface syntax, fully parenthesised.
    pub fn render(&self) -> String {
        match self {
            Formula::Atom(i, form) => {
                let (op, lit) = match form {
                    AtomForm::EqTrue => ("==", "true"),
                    AtomForm::NeFalse => ("!=", "false"),
                    AtomForm::EqFalse => ("==", "false"),
                    AtomForm::NeTrue => ("!=", "true"),
                };
                format!("{} {op} {lit}", FLAGS[*i])
            }
            Formula::Not(f) => format!("not ({})", f.render()),
            Formula::And(a, b) => format!("({}) and ({})", a.render(), b.render()),
            Formula::Or(a, b) => format!("({}) or ({})", a.render(), b.render()),
        }
    }

    /// Strong Kleene logic; `None` is unknown (a missing flag).
    pub fn eval(&self, flags: &[Option<bool>; 3]) -> Option<bool> {
        match self {
            Formula::Atom(i, form) => flags[*i].map(|v| match form {
                AtomForm::EqTrue | AtomForm::NeFalse => v,
                AtomForm::EqFalse | AtomForm::NeTrue => !v,
            }),
            Formula::Not(f) => f.eval(flags).map(|v| !v),
            Formula::And(a, b) => match (a.eval(flags), b.eval(flags)) {
                (Some(false), _) | (_, Some(false)) => Some(false),
                (Some(true), Some(true)) => Some(true),
                _ => None,
            },
            Formula::Or(a, b) => match (a.eval(flags), b.eval(flags)) {
                (Some(true), _) | (_, Some(true)) => Some(true),
                (Some(false), Some(false)) => Some(false),
                _ => None,
            },
        }
    }

    pub fn atoms(&self) -> usize {
        match self {
            Formula::Atom(..) => 1,
            Formula::Not(f) => f.atoms(),
            Formula::And(a, b) | Formula::Or(a, b) => a.atoms() + b.atoms(),
        }
    }
}

pub fn flag_schema() -> Arc<acas_core::context::ContextSchema> {
    use acas_core::context::{
        ContextModel, ContextSchema, DerivationRegistry, Entity, ParameterDescriptor,
    };
    let model = ContextModel::new("flags").with_entity(Entity::new(
        "Flags",
        FLAGS
            .iter()
            .map(|p| ParameterDescriptor::simple(*p, ValueType::Boolean))
            .collect(),
    ));
    Arc::new(ContextSchema::new(model, DerivationRegistry::with_builtins()).unwrap())
}

pub fn flag_snapshot(
    schema: &Arc<acas_core::context::ContextSchema>,
    flags: &[Option<bool>; 3],
) -> ContextSnapshot {
    let mut b =
        ContextSnapshot::builder("svc", Utc.timestamp_opt(0, 0).unwrap(), Arc::clone(schema));
    for (p, v) in FLAGS.iter().zip(flags) {
        if let Some(v) = v {
            b = b.with(p, *v).unwrap();
        }
    }
    b.build()
}

// Strategy bundles valid against the M-tourism model.

#[derive(Debug, Clone)]
enum CondShape {
    Exists(Index),
    Compare(Index, &'static str, LiteralShape),
    ComparePaths(Index, &'static str, Index),
    Not(Box<CondShape>),
    And(Box<CondShape>, Box<CondShape>),
    Or(Box<CondShape>, Box<CondShape>),
}

#[derive(Debug, Clone)]
enum LiteralShape {
    Number(f64),
    Text(String),
    Bool(bool),
}

fn quote(s: &str) -> String {
    let mut out = String::from("'");
    for c in s.chars() {
        if c == '\'' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('\'');
    out
}

impl CondShape {
    fn render(&self, scope: &[String], all: &[&str]) -> String {
        match self {
            CondShape::Exists(i) => format!("exists({})", i.get(all)),
            CondShape::Compare(i, op, lit) => {
                let lit = match lit {
                    LiteralShape::Number(n) => format!("{n}"),
                    LiteralShape::Text(s) => quote(s),
                    LiteralShape::Bool(b) => b.to_string(),
                };
                format!("{} {op} {lit}", i.get(scope))
            }
            CondShape::ComparePaths(a, op, b) => format!("{} {op} {}", a.get(scope), b.get(scope)),
            CondShape::Not(c) => format!("not ({})", c.render(scope, all)),
            CondShape::And(a, b) => {
                format!("({}) and ({})", a.render(scope, all), b.render(scope, all))
            }
            CondShape::Or(a, b) => {
                format!("({}) or ({})", a.render(scope, all), b.render(scope, all))
            }
        }
    }
}

fn op() -> impl Strategy<Value = &'static str> {
    prop::sample::select(vec!["==", "!=", "<", "<=", ">", ">="])
}

fn literal() -> impl Strategy<Value = LiteralShape> {
    prop_oneof![
        any::<f64>()
            .prop_filter("finite", |f| f.is_finite())
            .prop_map(LiteralShape::Number),
        "[a-zA-Z0-9 '\\\\<>&\"]{0,8}".prop_map(LiteralShape::Text),
        any::<bool>().prop_map(LiteralShape::Bool),
    ]
}

fn cond_shape(depth: u32) -> impl Strategy<Value = CondShape> {
    let leaf = prop_oneof![
        any::<Index>().prop_map(CondShape::Exists),
        (any::<Index>(), op(), literal()).prop_map(|(i, o, l)| CondShape::Compare(i, o, l)),
        (any::<Index>(), op(), any::<Index>())
            .prop_map(|(a, o, b)| CondShape::ComparePaths(a, o, b)),
    ];
    leaf.prop_recursive(depth, 16, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|c| CondShape::Not(Box::new(c))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| CondShape::And(Box::new(a), Box::new(b))),
            (inner.clone(), inner).prop_map(|(a, b)| CondShape::Or(Box::new(a), Box::new(b))),
        ]
    })
}

#[derive(Debug, Clone)]
struct BindingShape {
    condition: CondShape,
    service_wild: bool,
    operation_wild: bool,
    adaptation: Index,
    priority: i64,
    args: Vec<(Index, Option<String>, Index)>,
}

fn binding_shape() -> impl Strategy<Value = BindingShape> {
    (
        cond_shape(3),
        any::<bool>(),
        any::<bool>(),
        any::<Index>(),
        any::<i64>(),
        prop::collection::vec(
            (
                any::<Index>(),
                prop::option::of("[a-z0-9 <>&'\"]{0,6}"),
                any::<Index>(),
            ),
            0..3,
        ),
    )
        .prop_map(
            |(condition, service_wild, operation_wild, adaptation, priority, args)| BindingShape {
                condition,
                service_wild,
                operation_wild,
                adaptation,
                priority,
                args,
            },
        )
}

const ADAPTATIONS: [&str; 5] = [
    "localize",
    "filterPreferences",
    "filterOpen",
    "filterByDistance",
    "optimizePayload",
];
const ARG_NAMES: [&str; 5] = ["language", "pageSize", "radiusKm", "origin", "time"];

/// Random bundles that pass validation: views over model paths with
/// acyclic sub-views, strategies whose unguarded paths stay in their view.
pub fn cas_model() -> impl Strategy<Value = CasAdaptationStrategy> {
    let view = (
        prop::collection::btree_set(0..STORED_PATHS.len() + 1, 1..3),
        any::<u8>(),
    );
    let strategy = (any::<Index>(), prop::collection::vec(binding_shape(), 1..4));
    (
        prop::collection::vec(view, 0..5),
        prop::collection::vec(strategy, 0..4),
    )
        .prop_map(|(views, strategies)| {
            let all = all_paths();
            let mut cas = CasAdaptationStrategy::new(SERVICE);
            for (i, (paths, mask)) in views.iter().enumerate() {
                let mut v = ContextView::new(format!("V{i}"), paths.iter().map(|p| all[*p]));
                for j in 0..i.min(8) {
                    if mask & (1 << j) != 0 {
                        v = v.with_sub_view(format!("V{j}"));
                    }
                }
                cas = cas.with_view(v);
            }
            if cas.views.is_empty() {
                return cas;
            }
            let names: Vec<String> = cas.views.iter().map(|v| v.name.clone()).collect();
            for (k, (view, bindings)) in strategies.into_iter().enumerate() {
                let view = view.get(&names).clone();
                let scope: Vec<String> = effective_paths(&cas, &view).into_iter().collect();
                let bindings = bindings
                    .into_iter()
                    .map(|b| {
                        let condition =
                            AdaptationCondition::parse(&b.condition.render(&scope, &all)).unwrap();
                        let rule = AdaptationRule::new(
                            if b.service_wild { WILDCARD } else { SERVICE },
                            if b.operation_wild {
                                WILDCARD
                            } else {
                                mtourism::OPERATION
                            },
                            AdviceKind::After,
                        );
                        let mut adaptation = Adaptation::new(*b.adaptation.get(&ADAPTATIONS));
                        for (name, literal, path) in b.args {
                            let name = *name.get(&ARG_NAMES);
                            adaptation = match literal {
                                Some(l) => adaptation.with_literal(name, l),
                                None => adaptation.with_path(name, *path.get(&all)),
                            };
                        }
                        AdaptationBinding::new(condition, rule, adaptation, b.priority)
                    })
                    .collect();
                cas = cas.with_strategy(
                    view,
                    SimpleAdaptationStrategy::new(format!("S{k}"), bindings),
                );
            }
            cas
        })
}

pub fn distinct_names(cas: &CasAdaptationStrategy) -> BTreeMap<String, String> {
    cas.cvs_strategies
        .iter()
        .map(|c| (c.strategy.name.clone(), c.view.clone()))
        .collect()
}
