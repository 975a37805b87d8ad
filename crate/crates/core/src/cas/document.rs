//! XML strategy documents.
//!
//! ```xml
//! <cas service="RestaurantsSearching">
//!   <contextView name="BatteryState">
//!     <param path="device.hardware.battery.level"/>
//!     <view ref="..."/>
//!   </contextView>
//!   <strategy name="BatteryStateAS" view="BatteryState">
//!     <binding priority="10">
//!       <condition>device.hardware.battery.level &lt; 20</condition>
//!       <rule advice="after" operation="search" service="RestaurantsSearching"/>
//!       <adaptation ref="optimizePayload">
//!         <arg name="pageSize" value="5"/>
//!       </adaptation>
//!     </binding>
//!   </strategy>
//! </cas>
//! ```
//!
//! Parsing is strict: unknown elements or attributes, stray text and missing
//! required parts are errors. An `<arg>` carries either `value` (a literal)
//! or `path` (a context reference).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::{validate_cas, CasAdaptationStrategy, ContextView, CvsAdaptationStrategy};
use crate::adaptation::{
    Adaptation, AdaptationBinding, AdaptationRegistry, AdaptationRule, AdviceKind, ArgValue,
    SimpleAdaptationStrategy,
};
use crate::condition::AdaptationCondition;
use crate::context::ContextModel;
use crate::diagnostic::{render, Diagnostic};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DocumentError {
    #[error("strategy document parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("strategy document failed validation:\n{}", render(.0))]
    Validation(Vec<Diagnostic>),
}

fn parse_err<T>(offset: usize, message: impl Into<String>) -> Result<T, DocumentError> {
    Err(DocumentError::Parse {
        offset,
        message: message.into(),
    })
}

/// Minimal element tree; text is only kept where the schema allows it.
#[derive(Debug)]
struct Element {
    name: String,
    attrs: Vec<(String, String)>,
    children: Vec<Element>,
    text: String,
    offset: usize,
}

impl Element {
    fn from_start(e: &BytesStart<'_>, offset: usize) -> Result<Self, DocumentError> {
        let name = std::str::from_utf8(e.name().as_ref())
            .map_err(|_| DocumentError::Parse {
                offset,
                message: "element name is not UTF-8".into(),
            })?
            .to_owned();
        let mut attrs = Vec::new();
        for attr in e.attributes() {
            let attr = attr.map_err(|err| DocumentError::Parse {
                offset,
                message: err.to_string(),
            })?;
            let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
            let value = attr
                .unescape_value()
                .map_err(|err| DocumentError::Parse {
                    offset,
                    message: err.to_string(),
                })?
                .into_owned();
            attrs.push((key, value));
        }
        Ok(Self {
            name,
            attrs,
            children: Vec::new(),
            text: String::new(),
            offset,
        })
    }

    /// Fails on attributes outside `allowed`.
    fn check_attrs(&self, allowed: &[&str]) -> Result<(), DocumentError> {
        for (k, _) in &self.attrs {
            if !allowed.contains(&k.as_str()) {
                return parse_err(
                    self.offset,
                    format!("unknown attribute `{k}` on <{}>", self.name),
                );
            }
        }
        Ok(())
    }

    fn attr(&self, key: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn required(&self, key: &str) -> Result<&str, DocumentError> {
        self.attr(key).ok_or_else(|| DocumentError::Parse {
            offset: self.offset,
            message: format!("<{}> requires attribute `{key}`", self.name),
        })
    }

    fn no_text(&self) -> Result<(), DocumentError> {
        if self.text.trim().is_empty() {
            Ok(())
        } else {
            parse_err(
                self.offset,
                format!("unexpected text inside <{}>", self.name),
            )
        }
    }

    fn unknown_child(&self, child: &Element) -> DocumentError {
        DocumentError::Parse {
            offset: child.offset,
            message: format!("unexpected <{}> inside <{}>", child.name, self.name),
        }
    }
}

fn read_tree(text: &str) -> Result<Element, DocumentError> {
    let mut reader = Reader::from_str(text);
    let mut stack: Vec<Element> = Vec::new();
    let mut root: Option<Element> = None;
    loop {
        let offset = reader.buffer_position() as usize;
        let event = reader.read_event().map_err(|e| DocumentError::Parse {
            offset: reader.error_position() as usize,
            message: e.to_string(),
        })?;
        let text_of = |s: &str, stack: &mut Vec<Element>| -> Result<(), DocumentError> {
            match stack.last_mut() {
                Some(top) => {
                    top.text.push_str(s);
                    Ok(())
                }
                None if s.trim().is_empty() => Ok(()),
                None => parse_err(offset, "text outside the root element"),
            }
        };
        match event {
            Event::Start(e) => {
                if root.is_some() {
                    return parse_err(offset, "content after the root element");
                }
                stack.push(Element::from_start(&e, offset)?);
            }
            Event::Empty(e) => {
                if root.is_some() {
                    return parse_err(offset, "content after the root element");
                }
                let el = Element::from_start(&e, offset)?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(el),
                    None => root = Some(el),
                }
            }
            Event::End(_) => {
                let el = stack.pop().expect("reader checks end tags");
                match stack.last_mut() {
                    Some(parent) => parent.children.push(el),
                    None => root = Some(el),
                }
            }
            Event::Text(t) => {
                let s = t.decode().map_err(|e| DocumentError::Parse {
                    offset,
                    message: e.to_string(),
                })?;
                text_of(&s, &mut stack)?;
            }
            Event::CData(c) => {
                let s = c.decode().map_err(|e| DocumentError::Parse {
                    offset,
                    message: e.to_string(),
                })?;
                text_of(&s, &mut stack)?;
            }
            Event::GeneralRef(r) => {
                let resolved = match r.resolve_char_ref().map_err(|e| DocumentError::Parse {
                    offset,
                    message: e.to_string(),
                })? {
                    Some(c) => c.to_string(),
                    None => {
                        let name = r.decode().map_err(|e| DocumentError::Parse {
                            offset,
                            message: e.to_string(),
                        })?;
                        match quick_xml::escape::resolve_predefined_entity(&name) {
                            Some(s) => s.to_owned(),
                            None => return parse_err(offset, format!("unknown entity `&{name};`")),
                        }
                    }
                };
                text_of(&resolved, &mut stack)?;
            }
            Event::Decl(_) | Event::Comment(_) | Event::PI(_) => {}
            Event::DocType(_) => return parse_err(offset, "DOCTYPE is not allowed"),
            Event::Eof => break,
        }
    }
    if !stack.is_empty() {
        return parse_err(text.len(), "unexpected end of document");
    }
    root.ok_or_else(|| DocumentError::Parse {
        offset: 0,
        message: "document has no root element".into(),
    })
}

fn interpret_view(el: &Element) -> Result<ContextView, DocumentError> {
    el.check_attrs(&["name"])?;
    el.no_text()?;
    let mut view = ContextView::new(el.required("name")?, Vec::<String>::new());
    for child in &el.children {
        child.no_text()?;
        if !child.children.is_empty() {
            return Err(el.unknown_child(&child.children[0]));
        }
        match child.name.as_str() {
            "param" => {
                child.check_attrs(&["path"])?;
                view.required_paths
                    .insert(child.required("path")?.to_owned());
            }
            "view" => {
                child.check_attrs(&["ref"])?;
                view.sub_views.push(child.required("ref")?.to_owned());
            }
            _ => return Err(el.unknown_child(child)),
        }
    }
    Ok(view)
}

fn interpret_binding(el: &Element) -> Result<AdaptationBinding, DocumentError> {
    el.check_attrs(&["priority"])?;
    el.no_text()?;
    let priority_text = el.required("priority")?;
    let priority = priority_text
        .trim()
        .parse::<i64>()
        .map_err(|_| DocumentError::Parse {
            offset: el.offset,
            message: format!("priority `{priority_text}` is not an integer"),
        })?;
    let mut condition = None;
    let mut rule = None;
    let mut adaptation = None;
    for child in &el.children {
        let duplicate = || DocumentError::Parse {
            offset: child.offset,
            message: format!("<binding> has more than one <{}>", child.name),
        };
        match child.name.as_str() {
            "condition" => {
                child.check_attrs(&[])?;
                if let Some(grand) = child.children.first() {
                    return Err(child.unknown_child(grand));
                }
                let parsed = AdaptationCondition::parse(child.text.trim()).map_err(|e| {
                    DocumentError::Parse {
                        offset: child.offset,
                        message: format!("invalid condition: {e}"),
                    }
                })?;
                if condition.replace(parsed).is_some() {
                    return Err(duplicate());
                }
            }
            "rule" => {
                child.check_attrs(&["service", "operation", "advice"])?;
                child.no_text()?;
                if let Some(grand) = child.children.first() {
                    return Err(child.unknown_child(grand));
                }
                let advice =
                    child
                        .required("advice")?
                        .parse::<AdviceKind>()
                        .map_err(|message| DocumentError::Parse {
                            offset: child.offset,
                            message,
                        })?;
                let r = AdaptationRule::new(
                    child.required("service")?,
                    child.required("operation")?,
                    advice,
                );
                if rule.replace(r).is_some() {
                    return Err(duplicate());
                }
            }
            "adaptation" => {
                child.check_attrs(&["ref"])?;
                child.no_text()?;
                let mut a = Adaptation::new(child.required("ref")?);
                for arg in &child.children {
                    if arg.name != "arg" {
                        return Err(child.unknown_child(arg));
                    }
                    arg.check_attrs(&["name", "value", "path"])?;
                    arg.no_text()?;
                    if let Some(grand) = arg.children.first() {
                        return Err(arg.unknown_child(grand));
                    }
                    let name = arg.required("name")?.to_owned();
                    let value = match (arg.attr("value"), arg.attr("path")) {
                        (Some(v), None) => ArgValue::Literal(v.to_owned()),
                        (None, Some(p)) => ArgValue::Path(p.to_owned()),
                        _ => {
                            return parse_err(
                                arg.offset,
                                "<arg> needs exactly one of `value` or `path`",
                            )
                        }
                    };
                    if a.args.insert(name.clone(), value).is_some() {
                        return parse_err(arg.offset, format!("duplicate argument `{name}`"));
                    }
                }
                if adaptation.replace(a).is_some() {
                    return Err(duplicate());
                }
            }
            _ => return Err(el.unknown_child(child)),
        }
    }
    let missing = |what: &str| DocumentError::Parse {
        offset: el.offset,
        message: format!("<binding> is missing <{what}>"),
    };
    Ok(AdaptationBinding::new(
        condition.ok_or_else(|| missing("condition"))?,
        rule.ok_or_else(|| missing("rule"))?,
        adaptation.ok_or_else(|| missing("adaptation"))?,
        priority,
    ))
}

fn interpret_strategy(el: &Element) -> Result<CvsAdaptationStrategy, DocumentError> {
    el.check_attrs(&["name", "view"])?;
    el.no_text()?;
    let mut bindings = Vec::new();
    for child in &el.children {
        if child.name != "binding" {
            return Err(el.unknown_child(child));
        }
        bindings.push(interpret_binding(child)?);
    }
    Ok(CvsAdaptationStrategy {
        view: el.required("view")?.to_owned(),
        strategy: SimpleAdaptationStrategy::new(el.required("name")?, bindings),
    })
}

/// Parses a strategy document without validating it against a model.
/// Binding declaration indices follow document order.
pub fn parse_strategy_document(bytes: &[u8]) -> Result<CasAdaptationStrategy, DocumentError> {
    let text = std::str::from_utf8(bytes).map_err(|e| DocumentError::Parse {
        offset: e.valid_up_to(),
        message: "document is not valid UTF-8".into(),
    })?;
    let root = read_tree(text)?;
    if root.name != "cas" {
        return parse_err(
            root.offset,
            format!("root element must be <cas>, found <{}>", root.name),
        );
    }
    root.check_attrs(&["service"])?;
    root.no_text()?;
    let mut cas = CasAdaptationStrategy::new(root.required("service")?);
    for child in &root.children {
        match child.name.as_str() {
            "contextView" => cas.views.push(interpret_view(child)?),
            "strategy" => cas.cvs_strategies.push(interpret_strategy(child)?),
            _ => return Err(root.unknown_child(child)),
        }
    }
    Ok(cas)
}

/// Parses a strategy document and validates every strategy in it.
pub fn load_strategy_document(
    bytes: &[u8],
    model: &ContextModel,
    registry: &AdaptationRegistry,
) -> Result<CasAdaptationStrategy, DocumentError> {
    let cas = parse_strategy_document(bytes)?;
    let diags = validate_cas(&cas, model, registry);
    if diags.is_empty() {
        Ok(cas)
    } else {
        Err(DocumentError::Validation(diags))
    }
}

fn escape_text(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            c => out.push(c),
        }
    }
}

fn escape_attr(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '"' => out.push_str("&quot;"),
            '\n' => out.push_str("&#10;"),
            '\t' => out.push_str("&#9;"),
            '\r' => out.push_str("&#13;"),
            c => escape_text(c.encode_utf8(&mut [0; 4]), out),
        }
    }
}

/// Writes `<name a="..." b="...">` (or `/>` when `empty`), attributes sorted.
fn open(out: &mut String, depth: usize, name: &str, attrs: &[(&str, &str)], empty: bool) {
    let sorted: BTreeMap<&str, &str> = attrs.iter().copied().collect();
    out.push_str(&"  ".repeat(depth));
    out.push('<');
    out.push_str(name);
    for (k, v) in sorted {
        let _ = write!(out, " {k}=\"");
        escape_attr(v, out);
        out.push('"');
    }
    out.push_str(if empty { "/>\n" } else { ">\n" });
}

fn close(out: &mut String, depth: usize, name: &str) {
    let _ = writeln!(out, "{}</{name}>", "  ".repeat(depth));
}

/// Canonical UTF-8 document: views then strategies in declaration order,
/// attributes sorted by name, two-space indentation, conditions in their
/// canonical printed form.
pub fn serialize_strategy(cas: &CasAdaptationStrategy) -> Vec<u8> {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let root_empty = cas.views.is_empty() && cas.cvs_strategies.is_empty();
    open(
        &mut out,
        0,
        "cas",
        &[("service", &cas.service_id)],
        root_empty,
    );
    for view in &cas.views {
        let empty = view.required_paths.is_empty() && view.sub_views.is_empty();
        open(&mut out, 1, "contextView", &[("name", &view.name)], empty);
        for p in &view.required_paths {
            open(&mut out, 2, "param", &[("path", p)], true);
        }
        for v in &view.sub_views {
            open(&mut out, 2, "view", &[("ref", v)], true);
        }
        if !empty {
            close(&mut out, 1, "contextView");
        }
    }
    for cvs in &cas.cvs_strategies {
        let s = &cvs.strategy;
        let empty = s.bindings.is_empty();
        open(
            &mut out,
            1,
            "strategy",
            &[("name", &s.name), ("view", &cvs.view)],
            empty,
        );
        for b in &s.bindings {
            let priority = b.priority.to_string();
            open(&mut out, 2, "binding", &[("priority", &priority)], false);
            out.push_str("      <condition>");
            escape_text(&b.condition.to_string(), &mut out);
            out.push_str("</condition>\n");
            let rule = &b.rule;
            open(
                &mut out,
                3,
                "rule",
                &[
                    ("service", &rule.target_service),
                    ("operation", &rule.target_operation),
                    ("advice", rule.advice.as_str()),
                ],
                true,
            );
            let a = &b.adaptation;
            open(
                &mut out,
                3,
                "adaptation",
                &[("ref", &a.name)],
                a.args.is_empty(),
            );
            for (name, value) in &a.args {
                let (key, v) = match value {
                    ArgValue::Literal(v) => ("value", v),
                    ArgValue::Path(p) => ("path", p),
                };
                open(&mut out, 4, "arg", &[("name", name), (key, v)], true);
            }
            if !a.args.is_empty() {
                close(&mut out, 3, "adaptation");
            }
            close(&mut out, 2, "binding");
        }
        if !empty {
            close(&mut out, 1, "strategy");
        }
    }
    if !root_empty {
        close(&mut out, 0, "cas");
    }
    out.into_bytes()
}
