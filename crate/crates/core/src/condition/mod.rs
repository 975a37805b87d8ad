//! The condition language used to decide when an adaptation applies.
//!
//! ```text
//! expr       := and_chain ("or" and_chain)*
//! and_chain  := unary ("and" unary)*
//! unary      := "not" unary | primary
//! primary    := "(" expr ")" | "exists" "(" path ")" | operand cmp operand
//! cmp        := "==" | "!=" | "<" | "<=" | ">" | ">="
//! operand    := path | number | 'string' | true | false
//! ```
//!
//! At least one side of a comparison must be a context path. Ordering
//! operators apply to numbers only; equality applies to every type, and
//! values of different types are never equal.

mod eval;
mod parse;

use std::collections::BTreeSet;
use std::fmt;

pub use eval::{evaluate_condition, EvalError};
pub use parse::SyntaxError;

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Number(f64),
    String(String),
    Bool(bool),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    Path(String),
    Literal(Literal),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CompareOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Eq => "==",
            CompareOp::Ne => "!=",
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
        }
    }

    pub fn is_ordering(self) -> bool {
        !matches!(self, CompareOp::Eq | CompareOp::Ne)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Or(Box<Expr>, Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    Exists(String),
    Compare {
        left: Operand,
        op: CompareOp,
        right: Operand,
    },
}

impl Expr {
    fn is_binary(&self) -> bool {
        matches!(self, Expr::Or(..) | Expr::And(..))
    }

    fn visit_paths<'a>(&'a self, f: &mut impl FnMut(&'a str, bool)) {
        match self {
            Expr::Or(a, b) | Expr::And(a, b) => {
                a.visit_paths(f);
                b.visit_paths(f);
            }
            Expr::Not(e) => e.visit_paths(f),
            Expr::Exists(p) => f(p, true),
            Expr::Compare { left, right, .. } => {
                for side in [left, right] {
                    if let Operand::Path(p) = side {
                        f(p, false);
                    }
                }
            }
        }
    }
}

/// A parsed condition, keeping the text it was written as.
#[derive(Debug, Clone)]
pub struct AdaptationCondition {
    source: String,
    ast: Expr,
}

impl AdaptationCondition {
    pub fn parse(text: &str) -> Result<Self, SyntaxError> {
        Ok(Self {
            source: text.to_owned(),
            ast: parse::parse(text)?,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn ast(&self) -> &Expr {
        &self.ast
    }

    /// Every context path the condition mentions.
    pub fn paths(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.ast.visit_paths(&mut |p, _| {
            out.insert(p);
        });
        out
    }

    /// Paths used in comparisons that no `exists(..)` in the same condition
    /// guards.
    pub fn unguarded_paths(&self) -> BTreeSet<&str> {
        let mut guarded = BTreeSet::new();
        let mut used = BTreeSet::new();
        self.ast.visit_paths(&mut |p, is_exists| {
            if is_exists {
                guarded.insert(p);
            } else {
                used.insert(p);
            }
        });
        used.difference(&guarded).copied().collect()
    }
}

/// Conditions compare by structure; the original spelling is irrelevant.
impl PartialEq for AdaptationCondition {
    fn eq(&self, other: &Self) -> bool {
        self.ast == other.ast
    }
}

pub fn parse_condition(text: &str) -> Result<AdaptationCondition, SyntaxError> {
    AdaptationCondition::parse(text)
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Number(n) => write!(f, "{n}"),
            Literal::Bool(b) => write!(f, "{b}"),
            Literal::String(s) => {
                f.write_str("'")?;
                for c in s.chars() {
                    if c == '\'' || c == '\\' {
                        f.write_str("\\")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str("'")
            }
        }
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Path(p) => f.write_str(p),
            Operand::Literal(l) => l.fmt(f),
        }
    }
}

/// Canonical text: nested `and`/`or` operands are always parenthesised, so
/// the printed form reparses to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn child(e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            if e.is_binary() {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            Expr::Or(a, b) | Expr::And(a, b) => {
                child(a, f)?;
                f.write_str(if matches!(self, Expr::Or(..)) {
                    " or "
                } else {
                    " and "
                })?;
                child(b, f)
            }
            Expr::Not(e) => {
                f.write_str("not ")?;
                child(e, f)
            }
            Expr::Exists(p) => write!(f, "exists({p})"),
            Expr::Compare { left, op, right } => write!(f, "{left} {} {right}", op.symbol()),
        }
    }
}

impl fmt::Display for AdaptationCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.ast.fmt(f)
    }
}
