use super::{AdaptationCondition, CompareOp, Expr, Literal, Operand};
use crate::context::{ContextSnapshot, TypedValue, ValueType};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("context path `{0}` is unavailable")]
    Unavailable(String),
    #[error("`{op}` cannot order {left} and {right} values")]
    TypeMismatch {
        op: &'static str,
        left: ValueType,
        right: ValueType,
    },
}

impl EvalError {
    /// Compact reason used in weave traces (no spaces).
    pub fn trace_reason(&self) -> String {
        match self {
            EvalError::Unavailable(p) => format!("unavailable:{p}"),
            EvalError::TypeMismatch { op, .. } => format!("type-mismatch:{op}"),
        }
    }
}

impl AdaptationCondition {
    /// Two-valued evaluation against `snapshot`.
    ///
    /// `and`/`or` short-circuit in both directions: an error on one side is
    /// suppressed when the other side alone settles the result.
    pub fn evaluate(&self, snapshot: &ContextSnapshot) -> Result<bool, EvalError> {
        eval(&self.ast, snapshot)
    }
}

pub fn evaluate_condition(
    cond: &AdaptationCondition,
    snapshot: &ContextSnapshot,
) -> Result<bool, EvalError> {
    cond.evaluate(snapshot)
}

fn eval(expr: &Expr, snapshot: &ContextSnapshot) -> Result<bool, EvalError> {
    match expr {
        Expr::And(a, b) => match eval(a, snapshot) {
            Ok(false) => Ok(false),
            Ok(true) => eval(b, snapshot),
            Err(e) => match eval(b, snapshot) {
                Ok(false) => Ok(false),
                _ => Err(e),
            },
        },
        Expr::Or(a, b) => match eval(a, snapshot) {
            Ok(true) => Ok(true),
            Ok(false) => eval(b, snapshot),
            Err(e) => match eval(b, snapshot) {
                Ok(true) => Ok(true),
                _ => Err(e),
            },
        },
        Expr::Not(e) => eval(e, snapshot).map(|v| !v),
        Expr::Exists(p) => Ok(snapshot.resolve_or_derive(p).is_ok()),
        Expr::Compare { left, op, right } => {
            let l = operand(left, snapshot)?;
            let r = operand(right, snapshot)?;
            compare(&l, *op, &r)
        }
    }
}

fn operand(o: &Operand, snapshot: &ContextSnapshot) -> Result<TypedValue, EvalError> {
    match o {
        Operand::Path(p) => snapshot
            .resolve_or_derive(p)
            .map_err(|_| EvalError::Unavailable(p.clone())),
        Operand::Literal(Literal::Number(n)) => Ok(TypedValue::Number(*n)),
        Operand::Literal(Literal::String(s)) => Ok(TypedValue::String(s.clone())),
        Operand::Literal(Literal::Bool(b)) => Ok(TypedValue::Boolean(*b)),
    }
}

fn compare(l: &TypedValue, op: CompareOp, r: &TypedValue) -> Result<bool, EvalError> {
    if op.is_ordering() {
        let (TypedValue::Number(a), TypedValue::Number(b)) = (l, r) else {
            return Err(EvalError::TypeMismatch {
                op: op.symbol(),
                left: l.value_type(),
                right: r.value_type(),
            });
        };
        return Ok(match op {
            CompareOp::Lt => a < b,
            CompareOp::Le => a <= b,
            CompareOp::Gt => a > b,
            _ => a >= b,
        });
    }
    let equal = l == r;
    Ok(if op == CompareOp::Eq { equal } else { !equal })
}
