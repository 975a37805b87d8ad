use std::fmt;

use serde_json::{Map, Value as Json};

use super::geo::GeoValue;

/// The value domain of a context parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ValueType {
    Number,
    String,
    Boolean,
    Geo,
    Record,
}

impl ValueType {
    pub fn as_str(self) -> &'static str {
        match self {
            ValueType::Number => "number",
            ValueType::String => "string",
            ValueType::Boolean => "boolean",
            ValueType::Geo => "geo",
            ValueType::Record => "record",
        }
    }
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A typed context value.
///
/// Records carry an arbitrary JSON object so that structured parameters such
/// as user preferences (which contain lists) stay inside the five-kind domain.
#[derive(Debug, Clone, PartialEq)]
pub enum TypedValue {
    Number(f64),
    String(String),
    Boolean(bool),
    Geo(GeoValue),
    Record(Map<String, Json>),
}

impl TypedValue {
    pub fn value_type(&self) -> ValueType {
        match self {
            TypedValue::Number(_) => ValueType::Number,
            TypedValue::String(_) => ValueType::String,
            TypedValue::Boolean(_) => ValueType::Boolean,
            TypedValue::Geo(_) => ValueType::Geo,
            TypedValue::Record(_) => ValueType::Record,
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            TypedValue::Number(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            TypedValue::String(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_geo(&self) -> Option<GeoValue> {
        match self {
            TypedValue::Geo(g) => Some(*g),
            _ => None,
        }
    }

    pub fn as_record(&self) -> Option<&Map<String, Json>> {
        match self {
            TypedValue::Record(r) => Some(r),
            _ => None,
        }
    }

    /// JSON form used by the remote provider transport and scenario scripts.
    pub fn to_json(&self) -> Json {
        match self {
            TypedValue::Number(n) => serde_json::Number::from_f64(*n)
                .map(Json::Number)
                .unwrap_or(Json::Null),
            TypedValue::String(s) => Json::String(s.clone()),
            TypedValue::Boolean(b) => Json::Bool(*b),
            TypedValue::Geo(g) => serde_json::json!({
                "latitude": g.latitude(),
                "longitude": g.longitude(),
            }),
            TypedValue::Record(r) => Json::Object(r.clone()),
        }
    }

    /// Interprets a JSON document as a value of the expected type.
    pub fn from_json(expected: ValueType, json: &Json) -> Result<Self, ValueError> {
        let mismatch = || ValueError::Mismatch {
            expected,
            found: json.to_string(),
        };
        match expected {
            ValueType::Number => json.as_f64().map(TypedValue::Number).ok_or_else(mismatch),
            ValueType::String => json
                .as_str()
                .map(|s| TypedValue::String(s.to_owned()))
                .ok_or_else(mismatch),
            ValueType::Boolean => json.as_bool().map(TypedValue::Boolean).ok_or_else(mismatch),
            ValueType::Record => json
                .as_object()
                .map(|o| TypedValue::Record(o.clone()))
                .ok_or_else(mismatch),
            ValueType::Geo => {
                let (lat, lon) = match json {
                    Json::Object(o) => (
                        o.get("latitude").and_then(Json::as_f64),
                        o.get("longitude").and_then(Json::as_f64),
                    ),
                    Json::Array(a) if a.len() == 2 => (a[0].as_f64(), a[1].as_f64()),
                    _ => (None, None),
                };
                match (lat, lon) {
                    (Some(lat), Some(lon)) => GeoValue::new(lat, lon)
                        .map(TypedValue::Geo)
                        .map_err(|e| ValueError::Geo(e.to_string())),
                    _ => Err(mismatch()),
                }
            }
        }
    }

    /// Feeds a canonical byte encoding into `out`; equal values encode equally.
    pub(crate) fn encode_canonical(&self, out: &mut Vec<u8>) {
        match self {
            TypedValue::Number(n) => {
                out.push(b'n');
                // -0.0 and 0.0 compare equal, so they must encode equally
                let n = if *n == 0.0 { 0.0 } else { *n };
                out.extend_from_slice(&n.to_bits().to_le_bytes());
            }
            TypedValue::String(s) => {
                out.push(b's');
                out.extend_from_slice(&(s.len() as u64).to_le_bytes());
                out.extend_from_slice(s.as_bytes());
            }
            TypedValue::Boolean(b) => {
                out.push(b'b');
                out.push(u8::from(*b));
            }
            TypedValue::Geo(g) => {
                out.push(b'g');
                out.extend_from_slice(&g.latitude().to_bits().to_le_bytes());
                out.extend_from_slice(&g.longitude().to_bits().to_le_bytes());
            }
            TypedValue::Record(r) => {
                // serde_json's default map is ordered, so the text form is canonical
                let text = Json::Object(r.clone()).to_string();
                out.push(b'r');
                out.extend_from_slice(&(text.len() as u64).to_le_bytes());
                out.extend_from_slice(text.as_bytes());
            }
        }
    }
}

impl fmt::Display for TypedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypedValue::String(s) => write!(f, "'{s}'"),
            other => write!(f, "{}", other.to_json()),
        }
    }
}

impl From<f64> for TypedValue {
    fn from(v: f64) -> Self {
        TypedValue::Number(v)
    }
}

impl From<&str> for TypedValue {
    fn from(v: &str) -> Self {
        TypedValue::String(v.to_owned())
    }
}

impl From<bool> for TypedValue {
    fn from(v: bool) -> Self {
        TypedValue::Boolean(v)
    }
}

impl From<GeoValue> for TypedValue {
    fn from(v: GeoValue) -> Self {
        TypedValue::Geo(v)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ValueError {
    #[error("expected a {expected} value, found {found}")]
    Mismatch { expected: ValueType, found: String },
    #[error("invalid geo value: {0}")]
    Geo(String),
}
