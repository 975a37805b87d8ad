//! Request/response transport for remote providers.
//!
//! Wire format (JSON):
//!
//! ```text
//! request:  {"providerId": "WeatherProvider", "path": "environment.weather"}
//! response: {"value": "sunny", "timestamp": "2024-01-01T13:00:00Z"}
//!       or: {"failure": "UNREACHABLE"}
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use chrono::SecondsFormat;
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use super::Clock;

/// The source has no value for the path; maps to `Unavailable`.
pub const FAILURE_NO_VALUE: &str = "NO_VALUE";
/// The remote end cannot be reached; maps to `ProviderUnreachable`.
pub const FAILURE_UNREACHABLE: &str = "UNREACHABLE";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RemoteRequest {
    pub provider_id: String,
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum RemoteResponse {
    Value { value: Json, timestamp: String },
    Failure { failure: String },
}

pub trait RemoteTransport: Send + Sync {
    fn request(&self, request: &RemoteRequest) -> RemoteResponse;
}

/// In-process stand-in for a remote provider endpoint.
pub struct StubTransport {
    clock: Arc<dyn Clock>,
    values: RwLock<BTreeMap<(String, String), Json>>,
    down: RwLock<BTreeSet<String>>,
}

impl std::fmt::Debug for StubTransport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StubTransport")
            .field("values", &*self.values.read())
            .field("down", &*self.down.read())
            .finish()
    }
}

impl StubTransport {
    pub fn new(clock: Arc<dyn Clock>) -> Self {
        Self {
            clock,
            values: RwLock::new(BTreeMap::new()),
            down: RwLock::new(BTreeSet::new()),
        }
    }

    pub fn set(&self, provider_id: &str, path: &str, value: Json) {
        self.values
            .write()
            .insert((provider_id.to_owned(), path.to_owned()), value);
    }

    pub fn unset(&self, provider_id: &str, path: &str) {
        self.values
            .write()
            .remove(&(provider_id.to_owned(), path.to_owned()));
    }

    /// Makes every request to `provider_id` fail (or succeed again).
    pub fn set_unreachable(&self, provider_id: &str, unreachable: bool) {
        let mut down = self.down.write();
        if unreachable {
            down.insert(provider_id.to_owned());
        } else {
            down.remove(provider_id);
        }
    }

    /// Serves one JSON-encoded request, answering with a JSON response.
    pub fn handle_json(&self, request: &str) -> String {
        let response = match serde_json::from_str::<RemoteRequest>(request) {
            Ok(req) => self.request(&req),
            Err(_) => RemoteResponse::Failure {
                failure: "BAD_REQUEST".into(),
            },
        };
        serde_json::to_string(&response).expect("responses always serialize")
    }
}

impl RemoteTransport for StubTransport {
    fn request(&self, request: &RemoteRequest) -> RemoteResponse {
        if self.down.read().contains(&request.provider_id) {
            return RemoteResponse::Failure {
                failure: FAILURE_UNREACHABLE.into(),
            };
        }
        let key = (request.provider_id.clone(), request.path.clone());
        match self.values.read().get(&key) {
            Some(value) => RemoteResponse::Value {
                value: value.clone(),
                timestamp: self.clock.now().to_rfc3339_opts(SecondsFormat::Secs, true),
            },
            None => RemoteResponse::Failure {
                failure: FAILURE_NO_VALUE.into(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::StepClock;

    #[test]
    fn wire_format() {
        let stub = StubTransport::new(Arc::new(StepClock::default()));
        stub.set(
            "WeatherProvider",
            "environment.weather",
            Json::from("sunny"),
        );
        let out =
            stub.handle_json(r#"{"providerId":"WeatherProvider","path":"environment.weather"}"#);
        assert_eq!(
            out,
            r#"{"value":"sunny","timestamp":"2024-01-01T00:00:00Z"}"#
        );
        let out = stub.handle_json(r#"{"providerId":"WeatherProvider","path":"environment.rain"}"#);
        assert_eq!(out, r#"{"failure":"NO_VALUE"}"#);
        stub.set_unreachable("WeatherProvider", true);
        let out =
            stub.handle_json(r#"{"providerId":"WeatherProvider","path":"environment.weather"}"#);
        assert_eq!(out, r#"{"failure":"UNREACHABLE"}"#);
        assert_eq!(stub.handle_json("{}"), r#"{"failure":"BAD_REQUEST"}"#);
    }

    #[test]
    fn responses_decode() {
        let r: RemoteResponse =
            serde_json::from_str(r#"{"value":{"t":1},"timestamp":"x"}"#).unwrap();
        assert!(matches!(r, RemoteResponse::Value { .. }));
        let r: RemoteResponse = serde_json::from_str(r#"{"failure":"UNREACHABLE"}"#).unwrap();
        assert_eq!(
            r,
            RemoteResponse::Failure {
                failure: FAILURE_UNREACHABLE.into()
            }
        );
    }
}
