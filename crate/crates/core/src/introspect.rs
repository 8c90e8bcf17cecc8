//! Fetching a schema from a live endpoint via the introspection query, or
//! loading the same document from a local file for targets that have
//! introspection disabled.

use crate::schema::INTROSPECTION_QUERY;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IntrospectError {
    #[error("transport error talking to {url}: {message}")]
    Transport { url: String, message: String },
    #[error("introspection appears to be disabled on {url} (status {status}); supply a schema file instead")]
    IntrospectionDisabled { url: String, status: u16 },
    #[error("malformed introspection response from {url}: {message}")]
    MalformedResponse { url: String, message: String },
    #[error("failed to read schema file {path}: {message}")]
    File { path: String, message: String },
}

/// POSTs the canonical introspection query and returns the raw response
/// document (`{"data": {"__schema": ...}}`).
pub fn fetch_introspection(
    endpoint_url: &str,
    headers: &BTreeMap<String, String>,
    timeout: Duration,
) -> Result<Value, IntrospectError> {
    let agent = ureq::AgentBuilder::new().timeout(timeout).build();
    let mut req = agent
        .post(endpoint_url)
        .set("Content-Type", "application/json");
    for (k, v) in headers {
        req = req.set(k, v);
    }
    let body = json!({"query": INTROSPECTION_QUERY});
    let resp = match req.send_json(body) {
        Ok(r) => r,
        Err(ureq::Error::Status(status, _)) => {
            return Err(IntrospectError::IntrospectionDisabled {
                url: endpoint_url.to_string(),
                status,
            })
        }
        Err(e) => {
            return Err(IntrospectError::Transport {
                url: endpoint_url.to_string(),
                message: e.to_string(),
            })
        }
    };
    let status = resp.status();
    let doc: Value = resp.into_json().map_err(|e| IntrospectError::MalformedResponse {
        url: endpoint_url.to_string(),
        message: e.to_string(),
    })?;
    let data_present = doc.get("data").map(|d| !d.is_null()).unwrap_or(false);
    if !data_present {
        return Err(IntrospectError::IntrospectionDisabled {
            url: endpoint_url.to_string(),
            status,
        });
    }
    Ok(doc)
}

/// Loads an introspection document from disk (the `data.__schema` format).
pub fn load_schema_file(path: &Path) -> Result<Value, IntrospectError> {
    let text = std::fs::read_to_string(path).map_err(|e| IntrospectError::File {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| IntrospectError::File {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}
