//! Response classification: turning request records into findings.

use crate::engine::{Outcome, RequestRecord};
use crate::materializer::{CanaryTable, FuzzClass, PayloadKind};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Category {
    Dos,
    InjectionServerSide,
    ClientSideOther,
    InternalError,
    InfoDisclosure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Severity {
    Info,
    Low,
    Medium,
    High,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Finding {
    pub endpoint_name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fuzz_class: Option<FuzzClass>,
    pub category: Category,
    pub evidence: String,
    /// Hash of the stored request body that produced the evidence.
    pub request_ref: String,
    pub severity: Severity,
}

/// Severity assignments, loadable from a JSON data file so triage policy can
/// change without code changes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct SeverityMap {
    pub dos: Severity,
    pub injection_server_side: Severity,
    pub client_side_other: Severity,
    pub internal_error_http: Severity,
    pub internal_error_graphql: Severity,
    pub info_disclosure: Severity,
}

impl Default for SeverityMap {
    fn default() -> Self {
        SeverityMap {
            dos: Severity::Medium,
            injection_server_side: Severity::High,
            client_side_other: Severity::Medium,
            internal_error_http: Severity::High,
            internal_error_graphql: Severity::Low,
            info_disclosure: Severity::Medium,
        }
    }
}

/// Denial-of-service evidence floor: a fuzz request must stall at least this
/// long (or 10x the endpoint's minimal-request control) to count.
pub const DOS_FLOOR_MS: u64 = 2000;
pub const DOS_MULTIPLIER: u64 = 10;

fn excerpt(text: &str) -> String {
    let cut: String = text.chars().take(200).collect();
    if cut.is_empty() {
        "(empty response body)".to_string()
    } else {
        cut
    }
}

/// The hash under which this record's request body is stored.
pub fn request_ref(record: &RequestRecord) -> String {
    crate::content_hash(record.payload.body().to_string().as_bytes())
}

/// Classifies one record. Returns None for unremarkable traffic.
pub fn classify_response(
    record: &RequestRecord,
    canaries: &CanaryTable,
    severities: &SeverityMap,
) -> Option<Finding> {
    let mk = |category, severity, fuzz_class, evidence: String| {
        Some(Finding {
            endpoint_name: record.node.clone(),
            fuzz_class,
            category,
            evidence,
            request_ref: request_ref(record),
            severity,
        })
    };

    if record.http_status >= 500 {
        return mk(
            Category::InternalError,
            severities.internal_error_http,
            None,
            format!("HTTP {}: {}", record.http_status, excerpt(&record.response_body)),
        );
    }

    if let PayloadKind::Fuzz(class) = record.payload.kind {
        if class.is_injection() {
            let entry = canaries.entry(class)?;
            let hit = record.response_body.contains(&entry.signature)
                && entry
                    .veto
                    .as_ref()
                    .map(|v| !record.response_body.contains(v))
                    .unwrap_or(true);
            if hit {
                let (category, severity) = match class {
                    FuzzClass::StoredXss | FuzzClass::HtmlInjection => {
                        (Category::ClientSideOther, severities.client_side_other)
                    }
                    _ => (Category::InjectionServerSide, severities.injection_server_side),
                };
                return mk(
                    category,
                    severity,
                    Some(class),
                    format!("canary signature {:?} observed in response", entry.signature),
                );
            }
            return None;
        }
        if class.is_dos() {
            if !record.control_success {
                return None;
            }
            let threshold = (record.control_duration_ms * DOS_MULTIPLIER).max(DOS_FLOOR_MS);
            if record.timed_out || record.duration_ms >= threshold {
                return mk(
                    Category::Dos,
                    severities.dos,
                    Some(class),
                    format!(
                        "fuzz request took {} ms (control {} ms, threshold {} ms{})",
                        record.duration_ms,
                        record.control_duration_ms,
                        threshold,
                        if record.timed_out { ", timed out" } else { "" }
                    ),
                );
            }
            return None;
        }
        match class {
            FuzzClass::InfoDisclosure => {
                if record.outcome == Outcome::Success && record.response_body.contains("__schema")
                {
                    return mk(
                        Category::InfoDisclosure,
                        severities.info_disclosure,
                        Some(class),
                        "introspection probe answered with schema data".to_string(),
                    );
                }
                return None;
            }
            FuzzClass::DenylistBypass => {
                if record.outcome == Outcome::Success && record.control_rejected {
                    return mk(
                        Category::ClientSideOther,
                        severities.client_side_other,
                        Some(class),
                        "re-encoded query succeeded where the plain form was rejected"
                            .to_string(),
                    );
                }
                return None;
            }
            _ => return None,
        }
    }

    if record.payload.kind.is_valid() && record.outcome == Outcome::GraphqlError {
        return mk(
            Category::InternalError,
            severities.internal_error_graphql,
            None,
            format!("valid payload returned errors: {}", excerpt(&record.response_body)),
        );
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Phase;
    use crate::materializer::Payload;

    fn record(kind: PayloadKind) -> RequestRecord {
        let mut payload = Payload::stub("createCurrency");
        payload.kind = kind;
        RequestRecord {
            phase: Phase::P1Create,
            node: "createCurrency".to_string(),
            payload,
            http_status: 200,
            duration_ms: 10,
            response_body: r#"{"data":{"x":1}}"#.to_string(),
            outcome: Outcome::Success,
            timed_out: false,
            control_success: true,
            control_duration_ms: 10,
            control_rejected: false,
        }
    }

    #[test]
    fn http_500_is_high_internal_error() {
        let mut r = record(PayloadKind::MinimalValid);
        r.http_status = 500;
        r.outcome = Outcome::HttpError;
        let f = classify_response(&r, &CanaryTable::default(), &SeverityMap::default()).unwrap();
        assert_eq!(f.category, Category::InternalError);
        assert_eq!(f.severity, Severity::High);
    }

    #[test]
    fn sql_signature_yields_injection_finding() {
        let mut r = record(PayloadKind::Fuzz(FuzzClass::SqlInjection));
        r.response_body = r#"{"data":null,"errors":[{"message":"SQL syntax error near x"}]}"#.into();
        r.outcome = Outcome::GraphqlError;
        let f = classify_response(&r, &CanaryTable::default(), &SeverityMap::default()).unwrap();
        assert_eq!(f.category, Category::InjectionServerSide);
        assert_eq!(f.fuzz_class, Some(FuzzClass::SqlInjection));
    }

    #[test]
    fn command_echo_without_execution_is_vetoed() {
        let mut r = record(PayloadKind::Fuzz(FuzzClass::OsCommandInjection));
        r.response_body = r#"{"data":{"name":"$(echo qlx_cmd_canary)"}}"#.into();
        assert!(classify_response(&r, &CanaryTable::default(), &SeverityMap::default()).is_none());
        r.response_body = r#"{"data":{"name":"qlx_cmd_canary"}}"#.into();
        assert!(classify_response(&r, &CanaryTable::default(), &SeverityMap::default()).is_some());
    }

    #[test]
    fn dos_needs_threshold_and_control() {
        let mut r = record(PayloadKind::Fuzz(FuzzClass::DeepRecursion));
        r.duration_ms = 2500;
        r.control_duration_ms = 10;
        let f = classify_response(&r, &CanaryTable::default(), &SeverityMap::default()).unwrap();
        assert_eq!(f.category, Category::Dos);
        // Below the 2 s floor: no finding even though 10x control is exceeded.
        r.duration_ms = 900;
        assert!(classify_response(&r, &CanaryTable::default(), &SeverityMap::default()).is_none());
        // No control success: no finding.
        r.duration_ms = 2500;
        r.control_success = false;
        assert!(classify_response(&r, &CanaryTable::default(), &SeverityMap::default()).is_none());
    }

    #[test]
    fn timeout_with_healthy_control_is_dos() {
        let mut r = record(PayloadKind::Fuzz(FuzzClass::BatchQuery));
        r.outcome = Outcome::TransportError;
        r.timed_out = true;
        r.duration_ms = 0;
        let f = classify_response(&r, &CanaryTable::default(), &SeverityMap::default()).unwrap();
        assert_eq!(f.category, Category::Dos);
    }

    #[test]
    fn denylist_bypass_requires_rejected_control() {
        let mut r = record(PayloadKind::Fuzz(FuzzClass::DenylistBypass));
        r.control_rejected = true;
        let f = classify_response(&r, &CanaryTable::default(), &SeverityMap::default()).unwrap();
        assert_eq!(f.category, Category::ClientSideOther);
        r.control_rejected = false;
        assert!(classify_response(&r, &CanaryTable::default(), &SeverityMap::default()).is_none());
    }

    #[test]
    fn valid_graphql_error_is_low_internal_error() {
        let mut r = record(PayloadKind::MaximalValid);
        r.outcome = Outcome::GraphqlError;
        r.response_body = r#"{"data":null,"errors":[{"message":"boom"}]}"#.into();
        let f = classify_response(&r, &CanaryTable::default(), &SeverityMap::default()).unwrap();
        assert_eq!(f.severity, Severity::Low);
    }

    #[test]
    fn clean_valid_success_is_unremarkable() {
        let r = record(PayloadKind::MinimalValid);
        assert!(classify_response(&r, &CanaryTable::default(), &SeverityMap::default()).is_none());
    }
}
