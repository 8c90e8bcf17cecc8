//! Coverage computation, the JSONL request log, the payload store, and the
//! final report files.

use crate::bucket::ObjectsBucket;
use crate::compiler::Endpoint;
use crate::detect::{request_ref, Finding};
use crate::engine::{Outcome, RequestRecord};
use crate::materializer::PayloadKind;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PerEndpoint {
    pub any_valid_success: bool,
    pub any_error: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CoverageReport {
    pub endpoints_total: usize,
    pub no_error_endpoints: usize,
    pub error_endpoints: usize,
    pub positive_coverage: f64,
    pub negative_coverage: f64,
    pub unique_objects: usize,
    pub per_endpoint: BTreeMap<String, PerEndpoint>,
}

impl CoverageReport {
    pub fn positive_percent(&self) -> f64 {
        (self.positive_coverage * 10_000.0).round() / 100.0
    }

    pub fn negative_percent(&self) -> f64 {
        (self.negative_coverage * 10_000.0).round() / 100.0
    }
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot compute coverage over zero endpoints")]
    ZeroEndpoints,
    #[error("io error writing {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io { path: path.display().to_string(), source }
}

/// An endpoint counts as error-free when any of its VALID payloads returned
/// clean data, and as erroring when any request at all elicited an error
/// response. Both can hold at once.
pub fn compute_coverage(
    records: &[RequestRecord],
    endpoints: &[Endpoint],
    bucket: &ObjectsBucket,
) -> Result<CoverageReport, ReportError> {
    if endpoints.is_empty() {
        return Err(ReportError::ZeroEndpoints);
    }
    let mut per_endpoint: BTreeMap<String, PerEndpoint> = endpoints
        .iter()
        .map(|e| (e.name.clone(), PerEndpoint::default()))
        .collect();
    for r in records {
        let Some(entry) = per_endpoint.get_mut(&r.node) else { continue };
        if r.payload.kind.is_valid() && r.outcome == Outcome::Success {
            entry.any_valid_success = true;
        }
        if matches!(r.outcome, Outcome::GraphqlError | Outcome::HttpError) {
            entry.any_error = true;
        }
    }
    let no_error_endpoints = per_endpoint.values().filter(|e| e.any_valid_success).count();
    let error_endpoints = per_endpoint.values().filter(|e| e.any_error).count();
    let total = endpoints.len();
    let unique_objects = bucket.objects().map(|o| bucket.id_count(o)).sum();
    Ok(CoverageReport {
        endpoints_total: total,
        no_error_endpoints,
        error_endpoints,
        positive_coverage: no_error_endpoints as f64 / total as f64,
        negative_coverage: error_endpoints as f64 / total as f64,
        unique_objects,
        per_endpoint,
    })
}

/// The `kind` string used in the request log.
pub fn kind_label(kind: PayloadKind) -> String {
    match kind {
        PayloadKind::MinimalValid => "MINIMAL_VALID".to_string(),
        PayloadKind::MaximalValid => "MAXIMAL_VALID".to_string(),
        PayloadKind::Fuzz(class) => format!("FUZZ:{}", class.wire_name()),
    }
}

/// One JSONL line per record: phase, node, kind, httpStatus, outcome,
/// durationMs, payloadHash.
pub fn request_log_lines(records: &[RequestRecord]) -> Vec<String> {
    records
        .iter()
        .map(|r| {
            json!({
                "phase": r.phase,
                "node": r.node,
                "kind": kind_label(r.payload.kind),
                "httpStatus": r.http_status,
                "outcome": r.outcome,
                "durationMs": r.duration_ms,
                "payloadHash": request_ref(r),
            })
            .to_string()
        })
        .collect()
}

pub fn write_request_log(records: &[RequestRecord], path: &Path) -> Result<(), ReportError> {
    let mut f = std::fs::File::create(path).map_err(io_err(path))?;
    for line in request_log_lines(records) {
        writeln!(f, "{line}").map_err(io_err(path))?;
    }
    Ok(())
}

/// Stores each distinct request body under `dir/<hash>.json`.
pub fn write_payload_store(records: &[RequestRecord], dir: &Path) -> Result<(), ReportError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    for r in records {
        let body = r.payload.body().to_string();
        let path = dir.join(format!("{}.json", crate::content_hash(body.as_bytes())));
        if !path.exists() {
            std::fs::write(&path, &body).map_err(io_err(&path))?;
        }
    }
    Ok(())
}

/// Writes `report.json` and a human-readable `report.txt`.
pub fn write_report(
    coverage: &CoverageReport,
    findings: &[Finding],
    bucket: &ObjectsBucket,
    dir: &Path,
) -> Result<(), ReportError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;

    let bucket_summary: BTreeMap<String, usize> = bucket
        .objects()
        .map(|o| (o.clone(), bucket.id_count(o)))
        .collect();
    let report = json!({
        "coverage": coverage,
        "findings": findings,
        "bucket": bucket_summary,
    });
    let json_path = dir.join("report.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&report).unwrap())
        .map_err(io_err(&json_path))?;

    let mut text = String::new();
    text.push_str(&format!(
        "endpoints: {}\npositive coverage: {:.2}% ({} error-free)\nnegative coverage: {:.2}% ({} erroring)\nunique objects: {}\nfindings: {}\n",
        coverage.endpoints_total,
        coverage.positive_percent(),
        coverage.no_error_endpoints,
        coverage.negative_percent(),
        coverage.error_endpoints,
        coverage.unique_objects,
        findings.len(),
    ));
    for f in findings {
        text.push_str(&format!(
            "- [{:?}] {:?} at {}{}: {}\n",
            f.severity,
            f.category,
            f.endpoint_name,
            f.fuzz_class.map(|c| format!(" ({c})")).unwrap_or_default(),
            f.evidence,
        ));
    }
    let txt_path = dir.join("report.txt");
    std::fs::write(&txt_path, text).map_err(io_err(&txt_path))?;
    Ok(())
}
