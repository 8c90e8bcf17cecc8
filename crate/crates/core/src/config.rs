//! Run configuration: defaults, TOML settings file, environment overrides.
//! Precedence is defaults < settings file < environment < CLI flags (flags
//! are applied by the CLI layer on top of the merged config).

use crate::bucket::LookupStrategy;
use crate::materializer::{FuzzClass, FuzzParams, ALL_FUZZ_CLASSES};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RunMode {
    Compile,
    Fuzz,
    Run,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Timeouts {
    pub request_ms: u64,
    pub dos_ms: u64,
}

impl Default for Timeouts {
    fn default() -> Self {
        Timeouts { request_ms: 30_000, dos_ms: 10_000 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Ablation {
    pub use_dependency_graph: bool,
    pub use_objects_bucket: bool,
}

impl Default for Ablation {
    fn default() -> Self {
        Ablation { use_dependency_graph: true, use_objects_bucket: true }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunConfig {
    pub endpoint_url: String,
    pub headers: BTreeMap<String, String>,
    pub schema_file: Option<PathBuf>,
    pub mode: RunMode,
    pub retry_limit: u32,
    pub depth_cap: usize,
    pub fuzz_classes_enabled: BTreeSet<FuzzClass>,
    pub fuzz_params: FuzzParams,
    pub timeouts: Timeouts,
    pub seed: u64,
    pub ablation: Ablation,
    pub output_dir: PathBuf,
    pub inter_request_delay_ms: u64,
    pub lookup_strategy: LookupStrategy,
    pub bucket_capacity: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            endpoint_url: String::new(),
            headers: BTreeMap::new(),
            schema_file: None,
            mode: RunMode::Run,
            retry_limit: 3,
            depth_cap: 2,
            fuzz_classes_enabled: ALL_FUZZ_CLASSES.into_iter().collect(),
            fuzz_params: FuzzParams::default(),
            timeouts: Timeouts::default(),
            seed: 0,
            ablation: Ablation::default(),
            output_dir: PathBuf::from("qlscan-out"),
            inter_request_delay_ms: 0,
            lookup_strategy: LookupStrategy::Latest,
            bucket_capacity: crate::bucket::DEFAULT_CAPACITY,
        }
    }
}

/// Settings-file shape: every field optional so absent keys keep their
/// current value.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct PartialConfig {
    pub endpoint_url: Option<String>,
    pub headers: Option<BTreeMap<String, String>>,
    pub schema_file: Option<PathBuf>,
    pub mode: Option<RunMode>,
    pub retry_limit: Option<u32>,
    pub depth_cap: Option<usize>,
    pub fuzz_classes_enabled: Option<Vec<FuzzClass>>,
    pub fuzz_params: Option<PartialFuzzParams>,
    pub timeouts: Option<PartialTimeouts>,
    pub seed: Option<u64>,
    pub ablation: Option<PartialAblation>,
    pub output_dir: Option<PathBuf>,
    pub inter_request_delay_ms: Option<u64>,
    pub lookup_strategy: Option<LookupStrategy>,
    pub bucket_capacity: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct PartialFuzzParams {
    pub depth: Option<usize>,
    pub alias_count: Option<usize>,
    pub dup_count: Option<usize>,
    pub batch_count: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct PartialTimeouts {
    pub request_ms: Option<u64>,
    pub dos_ms: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct PartialAblation {
    pub use_dependency_graph: Option<bool>,
    pub use_objects_bucket: Option<bool>,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("settings file error: {0}")]
    Settings(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl RunConfig {
    /// Overlays every present field of `p` onto `self`.
    pub fn merge(&mut self, p: PartialConfig) {
        macro_rules! take {
            ($field:ident) => {
                if let Some(v) = p.$field {
                    self.$field = v;
                }
            };
        }
        take!(endpoint_url);
        take!(headers);
        take!(mode);
        take!(retry_limit);
        take!(depth_cap);
        take!(seed);
        take!(output_dir);
        take!(inter_request_delay_ms);
        take!(lookup_strategy);
        take!(bucket_capacity);
        if p.schema_file.is_some() {
            self.schema_file = p.schema_file;
        }
        if let Some(classes) = p.fuzz_classes_enabled {
            self.fuzz_classes_enabled = classes.into_iter().collect();
        }
        if let Some(fp) = p.fuzz_params {
            if let Some(v) = fp.depth {
                self.fuzz_params.depth = v;
            }
            if let Some(v) = fp.alias_count {
                self.fuzz_params.alias_count = v;
            }
            if let Some(v) = fp.dup_count {
                self.fuzz_params.dup_count = v;
            }
            if let Some(v) = fp.batch_count {
                self.fuzz_params.batch_count = v;
            }
        }
        if let Some(t) = p.timeouts {
            if let Some(v) = t.request_ms {
                self.timeouts.request_ms = v;
            }
            if let Some(v) = t.dos_ms {
                self.timeouts.dos_ms = v;
            }
        }
        if let Some(a) = p.ablation {
            if let Some(v) = a.use_dependency_graph {
                self.ablation.use_dependency_graph = v;
            }
            if let Some(v) = a.use_objects_bucket {
                self.ablation.use_objects_bucket = v;
            }
        }
    }

    /// Parses a TOML settings document into an overlay.
    pub fn parse_settings(text: &str) -> Result<PartialConfig, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Settings(e.to_string()))
    }

    /// Environment overrides, keeping secrets out of the settings file:
    /// `QLSCAN_URL` and `QLSCAN_AUTH_HEADER` (format `Name: value`).
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) {
        if let Some(url) = get("QLSCAN_URL") {
            self.endpoint_url = url;
        }
        if let Some(header) = get("QLSCAN_AUTH_HEADER") {
            if let Some((name, value)) = header.split_once(':') {
                self.headers
                    .insert(name.trim().to_string(), value.trim().to_string());
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.depth_cap < 1 {
            return Err(ConfigError::Invalid("depthCap must be at least 1".into()));
        }
        if self.bucket_capacity < 1 {
            return Err(ConfigError::Invalid("bucketCapacity must be at least 1".into()));
        }
        if self.mode != RunMode::Compile && self.endpoint_url.is_empty() {
            return Err(ConfigError::Invalid("endpointUrl is required".into()));
        }
        if self.mode == RunMode::Fuzz {
            let endpoints = self.output_dir.join("endpoints.json");
            if !endpoints.exists() {
                return Err(ConfigError::Invalid(format!(
                    "fuzz mode requires a prior compile artifact at {}",
                    endpoints.display()
                )));
            }
        }
        Ok(())
    }
}
