//! qlscan: compile a GraphQL schema into a dependency graph, then fuzz the
//! API with dependency-aware request chains.
//!
//! Exit codes: 0 = clean run, 2 = findings present, 1 = usage or operational
//! error.

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use qlscan_core::compiler::{compile, endpoints_from_json, endpoints_to_json, ActionLexicon, Endpoint};
use qlscan_core::config::{RunConfig, RunMode};
use qlscan_core::depgraph::{build_graph, export_dot, graph_to_json, DependencyGraph};
use qlscan_core::detect::{classify_response, Finding, SeverityMap};
use qlscan_core::engine::{run_session, HttpTransport};
use qlscan_core::introspect::{fetch_introspection, load_schema_file};
use qlscan_core::materializer::CanaryTable;
use qlscan_core::mock::VulnToggles;
use qlscan_core::report::{compute_coverage, write_payload_store, write_report, write_request_log};
use qlscan_core::schema::{parse_schema, SchemaDocument};
use serde_json::Value;
use std::path::PathBuf;
use std::time::Duration;

#[derive(Parser)]
#[command(name = "qlscan", version, about = "Dependency-aware GraphQL API security tester")]
struct Cli {
    /// TOML settings file; flags override its values.
    #[arg(long, global = true)]
    settings: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fetch the schema and write the compile artifacts (schema, endpoints, graph).
    Compile(CommonFlags),
    /// Fuzz using existing compile artifacts in the output directory.
    Fuzz(CommonFlags),
    /// Compile then fuzz in one invocation.
    Run(CommonFlags),
    /// Export the dependency graph in DOT format.
    Graph(CommonFlags),
    /// Serve the bundled vulnerable fixture target for local experiments.
    Mock(MockFlags),
}

#[derive(Args, Default)]
struct CommonFlags {
    /// Target GraphQL endpoint URL.
    #[arg(long)]
    url: Option<String>,
    /// Extra HTTP header, `Name: value`; repeatable.
    #[arg(long = "header")]
    headers: Vec<String>,
    /// Introspection JSON file, for targets with introspection disabled.
    #[arg(long)]
    schema_file: Option<PathBuf>,
    /// Directory for artifacts and reports.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    retry_limit: Option<u32>,
    #[arg(long)]
    depth_cap: Option<usize>,
    /// Restrict fuzzing to these classes (e.g. SQL_INJECTION); repeatable.
    #[arg(long = "fuzz-class")]
    fuzz_classes: Vec<String>,
    #[arg(long)]
    request_timeout_ms: Option<u64>,
    #[arg(long)]
    dos_timeout_ms: Option<u64>,
    #[arg(long)]
    inter_request_delay_ms: Option<u64>,
    /// LATEST or RANDOM.
    #[arg(long)]
    lookup_strategy: Option<String>,
    #[arg(long)]
    bucket_capacity: Option<usize>,
    /// Visit endpoints in name order with no dependency gating.
    #[arg(long)]
    no_dependency_graph: bool,
    /// Disable response harvesting; ID arguments get random values.
    #[arg(long)]
    no_objects_bucket: bool,
}

#[derive(Args)]
struct MockFlags {
    #[arg(long, default_value_t = 0)]
    port: u16,
    /// JSON file of vulnerability toggles; absent means all off (secure).
    #[arg(long)]
    toggles: Option<PathBuf>,
    /// Enable every vulnerability toggle.
    #[arg(long)]
    all_on: bool,
    /// Also write the fixture's introspection document to this path, for
    /// runs where the server's introspection is gated off.
    #[arg(long)]
    schema_out: Option<PathBuf>,
}

fn parse_enum<T: serde::de::DeserializeOwned>(what: &str, s: &str) -> Result<T> {
    serde_json::from_value(Value::String(s.to_string()))
        .map_err(|_| anyhow!("unrecognized {what}: {s}"))
}

fn build_config(settings: Option<&PathBuf>, flags: &CommonFlags, mode: RunMode) -> Result<RunConfig> {
    let mut config = RunConfig::default();
    if let Some(path) = settings {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading settings file {}", path.display()))?;
        config.merge(RunConfig::parse_settings(&text)?);
    }
    config.apply_env(|k| std::env::var(k).ok());

    if let Some(url) = &flags.url {
        config.endpoint_url = url.clone();
    }
    for header in &flags.headers {
        let (name, value) = header
            .split_once(':')
            .ok_or_else(|| anyhow!("header must be `Name: value`, got {header:?}"))?;
        config.headers.insert(name.trim().to_string(), value.trim().to_string());
    }
    if flags.schema_file.is_some() {
        config.schema_file = flags.schema_file.clone();
    }
    if let Some(dir) = &flags.output_dir {
        config.output_dir = dir.clone();
    }
    macro_rules! take {
        ($flag:ident, $($field:tt)+) => {
            if let Some(v) = flags.$flag {
                config.$($field)+ = v;
            }
        };
    }
    take!(seed, seed);
    take!(retry_limit, retry_limit);
    take!(depth_cap, depth_cap);
    take!(request_timeout_ms, timeouts.request_ms);
    take!(dos_timeout_ms, timeouts.dos_ms);
    take!(inter_request_delay_ms, inter_request_delay_ms);
    take!(bucket_capacity, bucket_capacity);
    if !flags.fuzz_classes.is_empty() {
        config.fuzz_classes_enabled = flags
            .fuzz_classes
            .iter()
            .map(|s| parse_enum("fuzz class", s))
            .collect::<Result<_>>()?;
    }
    if let Some(s) = &flags.lookup_strategy {
        config.lookup_strategy = parse_enum("lookup strategy", s)?;
    }
    if flags.no_dependency_graph {
        config.ablation.use_dependency_graph = false;
    }
    if flags.no_objects_bucket {
        config.ablation.use_objects_bucket = false;
    }
    config.mode = mode;
    config.validate()?;
    Ok(config)
}

/// Obtains the raw introspection document, preferring a local file.
fn obtain_schema_doc(config: &RunConfig) -> Result<Value> {
    if let Some(path) = &config.schema_file {
        return Ok(load_schema_file(path)?);
    }
    Ok(fetch_introspection(
        &config.endpoint_url,
        &config.headers,
        Duration::from_millis(config.timeouts.request_ms),
    )?)
}

struct Artifacts {
    schema: SchemaDocument,
    endpoints: Vec<Endpoint>,
    graph: DependencyGraph,
}

fn do_compile(config: &RunConfig) -> Result<Artifacts> {
    let raw = obtain_schema_doc(config)?;
    let schema = parse_schema(&raw)?;
    let endpoints = compile(&schema, &ActionLexicon::default());
    let graph = build_graph(&endpoints, &schema);

    std::fs::create_dir_all(&config.output_dir)?;
    let write = |name: &str, text: String| -> Result<()> {
        let path = config.output_dir.join(name);
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    };
    write("schema.json", serde_json::to_string_pretty(&raw)?)?;
    write("endpoints.json", serde_json::to_string_pretty(&endpoints_to_json(&endpoints))?)?;
    write("graph.json", serde_json::to_string_pretty(&graph_to_json(&graph))?)?;
    write("graph.dot", export_dot(&graph))?;
    println!(
        "compiled {} endpoints into {} graph nodes ({})",
        endpoints.len(),
        graph.nodes.len(),
        config.output_dir.display()
    );
    Ok(Artifacts { schema, endpoints, graph })
}

fn load_artifacts(config: &RunConfig) -> Result<Artifacts> {
    let read = |name: &str| -> Result<Value> {
        let path = config.output_dir.join(name);
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("reading compile artifact {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    };
    let schema = parse_schema(&read("schema.json")?)?;
    let endpoints = endpoints_from_json(&read("endpoints.json")?, &schema).map_err(|e| anyhow!(e))?;
    let graph = qlscan_core::depgraph::graph_from_json(&read("graph.json")?).map_err(|e| anyhow!(e))?;
    Ok(Artifacts { schema, endpoints, graph })
}

/// Runs the fuzzing session and writes all reports. Returns the findings.
fn do_fuzz(config: &RunConfig, artifacts: &Artifacts) -> Result<Vec<Finding>> {
    let mut transport = HttpTransport {
        url: config.endpoint_url.clone(),
        headers: config.headers.clone(),
    };
    let canaries = CanaryTable::default();
    let output = run_session(
        &artifacts.graph,
        &artifacts.endpoints,
        &artifacts.schema,
        config,
        canaries.clone(),
        &mut transport,
    )?;

    let severities = SeverityMap::default();
    let findings: Vec<Finding> = output
        .records
        .iter()
        .filter_map(|r| classify_response(r, &canaries, &severities))
        .collect();
    let coverage = compute_coverage(&output.records, &artifacts.endpoints, &output.bucket)?;

    write_request_log(&output.records, &config.output_dir.join("requests.jsonl"))?;
    write_payload_store(&output.records, &config.output_dir.join("payloads"))?;
    write_report(&coverage, &findings, &output.bucket, &config.output_dir)?;

    println!(
        "{} requests sent; positive coverage {:.2}%, negative coverage {:.2}%, {} findings",
        output.records.len(),
        coverage.positive_percent(),
        coverage.negative_percent(),
        findings.len()
    );
    for f in &findings {
        println!("  [{:?}] {:?} at {}", f.severity, f.category, f.endpoint_name);
    }
    Ok(findings)
}

fn do_mock(flags: &MockFlags) -> Result<()> {
    let toggles = if flags.all_on {
        VulnToggles::all_on()
    } else if let Some(path) = &flags.toggles {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading toggles file {}", path.display()))?;
        serde_json::from_str(&text)?
    } else {
        VulnToggles::default()
    };
    if let Some(path) = &flags.schema_out {
        let doc = qlscan_core::mock::fixture_schema_document();
        std::fs::write(path, serde_json::to_string_pretty(&doc)?)?;
    }
    let handle = qlscan_core::mock::serve(toggles, flags.port)?;
    println!("mock target listening on {}", handle.url());
    loop {
        std::thread::sleep(Duration::from_secs(3600));
    }
}

fn real_main() -> Result<i32> {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            eprint!("{e}");
            return Ok(1);
        }
        Err(e) => {
            // --help / --version
            print!("{e}");
            return Ok(0);
        }
    };

    match &cli.command {
        Command::Compile(flags) => {
            let config = build_config(cli.settings.as_ref(), flags, RunMode::Compile)?;
            do_compile(&config)?;
            Ok(0)
        }
        Command::Graph(flags) => {
            let config = build_config(cli.settings.as_ref(), flags, RunMode::Compile)?;
            let artifacts = if config.output_dir.join("graph.json").exists() {
                load_artifacts(&config)?
            } else {
                do_compile(&config)?
            };
            print!("{}", export_dot(&artifacts.graph));
            Ok(0)
        }
        Command::Fuzz(flags) => {
            let config = build_config(cli.settings.as_ref(), flags, RunMode::Fuzz)?;
            let artifacts = load_artifacts(&config)?;
            let findings = do_fuzz(&config, &artifacts)?;
            Ok(if findings.is_empty() { 0 } else { 2 })
        }
        Command::Run(flags) => {
            let config = build_config(cli.settings.as_ref(), flags, RunMode::Run)?;
            let artifacts = do_compile(&config)?;
            let findings = do_fuzz(&config, &artifacts)?;
            Ok(if findings.is_empty() { 0 } else { 2 })
        }
        Command::Mock(flags) => {
            do_mock(flags)?;
            Ok(0)
        }
    }
}

fn main() {
    match real_main() {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}
