//! The `netsight` command line. Exit codes: 0 success, 1 bad configuration
//! or content, 2 I/O failure.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use netsight_core::pipeline::{score_chains, AttributeClaim, DeviceKey, PipelineError, ATTRIBUTE_VOCABULARY};
use netsight_core::policy::{rules_from_specs, PolicyRule, PolicySpec};
use netsight_core::trafficgen::{
    generate, knowledge_for, office_small, verify_sidecar, Scenario, ScenarioError, Sidecar, SCHEMA_VERSION,
};
use netsight_core::Timestamp;

use crate::config::{accuracy_csv, default_config_json, load_config, AnalysisConfig};
use crate::export::parse_profiles;
use crate::knowledge_io::{load_knowledge, write_knowledge_dir, LoadedKnowledge};
use crate::manifest::{knowledge_dir_hash, sha256_hex, InputFile, RunManifest};

/// Scenarios built into the binary, usable in place of a scenario file.
pub const BUNDLED_SCENARIOS: [&str; 1] = ["office-small"];

#[derive(Debug, Parser)]
#[command(
    name = "netsight",
    version,
    about = "Passive network situational awareness from packet captures"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Profile devices in a capture and write every report.
    Analyze(AnalyzeArgs),
    /// Write a labeled synthetic capture for a scenario.
    Generate(GenerateArgs),
    /// Per-engine accuracy of a profile export against generator labels.
    Score(ScoreArgs),
    /// Profiles whose resolved attributes match every filter.
    Query(QueryArgs),
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub pcap: PathBuf,
    /// Chain configuration (JSON); the built-in chain when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, env = "NETSIGHT_KNOWLEDGE_DIR")]
    pub knowledge_dir: Option<PathBuf>,
    /// Policy file (JSON array of rules).
    #[arg(long)]
    pub policies: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Scenario file, or the name of a bundled scenario.
    pub scenario: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    pub profiles: PathBuf,
    /// Label sidecar written by `generate`.
    pub labels: PathBuf,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    pub profiles: PathBuf,
    /// `name=value`; repeat for a conjunction.
    #[arg(long = "attr")]
    pub attrs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

fn content(message: impl Into<String>) -> CliError {
    CliError {
        code: 1,
        message: message.into(),
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError {
        code: 2,
        message: format!("{}: {e}", path.display()),
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| io_error(path, e))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    String::from_utf8(read(path)?).map_err(|e| content(format!("{}: not UTF-8: {e}", path.display())))
}

fn write(path: &Path, text: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_error(path, e))
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis())
}

/// Runs one command; diagnostics go to `err`, results to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Analyze(a) => cmd_analyze(a, out, err),
        Command::Generate(g) => cmd_generate(g, out),
        Command::Score(s) => cmd_score(s, out),
        Command::Query(q) => cmd_query(q, out),
    }
}

pub fn load_policies(path: &Path) -> Result<(Vec<PolicyRule>, Vec<u8>), CliError> {
    let bytes = read(path)?;
    let specs: Vec<PolicySpec> = serde_json::from_slice(&bytes)
        .map_err(|e| content(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column())))?;
    let rules = rules_from_specs(&specs).map_err(|e| content(format!("{}: {e}", path.display())))?;
    Ok((rules, bytes))
}

pub fn cmd_analyze(a: &AnalyzeArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let started = now_ms();
    let capture = read(&a.pcap)?;
    let (cfg, config_bytes, config_file) = match &a.config {
        Some(p) => {
            let (cfg, bytes) = load_config(p).map_err(|e| CliError {
                code: e.exit_code(),
                message: e.to_string(),
            })?;
            let f = InputFile::new(p, &bytes);
            (cfg, bytes, Some(f))
        }
        None => (AnalysisConfig::default(), default_config_json().into_bytes(), None),
    };
    let knowledge = match &a.knowledge_dir {
        Some(dir) => load_knowledge(dir).map_err(|e| CliError {
            code: 2,
            message: e.to_string(),
        })?,
        None => LoadedKnowledge {
            warnings: vec!["no knowledge directory given; all tables empty".into()],
            ..LoadedKnowledge::default()
        },
    };
    let (rules, policies) = match &a.policies {
        Some(p) => {
            let (rules, bytes) = load_policies(p)?;
            (rules, Some(InputFile::new(p, &bytes)))
        }
        None => (Vec::new(), None),
    };
    for w in &knowledge.warnings {
        let _ = writeln!(err, "warning: {w}");
    }

    let analysis = crate::analyze(&capture, &cfg, &knowledge.bundle, &rules).map_err(|e| match e {
        PipelineError::Ingest(e) => io_error(&a.pcap, e),
        other => content(other.to_string()),
    })?;
    if let Some(t) = &analysis.run.stats.truncation {
        let _ = writeln!(err, "warning: {}: {t}; processed what came before it", a.pcap.display());
    }

    fs::create_dir_all(&a.out).map_err(|e| io_error(&a.out, e))?;
    for (name, text) in crate::render_reports(&analysis) {
        write(&a.out.join(name), text)?;
    }
    let manifest = RunManifest {
        capture: InputFile::new(&a.pcap, &capture),
        config: config_file,
        config_hash: sha256_hex(&config_bytes),
        knowledge_dir: a.knowledge_dir.as_ref().map(|d| d.display().to_string()),
        knowledge_dir_hash: knowledge_dir_hash(a.knowledge_dir.as_deref())
            .map_err(|e| io_error(a.knowledge_dir.as_deref().unwrap_or(Path::new(".")), e))?,
        policies,
        started_at_unix_ms: started,
        finished_at_unix_ms: now_ms(),
    };
    write(
        &a.out.join("manifest.json"),
        manifest.to_json(&analysis.run.stats, &knowledge),
    )?;
    let _ = writeln!(
        out,
        "{} profiles, {} violations, {} occupancy windows -> {}",
        analysis.run.profiles.len(),
        analysis.violations.len(),
        analysis.occupancy.len(),
        a.out.display()
    );
    Ok(())
}

/// A scenario file, or a bundled scenario when no such file exists.
pub fn resolve_scenario(name: &str) -> Result<Scenario, CliError> {
    let path = Path::new(name);
    if !path.exists() {
        if name == "office-small" {
            return Ok(office_small());
        }
        return Err(io_error(
            path,
            format!("no such file (bundled scenarios: {})", BUNDLED_SCENARIOS.join(", ")),
        ));
    }
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| {
        content(format!(
            "invalid scenario {}:{}:{}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })
}

pub fn cmd_generate(g: &GenerateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let scenario = resolve_scenario(&g.scenario)?;
    let capture = generate(&scenario, g.seed).map_err(|e| match e {
        ScenarioError::InvalidScenario(r) => content(format!("invalid scenario: {r}")),
    })?;
    let report =
        verify_sidecar(&capture.pcap, &capture.sidecar).map_err(|e| content(format!("self-check failed: {e}")))?;

    fs::create_dir_all(&g.out).map_err(|e| io_error(&g.out, e))?;
    write(&g.out.join("capture.pcap"), &capture.pcap)?;
    let labels = serde_json::to_string_pretty(&capture.sidecar).expect("plain json") + "\n";
    write(&g.out.join("labels.json"), labels)?;
    let sc = serde_json::to_string_pretty(&scenario).expect("plain json") + "\n";
    write(&g.out.join("scenario.json"), sc)?;
    let policies = serde_json::to_string_pretty(&scenario.policies).expect("plain json") + "\n";
    write(&g.out.join("policies.json"), policies)?;
    let kdir = g.out.join("knowledge");
    write_knowledge_dir(&knowledge_for(&scenario), &kdir).map_err(|e| io_error(&kdir, e))?;
    let _ = writeln!(
        out,
        "{}: {} packets, {} devices, {} labels verified -> {}",
        scenario.name,
        report.packets,
        capture.sidecar.devices.len(),
        report.labels_checked,
        g.out.display()
    );
    Ok(())
}

pub fn cmd_score(s: &ScoreArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let profiles =
        parse_profiles(&read_text(&s.profiles)?).map_err(|e| content(format!("{}: {e}", s.profiles.display())))?;
    let sidecar: Sidecar =
        serde_json::from_str(&read_text(&s.labels)?).map_err(|e| content(format!("{}: {e}", s.labels.display())))?;
    if sidecar.schema_version != SCHEMA_VERSION {
        return Err(content(format!(
            "{}: schema_version {} (expected {SCHEMA_VERSION})",
            s.labels.display(),
            sidecar.schema_version
        )));
    }
    let key = |k: &str, what: &Path| {
        k.parse::<DeviceKey>()
            .map_err(|_| content(format!("{}: bad device key {k:?}", what.display())))
    };
    let mut labels = BTreeMap::new();
    for (k, attrs) in sidecar.attribute_labels() {
        labels.insert(key(&k, &s.labels)?, attrs);
    }
    let mut claims = Vec::new();
    for (_, p) in &profiles {
        let device_key = key(&p.device_key, &s.profiles)?;
        for c in &p.claims {
            claims.push(AttributeClaim {
                device_key,
                attribute: c.attribute.clone(),
                value: c.value.clone(),
                confidence: c.confidence,
                engine_id: c.engine_id.clone(),
                ts: Timestamp::from_micros(c.ts),
            });
        }
    }
    let csv = accuracy_csv(&score_chains(&claims, &labels));
    match &s.out {
        Some(p) => write(p, csv),
        None => out
            .write_all(csv.as_bytes())
            .map_err(|e| io_error(Path::new("<stdout>"), e)),
    }
}

/// Splits and checks `name=value` filters.
pub fn parse_filters(attrs: &[String]) -> Result<Vec<(String, String)>, CliError> {
    attrs
        .iter()
        .map(|a| {
            let (k, v) = a
                .split_once('=')
                .ok_or_else(|| content(format!("filter {a:?} is not name=value")))?;
            let k = k.trim();
            if !ATTRIBUTE_VOCABULARY.contains(&k) {
                return Err(content(format!(
                    "unknown attribute {k:?} (known: {})",
                    ATTRIBUTE_VOCABULARY.join(", ")
                )));
            }
            Ok((k.to_string(), v.trim().to_string()))
        })
        .collect()
}

pub fn cmd_query(q: &QueryArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let filters = parse_filters(&q.attrs)?;
    let profiles =
        parse_profiles(&read_text(&q.profiles)?).map_err(|e| content(format!("{}: {e}", q.profiles.display())))?;
    for (line, p) in &profiles {
        if filters.iter().all(|(k, v)| p.attribute(k) == Some(v.as_str())) {
            writeln!(out, "{line}").map_err(|e| io_error(Path::new("<stdout>"), e))?;
        }
    }
    Ok(())
}
