//! Chain configuration files (JSON) and accuracy tables (CSV).

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use netsight_core::analyzers::DEFAULT_OCCUPANCY_WINDOW_SECS;
use netsight_core::pipeline::{
    ChainConfig, ChainScore, CompositionMode, CompositionStrategy, ConfigError, EngineDescriptor, EngineKind, Params,
};
use netsight_core::topology::TopologyParams;
use serde::{Deserialize, Serialize};

/// Everything an analysis run is parameterized by.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub chain: ChainConfig,
    pub topology: TopologyParams,
    pub occupancy_window_secs: u32,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            chain: ChainConfig::default_chain(),
            topology: TopologyParams::default(),
            occupancy_window_secs: DEFAULT_OCCUPANCY_WINDOW_SECS,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigFileError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Chain { path: PathBuf, source: ConfigError },
}

impl ConfigFileError {
    /// I/O problems are 2, content problems 1.
    pub fn exit_code(&self) -> u8 {
        match self {
            ConfigFileError::Io { .. } => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    engines: Vec<EngineFile>,
    #[serde(default)]
    composition: CompositionFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    topology: Option<TopologyFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    occupancy_window_secs: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EngineFile {
    engine_id: String,
    kind: String,
    #[serde(default)]
    subscribes: Vec<String>,
    #[serde(default)]
    emits: Vec<String>,
    #[serde(default)]
    params: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CompositionFile {
    mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    accuracy_file: Option<String>,
}

impl Default for CompositionFile {
    fn default() -> Self {
        CompositionFile {
            mode: "ensemble".into(),
            accuracy_file: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gw_k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    min_evidence: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hidden_k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hidden_share: Option<f64>,
}

fn param_text(v: &serde_json::Value) -> Option<String> {
    match v {
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Number(n) => Some(n.to_string()),
        serde_json::Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

/// Parses config text; `accuracy_file` is resolved against `base_dir`.
pub fn parse_config(text: &str, path: &Path, base_dir: &Path) -> Result<AnalysisConfig, ConfigFileError> {
    let file: ConfigFile = serde_json::from_str(text).map_err(|e| ConfigFileError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let invalid = |message: String| ConfigFileError::Invalid {
        path: path.to_path_buf(),
        message,
    };
    let mut engines = Vec::with_capacity(file.engines.len());
    for e in &file.engines {
        let kind = match e.kind.to_ascii_uppercase().as_str() {
            "PPE" => EngineKind::Ppe,
            "CPE" => EngineKind::Cpe,
            _ => {
                return Err(invalid(format!(
                    "engine {:?}: kind must be PPE or CPE, not {:?}",
                    e.engine_id, e.kind
                )))
            }
        };
        let mut params = Params::default();
        for (k, v) in &e.params {
            let text = param_text(v)
                .ok_or_else(|| invalid(format!("engine {:?}: parameter {k:?} must be a scalar", e.engine_id)))?;
            params.set(k, &text);
        }
        engines.push(EngineDescriptor {
            engine_id: e.engine_id.clone(),
            kind,
            subscribes: e.subscribes.clone(),
            emits: e.emits.clone(),
            params,
        });
    }
    let composition = match file.composition.mode.to_ascii_lowercase().as_str() {
        "ensemble" => CompositionStrategy::ensemble(),
        "best" => {
            let Some(acc) = &file.composition.accuracy_file else {
                return Err(invalid("best-classifier composition needs an accuracy_file".into()));
            };
            let acc_path = base_dir.join(acc);
            let text = fs::read_to_string(&acc_path).map_err(|source| ConfigFileError::Io {
                path: acc_path.clone(),
                source,
            })?;
            let table = parse_accuracy_csv(&text).map_err(|message| ConfigFileError::Invalid {
                path: acc_path,
                message,
            })?;
            CompositionStrategy::best_classifier(table)
        }
        other => {
            return Err(invalid(format!(
                "composition mode must be ensemble or best, not {other:?}"
            )))
        }
    };
    let chain = ChainConfig { engines, composition };
    chain.validate().map_err(|source| ConfigFileError::Chain {
        path: path.to_path_buf(),
        source,
    })?;
    let t = file.topology.unwrap_or_default();
    let d = TopologyParams::default();
    let topology = TopologyParams {
        gw_k: t.gw_k.unwrap_or(d.gw_k),
        min_evidence: t.min_evidence.unwrap_or(d.min_evidence),
        hidden_k: t.hidden_k.unwrap_or(d.hidden_k),
        hidden_share: t.hidden_share.unwrap_or(d.hidden_share),
    };
    if !(0.0..=1.0).contains(&topology.hidden_share) {
        return Err(invalid("topology.hidden_share must lie in [0, 1]".into()));
    }
    let occupancy_window_secs = file.occupancy_window_secs.unwrap_or(DEFAULT_OCCUPANCY_WINDOW_SECS);
    if occupancy_window_secs == 0 {
        return Err(invalid("occupancy_window_secs must be positive".into()));
    }
    Ok(AnalysisConfig {
        chain,
        topology,
        occupancy_window_secs,
    })
}

/// Reads and validates a config file, returning it with its raw bytes.
pub fn load_config(path: &Path) -> Result<(AnalysisConfig, Vec<u8>), ConfigFileError> {
    let bytes = fs::read(path).map_err(|source| ConfigFileError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let text = std::str::from_utf8(&bytes).map_err(|e| ConfigFileError::Invalid {
        path: path.to_path_buf(),
        message: format!("not UTF-8: {e}"),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let cfg = parse_config(text, path, base)?;
    Ok((cfg, bytes))
}

/// The config file form of `cfg`. Best-classifier accuracies are not
/// representable inline and are written as an `accuracy.csv` reference.
pub fn config_json(cfg: &AnalysisConfig) -> String {
    let engines = cfg
        .chain
        .engines
        .iter()
        .map(|e| EngineFile {
            engine_id: e.engine_id.clone(),
            kind: e.kind.as_str().into(),
            subscribes: e.subscribes.clone(),
            emits: e.emits.clone(),
            params: e
                .params
                .0
                .iter()
                .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
                .collect(),
        })
        .collect();
    let composition = match cfg.chain.composition.mode {
        CompositionMode::Ensemble => CompositionFile::default(),
        CompositionMode::BestClassifier => CompositionFile {
            mode: "best".into(),
            accuracy_file: Some("accuracy.csv".into()),
        },
    };
    let t = cfg.topology;
    let file = ConfigFile {
        engines,
        composition,
        topology: Some(TopologyFile {
            gw_k: Some(t.gw_k),
            min_evidence: Some(t.min_evidence),
            hidden_k: Some(t.hidden_k),
            hidden_share: Some(t.hidden_share),
        }),
        occupancy_window_secs: Some(cfg.occupancy_window_secs),
    };
    serde_json::to_string_pretty(&file).expect("plain json") + "\n"
}

/// The default configuration as file text.
pub fn default_config_json() -> String {
    config_json(&AnalysisConfig::default())
}

/// `engine_id,attribute,accuracy` with a header line.
pub fn parse_accuracy_csv(text: &str) -> Result<BTreeMap<(String, String), f64>, String> {
    let mut out = BTreeMap::new();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| format!("line {line}: {e}"))?;
        if rec.len() != 3 {
            return Err(format!("line {line}: expected engine_id,attribute,accuracy"));
        }
        let acc: f64 = rec[2]
            .parse()
            .map_err(|_| format!("line {line}: bad accuracy {:?}", &rec[2]))?;
        if !(0.0..=1.0).contains(&acc) {
            return Err(format!("line {line}: accuracy {acc} outside [0, 1]"));
        }
        if out.insert((rec[0].to_string(), rec[1].to_string()), acc).is_some() {
            return Err(format!("line {line}: duplicate entry for {}/{}", &rec[0], &rec[1]));
        }
    }
    Ok(out)
}

/// Renders chain scores as an accuracy table; engines without claims on an
/// attribute have no row.
pub fn accuracy_csv(scores: &BTreeMap<(String, String), ChainScore>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["engine_id", "attribute", "accuracy"])
        .expect("in-memory write");
    for ((engine, attr), s) in scores {
        if s.total > 0 {
            w.write_record([engine.as_str(), attr.as_str(), &format!("{:?}", s.accuracy())])
                .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}
