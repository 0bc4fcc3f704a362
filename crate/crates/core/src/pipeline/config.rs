use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::bus::topics;
use super::compose::CompositionStrategy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EngineKind {
    /// Protocol processing engine.
    Ppe,
    /// Cognitive processing engine.
    Cpe,
}

impl EngineKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EngineKind::Ppe => "PPE",
            EngineKind::Cpe => "CPE",
        }
    }
}

/// String-valued engine options with typed accessors.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Params(pub BTreeMap<String, String>);

impl Params {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.0.insert(key.to_string(), value.to_string());
    }

    pub fn f64_or(&self, engine: &str, key: &str, default: f64) -> Result<f64, ConfigError> {
        self.parse_or(engine, key, default)
    }

    pub fn u64_or(&self, engine: &str, key: &str, default: u64) -> Result<u64, ConfigError> {
        self.parse_or(engine, key, default)
    }

    fn parse_or<T: core::str::FromStr>(&self, engine: &str, key: &str, default: T) -> Result<T, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.trim().parse().map_err(|_| ConfigError::BadParam {
                engine_id: engine.to_string(),
                key: key.to_string(),
                value: v.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineDescriptor {
    pub engine_id: String,
    pub kind: EngineKind,
    pub subscribes: Vec<String>,
    pub emits: Vec<String>,
    /// `impl` selects the built-in implementation; it defaults to the
    /// engine id.
    pub params: Params,
}

impl EngineDescriptor {
    pub fn new(engine_id: &str, kind: EngineKind, subscribes: &[&str], emits: &[&str]) -> Self {
        EngineDescriptor {
            engine_id: engine_id.to_string(),
            kind,
            subscribes: subscribes.iter().map(|s| s.to_string()).collect(),
            emits: emits.iter().map(|s| s.to_string()).collect(),
            params: Params::default(),
        }
    }

    pub fn with_param(mut self, key: &str, value: &str) -> Self {
        self.params.set(key, value);
        self
    }

    pub fn implementation(&self) -> &str {
        self.params.get("impl").unwrap_or(&self.engine_id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub engines: Vec<EngineDescriptor>,
    pub composition: CompositionStrategy,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("duplicate engine id {0:?}")]
    DuplicateEngine(String),
    #[error("engine id must be nonempty")]
    EmptyEngineId,
    #[error("engine {engine_id:?} names an empty topic")]
    EmptyTopic { engine_id: String },
    #[error("topic cycle through engines {0:?}")]
    Cycle(Vec<String>),
    #[error("engine {engine_id:?} subscribes to {topic:?}, which nothing earlier emits")]
    UnsatisfiedDependency { engine_id: String, topic: String },
    #[error("engine {engine_id:?} emits onto source topic {topic:?}")]
    ReservedTopic { engine_id: String, topic: String },
    #[error("engine {engine_id:?}: unknown implementation {implementation:?}")]
    UnknownImplementation { engine_id: String, implementation: String },
    #[error("engine {engine_id:?}: bad value {value:?} for {key:?}")]
    BadParam {
        engine_id: String,
        key: String,
        value: String,
    },
}

impl ChainConfig {
    /// Every built-in engine wired for ensemble composition.
    pub fn default_chain() -> Self {
        use EngineKind::*;
        let e = EngineDescriptor::new;
        ChainConfig {
            engines: alloc::vec![
                e("oui_vendor", Cpe, &[topics::PACKETS], &["claims.manufacturer"]),
                e("dhcp_vendor", Cpe, &[topics::DHCP], &["claims.manufacturer"]),
                e("tls_issuer", Cpe, &[topics::TLS], &["claims.manufacturer"]),
                e("dns_org", Cpe, &[topics::DNS], &["claims.manufacturer"]),
                e("iot_dns", Cpe, &[topics::DNS], &["claims.iot"]),
                e("user_agent", Ppe, &[topics::HTTP], &["claims.ua"]),
                e("tls_fingerprint", Ppe, &[topics::TLS], &["claims.tls"]),
                e("behavior", Cpe, &[topics::PACKETS, topics::FLOWS], &["claims.behavior"]),
                e("registry_owner", Ppe, &[topics::PACKETS], &["claims.owner"]),
                e("iot_device_type", Cpe, &["claims.ua"], &["claims.iot"]),
            ],
            composition: CompositionStrategy::ensemble(),
        }
    }

    /// Checks ids, topic names, acyclicity and that every subscription is
    /// fed by a source topic or an earlier engine.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut ids = BTreeSet::new();
        for e in &self.engines {
            if e.engine_id.is_empty() {
                return Err(ConfigError::EmptyEngineId);
            }
            if !ids.insert(e.engine_id.as_str()) {
                return Err(ConfigError::DuplicateEngine(e.engine_id.clone()));
            }
            if e.subscribes.iter().chain(&e.emits).any(String::is_empty) {
                return Err(ConfigError::EmptyTopic {
                    engine_id: e.engine_id.clone(),
                });
            }
            if let Some(t) = e.emits.iter().find(|t| topics::SOURCES.contains(&t.as_str())) {
                return Err(ConfigError::ReservedTopic {
                    engine_id: e.engine_id.clone(),
                    topic: t.clone(),
                });
            }
        }
        for e in &self.engines {
            let imp = e.implementation();
            if !super::engines::BUILTIN_ENGINES.contains(&imp) {
                return Err(ConfigError::UnknownImplementation {
                    engine_id: e.engine_id.clone(),
                    implementation: imp.to_string(),
                });
            }
        }
        if let Some(cycle) = self.find_cycle() {
            return Err(ConfigError::Cycle(cycle));
        }
        let mut available: BTreeSet<&str> = topics::SOURCES.iter().copied().collect();
        for e in &self.engines {
            if let Some(t) = e.subscribes.iter().find(|t| !available.contains(t.as_str())) {
                return Err(ConfigError::UnsatisfiedDependency {
                    engine_id: e.engine_id.clone(),
                    topic: t.clone(),
                });
            }
            available.extend(e.emits.iter().map(String::as_str));
        }
        Ok(())
    }

    /// Engines on a cycle of the emits → subscribes relation, if any.
    fn find_cycle(&self) -> Option<Vec<String>> {
        let n = self.engines.len();
        let feeds = |i: usize, j: usize| {
            self.engines[i]
                .emits
                .iter()
                .any(|t| self.engines[j].subscribes.contains(t))
        };
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state = alloc::vec![0u8; n];
        let mut stack: Vec<usize> = Vec::new();
        fn visit(
            i: usize,
            n: usize,
            feeds: &dyn Fn(usize, usize) -> bool,
            state: &mut [u8],
            stack: &mut Vec<usize>,
        ) -> Option<Vec<usize>> {
            state[i] = 1;
            stack.push(i);
            for j in 0..n {
                if !feeds(i, j) {
                    continue;
                }
                if state[j] == 1 {
                    let from = stack.iter().position(|&k| k == j).expect("on stack");
                    return Some(stack[from..].to_vec());
                }
                if state[j] == 0 {
                    if let Some(c) = visit(j, n, feeds, state, stack) {
                        return Some(c);
                    }
                }
            }
            stack.pop();
            state[i] = 2;
            None
        }
        (0..n).find_map(|i| {
            if state[i] != 0 {
                return None;
            }
            visit(i, n, &feeds, &mut state, &mut stack)
                .map(|c| c.into_iter().map(|k| self.engines[k].engine_id.clone()).collect())
        })
    }
}
