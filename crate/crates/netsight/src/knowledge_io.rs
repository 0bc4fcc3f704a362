//! The knowledge directory: one file per table.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use netsight_core::knowledge::{parse_oui_prefix, DomainOwner, Ipv4Cidr, KnowledgeBundle, RegistryEntry};
use netsight_core::trafficgen::{KnowledgeSpec, UaRuleSpec};
use netsight_core::MacAddr;
use serde::Deserialize;

pub const OUI_FILE: &str = "oui.csv";
pub const UA_RULES_FILE: &str = "ua_rules.json";
pub const DOMAIN_OWNERS_FILE: &str = "domain_owners.csv";
pub const GEO_FILE: &str = "geo.csv";
pub const REGISTRY_FILE: &str = "registry.csv";
pub const TLS_FINGERPRINTS_FILE: &str = "tls_fingerprints.csv";
pub const VENDOR_ALIASES_FILE: &str = "vendor_aliases.csv";

/// Every file a knowledge directory may hold, in load order.
pub const KNOWLEDGE_FILES: [&str; 7] = [
    OUI_FILE,
    UA_RULES_FILE,
    DOMAIN_OWNERS_FILE,
    GEO_FILE,
    REGISTRY_FILE,
    TLS_FINGERPRINTS_FILE,
    VENDOR_ALIASES_FILE,
];

/// Analyzer rule files; absent ones are not worth a warning.
const SUPPLEMENTARY: [&str; 2] = [TLS_FINGERPRINTS_FILE, VENDOR_ALIASES_FILE];

#[derive(Debug, thiserror::Error)]
pub enum KnowledgeLoadError {
    #[error("cannot read {path}: {source}")]
    UnreadableFile { path: PathBuf, source: io::Error },
}

#[derive(Debug, Default)]
pub struct LoadedKnowledge {
    pub bundle: KnowledgeBundle,
    pub warnings: Vec<String>,
    /// Rejected lines (or rules) per file.
    pub skipped: BTreeMap<String, u64>,
}

impl LoadedKnowledge {
    pub fn skipped_total(&self) -> u64 {
        self.skipped.values().sum()
    }
}

fn read_optional(dir: &Path, name: &str) -> Result<Option<String>, KnowledgeLoadError> {
    let path = dir.join(name);
    match fs::read(&path) {
        Ok(bytes) => String::from_utf8(bytes)
            .map(Some)
            .map_err(|e| KnowledgeLoadError::UnreadableFile {
                path,
                source: io::Error::new(io::ErrorKind::InvalidData, e),
            }),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
        Err(source) => Err(KnowledgeLoadError::UnreadableFile { path, source }),
    }
}

/// Records of a headerless-or-headed CSV file. A first record whose first
/// field equals `header` is the header and is dropped; unreadable records
/// come back as `Err`.
fn csv_records<'a>(text: &'a str, header: &'a str) -> impl Iterator<Item = Result<Vec<String>, ()>> + 'a {
    let reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    reader.into_records().enumerate().filter_map(move |(i, r)| match r {
        Ok(rec) if i == 0 && rec.get(0).is_some_and(|f| f.eq_ignore_ascii_case(header)) => None,
        Ok(rec) => Some(Ok(rec.iter().map(str::to_string).collect())),
        Err(_) => Some(Err(())),
    })
}

fn field(rec: &[String], i: usize) -> Option<&str> {
    rec.get(i).map(String::as_str).filter(|s| !s.is_empty())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct UaRuleFile {
    pattern: String,
    #[serde(default)]
    attrs: BTreeMap<String, String>,
    rule_id: String,
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Some(true),
        "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

/// Loads whatever tables `dir` holds. Missing files give empty tables and a
/// warning; bad lines are skipped and counted.
pub fn load_knowledge(dir: &Path) -> Result<LoadedKnowledge, KnowledgeLoadError> {
    if !dir.is_dir() {
        return Err(KnowledgeLoadError::UnreadableFile {
            path: dir.to_path_buf(),
            source: io::Error::new(io::ErrorKind::NotFound, "not a directory"),
        });
    }
    let mut out = LoadedKnowledge::default();
    for name in KNOWLEDGE_FILES {
        let Some(text) = read_optional(dir, name)? else {
            if !SUPPLEMENTARY.contains(&name) {
                out.warnings.push(format!("{name} not found; table left empty"));
            }
            continue;
        };
        let k = &mut out.bundle;
        let mut bad = 0u64;
        if name == UA_RULES_FILE {
            match serde_json::from_str::<Vec<serde_json::Value>>(&text) {
                Ok(rules) => {
                    for v in rules {
                        let ok = serde_json::from_value::<UaRuleFile>(v)
                            .ok()
                            .is_some_and(|r| k.ua_rules.push(&r.rule_id, &r.pattern, r.attrs).is_ok());
                        bad += u64::from(!ok);
                    }
                }
                Err(e) => {
                    out.warnings
                        .push(format!("{name}: not a JSON array of rules ({e}); table left empty"));
                    bad += 1;
                }
            }
        } else {
            let header = match name {
                OUI_FILE => "prefix",
                DOMAIN_OWNERS_FILE => "suffix",
                GEO_FILE => "cidr",
                REGISTRY_FILE => "mac",
                TLS_FINGERPRINTS_FILE => "fingerprint",
                _ => "raw_vendor_substring",
            };
            for rec in csv_records(&text, header) {
                let ok = rec.is_ok_and(|r| load_row(k, name, &r).is_some());
                bad += u64::from(!ok);
            }
        }
        if bad > 0 {
            out.warnings.push(format!("{name}: skipped {bad} malformed line(s)"));
            out.skipped.insert(name.to_string(), bad);
        }
    }
    Ok(out)
}

fn load_row(k: &mut KnowledgeBundle, file: &str, r: &[String]) -> Option<()> {
    match file {
        OUI_FILE => {
            if r.len() != 2 {
                return None;
            }
            k.oui.insert(parse_oui_prefix(field(r, 0)?).ok()?, field(r, 1)?).ok()
        }
        DOMAIN_OWNERS_FILE => {
            if !(2..=3).contains(&r.len()) {
                return None;
            }
            let owner = DomainOwner {
                org: field(r, 1)?.to_string(),
                country: field(r, 2).map(str::to_string),
            };
            k.domains.insert(field(r, 0)?, owner).ok()
        }
        GEO_FILE => {
            if r.len() != 2 {
                return None;
            }
            let cidr: Ipv4Cidr = field(r, 0)?.parse().ok()?;
            k.geo.insert(cidr, field(r, 1)?).ok()
        }
        REGISTRY_FILE => {
            if r.len() != 5 {
                return None;
            }
            let mac: MacAddr = field(r, 0)?.parse().ok()?;
            let entry = RegistryEntry {
                owner: field(r, 1).map(str::to_string),
                device_id: field(r, 2)?.to_string(),
                device_class: field(r, 3)?.to_string(),
                authorized: parse_bool(field(r, 4)?)?,
            };
            k.registry.insert(mac, entry).ok()
        }
        TLS_FINGERPRINTS_FILE => {
            if r.len() != 2 {
                return None;
            }
            k.tls_fingerprints.insert(field(r, 0)?, field(r, 1)?).ok()
        }
        _ => {
            if r.len() != 2 {
                return None;
            }
            k.vendor_aliases.push(field(r, 0)?, field(r, 1)?).ok()
        }
    }
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

/// Renders `spec` as the seven knowledge files, by file name.
pub fn knowledge_files(spec: &KnowledgeSpec) -> BTreeMap<&'static str, String> {
    let mut files = BTreeMap::new();
    files.insert(
        OUI_FILE,
        csv_text(
            &["prefix", "vendor"],
            spec.oui.iter().map(|(p, v)| vec![p.clone(), v.clone()]),
        ),
    );
    let rules: Vec<serde_json::Value> = spec
        .ua_rules
        .iter()
        .map(|r: &UaRuleSpec| serde_json::json!({"rule_id": r.rule_id, "pattern": r.pattern, "attrs": r.attrs}))
        .collect();
    files.insert(
        UA_RULES_FILE,
        serde_json::to_string_pretty(&rules).expect("plain json") + "\n",
    );
    files.insert(
        DOMAIN_OWNERS_FILE,
        csv_text(
            &["suffix", "org", "country"],
            spec.domain_owners
                .iter()
                .map(|(s, o, c)| vec![s.clone(), o.clone(), c.clone().unwrap_or_default()]),
        ),
    );
    files.insert(
        GEO_FILE,
        csv_text(
            &["cidr", "country"],
            spec.geo.iter().map(|(c, cc)| vec![c.clone(), cc.clone()]),
        ),
    );
    files.insert(
        REGISTRY_FILE,
        csv_text(
            &["mac", "owner", "device_id", "device_class", "authorized"],
            spec.registry.iter().map(|r| {
                vec![
                    r.mac.to_string(),
                    r.owner.clone().unwrap_or_default(),
                    r.device_id.clone(),
                    r.device_class.clone(),
                    r.authorized.to_string(),
                ]
            }),
        ),
    );
    files.insert(
        TLS_FINGERPRINTS_FILE,
        csv_text(
            &["fingerprint", "stack_name"],
            spec.tls_fingerprints.iter().map(|(f, s)| vec![f.clone(), s.clone()]),
        ),
    );
    files.insert(
        VENDOR_ALIASES_FILE,
        csv_text(
            &["raw_vendor_substring", "canonical_vendor"],
            spec.vendor_aliases.iter().map(|(r, c)| vec![r.clone(), c.clone()]),
        ),
    );
    files
}

/// Writes `spec` into `dir`, creating it if needed.
pub fn write_knowledge_dir(spec: &KnowledgeSpec, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    for (name, text) in knowledge_files(spec) {
        fs::write(dir.join(name), text)?;
    }
    Ok(())
}
