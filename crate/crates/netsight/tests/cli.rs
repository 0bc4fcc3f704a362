use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use netsight::export::parse_profiles;
use serde_json::Value;
use tempfile::TempDir;

fn netsight(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netsight"))
        .args(args)
        .env_remove("NETSIGHT_KNOWLEDGE_DIR")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

/// office-small generated with seed 7, then analyzed.
struct Office {
    dir: TempDir,
}

impl Office {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let gen = dir.path().join("gen");
        let o = netsight(&["generate", "office-small", "--seed", "7", "--out", p(&gen)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let office = Office { dir };
        let o = office.analyze(&[], "out");
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        office
    }

    fn gen(&self, name: &str) -> PathBuf {
        self.dir.path().join("gen").join(name)
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join("out").join(name)
    }

    fn analyze(&self, extra: &[&str], out: &str) -> Output {
        let (pcap, k, pol, out) = (
            self.gen("capture.pcap"),
            self.gen("knowledge"),
            self.gen("policies.json"),
            self.dir.path().join(out),
        );
        let mut args = vec![
            "analyze",
            p(&pcap),
            "--knowledge-dir",
            p(&k),
            "--policies",
            p(&pol),
            "--out",
            p(&out),
        ];
        args.extend_from_slice(extra);
        netsight(&args)
    }
}

#[test]
fn analyze_office_small_writes_every_report() {
    let o = Office::new();
    let profiles = read(&o.out("profiles.ndjson"));
    assert_eq!(profiles.lines().count(), 12);
    let parsed = parse_profiles(&profiles).expect("profiles follow the schema");
    assert_eq!(parsed.len(), 12);
    for f in [
        "violations.ndjson",
        "topology.json",
        "occupancy.ndjson",
        "manifest.json",
        "topology.dot",
        "resiliency.ndjson",
    ] {
        assert!(o.out(f).exists(), "{f} missing");
    }
    for line in read(&o.out("violations.ndjson"))
        .lines()
        .chain(read(&o.out("occupancy.ndjson")).lines())
    {
        serde_json::from_str::<Value>(line).expect("ndjson line");
    }
    let topo: Value = serde_json::from_str(&read(&o.out("topology.json"))).unwrap();
    assert!(topo["nodes"].as_array().is_some_and(|n| !n.is_empty()));
    let manifest: Value = serde_json::from_str(&read(&o.out("manifest.json"))).unwrap();
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    assert!(manifest["finished_at_unix_ms"].as_u64() >= manifest["started_at_unix_ms"].as_u64());
}

#[test]
fn analyze_missing_pcap_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = netsight(&[
        "analyze",
        p(&dir.path().join("absent.pcap")),
        "--out",
        p(&dir.path().join("out")),
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("absent.pcap"));
}

#[test]
fn analyze_cyclic_config_exits_1() {
    let o = Office::new();
    let cfg = o.dir.path().join("cyclic.json");
    std::fs::write(
        &cfg,
        r#"{"engines": [
            {"engine_id": "a", "kind": "CPE", "subscribes": ["claims.b"], "emits": ["claims.a"], "params": {"impl": "null"}},
            {"engine_id": "b", "kind": "CPE", "subscribes": ["claims.a"], "emits": ["claims.b"], "params": {"impl": "null"}}
        ]}"#,
    )
    .unwrap();
    let out = o.analyze(&["--config", p(&cfg)], "cyclic");
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("cycle"));
}

#[test]
fn analyze_unparsable_config_exits_1_with_position() {
    let o = Office::new();
    let cfg = o.dir.path().join("broken.json");
    std::fs::write(&cfg, "{\n  \"engines\": [,]\n}").unwrap();
    let out = o.analyze(&["--config", p(&cfg)], "broken");
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("broken.json:2:"));
}

#[test]
fn config_hash_follows_config_bytes() {
    let o = Office::new();
    let a = o.dir.path().join("a.json");
    let b = o.dir.path().join("b.json");
    let text = netsight::config::default_config_json();
    std::fs::write(&a, &text).unwrap();
    std::fs::write(&b, &text).unwrap();
    let hash = |cfg: &Path, out: &str| {
        assert_eq!(code(&o.analyze(&["--config", p(cfg)], out)), 0);
        let m: Value = serde_json::from_str(&read(&o.dir.path().join(out).join("manifest.json"))).unwrap();
        m["config_hash"].as_str().unwrap().to_string()
    };
    let ha = hash(&a, "ha");
    assert_eq!(ha, hash(&b, "hb"));
    std::fs::write(&b, text.replace("\"engines\"", "\n\"engines\"")).unwrap();
    assert_ne!(ha, hash(&b, "hc"));
}

#[test]
fn analyze_empty_capture_gives_empty_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let pcap = dir.path().join("empty.pcap");
    let mut header = 0xa1b2_c3d4u32.to_le_bytes().to_vec();
    header.extend_from_slice(&2u16.to_le_bytes());
    header.extend_from_slice(&4u16.to_le_bytes());
    for w in [0u32, 0, 65535, 1] {
        header.extend_from_slice(&w.to_le_bytes());
    }
    std::fs::write(&pcap, header).unwrap();
    let out = dir.path().join("out");
    let o = netsight(&["analyze", p(&pcap), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read(&out.join("profiles.ndjson")), "");
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
}

#[test]
fn analyze_reads_knowledge_dir_from_environment() {
    let o = Office::new();
    let out = o.dir.path().join("env");
    let r = Command::new(env!("CARGO_BIN_EXE_netsight"))
        .args(["analyze", p(&o.gen("capture.pcap")), "--out", p(&out)])
        .env("NETSIGHT_KNOWLEDGE_DIR", o.gen("knowledge"))
        .output()
        .unwrap();
    assert_eq!(code(&r), 0);
    let m: Value = serde_json::from_str(&read(&out.join("manifest.json"))).unwrap();
    assert_eq!(m["inputs"]["knowledge_dir"], p(&o.gen("knowledge")));
    assert_eq!(read(&out.join("profiles.ndjson")).lines().count(), 12);
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = netsight(&[
            "generate",
            "office-small",
            "--seed",
            "3",
            "--out",
            p(&dir.path().join(out)),
        ]);
        assert_eq!(code(&o), 0);
    }
    for f in [
        "capture.pcap",
        "labels.json",
        "scenario.json",
        "policies.json",
        "knowledge/oui.csv",
    ] {
        assert_eq!(
            std::fs::read(dir.path().join("a").join(f)).unwrap(),
            std::fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
    let other = dir.path().join("c");
    assert_eq!(
        code(&netsight(&[
            "generate",
            "office-small",
            "--seed",
            "4",
            "--out",
            p(&other)
        ])),
        0
    );
    assert_ne!(
        std::fs::read(other.join("capture.pcap")).unwrap(),
        std::fs::read(dir.path().join("a/capture.pcap")).unwrap()
    );
}

#[test]
fn generate_from_scenario_file_matches_bundled() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    assert_eq!(code(&netsight(&["generate", "office-small", "--out", p(&a)])), 0);
    let b = dir.path().join("b");
    assert_eq!(
        code(&netsight(&["generate", p(&a.join("scenario.json")), "--out", p(&b)])),
        0
    );
    assert_eq!(
        std::fs::read(a.join("capture.pcap")).unwrap(),
        std::fs::read(b.join("capture.pcap")).unwrap()
    );
}

#[test]
fn generate_invalid_scenario_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good");
    assert_eq!(code(&netsight(&["generate", "office-small", "--out", p(&good)])), 0);
    let mut sc: Value = serde_json::from_str(&read(&good.join("scenario.json"))).unwrap();
    sc["timeline"][0]["device"] = "no-such-device".into();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, sc.to_string()).unwrap();
    let o = netsight(&["generate", p(&bad), "--out", p(&dir.path().join("out"))]);
    assert_eq!(code(&o), 1);
    assert!(!dir.path().join("out/capture.pcap").exists());

    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(
        code(&netsight(&["generate", p(&bad), "--out", p(&dir.path().join("out"))])),
        1
    );
    assert_eq!(
        code(&netsight(&[
            "generate",
            "no-such-scenario",
            "--out",
            p(&dir.path().join("out"))
        ])),
        2
    );
}

fn score(profiles: &Path, labels: &Path) -> Output {
    netsight(&["score", p(profiles), p(labels)])
}

#[test]
fn score_perfect_run_is_all_ones() {
    let o = Office::new();
    let r = score(&o.out("profiles.ndjson"), &o.gen("labels.json"));
    assert_eq!(code(&r), 0);
    let csv = String::from_utf8(r.stdout).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("engine_id,attribute,accuracy"));
    let rows: Vec<&str> = lines.collect();
    assert!(!rows.is_empty());
    for row in &rows {
        assert!(row.ends_with(",1.0"), "{row}");
    }
    let out = o.dir.path().join("acc.csv");
    let r = netsight(&[
        "score",
        p(&o.out("profiles.ndjson")),
        p(&o.gen("labels.json")),
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&r), 0);
    assert_eq!(read(&out), csv);
}

#[test]
fn score_empty_labels_gives_header_only() {
    let o = Office::new();
    let mut labels: Value = serde_json::from_str(&read(&o.gen("labels.json"))).unwrap();
    labels["devices"] = Value::Array(vec![]);
    let path = o.dir.path().join("empty-labels.json");
    std::fs::write(&path, labels.to_string()).unwrap();
    let r = score(&o.out("profiles.ndjson"), &path);
    assert_eq!(code(&r), 0);
    assert_eq!(String::from_utf8(r.stdout).unwrap(), "engine_id,attribute,accuracy\n");
}

#[test]
fn score_omits_engines_absent_from_profiles() {
    let o = Office::new();
    let mut lines = Vec::new();
    for line in read(&o.out("profiles.ndjson")).lines() {
        let mut v: Value = serde_json::from_str(line).unwrap();
        v["claims"]
            .as_array_mut()
            .unwrap()
            .retain(|c| c["engine_id"] != "oui_vendor");
        lines.push(v.to_string());
    }
    let path = o.dir.path().join("no-oui.ndjson");
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    let full = String::from_utf8(score(&o.out("profiles.ndjson"), &o.gen("labels.json")).stdout).unwrap();
    let r = score(&path, &o.gen("labels.json"));
    assert_eq!(code(&r), 0);
    let csv = String::from_utf8(r.stdout).unwrap();
    assert!(full.contains("\noui_vendor,"));
    assert!(!csv.contains("oui_vendor"));
    assert_eq!(
        csv.lines().count(),
        full.lines().filter(|l| !l.starts_with("oui_vendor,")).count()
    );
}

#[test]
fn score_rejects_schema_mismatch() {
    let o = Office::new();
    let mut labels: Value = serde_json::from_str(&read(&o.gen("labels.json"))).unwrap();
    labels["schema_version"] = 99.into();
    let path = o.dir.path().join("future.json");
    std::fs::write(&path, labels.to_string()).unwrap();
    let r = score(&o.out("profiles.ndjson"), &path);
    assert_eq!(code(&r), 1);
    assert!(String::from_utf8_lossy(&r.stderr).contains("schema_version"));
}

fn query(o: &Office, filters: &[&str]) -> Output {
    let profiles = o.out("profiles.ndjson");
    let mut args = vec!["query", p(&profiles)];
    for f in filters {
        args.extend(["--attr", f]);
    }
    netsight(&args)
}

#[test]
fn query_finds_the_labeled_iot_devices() {
    let o = Office::new();
    let r = query(&o, &["is_iot=true"]);
    assert_eq!(code(&r), 0);
    let labels: Value = serde_json::from_str(&read(&o.gen("labels.json"))).unwrap();
    let want: Vec<&str> = labels["iot_labels"]
        .as_object()
        .unwrap()
        .iter()
        .filter(|(_, v)| v.as_bool() == Some(true))
        .map(|(k, _)| k.as_str())
        .collect();
    assert_eq!(want.len(), 3);
    let got: Vec<String> = parse_profiles(&String::from_utf8(r.stdout).unwrap())
        .unwrap()
        .into_iter()
        .map(|(_, p)| p.device_key)
        .collect();
    let mut sorted = got.clone();
    sorted.sort();
    assert_eq!(sorted, want);
}

#[test]
fn query_without_filters_prints_every_line_in_order() {
    let o = Office::new();
    let r = query(&o, &[]);
    assert_eq!(code(&r), 0);
    assert_eq!(String::from_utf8(r.stdout).unwrap(), read(&o.out("profiles.ndjson")));
}

#[test]
fn query_contradictory_filters_match_nothing() {
    let o = Office::new();
    let r = query(&o, &["is_iot=true", "is_iot=false"]);
    assert_eq!(code(&r), 0);
    assert!(r.stdout.is_empty());
}

#[test]
fn query_conjunction_narrows() {
    let o = Office::new();
    let all = String::from_utf8(query(&o, &["is_iot=false"]).stdout).unwrap();
    let r = String::from_utf8(query(&o, &["is_iot=false", "os=Windows"]).stdout).unwrap();
    assert!(r.lines().all(|l| all.contains(l)));
    assert!(r.lines().count() <= all.lines().count());
}

#[test]
fn query_rejects_unknown_attribute_and_bad_filters() {
    let o = Office::new();
    let r = query(&o, &["colour=red"]);
    assert_eq!(code(&r), 1);
    assert!(String::from_utf8_lossy(&r.stderr).contains("colour"));
    assert_eq!(code(&query(&o, &["is_iot"])), 1);
}
