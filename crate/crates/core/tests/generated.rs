//! Generated scenarios run through the whole pipeline recover their labels.

use std::collections::{BTreeMap, BTreeSet};

use netsight_core::analyzers::DEFAULT_OCCUPANCY_WINDOW_SECS;
use netsight_core::knowledge::KnowledgeBundle;
use netsight_core::pipeline::{run_pipeline, ChainConfig, PipelineRun};
use netsight_core::policy::{evaluate_policies, rules_from_specs, PolicyInputs};
use netsight_core::topology::{build_l2, build_l3};
use netsight_core::trafficgen::{
    generate, knowledge_for, office_small, random_scenario, GeneratedCapture, Scenario, ScenarioKind,
};

fn run(sc: &Scenario, seed: u64) -> (GeneratedCapture, KnowledgeBundle, PipelineRun) {
    let g = generate(sc, seed).unwrap();
    let k = knowledge_for(sc).to_bundle().unwrap();
    let r = run_pipeline(&g.pcap, &ChainConfig::default_chain(), &k).unwrap();
    (g, k, r)
}

fn device_keys(r: &PipelineRun) -> BTreeSet<String> {
    r.profiles.iter().map(|p| p.key.to_string()).collect()
}

fn label_keys(g: &GeneratedCapture) -> BTreeSet<String> {
    g.sidecar.devices.iter().map(|d| d.device_key.clone()).collect()
}

fn violations(sc: &Scenario, k: &KnowledgeBundle, r: &PipelineRun) -> BTreeSet<(String, String)> {
    let rules = rules_from_specs(&sc.policies).unwrap();
    let inputs = PolicyInputs {
        events: &r.events,
        flows: &r.flows,
        resolver: &r.resolver,
    };
    evaluate_policies(&rules, &r.profiles, inputs, k)
        .into_iter()
        .map(|v| (v.rule_id, v.device_key.to_string()))
        .collect()
}

fn planted(g: &GeneratedCapture) -> BTreeSet<(String, String)> {
    g.sidecar
        .violations
        .iter()
        .map(|v| (v.rule_id.clone(), v.device_key.clone()))
        .collect()
}

/// Every labeled attribute that got resolved carries the labeled value.
fn attribute_mismatches(g: &GeneratedCapture, r: &PipelineRun) -> Vec<String> {
    let mut out = Vec::new();
    for d in &g.sidecar.devices {
        let Some(p) = r.profiles.iter().find(|p| p.key.to_string() == d.device_key) else {
            out.push(format!("{} missing", d.device_key));
            continue;
        };
        for (attr, want) in &d.attributes {
            let got = p.attribute(attr);
            let optional = attr == "is_iot" && want == "false";
            if got != Some(want.as_str()) && !(optional && got.is_none()) {
                out.push(format!("{} {attr}: want {want}, got {got:?}", d.id));
            }
        }
    }
    out
}

#[test]
fn office_small_is_a_fixed_point() {
    let sc = office_small();
    let (g, k, r) = run(&sc, 7);
    assert_eq!(r.stats.decode.malformed(), 0);
    assert_eq!(device_keys(&r), label_keys(&g));
    assert_eq!(violations(&sc, &k, &r), planted(&g));
    assert_eq!(attribute_mismatches(&g, &r), Vec::<String>::new());
    let iot: BTreeSet<String> = r
        .profiles
        .iter()
        .filter(|p| p.attribute("is_iot") == Some("true"))
        .map(|p| p.key.to_string())
        .collect();
    let want: BTreeSet<String> = g
        .sidecar
        .iot_labels
        .iter()
        .filter(|(_, v)| **v)
        .map(|(k, _)| k.clone())
        .collect();
    assert_eq!(iot, want);
}

#[test]
fn occupancy_matches_labels() {
    for (i, sc) in [office_small(), random_scenario(ScenarioKind::Occupancy, 2)]
        .iter()
        .enumerate()
    {
        let (g, k, r) = run(sc, i as u64);
        let est = r.occupancy(&k.registry, DEFAULT_OCCUPANCY_WINDOW_SECS);
        assert_eq!(est.len(), g.sidecar.occupancy.len());
        for (e, l) in est.iter().zip(&g.sidecar.occupancy) {
            assert_eq!((e.start.secs, e.end.secs), (l.start, l.end));
            assert_eq!(e.present_persons.iter().cloned().collect::<Vec<_>>(), l.persons);
            assert_eq!(e.unattributed_devices, l.unattributed);
        }
    }
}

#[test]
fn topology_matches_adjacency() {
    let sc = random_scenario(ScenarioKind::General, 5);
    let (g, _, r) = run(&sc, 5);
    let l2 = build_l2(&r.observations);
    let want: BTreeMap<_, _> = g.sidecar.adjacency.l2.iter().map(|e| ((e.a, e.b), e.frames)).collect();
    assert_eq!(l2.edges, want);
    let l3 = build_l3(&r.flows, &r.resolver);
    let got: BTreeMap<(String, String), u64> = l3
        .edges
        .iter()
        .map(|((a, b), e)| ((a.to_string(), b.to_string()), e.flows))
        .collect();
    let want: BTreeMap<(String, String), u64> = g
        .sidecar
        .adjacency
        .l3
        .iter()
        .map(|e| ((e.src.clone(), e.dst.clone()), e.flows))
        .collect();
    assert_eq!(got, want);
}

#[test]
fn random_scenarios_recover_devices_and_attributes() {
    for kind in [
        ScenarioKind::General,
        ScenarioKind::Policy,
        ScenarioKind::Iot,
        ScenarioKind::Behavior,
    ] {
        for seed in 0..3 {
            let sc = random_scenario(kind, seed);
            let (g, k, r) = run(&sc, seed);
            assert_eq!(device_keys(&r), label_keys(&g), "{kind:?} {seed}");
            assert_eq!(violations(&sc, &k, &r), planted(&g), "{kind:?} {seed}");
            assert_eq!(attribute_mismatches(&g, &r), Vec::<String>::new(), "{kind:?} {seed}");
        }
    }
}

#[test]
fn chain_runs_when_a_claim_topic_stays_empty() {
    // No device in this one sends a user agent.
    let sc = random_scenario(ScenarioKind::General, 13);
    let (g, _, r) = run(&sc, 13);
    assert_eq!(r.stats.topics.get("claims.ua"), Some(&0));
    assert_eq!(device_keys(&r), label_keys(&g));
}
