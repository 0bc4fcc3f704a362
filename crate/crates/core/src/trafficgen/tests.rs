use alloc::collections::BTreeSet;
use alloc::string::ToString;

use super::*;
use crate::decoders::{DecoderConfig, PacketDecoder};
use crate::ingest::read_all;

#[test]
fn empty_scenario() {
    let g = generate(&Scenario::empty("empty"), 1).unwrap();
    let (_, packets, _) = read_all(&g.pcap).unwrap();
    assert!(packets.is_empty());
    assert_eq!(g.sidecar.packet_count, 0);
    assert!(g.sidecar.devices.is_empty() && g.sidecar.violations.is_empty() && g.sidecar.occupancy.is_empty());
    assert!(verify_sidecar(&g.pcap, &g.sidecar).is_ok());
    assert!(verify_sidecar(&[], &Sidecar::default()).is_ok());
}

#[test]
fn deterministic_per_seed() {
    let s = random_scenario(ScenarioKind::General, 4);
    let a = generate(&s, 9).unwrap();
    let b = generate(&s, 9).unwrap();
    assert_eq!(a.pcap, b.pcap);
    assert_eq!(a.sidecar, b.sidecar);
    let c = generate(&s, 10).unwrap();
    assert_ne!(a.pcap, c.pcap);
}

#[test]
fn office_small_counts() {
    let g = generate(&office_small(), 7).unwrap();
    let sc = &g.sidecar;
    assert_eq!(sc.devices.len(), 12);
    let persons: BTreeSet<_> = sc.devices.iter().filter_map(|d| d.attributes.get("owner")).collect();
    assert_eq!(persons.len(), 4);
    assert_eq!(sc.violations.len(), 2);
    assert_eq!(sc.iot_labels.values().filter(|v| **v).count(), 3);
    let r = verify_sidecar(&g.pcap, sc).unwrap();
    assert_eq!(r.packets, g.packets.len() as u64);
}

#[test]
fn fake_device_fails_self_check() {
    let g = generate(&random_scenario(ScenarioKind::Iot, 1), 1).unwrap();
    let mut sc = g.sidecar.clone();
    let mut fake = sc.devices[0].clone();
    fake.mac = "02:de:ad:be:ef:01".parse().unwrap();
    fake.device_key = alloc::format!("mac:{}", fake.mac);
    sc.devices.push(fake);
    match verify_sidecar(&g.pcap, &sc) {
        Err(SelfCheckFailure::Unevidenced(v)) => assert!(v.iter().any(|m| m.contains("02:de:ad:be:ef:01"))),
        other => panic!("{other:?}"),
    }
}

#[test]
fn decodes_cleanly() {
    for kind in [
        ScenarioKind::General,
        ScenarioKind::Behavior,
        ScenarioKind::Reassignment,
    ] {
        let g = generate(&random_scenario(kind, 3), 3).unwrap();
        let (_, packets, _) = read_all(&g.pcap).unwrap();
        assert_eq!(packets, g.packets);
        let mut dec = PacketDecoder::new(DecoderConfig::default());
        for p in &packets {
            dec.decode(p);
        }
        dec.finish();
        let st = dec.stats();
        assert_eq!(st.malformed(), 0, "{kind:?}: {st:?}");
        assert!(st.is_balanced());
        assert!(!st.packet_skips.keys().any(|k| k.to_string() == "reordered"), "{st:?}");
        assert!(
            !st.app_skips.keys().any(|(_, k)| k.to_string() == "reordered"),
            "{st:?}"
        );
    }
}

#[test]
fn invalid_scenario_is_rejected() {
    let mut s = office_small();
    s.timeline[0].start = s.timeline[0].end;
    assert!(matches!(generate(&s, 0), Err(ScenarioError::InvalidScenario(_))));
}
