use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::knowledge::UaRuleSet;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UaClaim<'a> {
    pub user_agent: &'a str,
    pub rule_id: &'a str,
    pub attribute: &'a str,
    pub value: &'a str,
}

/// One result per attribute of the first matching rule, per distinct
/// user-agent string. Attributes outside `vocabulary` are ignored.
pub fn mine_user_agent<'a, I>(user_agents: I, rules: &'a UaRuleSet, vocabulary: &[&str]) -> Vec<UaClaim<'a>>
where
    I: IntoIterator<Item = &'a str>,
{
    let distinct: BTreeSet<&str> = user_agents.into_iter().collect();
    let mut out = Vec::new();
    for ua in distinct {
        let Some(m) = rules.match_user_agent(ua) else {
            continue;
        };
        for (attr, value) in m.attrs {
            if vocabulary.contains(&attr.as_str()) {
                out.push(UaClaim {
                    user_agent: ua,
                    rule_id: m.rule_id,
                    attribute: attr.as_str(),
                    value: value.as_str(),
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeMap;
    use alloc::string::{String, ToString};

    const VOCAB: [&str; 3] = ["os", "browser", "device_type"];

    fn rules() -> UaRuleSet {
        let mut r = UaRuleSet::default();
        let attrs = |pairs: &[(&str, &str)]| -> BTreeMap<String, String> {
            pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
        };
        r.push(
            "printer",
            "LaserJet",
            attrs(&[("device_type", "printer"), ("firmware", "x")]),
        )
        .unwrap();
        r.push("tablet", "Tablet", attrs(&[("device_type", "tablet"), ("os", "TabOS")]))
            .unwrap();
        r
    }

    #[test]
    fn printer_rule() {
        let r = rules();
        let found = mine_user_agent(["LaserJet/2.1"], &r, &VOCAB);
        assert_eq!(
            found,
            [UaClaim {
                user_agent: "LaserJet/2.1",
                rule_id: "printer",
                attribute: "device_type",
                value: "printer"
            }]
        );
    }

    #[test]
    fn repeats_collapse_conflicts_do_not() {
        let r = rules();
        let found = mine_user_agent(["LaserJet/2.1", "LaserJet/2.1", "Tablet/1"], &r, &VOCAB);
        let dt: Vec<_> = found
            .iter()
            .filter(|c| c.attribute == "device_type")
            .map(|c| c.value)
            .collect();
        assert_eq!(dt, ["printer", "tablet"]);
        assert_eq!(found.len(), 3);
    }

    #[test]
    fn nothing_without_user_agents() {
        assert!(mine_user_agent([], &rules(), &VOCAB).is_empty());
    }
}
