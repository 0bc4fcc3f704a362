use alloc::string::String;

use crate::decoders::cipher_fingerprint;
use crate::knowledge::TlsFingerprintRules;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FingerprintMatch<'a> {
    Known { fingerprint: String, stack: &'a str },
    Unknown { fingerprint: String },
}

impl FingerprintMatch<'_> {
    pub fn fingerprint(&self) -> &str {
        match self {
            FingerprintMatch::Known { fingerprint, .. } | FingerprintMatch::Unknown { fingerprint } => fingerprint,
        }
    }
}

/// Looks up the order-sensitive ClientHello fingerprint.
pub fn fingerprint_tls<'a>(suites: &[u16], rules: &'a TlsFingerprintRules) -> FingerprintMatch<'a> {
    let fingerprint = cipher_fingerprint(suites);
    match rules.lookup(&fingerprint) {
        Some(stack) => FingerprintMatch::Known { fingerprint, stack },
        None => FingerprintMatch::Unknown { fingerprint },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_and_unknown() {
        let mut rules = TlsFingerprintRules::default();
        rules.insert("1301-1302", "toy-stack-1").unwrap();
        assert_eq!(
            fingerprint_tls(&[0x1301, 0x1302], &rules),
            FingerprintMatch::Known {
                fingerprint: "1301-1302".into(),
                stack: "toy-stack-1"
            }
        );
        let swapped = fingerprint_tls(&[0x1302, 0x1301], &rules);
        assert_eq!(
            swapped,
            FingerprintMatch::Unknown {
                fingerprint: "1302-1301".into()
            }
        );
        assert_eq!(swapped.fingerprint(), "1302-1301");
    }
}
