use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::crypto::CurveId;
use crate::protocol::{Passkey, Variant};

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PasskeyPolicy {
    /// A new passkey for every trial.
    FreshEachSession,
    /// One passkey per trial, kept for all of that trial's sessions.
    #[default]
    ReusedAcrossSessions,
}

/// Who the devices talk to in a matrix run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixMode {
    #[default]
    Honest,
    /// Full impersonation with a uniformly drawn guess.
    MitmGuess,
    /// Full impersonation knowing the passkey.
    MitmOracle,
    /// Public-key substitution, phase 2 relayed untouched.
    Relay,
}

impl FromStr for MatrixMode {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(Value::String(s.replace('-', "_")))
            .map_err(|_| SimError::InvalidSpec(format!("unknown mode {s:?}")))
    }
}

fn default_trials() -> u32 {
    50
}

fn default_space() -> u32 {
    Passkey::MAX + 1
}

fn default_max_sessions() -> u32 {
    50
}

fn default_known_bits() -> Vec<u8> {
    vec![4, 5, 6, 7]
}

fn default_variants() -> Vec<Variant> {
    Variant::ALL.to_vec()
}

/// One experiment, as read from a config file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub name: String,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    #[serde(default = "default_trials")]
    pub trials: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub passkey_policy: PasskeyPolicy,
    #[serde(default = "default_known_bits")]
    pub known_bits: Vec<u8>,
    #[serde(default = "default_space")]
    pub space_bound: u32,
    #[serde(default = "default_max_sessions")]
    pub max_sessions: u32,
    #[serde(default)]
    pub curve: CurveId,
    #[serde(default)]
    pub mode: MatrixMode,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        serde_json::from_value(Value::Object(Map::new())).expect("all fields defaulted")
    }
}

const LIST_KEYS: [&str; 2] = ["variants", "known_bits"];
const NUMBER_KEYS: [&str; 5] = [
    "trials",
    "seed",
    "known_bits",
    "space_bound",
    "max_sessions",
];

fn scalar(key: &str, raw: &str, line: usize) -> Result<Value, SimError> {
    if NUMBER_KEYS.contains(&key) {
        raw.parse::<u64>().map(Value::from).map_err(|_| {
            SimError::InvalidSpec(format!(
                "line {line}: {key} expects an integer, got {raw:?}"
            ))
        })
    } else {
        Ok(Value::String(raw.to_string()))
    }
}

fn parse_key_value(text: &str) -> Result<Value, SimError> {
    let mut map = Map::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, raw) = line.split_once('=').ok_or_else(|| {
            SimError::InvalidSpec(format!("line {}: expected key = value", idx + 1))
        })?;
        let (key, raw) = (key.trim(), raw.trim().trim_matches('"'));
        let value = if key == "variants" && raw.eq_ignore_ascii_case("all") {
            Value::Array(
                Variant::ALL
                    .iter()
                    .map(|v| Value::String(v.to_string()))
                    .collect(),
            )
        } else if LIST_KEYS.contains(&key) {
            raw.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| scalar(key, s, idx + 1))
                .collect::<Result<Vec<_>, _>>()
                .map(Value::Array)?
        } else {
            scalar(key, raw, idx + 1)?
        };
        if map.insert(key.to_string(), value).is_some() {
            return Err(SimError::InvalidSpec(format!(
                "line {}: duplicate key {key}",
                idx + 1
            )));
        }
    }
    Ok(Value::Object(map))
}

impl ExperimentSpec {
    /// Parses JSON or `key = value` lines, whichever the text looks like.
    pub fn parse(text: &str) -> Result<Self, SimError> {
        let value = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| SimError::InvalidSpec(e.to_string()))?
        } else {
            parse_key_value(text)?
        };
        let spec: ExperimentSpec =
            serde_json::from_value(value).map_err(|e| SimError::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidSpec(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.variants.is_empty() {
            return bad("variants must not be empty".into());
        }
        if self.space_bound == 0 || self.space_bound > Passkey::MAX + 1 {
            return bad(format!(
                "space_bound must be in 1..=1000000, got {}",
                self.space_bound
            ));
        }
        if let Some(n) = self.known_bits.iter().find(|n| !(1..=20).contains(*n)) {
            return bad(format!("known_bits entries must be in 1..=20, got {n}"));
        }
        if self.max_sessions == 0 {
            return bad("max_sessions must be at least 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_value_and_json_agree() {
        let kv =
            "# fig 4\nname = fig4\nvariants = sm\ntrials = 50\nseed = 42\nknown_bits = 4, 5,6 ,7\n\
                  space_bound = 1000000\npasskey_policy = reused_across_sessions\ncurve = p256\n";
        let json = r#"{"name":"fig4","variants":["sm"],"trials":50,"seed":42,"known_bits":[4,5,6,7],
                       "space_bound":1000000,"passkey_policy":"reused_across_sessions","curve":"p256"}"#;
        let a = ExperimentSpec::parse(kv).unwrap();
        assert_eq!(a, ExperimentSpec::parse(json).unwrap());
        assert_eq!(a.variants, vec![Variant::Sm]);
        assert_eq!(a.max_sessions, 50);
    }

    #[test]
    fn defaults_and_all() {
        let s = ExperimentSpec::parse("variants = all\nmode = mitm_guess").unwrap();
        assert_eq!(s.variants, Variant::ALL.to_vec());
        assert_eq!(s.mode, MatrixMode::MitmGuess);
        assert_eq!(s.space_bound, 1_000_000);
        assert_eq!(ExperimentSpec::default().known_bits, vec![4, 5, 6, 7]);
    }

    #[test]
    fn rejects_bad_specs() {
        for text in [
            "trials = 0",
            "trials = many",
            "known_bits = 0,4",
            "space_bound = 2000000",
            "colour = blue",
            "seed = 1\nseed = 2",
            "just words",
            "variants = quantum",
        ] {
            assert!(ExperimentSpec::parse(text).is_err(), "{text}");
        }
    }

    #[test]
    fn mode_from_cli_spelling() {
        assert_eq!(
            "mitm-oracle".parse::<MatrixMode>().unwrap(),
            MatrixMode::MitmOracle
        );
        assert!("sideways".parse::<MatrixMode>().is_err());
    }
}
