//! Strict JSON grammars for the two router outputs.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::InteractionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "VOICE")]
    Voice,
    #[serde(rename = "VISION")]
    Vision,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VisionAction {
    #[serde(rename = "SCENE")]
    Scene,
    #[serde(rename = "OBJECT")]
    Object,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VisionDecision {
    pub action: VisionAction,
    pub target: Option<String>,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Voice => "VOICE",
            Mode::Vision => "VISION",
        })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMode {
    mode: Mode,
}

// `deserialize_with` turns off serde's implicit default for a missing
// Option field, so "target" has to be spelled out even when null.
fn required_nullable<'de, D: Deserializer<'de>>(d: D) -> Result<Option<String>, D::Error> {
    Option::<String>::deserialize(d)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVision {
    action: VisionAction,
    #[serde(deserialize_with = "required_nullable")]
    target: Option<String>,
}

/// Top-level JSON object that refuses repeated keys, which serde_json would
/// otherwise resolve silently.
struct UniqueObject(serde_json::Map<String, serde_json::Value>);

impl<'de> Deserialize<'de> for UniqueObject {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> serde::de::Visitor<'de> for V {
            type Value = UniqueObject;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a JSON object")
            }

            fn visit_map<A: serde::de::MapAccess<'de>>(self, mut map: A) -> Result<UniqueObject, A::Error> {
                let mut out = serde_json::Map::new();
                while let Some((k, v)) = map.next_entry::<String, serde_json::Value>()? {
                    if out.contains_key(&k) {
                        return Err(serde::de::Error::custom(format!("duplicate key `{k}`")));
                    }
                    out.insert(k, v);
                }
                Ok(UniqueObject(out))
            }
        }
        d.deserialize_map(V)
    }
}

fn strict<T: serde::de::DeserializeOwned>(raw: &str) -> Result<T, InteractionError> {
    let obj: UniqueObject = serde_json::from_str(raw).map_err(|e| violation(raw, e.to_string()))?;
    serde_json::from_value(serde_json::Value::Object(obj.0)).map_err(|e| violation(raw, e.to_string()))
}

fn violation(raw: &str, reason: impl Into<String>) -> InteractionError {
    InteractionError::ContractViolation {
        raw: raw.to_string(),
        reason: reason.into(),
    }
}

/// Accepts exactly `{"mode": "VOICE"}` or `{"mode": "VISION"}` with
/// arbitrary JSON whitespace.
pub fn parse_mode_decision(raw: &str) -> Result<Mode, InteractionError> {
    strict::<RawMode>(raw).map(|m| m.mode)
}

/// Accepts exactly the keys `action` and `target`. SCENE requires a null
/// target; a present target must not be blank.
pub fn parse_vision_decision(raw: &str) -> Result<VisionDecision, InteractionError> {
    let v: RawVision = strict(raw)?;
    match (&v.action, &v.target) {
        (VisionAction::Scene, Some(_)) => Err(violation(raw, "SCENE must carry a null target")),
        (_, Some(t)) if t.trim().is_empty() => Err(violation(raw, "target must not be blank")),
        _ => Ok(VisionDecision {
            action: v.action,
            target: v.target,
        }),
    }
}

pub fn render_mode(mode: Mode) -> String {
    format!(r#"{{"mode": "{mode}"}}"#)
}

pub fn render_vision(decision: &VisionDecision) -> String {
    let action = match decision.action {
        VisionAction::Scene => "SCENE",
        VisionAction::Object => "OBJECT",
    };
    let target = match &decision.target {
        Some(t) => serde_json::to_string(t).expect("string serializes"),
        None => "null".to_string(),
    };
    format!(r#"{{"action": "{action}", "target": {target}}}"#)
}
