//! Reference decoders for the two router contracts, written against the
//! generic JSON tree rather than typed deserialization.

use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RefMode {
    Voice,
    Vision,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RefVision {
    Scene,
    Object(Option<String>),
}

fn object_with_keys(raw: &str, keys: &[&str]) -> Option<serde_json::Map<String, Value>> {
    let v: Value = serde_json::from_str(raw.trim()).ok()?;
    let obj = match v {
        Value::Object(o) => o,
        _ => return None,
    };
    if obj.len() != keys.len() || !keys.iter().all(|k| obj.contains_key(*k)) {
        return None;
    }
    // The generic tree silently keeps the last duplicate; count raw keys so
    // duplicates are rejected too.
    for k in keys {
        let needle = format!("\"{k}\"");
        if raw.matches(&needle).count() != 1 {
            return None;
        }
    }
    Some(obj)
}

pub fn decode_mode(raw: &str) -> Option<RefMode> {
    let obj = object_with_keys(raw, &["mode"])?;
    match obj.get("mode")? {
        Value::String(s) if s == "VOICE" => Some(RefMode::Voice),
        Value::String(s) if s == "VISION" => Some(RefMode::Vision),
        _ => None,
    }
}

pub fn decode_vision(raw: &str) -> Option<RefVision> {
    let obj = object_with_keys(raw, &["action", "target"])?;
    let target = match obj.get("target")? {
        Value::Null => None,
        Value::String(s) if !s.trim().is_empty() => Some(s.clone()),
        _ => return None,
    };
    match obj.get("action")? {
        Value::String(s) if s == "SCENE" && target.is_none() => Some(RefVision::Scene),
        Value::String(s) if s == "OBJECT" => Some(RefVision::Object(target)),
        _ => None,
    }
}
