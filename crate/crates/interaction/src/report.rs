//! Collapses detector output into the per-label step report read to the
//! user.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::kws::normalize;

pub const STEP_LENGTH_M: f64 = 0.40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub label: String,
    pub distance_m: f64,
}

impl Detection {
    pub fn new(label: impl Into<String>, distance_m: f64) -> Self {
        Self {
            label: label.into(),
            distance_m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectReportEntry {
    pub label: String,
    pub steps: u32,
    pub found_target: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ObjectReport {
    pub entries: Vec<ObjectReportEntry>,
    pub target: Option<String>,
    pub target_found: bool,
}

/// Whole steps to cover `distance_m`, ties rounded to even. The quotient is
/// snapped to 1e-9 first so 1.0 / 0.4 counts as an exact tie.
pub fn distance_to_steps(distance_m: f64, step_length_m: f64) -> u32 {
    let q = distance_m.max(0.0) / step_length_m;
    let snapped = (q * 1e9).round() / 1e9;
    snapped.round_ties_even() as u32
}

/// One entry per case-folded label at its nearest distance, sorted by label.
pub fn build_object_report(detections: &[Detection], target: Option<&str>, step_length_m: f64) -> ObjectReport {
    let mut nearest: BTreeMap<String, f64> = BTreeMap::new();
    for d in detections {
        let label = normalize(&d.label);
        if label.is_empty() || !d.distance_m.is_finite() {
            continue;
        }
        nearest
            .entry(label)
            .and_modify(|m| *m = m.min(d.distance_m))
            .or_insert(d.distance_m);
    }
    let wanted = target.map(normalize).filter(|t| !t.is_empty());
    let entries: Vec<ObjectReportEntry> = nearest
        .into_iter()
        .map(|(label, dist)| ObjectReportEntry {
            found_target: wanted.as_deref() == Some(label.as_str()),
            steps: distance_to_steps(dist, step_length_m),
            label,
        })
        .collect();
    ObjectReport {
        target_found: entries.iter().any(|e| e.found_target),
        entries,
        target: wanted,
    }
}

impl ObjectReport {
    /// Plain-text block handed to the responder.
    pub fn to_context(&self) -> String {
        let mut out = String::from("Nearby objects:");
        if self.entries.is_empty() {
            out.push_str(" none");
        }
        for e in &self.entries {
            out.push_str(&format!("\n{}: about {} steps", e.label, e.steps));
        }
        if let Some(t) = &self.target {
            let status = if self.target_found { "found" } else { "not found" };
            out.push_str(&format!("\nSearch for \"{t}\": {status}"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chair_and_table() {
        let r = build_object_report(
            &[Detection::new("chair", 1.6), Detection::new("table", 0.8)],
            Some("chair"),
            STEP_LENGTH_M,
        );
        assert!(r.target_found);
        assert_eq!(r.entries.len(), 2);
        assert_eq!((r.entries[0].label.as_str(), r.entries[0].steps), ("chair", 4));
        assert_eq!((r.entries[1].label.as_str(), r.entries[1].steps), ("table", 2));
    }

    #[test]
    fn duplicates_keep_nearest_and_ties_go_even() {
        let r = build_object_report(
            &[Detection::new("cup", 1.0), Detection::new("Cup", 1.2)],
            None,
            STEP_LENGTH_M,
        );
        assert_eq!(r.entries.len(), 1);
        assert_eq!(r.entries[0].steps, 2);
        assert_eq!(distance_to_steps(0.6, STEP_LENGTH_M), 2);
        assert_eq!(distance_to_steps(1.4, STEP_LENGTH_M), 4);
        assert_eq!(distance_to_steps(0.0, STEP_LENGTH_M), 0);
    }

    #[test]
    fn empty_detections() {
        let r = build_object_report(&[], Some("bottle"), STEP_LENGTH_M);
        assert!(r.entries.is_empty());
        assert!(!r.target_found);
    }
}
