use std::sync::Arc;

use canesim_interaction::backends::{BackendSet, ScriptedRouter};
use canesim_interaction::contract::{Mode, VisionAction};
use canesim_interaction::orchestrator::{orchestrate, Phase, Session, Utterance, FALLBACK_REPLY};
use canesim_interaction::remote::{RemoteChat, RemoteConfig, Transport, ENV_API_KEY, ENV_ENDPOINT, ENV_MODEL};
use canesim_interaction::report::Detection;
use canesim_interaction::transcript::Transcript;
use canesim_interaction::{InteractionError, OrchestratorConfig};
use chrono::{NaiveDate, NaiveDateTime};
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

fn noon(y: i32, m: u32, d: u32) -> NaiveDateTime {
    NaiveDate::from_ymd_opt(y, m, d).unwrap().and_hms_opt(12, 0, 0).unwrap()
}

fn room() -> Vec<Detection> {
    vec![
        Detection::new("chair", 1.6),
        Detection::new("table", 0.8),
        Detection::new("chair", 2.4),
    ]
}

fn run(
    text: &str,
) -> (
    canesim_interaction::InteractionResponse,
    canesim_interaction::backends::MockCounters,
) {
    let (b, c) = BackendSet::mocks(room(), noon(2024, 3, 20));
    let u = Utterance::new(text, noon(2024, 3, 20)).unwrap();
    let r = orchestrate(&u, &b, &OrchestratorConfig::default(), &mut Transcript::default(), 1).unwrap();
    (r, c)
}

#[test]
fn date_query_takes_voice_path_with_clock() {
    let (r, c) = run("What is the date today?");
    assert_eq!(r.mode, Some(Mode::Voice));
    assert_eq!(r.mode_path, vec![Phase::ModeRouter, Phase::Clock, Phase::Responder]);
    assert_eq!(c.clock.get(), 1);
    assert_eq!(c.detector.get(), 0);
    assert!(r.text.contains("1403-01-01"), "{}", r.text);
}

#[test]
fn find_chair_reports_steps() {
    let (r, c) = run("find the chair");
    let v = r.vision.as_ref().unwrap();
    assert_eq!((v.action, v.target.as_deref()), (VisionAction::Object, Some("chair")));
    assert_eq!(c.detector.get(), 10);
    let report = r.report.unwrap();
    assert!(report.target_found);
    assert_eq!(report.entries.len(), 2);
    assert!(r.text.contains("chair: about 4 steps"), "{}", r.text);
    assert!(r.text.contains("table: about 2 steps"), "{}", r.text);
}

#[test]
fn scene_request_skips_detector() {
    let (r, c) = run("describe my surroundings");
    assert_eq!(
        r.mode_path,
        vec![
            Phase::ModeRouter,
            Phase::VisionRouter,
            Phase::SceneDescriber,
            Phase::Responder
        ]
    );
    assert_eq!(c.detector.get(), 0);
    assert_eq!(c.scene_describer.get(), 1);
}

#[test]
fn detector_gated_across_scripted_interactions() {
    let utterances = [
        "What is the date today?",
        "tell me a joke",
        "how are you",
        "امروز چند شنبه است؟",
        "describe my surroundings",
        "what is around me",
        "می تونی بگی که جلوی من چیه؟",
        "find the chair",
        "Please locate a chair for me",
        "بطری آب را پیدا کن",
        "صندلی رو برام پیدا کن",
        "where is the cup",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (b, c) = BackendSet::mocks(room(), noon(2025, 3, 20));
    let mut log = Transcript::default();
    for i in 0..100 {
        let text = utterances.choose(&mut rng).unwrap();
        let before = c.detector.get();
        let u = Utterance::new(*text, noon(2025, 3, 20)).unwrap();
        let r = orchestrate(&u, &b, &OrchestratorConfig::default(), &mut log, i).unwrap();
        let calls = c.detector.get() - before;
        let object = r.vision.as_ref().is_some_and(|v| v.action == VisionAction::Object);
        if object {
            assert!(calls >= 1, "{text}");
        } else {
            assert_eq!(calls, 0, "{text}");
        }
    }
}

fn with_scripted(mode: &[&str], vision: &[&str]) -> BackendSet {
    let (mut b, _) = BackendSet::mocks(room(), noon(2024, 1, 1));
    b.mode_router = Box::new(ScriptedRouter::new(mode.iter().copied()));
    b.vision_router = Box::new(ScriptedRouter::new(vision.iter().copied()));
    b
}

#[test]
fn one_retry_recovers() {
    let b = with_scripted(
        &[r#"{"mode": "VISION"} ok"#, r#"{"mode": "VISION"}"#],
        &[r#"{"action": "SCENE", "target": null}"#],
    );
    let mut log = Transcript::default();
    let u = Utterance::new("anything", noon(2024, 1, 1)).unwrap();
    let r = orchestrate(&u, &b, &OrchestratorConfig::default(), &mut log, 1).unwrap();
    assert!(!r.fell_back);
    assert_eq!(r.mode_path[..2], [Phase::ModeRouter, Phase::ModeRouter]);
    assert_eq!(log.errors().count(), 1);
}

#[test]
fn second_violation_falls_back() {
    let b = with_scripted(&[r#"{"mode": "VISION"}"#], &[r#"{"action": "SCENE", "target": "cup"}"#]);
    let mut log = Transcript::default();
    let u = Utterance::new("anything", noon(2024, 1, 1)).unwrap();
    let r = orchestrate(&u, &b, &OrchestratorConfig::default(), &mut log, 1).unwrap();
    assert!(r.fell_back);
    assert_eq!(r.text, FALLBACK_REPLY);
    assert_eq!(
        r.mode_path,
        vec![
            Phase::ModeRouter,
            Phase::VisionRouter,
            Phase::VisionRouter,
            Phase::Fallback
        ]
    );
    assert_eq!(log.errors().count(), 2);
    let back = Transcript::from_ndjson(&log.to_ndjson()).unwrap();
    assert_eq!(back.records, log.records);
}

#[test]
fn blank_utterance_rejected() {
    assert!(matches!(
        Utterance::new("   ", noon(2024, 1, 1)),
        Err(InteractionError::InvalidArgument(_))
    ));
}

#[test]
fn session_waits_for_wake_phrase() {
    let (b, c) = BackendSet::mocks(room(), noon(2024, 1, 1));
    let mut s = Session::new(b, OrchestratorConfig::default());
    let t = noon(2024, 1, 1);
    assert!(s.hear("find the chair", t).unwrap().is_none());
    assert_eq!(c.mode_router.get(), 0);
    assert!(s.hear("  HELLO,  pishyar ", t).unwrap().is_none());
    assert!(s.is_awake());
    let r = s.hear_audio("find the chair".as_bytes(), t).unwrap().unwrap();
    assert!(r.report.as_ref().unwrap().target_found);
    let audio = s.speak(&r).unwrap();
    assert_eq!(audio, r.text.as_bytes());
    s.sleep();
    assert!(s.hear("find the chair", t).unwrap().is_none());
    assert_eq!(c.mode_router.get(), 1);
    assert_eq!(c.transcriber.get(), 1);
}

struct Canned(Value);

impl Transport for Canned {
    fn post_json(&self, url: &str, key: &str, body: &Value) -> Result<Value, InteractionError> {
        assert_eq!((url, key), ("http://localhost:9/v1/chat", "k"));
        assert_eq!(body["messages"][1]["content"], "find the chair");
        Ok(self.0.clone())
    }
}

#[test]
fn remote_chat_shapes() {
    let env = |k: &str| match k {
        ENV_ENDPOINT => Some("http://localhost:9/v1/chat".to_string()),
        ENV_API_KEY => Some("k".to_string()),
        _ => None,
    };
    let cfg = RemoteConfig::from_lookup(env).unwrap();
    assert!(matches!(
        RemoteConfig::from_lookup(|k| if k == ENV_MODEL { Some("m".into()) } else { None }),
        Err(InteractionError::Config(_))
    ));
    let reply = json!({"choices": [{"message": {"content": "{\"mode\": \"VISION\"}"}}]});
    let chat = RemoteChat::new(cfg.clone(), Arc::new(Canned(reply)));
    let (mut b, _) = BackendSet::mocks(room(), noon(2024, 1, 1));
    b.mode_router = Box::new(chat);
    let u = Utterance::new("find the chair", noon(2024, 1, 1)).unwrap();
    let r = orchestrate(&u, &b, &OrchestratorConfig::default(), &mut Transcript::default(), 1).unwrap();
    assert_eq!(r.mode, Some(Mode::Vision));

    let bad = RemoteChat::new(cfg, Arc::new(Canned(json!({"oops": 1}))));
    assert!(matches!(
        bad.complete("s", "find the chair"),
        Err(InteractionError::Backend(_))
    ));
}
