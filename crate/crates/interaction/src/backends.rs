//! Backend contracts and deterministic, call-counting mock implementations.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use chrono::NaiveDateTime;

use crate::contract::{render_mode, render_vision, Mode, VisionAction, VisionDecision};
use crate::error::InteractionError;
use crate::kws::normalize;
use crate::report::Detection;

pub type BackendResult<T> = Result<T, InteractionError>;

pub trait Transcriber: Send + Sync {
    fn transcribe(&self, audio: &[u8]) -> BackendResult<String>;
}

/// Returns the raw router text; parsing happens in the orchestrator.
pub trait ModeRouter: Send + Sync {
    fn route(&self, utterance: &str) -> BackendResult<String>;
}

pub trait VisionRouter: Send + Sync {
    fn route(&self, utterance: &str) -> BackendResult<String>;
}

pub trait SceneDescriber: Send + Sync {
    fn describe(&self) -> BackendResult<String>;
}

/// One detector sample; the orchestrator unions several of them.
pub trait Detector: Send + Sync {
    fn detect(&self) -> BackendResult<Vec<Detection>>;
}

pub trait Responder: Send + Sync {
    fn respond(&self, system: &str, user: &str) -> BackendResult<String>;
}

pub trait SpeechSynthesizer: Send + Sync {
    fn synthesize(&self, text: &str) -> BackendResult<Vec<u8>>;
}

pub trait Clock: Send + Sync {
    fn now(&self) -> NaiveDateTime;
}

pub struct BackendSet {
    pub transcriber: Box<dyn Transcriber>,
    pub mode_router: Box<dyn ModeRouter>,
    pub vision_router: Box<dyn VisionRouter>,
    pub scene_describer: Box<dyn SceneDescriber>,
    pub detector: Box<dyn Detector>,
    pub responder: Box<dyn Responder>,
    pub speech_synthesizer: Box<dyn SpeechSynthesizer>,
    pub clock: Box<dyn Clock>,
}

/// Shared call counter handed out by every mock.
#[derive(Debug, Clone, Default)]
pub struct CallCounter(Arc<AtomicUsize>);

impl CallCounter {
    pub fn get(&self) -> usize {
        self.0.load(Ordering::SeqCst)
    }

    fn bump(&self) {
        self.0.fetch_add(1, Ordering::SeqCst);
    }
}

// Keyword tables, English and Persian, matched on normalized text.
const VISION_WORDS: &[&str] = &[
    "find",
    "locate",
    "where",
    "look",
    "see",
    "describe",
    "around",
    "front",
    "ahead",
    "near",
    "nearby",
    "obstacle",
    "obstacles",
    "distance",
    "far",
    "people",
    "person",
    "crowd",
    "navigate",
    "surroundings",
    "show",
    "identify",
    "پیدا",
    "کجا",
    "جلوی",
    "جلو",
    "اطراف",
    "ببین",
    "نگاه",
    "توصیف",
    "مانع",
    "فاصله",
    "آدم",
    "اطرافم",
    "چیه",
];
const OBJECT_WORDS: &[&str] = &["find", "locate", "identify", "where", "پیدا", "کجا", "کجاست"];

/// Persian and English object nouns mapped to detector labels.
const OBJECT_NOUNS: &[(&str, &str)] = &[
    ("chair", "chair"),
    ("chairs", "chair"),
    ("seat", "chair"),
    ("صندلی", "chair"),
    ("bottle", "bottle"),
    ("بطری", "bottle"),
    ("cup", "cup"),
    ("mug", "cup"),
    ("لیوان", "cup"),
    ("فنجان", "cup"),
    ("table", "table"),
    ("میز", "table"),
    ("phone", "cell phone"),
    ("گوشی", "cell phone"),
    ("door", "door"),
    ("person", "person"),
];
const TIME_WORDS: &[&str] = &[
    "date",
    "time",
    "today",
    "day",
    "clock",
    "month",
    "year",
    "امروز",
    "تاریخ",
    "ساعت",
    "روز",
    "شنبه",
    "چندم",
];

fn tokens(text: &str) -> Vec<String> {
    normalize(text)
        .split(|c: char| !(c.is_alphanumeric() || c == '\u{200c}'))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

fn contains_any(tokens: &[String], words: &[&str]) -> bool {
    tokens.iter().any(|t| words.contains(&t.as_str()))
}

/// First recognized object noun, in utterance order.
pub fn object_target(text: &str) -> Option<String> {
    tokens(text).iter().find_map(|t| {
        OBJECT_NOUNS
            .iter()
            .find(|(w, _)| *w == t.as_str())
            .map(|(_, label)| label.to_string())
    })
}

pub fn asks_for_time(text: &str) -> bool {
    contains_any(&tokens(text), TIME_WORDS)
}

pub fn mock_mode_decision(text: &str) -> Mode {
    let t = tokens(text);
    if contains_any(&t, VISION_WORDS) || (object_target(text).is_some() && !contains_any(&t, TIME_WORDS)) {
        Mode::Vision
    } else {
        Mode::Voice
    }
}

pub fn mock_vision_decision(text: &str) -> VisionDecision {
    let target = object_target(text);
    let wants_object = contains_any(&tokens(text), OBJECT_WORDS) || target.is_some();
    if wants_object {
        VisionDecision {
            action: VisionAction::Object,
            target,
        }
    } else {
        VisionDecision {
            action: VisionAction::Scene,
            target: None,
        }
    }
}

#[derive(Debug, Default)]
pub struct MockTranscriber {
    pub calls: CallCounter,
}

impl Transcriber for MockTranscriber {
    /// Audio is UTF-8 text in the mock.
    fn transcribe(&self, audio: &[u8]) -> BackendResult<String> {
        self.calls.bump();
        String::from_utf8(audio.to_vec()).map_err(|e| InteractionError::Backend(e.to_string()))
    }
}

#[derive(Debug, Default)]
pub struct MockModeRouter {
    pub calls: CallCounter,
}

impl ModeRouter for MockModeRouter {
    fn route(&self, utterance: &str) -> BackendResult<String> {
        self.calls.bump();
        Ok(render_mode(mock_mode_decision(utterance)))
    }
}

#[derive(Debug, Default)]
pub struct MockVisionRouter {
    pub calls: CallCounter,
}

impl VisionRouter for MockVisionRouter {
    fn route(&self, utterance: &str) -> BackendResult<String> {
        self.calls.bump();
        Ok(render_vision(&mock_vision_decision(utterance)))
    }
}

/// Replays canned router outputs in order, then repeats the last one.
#[derive(Debug, Default)]
pub struct ScriptedRouter {
    pub calls: CallCounter,
    outputs: Mutex<Vec<String>>,
}

impl ScriptedRouter {
    pub fn new<S: Into<String>>(outputs: impl IntoIterator<Item = S>) -> Self {
        let mut v: Vec<String> = outputs.into_iter().map(Into::into).collect();
        v.reverse();
        Self {
            calls: CallCounter::default(),
            outputs: Mutex::new(v),
        }
    }

    fn next(&self) -> BackendResult<String> {
        self.calls.bump();
        let mut q = self.outputs.lock().expect("router script lock");
        match q.len() {
            0 => Err(InteractionError::Backend("script exhausted".into())),
            1 => Ok(q[0].clone()),
            _ => Ok(q.pop().expect("nonempty")),
        }
    }
}

impl ModeRouter for ScriptedRouter {
    fn route(&self, _utterance: &str) -> BackendResult<String> {
        self.next()
    }
}

impl VisionRouter for ScriptedRouter {
    fn route(&self, _utterance: &str) -> BackendResult<String> {
        self.next()
    }
}

#[derive(Debug)]
pub struct MockSceneDescriber {
    pub calls: CallCounter,
    pub description: String,
}

impl Default for MockSceneDescriber {
    fn default() -> Self {
        Self {
            calls: CallCounter::default(),
            description: "A small room with a wooden table on the left and two chairs against the wall.\nTexts: - none"
                .into(),
        }
    }
}

impl SceneDescriber for MockSceneDescriber {
    fn describe(&self) -> BackendResult<String> {
        self.calls.bump();
        Ok(self.description.clone())
    }
}

#[derive(Debug, Default)]
pub struct MockDetector {
    pub calls: CallCounter,
    pub detections: Vec<Detection>,
}

impl Detector for MockDetector {
    fn detect(&self) -> BackendResult<Vec<Detection>> {
        self.calls.bump();
        Ok(self.detections.clone())
    }
}

/// Echoes the context lines that mention steps, dates or found targets.
#[derive(Debug, Default)]
pub struct MockResponder {
    pub calls: CallCounter,
}

impl Responder for MockResponder {
    fn respond(&self, _system: &str, user: &str) -> BackendResult<String> {
        self.calls.bump();
        let facts: Vec<&str> = user
            .lines()
            .filter(|l| l.contains("steps") || l.starts_with("Today") || l.starts_with("Search for"))
            .collect();
        if facts.is_empty() {
            Ok("Here is what I can tell you.".into())
        } else {
            Ok(facts.join("; "))
        }
    }
}

#[derive(Debug, Default)]
pub struct MockSynthesizer {
    pub calls: CallCounter,
}

impl SpeechSynthesizer for MockSynthesizer {
    fn synthesize(&self, text: &str) -> BackendResult<Vec<u8>> {
        self.calls.bump();
        Ok(text.as_bytes().to_vec())
    }
}

#[derive(Debug, Clone)]
pub struct FixedClock {
    pub calls: CallCounter,
    pub now: NaiveDateTime,
}

impl FixedClock {
    pub fn new(now: NaiveDateTime) -> Self {
        Self {
            calls: CallCounter::default(),
            now,
        }
    }
}

impl Clock for FixedClock {
    fn now(&self) -> NaiveDateTime {
        self.calls.bump();
        self.now
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> NaiveDateTime {
        chrono::Local::now().naive_local()
    }
}

/// Counters for every mock in a [`BackendSet::mocks`] bundle.
#[derive(Debug, Clone, Default)]
pub struct MockCounters {
    pub transcriber: CallCounter,
    pub mode_router: CallCounter,
    pub vision_router: CallCounter,
    pub scene_describer: CallCounter,
    pub detector: CallCounter,
    pub responder: CallCounter,
    pub speech_synthesizer: CallCounter,
    pub clock: CallCounter,
}

impl BackendSet {
    pub fn mocks(detections: Vec<Detection>, now: NaiveDateTime) -> (Self, MockCounters) {
        let c = MockCounters::default();
        let set = Self {
            transcriber: Box::new(MockTranscriber {
                calls: c.transcriber.clone(),
            }),
            mode_router: Box::new(MockModeRouter {
                calls: c.mode_router.clone(),
            }),
            vision_router: Box::new(MockVisionRouter {
                calls: c.vision_router.clone(),
            }),
            scene_describer: Box::new(MockSceneDescriber {
                calls: c.scene_describer.clone(),
                ..Default::default()
            }),
            detector: Box::new(MockDetector {
                calls: c.detector.clone(),
                detections,
            }),
            responder: Box::new(MockResponder {
                calls: c.responder.clone(),
            }),
            speech_synthesizer: Box::new(MockSynthesizer {
                calls: c.speech_synthesizer.clone(),
            }),
            clock: Box::new(FixedClock {
                calls: c.clock.clone(),
                now,
            }),
        };
        (set, c)
    }
}
