//! Sequential interaction graph: mode router, then either the voice branch
//! (optional clock tool) or the vision branch (vision router, scene
//! description, detector for OBJECT only), then the responder.

use std::time::{Duration, Instant};

use chrono::{Datelike, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::backends::{asks_for_time, BackendSet};
use crate::contract::{parse_mode_decision, parse_vision_decision, Mode, VisionAction, VisionDecision};
use crate::error::InteractionError;
use crate::jalali::{jalali_of, MONTH_NAMES};
use crate::kws::{kws_match, DEFAULT_WAKE_PHRASES};
use crate::prompts::{render_responder_input, RESPONDER_SYSTEM};
use crate::report::{build_object_report, ObjectReport, STEP_LENGTH_M};
use crate::transcript::Transcript;

pub const DEFAULT_DETECTION_SAMPLES: usize = 10;
pub const FALLBACK_REPLY: &str = "Sorry, I did not catch that. Could you say it again?";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Utterance {
    pub text: String,
    pub timestamp: NaiveDateTime,
}

impl Utterance {
    pub fn new(text: impl Into<String>, timestamp: NaiveDateTime) -> Result<Self, InteractionError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(InteractionError::InvalidArgument("utterance is blank".into()));
        }
        Ok(Self { text, timestamp })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Transcriber,
    ModeRouter,
    Clock,
    VisionRouter,
    SceneDescriber,
    Detector,
    Responder,
    SpeechSynthesizer,
    Fallback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrchestratorConfig {
    /// Detector samples unioned into one detection window.
    pub detection_samples: usize,
    pub step_length_m: f64,
    /// Extra router attempts after a contract violation.
    pub router_retries: usize,
    pub fallback_reply: String,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        Self {
            detection_samples: DEFAULT_DETECTION_SAMPLES,
            step_length_m: STEP_LENGTH_M,
            router_retries: 1,
            fallback_reply: FALLBACK_REPLY.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionResponse {
    pub text: String,
    pub mode: Option<Mode>,
    pub vision: Option<VisionDecision>,
    pub report: Option<ObjectReport>,
    pub mode_path: Vec<Phase>,
    pub latency: Vec<(Phase, Duration)>,
    pub fell_back: bool,
}

impl InteractionResponse {
    pub fn total_latency(&self) -> Duration {
        self.latency.iter().map(|(_, d)| *d).sum()
    }
}

/// Clock tool output handed to the responder.
pub fn date_context(now: NaiveDateTime) -> Result<String, InteractionError> {
    let j = jalali_of(now.date())?;
    Ok(format!(
        "Today is {} {} {} ({j}), Gregorian {}, time {:02}:{:02}",
        now.weekday(),
        j.day,
        MONTH_NAMES[(j.month - 1) as usize],
        now.date(),
        now.hour(),
        now.minute()
    ))
}

struct Turn<'a> {
    backends: &'a BackendSet,
    cfg: &'a OrchestratorConfig,
    log: &'a mut Transcript,
    id: u64,
    path: Vec<Phase>,
    latency: Vec<(Phase, Duration)>,
}

impl Turn<'_> {
    fn timed<T>(
        &mut self,
        phase: Phase,
        f: impl FnOnce(&BackendSet) -> Result<T, InteractionError>,
    ) -> Result<T, InteractionError> {
        let t0 = Instant::now();
        let out = f(self.backends);
        self.path.push(phase);
        self.latency.push((phase, t0.elapsed()));
        out
    }

    /// Calls a router and parses its output, retrying contract violations.
    fn route<T>(
        &mut self,
        phase: Phase,
        input: &str,
        call: impl Fn(&BackendSet, &str) -> Result<String, InteractionError>,
        parse: impl Fn(&str) -> Result<T, InteractionError>,
    ) -> Result<Option<T>, InteractionError> {
        for _ in 0..=self.cfg.router_retries {
            let raw = self.timed(phase, |b| call(b, input))?;
            match parse(&raw) {
                Ok(v) => {
                    self.log.push(self.id, phase, input, raw);
                    return Ok(Some(v));
                }
                Err(e @ InteractionError::ContractViolation { .. }) => {
                    self.log.push_error(self.id, phase, input, e.to_string());
                }
                Err(e) => return Err(e),
            }
        }
        Ok(None)
    }
}

/// Runs one interaction. The wake phrase must already have been matched.
pub fn orchestrate(
    utterance: &Utterance,
    backends: &BackendSet,
    cfg: &OrchestratorConfig,
    log: &mut Transcript,
    turn_id: u64,
) -> Result<InteractionResponse, InteractionError> {
    let text = utterance.text.as_str();
    let mut turn = Turn {
        backends,
        cfg,
        log,
        id: turn_id,
        path: Vec::new(),
        latency: Vec::new(),
    };
    let mut response = InteractionResponse {
        text: String::new(),
        mode: None,
        vision: None,
        report: None,
        mode_path: Vec::new(),
        latency: Vec::new(),
        fell_back: false,
    };

    let mode = turn.route(
        Phase::ModeRouter,
        text,
        |b, u| b.mode_router.route(u),
        parse_mode_decision,
    )?;
    let context = match mode {
        None => None,
        Some(Mode::Voice) => {
            response.mode = Some(Mode::Voice);
            if asks_for_time(text) {
                let now = turn.timed(Phase::Clock, |b| Ok(b.clock.now()))?;
                let ctx = date_context(now)?;
                turn.log.push(turn_id, Phase::Clock, "", ctx.clone());
                Some(ctx)
            } else {
                Some(String::new())
            }
        }
        Some(Mode::Vision) => {
            response.mode = Some(Mode::Vision);
            match turn.route(
                Phase::VisionRouter,
                text,
                |b, u| b.vision_router.route(u),
                parse_vision_decision,
            )? {
                None => None,
                Some(decision) => {
                    let scene = turn.timed(Phase::SceneDescriber, |b| b.scene_describer.describe())?;
                    turn.log.push(turn_id, Phase::SceneDescriber, "", scene.clone());
                    let mut ctx = format!("Scene: {scene}");
                    if decision.action == VisionAction::Object {
                        let mut window = Vec::new();
                        for _ in 0..cfg.detection_samples.max(1) {
                            window.extend(turn.timed(Phase::Detector, |b| b.detector.detect())?);
                        }
                        let report = build_object_report(&window, decision.target.as_deref(), cfg.step_length_m);
                        let summary = report.to_context();
                        turn.log.push(
                            turn_id,
                            Phase::Detector,
                            format!("{} samples", window.len()),
                            summary.clone(),
                        );
                        ctx.push('\n');
                        ctx.push_str(&summary);
                        response.report = Some(report);
                    }
                    response.vision = Some(decision);
                    Some(ctx)
                }
            }
        }
    };

    match context {
        Some(ctx) => {
            let input = render_responder_input(&ctx, text);
            let reply = turn.timed(Phase::Responder, |b| b.responder.respond(RESPONDER_SYSTEM, &input))?;
            turn.log.push(turn_id, Phase::Responder, input, reply.clone());
            response.text = reply;
        }
        None => {
            turn.path.push(Phase::Fallback);
            turn.log
                .push(turn_id, Phase::Fallback, text, cfg.fallback_reply.clone());
            response.text = cfg.fallback_reply.clone();
            response.fell_back = true;
        }
    }
    response.mode_path = turn.path;
    response.latency = turn.latency;
    Ok(response)
}

/// Wake-phrase gated conversation over one backend set. Taking `&mut self`
/// keeps a single interaction in flight per session.
pub struct Session {
    pub backends: BackendSet,
    pub config: OrchestratorConfig,
    pub wake_phrases: Vec<String>,
    pub transcript: Transcript,
    awake: bool,
    turns: u64,
}

impl Session {
    pub fn new(backends: BackendSet, config: OrchestratorConfig) -> Self {
        Self {
            backends,
            config,
            wake_phrases: DEFAULT_WAKE_PHRASES.iter().map(|s| s.to_string()).collect(),
            transcript: Transcript::default(),
            awake: false,
            turns: 0,
        }
    }

    pub fn is_awake(&self) -> bool {
        self.awake
    }

    pub fn sleep(&mut self) {
        self.awake = false;
    }

    /// Feeds one transcript line. Before the wake phrase nothing reaches the
    /// pipeline; the line carrying the wake phrase only opens the session.
    pub fn hear(&mut self, text: &str, at: NaiveDateTime) -> Result<Option<InteractionResponse>, InteractionError> {
        if !self.awake {
            self.awake = kws_match(text, &self.wake_phrases);
            return Ok(None);
        }
        let utterance = Utterance::new(text, at)?;
        self.turns += 1;
        orchestrate(
            &utterance,
            &self.backends,
            &self.config,
            &mut self.transcript,
            self.turns,
        )
        .map(Some)
    }

    pub fn speak(&mut self, response: &InteractionResponse) -> Result<Vec<u8>, InteractionError> {
        let audio = self.backends.speech_synthesizer.synthesize(&response.text)?;
        self.transcript.push(
            self.turns,
            Phase::SpeechSynthesizer,
            response.text.clone(),
            format!("{} bytes", audio.len()),
        );
        Ok(audio)
    }

    /// Same as [`Session::hear`] starting from raw audio.
    pub fn hear_audio(
        &mut self,
        audio: &[u8],
        at: NaiveDateTime,
    ) -> Result<Option<InteractionResponse>, InteractionError> {
        let text = self.backends.transcriber.transcribe(audio)?;
        self.transcript.push(
            self.turns + 1,
            Phase::Transcriber,
            format!("{} bytes", audio.len()),
            text.clone(),
        );
        self.hear(&text, at)
    }
}
