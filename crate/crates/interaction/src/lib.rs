//! Voice and vision interaction pipeline for the cane: wake-phrase gate,
//! strict JSON routers, object reports in steps, Jalali dates and the
//! orchestrator over swappable backends.

pub mod backends;
pub mod contract;
pub mod error;
pub mod jalali;
pub mod kws;
pub mod orchestrator;
pub mod prompts;
pub mod remote;
pub mod report;
pub mod transcript;

pub use error::InteractionError;
pub use orchestrator::{orchestrate, InteractionResponse, OrchestratorConfig, Phase, Session, Utterance};
