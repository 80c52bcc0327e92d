//! Adapters for chat-completion style model endpoints. Only the request and
//! response shapes live here; the wire is whatever [`Transport`] provides.

use std::sync::Arc;

use serde_json::{json, Value};

use crate::backends::{BackendResult, ModeRouter, Responder, VisionRouter};
use crate::error::InteractionError;
use crate::prompts::{MODE_ROUTER_SYSTEM, VISION_ROUTER_SYSTEM};

pub const ENV_ENDPOINT: &str = "CANESIM_LLM_ENDPOINT";
pub const ENV_API_KEY: &str = "CANESIM_LLM_API_KEY";
pub const ENV_MODEL: &str = "CANESIM_LLM_MODEL";
pub const DEFAULT_MODEL: &str = "gpt-4o-mini";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub api_key: String,
    pub model: String,
}

impl RemoteConfig {
    pub fn from_env() -> Result<Self, InteractionError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, InteractionError> {
        let need = |k: &str| {
            get(k)
                .filter(|v| !v.trim().is_empty())
                .ok_or_else(|| InteractionError::Config(k.to_string()))
        };
        Ok(Self {
            endpoint: need(ENV_ENDPOINT)?,
            api_key: need(ENV_API_KEY)?,
            model: get(ENV_MODEL)
                .filter(|v| !v.trim().is_empty())
                .unwrap_or_else(|| DEFAULT_MODEL.into()),
        })
    }
}

/// Posts a JSON body and returns the decoded JSON reply.
pub trait Transport: Send + Sync {
    fn post_json(&self, url: &str, api_key: &str, body: &Value) -> BackendResult<Value>;
}

#[derive(Clone)]
pub struct RemoteChat {
    pub config: RemoteConfig,
    transport: Arc<dyn Transport>,
}

impl RemoteChat {
    pub fn new(config: RemoteConfig, transport: Arc<dyn Transport>) -> Self {
        Self { config, transport }
    }

    pub fn request_body(&self, system: &str, user: &str) -> Value {
        json!({
            "model": self.config.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
        })
    }

    pub fn complete(&self, system: &str, user: &str) -> BackendResult<String> {
        let reply = self.transport.post_json(
            &self.config.endpoint,
            &self.config.api_key,
            &self.request_body(system, user),
        )?;
        reply
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| InteractionError::Backend(format!("unexpected reply shape: {reply}")))
    }
}

impl ModeRouter for RemoteChat {
    fn route(&self, utterance: &str) -> BackendResult<String> {
        self.complete(MODE_ROUTER_SYSTEM, utterance)
    }
}

impl VisionRouter for RemoteChat {
    fn route(&self, utterance: &str) -> BackendResult<String> {
        self.complete(VISION_ROUTER_SYSTEM, utterance)
    }
}

impl Responder for RemoteChat {
    fn respond(&self, system: &str, user: &str) -> BackendResult<String> {
        self.complete(system, user)
    }
}
