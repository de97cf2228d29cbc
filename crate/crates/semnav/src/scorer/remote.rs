//! HTTP client for an OpenAI-compatible chat-completions endpoint serving a
//! vision model. Both renders go out as base64 PNG data URIs in a single
//! user message; the reply text is parsed with the structured response
//! parser.

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{QueryContext, Scorer, ScorerError, ScorerRequest, ScorerResponse};
use crate::prompts;

/// Environment variable consulted for the endpoint API key.
pub const API_KEY_ENV: &str = "SEMNAV_API_KEY";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub timeout_secs: u64,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8080/v1/chat/completions".to_string(),
            model: "llava-1.6-7b".to_string(),
            temperature: 0.0,
            timeout_secs: 60,
        }
    }
}

pub struct RemoteScorer {
    config: RemoteConfig,
    agent: ureq::Agent,
    api_key: Option<String>,
}

impl RemoteScorer {
    pub fn new(config: RemoteConfig) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(std::time::Duration::from_secs(config.timeout_secs))
            .build();
        let api_key = std::env::var(API_KEY_ENV).ok();
        Self { config, agent, api_key }
    }

    fn build_body(&self, request: &ScorerRequest) -> serde_json::Value {
        let b64 = base64::engine::general_purpose::STANDARD;
        let ego = b64.encode(request.egocentric_render.to_png());
        let map = b64.encode(request.topdown_render.to_png());
        json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [{
                "role": "user",
                "content": [
                    { "type": "text", "text": request.prompt },
                    { "type": "image_url", "image_url": { "url": format!("data:image/png;base64,{ego}") } },
                    { "type": "image_url", "image_url": { "url": format!("data:image/png;base64,{map}") } },
                ],
            }],
        })
    }
}

#[derive(Deserialize)]
struct ChatCompletion {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

impl Scorer for RemoteScorer {
    fn score(&self, request: &ScorerRequest, _ctx: &QueryContext) -> Result<ScorerResponse, ScorerError> {
        let body = self.build_body(request);
        let mut req = self
            .agent
            .post(&self.config.endpoint)
            .set("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        let reply = match req.send_string(&body.to_string()) {
            Ok(r) => r,
            Err(ureq::Error::Status(code, _)) => return Err(ScorerError::Http(code)),
            Err(e) => return Err(ScorerError::Transport(e.to_string())),
        };
        let text = reply
            .into_string()
            .map_err(|e| ScorerError::Transport(format!("reading response body: {e}")))?;
        let completion: ChatCompletion = serde_json::from_str(&text)
            .map_err(|e| ScorerError::Parse(format!("invalid completion JSON: {e}")))?;
        let content = completion
            .choices
            .first()
            .map(|c| c.message.content.clone())
            .ok_or_else(|| ScorerError::Parse("completion had no choices".to_string()))?;
        let parsed = prompts::parse_response(&content)
            .map_err(|e| ScorerError::Parse(e.to_string()))?;
        Ok(ScorerResponse {
            scores: parsed.scores,
            target_found: parsed.target_found,
            reasoning: parsed.reasoning,
            room_label: parsed.room_label,
        })
    }

    fn name(&self) -> &'static str {
        "remote"
    }
}
