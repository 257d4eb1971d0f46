//! LLM clients: scripted replay from transcripts, a recorder, and an HTTP
//! adapter for chat-completion endpoints.

use std::fs;
use std::path::Path;
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sqlweave_core::llm::normalize_prompt;
use sqlweave_core::{CompletionRequest, LlmClient, LlmError};

use crate::error::Error;

/// Hex SHA-256 of the whitespace-normalized prompt.
pub fn prompt_digest(prompt: &str) -> String {
    hex::encode(Sha256::digest(normalize_prompt(prompt).as_bytes()))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReplayMode {
    /// Entries are consumed front to back; a prompt whose digest differs
    /// from the next entry is an error.
    #[default]
    Ordered,
    /// Each request takes the first unused entry with its digest.
    Digest,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub digest: String,
    /// Kept for readability; replay matches on `digest` only.
    #[serde(default)]
    pub prompt: String,
    pub responses: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    #[serde(default)]
    pub mode: ReplayMode,
    pub entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn load(path: &Path) -> Result<Transcript, Error> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("transcript serializes");
        s.push('\n');
        s
    }

    /// Script built from bare response lists, with digests left empty; only
    /// useful in [`ReplayMode::Ordered`] with drift checks disabled.
    pub fn from_responses(responses: Vec<Vec<String>>) -> Transcript {
        Transcript {
            mode: ReplayMode::Ordered,
            entries: responses
                .into_iter()
                .map(|r| TranscriptEntry {
                    digest: String::new(),
                    prompt: String::new(),
                    responses: r,
                })
                .collect(),
        }
    }
}

struct ScriptState {
    entries: Vec<TranscriptEntry>,
    used: Vec<bool>,
    next: usize,
}

/// Replays a transcript. Never touches the network. An entry holding one
/// response answers any sample count by repetition; otherwise the count
/// must match the request.
pub struct ScriptedLlm {
    mode: ReplayMode,
    state: Mutex<ScriptState>,
}

impl ScriptedLlm {
    pub fn new(t: Transcript) -> Self {
        let n = t.entries.len();
        ScriptedLlm {
            mode: t.mode,
            state: Mutex::new(ScriptState {
                entries: t.entries,
                used: vec![false; n],
                next: 0,
            }),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, Error> {
        Ok(Self::new(Transcript::load(path)?))
    }

    /// Entries not yet consumed.
    pub fn remaining(&self) -> usize {
        let s = self.state.lock().expect("script lock");
        s.used.iter().filter(|u| !**u).count()
    }
}

fn fit_samples(responses: &[String], n: usize, digest: &str) -> Result<Vec<String>, LlmError> {
    match responses.len() {
        1 => Ok(vec![responses[0].clone(); n]),
        k if k == n => Ok(responses.to_vec()),
        k => Err(LlmError::SampleCount {
            expected: n,
            actual: k,
            digest: digest.to_string(),
        }),
    }
}

impl LlmClient for ScriptedLlm {
    fn complete(&self, req: &CompletionRequest) -> Result<Vec<String>, LlmError> {
        if req.n_samples == 0 {
            return Err(LlmError::InvalidRequest("n_samples must be at least 1".into()));
        }
        let digest = prompt_digest(&req.prompt);
        let mut s = self.state.lock().expect("script lock");
        let idx = match self.mode {
            ReplayMode::Ordered => {
                if s.next >= s.entries.len() {
                    return Err(LlmError::ScriptExhausted { digest });
                }
                let i = s.next;
                let expected = &s.entries[i].digest;
                if !expected.is_empty() && *expected != digest {
                    return Err(LlmError::Drift {
                        index: i,
                        expected: expected.clone(),
                        actual: digest,
                    });
                }
                s.next += 1;
                i
            }
            ReplayMode::Digest => {
                let found = (0..s.entries.len()).find(|&i| !s.used[i] && s.entries[i].digest == digest);
                match found {
                    Some(i) => i,
                    None => return Err(LlmError::ScriptExhausted { digest }),
                }
            }
        };
        s.used[idx] = true;
        fit_samples(&s.entries[idx].responses, req.n_samples, &digest)
    }
}

/// Passes requests through and keeps a transcript of them.
pub struct RecordingLlm<L> {
    inner: L,
    log: Mutex<Vec<TranscriptEntry>>,
}

impl<L: LlmClient> RecordingLlm<L> {
    pub fn new(inner: L) -> Self {
        RecordingLlm {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }

    /// Recorded entries; identical responses collapse to a single one.
    pub fn transcript(&self, mode: ReplayMode) -> Transcript {
        let entries = self.log.lock().expect("log lock").clone();
        Transcript { mode, entries }
    }
}

impl<L: LlmClient> LlmClient for RecordingLlm<L> {
    fn complete(&self, req: &CompletionRequest) -> Result<Vec<String>, LlmError> {
        let out = self.inner.complete(req)?;
        let mut responses = out.clone();
        if responses.windows(2).all(|w| w[0] == w[1]) {
            responses.truncate(1);
        }
        self.log.lock().expect("log lock").push(TranscriptEntry {
            digest: prompt_digest(&req.prompt),
            prompt: req.prompt.clone(),
            responses,
        });
        Ok(out)
    }
}

/// Sends one JSON request body and returns the status code and response
/// body. Swappable so tests can observe or forbid network use.
pub trait Transport: Send + Sync {
    fn post_json(&self, url: &str, api_key: &str, body: &serde_json::Value) -> Result<(u16, String), String>;
}

pub struct UreqTransport {
    agent: ureq::Agent,
}

impl Default for UreqTransport {
    fn default() -> Self {
        UreqTransport {
            agent: ureq::AgentBuilder::new().timeout(Duration::from_secs(120)).build(),
        }
    }
}

impl Transport for UreqTransport {
    fn post_json(&self, url: &str, api_key: &str, body: &serde_json::Value) -> Result<(u16, String), String> {
        let resp = self
            .agent
            .post(url)
            .set("Authorization", &format!("Bearer {api_key}"))
            .set("Content-Type", "application/json")
            .send_json(body.clone());
        match resp {
            Ok(r) => {
                let status = r.status();
                r.into_string().map(|b| (status, b)).map_err(|e| e.to_string())
            }
            Err(ureq::Error::Status(code, r)) => Ok((code, r.into_string().unwrap_or_default())),
            Err(e) => Err(e.to_string()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HttpSettings {
    pub endpoint: String,
    pub model: String,
    pub api_key_env: String,
    pub max_retries: u32,
    pub backoff_ms: u64,
}

impl Default for HttpSettings {
    fn default() -> Self {
        HttpSettings {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4-turbo".into(),
            api_key_env: "SQLWEAVE_API_KEY".into(),
            max_retries: 3,
            backoff_ms: 500,
        }
    }
}

/// Chat-completion client: one request per prompt asking for `n` choices.
/// Retries on connection failures, 429 and 5xx.
pub struct HttpLlm<T: Transport = UreqTransport> {
    settings: HttpSettings,
    api_key: String,
    transport: T,
}

impl HttpLlm<UreqTransport> {
    /// Reads the key from the configured environment variable.
    pub fn from_env(settings: HttpSettings) -> Result<Self, LlmError> {
        let key = std::env::var(&settings.api_key_env).map_err(|_| LlmError::Auth {
            digest: String::new(),
            message: format!("environment variable {} is not set", settings.api_key_env),
        })?;
        Ok(HttpLlm {
            settings,
            api_key: key,
            transport: UreqTransport::default(),
        })
    }
}

impl<T: Transport> HttpLlm<T> {
    pub fn with_transport(settings: HttpSettings, api_key: String, transport: T) -> Self {
        HttpLlm {
            settings,
            api_key,
            transport,
        }
    }

    pub fn request_body(&self, req: &CompletionRequest) -> serde_json::Value {
        serde_json::json!({
            "model": self.settings.model,
            "messages": [{"role": "user", "content": req.prompt}],
            "n": req.n_samples,
            "temperature": req.temperature,
        })
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    #[serde(default)]
    content: Option<String>,
}

impl<T: Transport> LlmClient for HttpLlm<T> {
    fn complete(&self, req: &CompletionRequest) -> Result<Vec<String>, LlmError> {
        let digest = prompt_digest(&req.prompt);
        if req.n_samples == 0 || !(0.0..=2.0).contains(&req.temperature) {
            return Err(LlmError::InvalidRequest(format!(
                "n_samples={} temperature={}",
                req.n_samples, req.temperature
            )));
        }
        let body = self.request_body(req);
        let mut attempt = 0;
        loop {
            let outcome = self.transport.post_json(&self.settings.endpoint, &self.api_key, &body);
            let retryable = match &outcome {
                Err(_) => true,
                Ok((code, _)) => *code == 429 || *code >= 500,
            };
            if retryable && attempt < self.settings.max_retries {
                attempt += 1;
                log::warn!("completion attempt {attempt} failed, retrying");
                thread::sleep(Duration::from_millis(self.settings.backoff_ms << (attempt - 1)));
                continue;
            }
            let (code, text) = outcome.map_err(|message| LlmError::Transport {
                digest: digest.clone(),
                message,
            })?;
            if code == 401 || code == 403 {
                return Err(LlmError::Auth { digest, message: text });
            }
            if !(200..300).contains(&code) {
                return Err(LlmError::Transport {
                    digest,
                    message: format!("HTTP {code}: {text}"),
                });
            }
            let parsed: ChatResponse = serde_json::from_str(&text).map_err(|e| LlmError::Transport {
                digest: digest.clone(),
                message: format!("bad response body: {e}"),
            })?;
            let out: Vec<String> = parsed.choices.into_iter().map(|c| c.message.content.unwrap_or_default()).collect();
            return fit_samples(&out, req.n_samples, &digest);
        }
    }
}
