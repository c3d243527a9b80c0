use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{MineError, NegativeBundle, Provenance};
use crate::corpus::{locate_slots, tokenize, CaptionRecord, SlotKind};

/// Environment variable overriding [`LlmConfig::endpoint`].
pub const LLM_ENDPOINT_ENV: &str = "HOI_LLM_ENDPOINT";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
}

/// A text-completion service: one prompt in, one response body out.
pub trait LlmClient: Sync {
    fn complete(&self, prompt: &str) -> Result<String, LlmError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    pub endpoint: String,
    pub timeout_secs: f64,
    pub max_retries: usize,
    /// Upper bound on in-flight requests.
    pub concurrency: usize,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            endpoint: "http://127.0.0.1:8080/generate".into(),
            timeout_secs: 30.0,
            max_retries: 2,
            concurrency: 4,
        }
    }
}

impl LlmConfig {
    /// Apply `HOI_LLM_ENDPOINT`, `HOI_LLM_TIMEOUT_SECS`, `HOI_LLM_MAX_RETRIES`
    /// and `HOI_LLM_CONCURRENCY` when set and parseable.
    pub fn with_env(mut self) -> Self {
        if let Ok(url) = std::env::var(LLM_ENDPOINT_ENV) {
            if !url.trim().is_empty() {
                self.endpoint = url.trim().to_string();
            }
        }
        if let Some(t) = env_parse("HOI_LLM_TIMEOUT_SECS") {
            self.timeout_secs = t;
        }
        if let Some(r) = env_parse("HOI_LLM_MAX_RETRIES") {
            self.max_retries = r;
        }
        if let Some(c) = env_parse("HOI_LLM_CONCURRENCY") {
            self.concurrency = c;
        }
        self
    }
}

fn env_parse<T: std::str::FromStr>(name: &str) -> Option<T> {
    std::env::var(name).ok()?.trim().parse().ok()
}

/// Blocking HTTP client: POSTs `{"prompt": ...}` and returns the response body.
pub struct HttpLlmClient {
    agent: ureq::Agent,
    endpoint: String,
}

impl HttpLlmClient {
    pub fn new(cfg: &LlmConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.timeout_secs.max(0.001))))
            .build()
            .into();
        HttpLlmClient {
            agent,
            endpoint: cfg.endpoint.clone(),
        }
    }
}

impl LlmClient for HttpLlmClient {
    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        let body = serde_json::json!({ "prompt": prompt }).to_string();
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .header("content-type", "application/json")
            .send(body)
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        resp.body_mut()
            .read_to_string()
            .map_err(|e| LlmError::Transport(e.to_string()))
    }
}

/// Deterministic in-process stand-in for a language-model service.
pub struct MockLlmClient<F> {
    respond: F,
    calls: AtomicUsize,
}

impl<F> MockLlmClient<F>
where
    F: Fn(&str) -> Result<String, LlmError> + Sync,
{
    pub fn new(respond: F) -> Self {
        MockLlmClient {
            respond,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<F> LlmClient for MockLlmClient<F>
where
    F: Fn(&str) -> Result<String, LlmError> + Sync,
{
    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        (self.respond)(prompt)
    }
}

fn slot_word(cap: &CaptionRecord, slot: SlotKind) -> String {
    let tokens = tokenize(&cap.text);
    let words: Vec<&str> = cap.text.split_whitespace().collect();
    let surface = |start: usize, end: usize| {
        words[start..end]
            .iter()
            .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
            .collect::<Vec<_>>()
            .join(" ")
    };
    match (locate_slots(&tokens, &cap.verb, &cap.nouns), slot) {
        (Some(s), SlotKind::Verb) => surface(s.verb.start, s.verb.end),
        (Some(s), SlotKind::Noun) => surface(s.nouns[0].0.start, s.nouns[0].0.end),
        (None, SlotKind::Verb) => cap.verb.replace('_', " "),
        (None, SlotKind::Noun) => cap.nouns.first().map(|n| n.replace('_', " ")).unwrap_or_default(),
    }
}

/// Instruction prompt asking for `k` single-slot substitutions as a JSON array.
pub fn build_llm_prompt(cap: &CaptionRecord, k: usize, slot: SlotKind) -> String {
    let (kind, kinds, example_word, example_answer) = match slot {
        SlotKind::Verb => (
            "verb",
            "verbs",
            "picks",
            r##"["#C C drops a knife", "#C C washes a knife", "#C C sharpens a knife"]"##,
        ),
        SlotKind::Noun => (
            "noun",
            "nouns",
            "knife",
            r##"["#C C picks a spoon", "#C C picks a towel", "#C C picks an onion"]"##,
        ),
    };
    let word = slot_word(cap, slot);
    format!(
        "You edit first-person video narrations to build hard negative captions.\n\
         Replace the {kind} \"{word}\" in the caption with {k} different {kinds} whose meanings \
         clearly differ from \"{word}\" and from each other. Change only that {kind}; keep every \
         other word exactly as it is.\n\
         Respond with a JSON array of exactly {k} caption strings and nothing else.\n\n\
         Example (3 captions):\n\
         Caption: \"#C C picks a knife\"\n\
         {kind} to replace: \"{example_word}\"\n\
         Answer: {example_answer}\n\n\
         Caption: \"{text}\"\n\
         {kind} to replace: \"{word}\"\n\
         Answer:",
        text = cap.text,
    )
}

/// Parse a JSON array of strings, trimming entries and keeping at most `k`.
pub fn parse_llm_response(body: &str, k: usize) -> Result<Vec<String>, MineError> {
    let value: serde_json::Value = serde_json::from_str(body.trim())
        .map_err(|e| MineError::MalformedResponse(format!("not JSON: {e}")))?;
    let items = value
        .as_array()
        .ok_or_else(|| MineError::MalformedResponse("expected a JSON array".into()))?;
    items
        .iter()
        .take(k)
        .map(|v| {
            v.as_str()
                .map(|s| s.trim().to_string())
                .ok_or_else(|| MineError::MalformedResponse(format!("non-string entry {v}")))
        })
        .collect()
}

fn ask(
    cap: &CaptionRecord,
    client: &dyn LlmClient,
    cfg: &LlmConfig,
    k: usize,
    slot: SlotKind,
) -> Result<Vec<String>, MineError> {
    let prompt = build_llm_prompt(cap, k, slot);
    let attempts = cfg.max_retries + 1;
    let mut last = String::new();
    for attempt in 1..=attempts {
        match client.complete(&prompt) {
            Ok(body) => match parse_llm_response(&body, k) {
                Ok(list) => return Ok(list),
                Err(e) => last = e.to_string(),
            },
            Err(e) => last = e.to_string(),
        }
        log::debug!("caption {} {slot:?} attempt {attempt}/{attempts} failed: {last}", cap.caption_id);
    }
    Err(MineError::LlmExhausted {
        caption_id: cap.caption_id.clone(),
        attempts,
        last,
    })
}

/// Verb and noun negatives for one caption from a language-model service.
pub fn mine_llm(
    cap: &CaptionRecord,
    client: &dyn LlmClient,
    cfg: &LlmConfig,
    k: usize,
) -> Result<NegativeBundle, MineError> {
    Ok(NegativeBundle {
        caption_id: cap.caption_id.clone(),
        provenance: Provenance::Llm,
        verb_negs: ask(cap, client, cfg, k, SlotKind::Verb)?,
        noun_negs: ask(cap, client, cfg, k, SlotKind::Noun)?,
    })
}

/// Mine every caption with at most `cfg.concurrency` requests in flight.
///
/// Captions whose requests stay failing after the retries go to `fallback`
/// (index, caption). Output order follows `captions`; the second value counts fallbacks.
pub fn mine_llm_batch<F>(
    captions: &[CaptionRecord],
    client: &dyn LlmClient,
    cfg: &LlmConfig,
    k: usize,
    fallback: F,
) -> Result<(Vec<NegativeBundle>, usize), MineError>
where
    F: Fn(usize, &CaptionRecord) -> Result<NegativeBundle, MineError> + Sync,
{
    let next = AtomicUsize::new(0);
    let fallbacks = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<NegativeBundle, MineError>>>> =
        Mutex::new((0..captions.len()).map(|_| None).collect());
    let workers = cfg.concurrency.clamp(1, captions.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(cap) = captions.get(i) else { break };
                let res = match mine_llm(cap, client, cfg, k) {
                    Ok(b) => Ok(b),
                    Err(MineError::LlmExhausted { last, .. }) => {
                        log::warn!("caption {}: language model unavailable ({last}); using vocabulary negatives", cap.caption_id);
                        fallbacks.fetch_add(1, Ordering::SeqCst);
                        fallback(i, cap)
                    }
                    Err(e) => Err(e),
                };
                slots.lock().expect("no worker panics while holding the lock")[i] = Some(res);
            });
        }
    });
    let out = slots
        .into_inner()
        .expect("workers joined")
        .into_iter()
        .map(|r| r.expect("every index visited"))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((out, fallbacks.into_inner()))
}
