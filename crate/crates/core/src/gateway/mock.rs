//! Offline providers. Each mock speaks the same wire format as the real
//! endpoint, so mocked runs exercise the codecs, cache and retry path.

use std::collections::{HashSet, VecDeque};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde_json::{json, Value};

use super::transport::{HttpRequest, HttpResponse, NetworkError, Transport};
use super::NliLabel;
use crate::strategies::{self, ChatMessage, Role, StrategyKind};

pub type ChatResponder = Arc<dyn Fn(&[ChatMessage]) -> String + Send + Sync>;

pub struct MockChat {
    responder: ChatResponder,
}

impl MockChat {
    pub fn new(responder: ChatResponder) -> Self {
        Self { responder }
    }

    pub fn fixed(text: impl Into<String>) -> Self {
        let text = text.into();
        Self::new(Arc::new(move |_| text.clone()))
    }
}

fn chat_completion_body(text: &str) -> String {
    json!({
        "choices": [{
            "index": 0,
            "message": { "role": "assistant", "content": text },
            "finish_reason": "stop",
        }]
    })
    .to_string()
}

fn bad_request(msg: &str) -> HttpResponse {
    HttpResponse {
        status: 400,
        body: json!({ "error": msg }).to_string(),
    }
}

impl Transport for MockChat {
    fn post_json(&self, request: &HttpRequest) -> Result<HttpResponse, NetworkError> {
        let messages: Vec<ChatMessage> = match request
            .body
            .get("messages")
            .cloned()
            .map(serde_json::from_value)
        {
            Some(Ok(m)) => m,
            _ => return Ok(bad_request("messages missing or malformed")),
        };
        Ok(HttpResponse::ok(chat_completion_body(&(self.responder)(
            &messages,
        ))))
    }
}

fn split_turn(content: &str) -> Option<(&str, &str)> {
    let rest = content.strip_prefix("Comment: ")?;
    let idx = rest.find("\nReply: ")?;
    Some((&rest[..idx], &rest[idx + "\nReply: ".len()..]))
}

fn fnv1a(seed: u64, parts: &[&str]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325 ^ seed;
    for p in parts {
        for b in p.bytes().chain(std::iter::once(0xff)) {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    h
}

fn openers(kind: Option<StrategyKind>) -> &'static [&'static str] {
    match kind {
        Some(StrategyKind::Hedging) => &["I think", "Perhaps", "It seems like"],
        Some(StrategyKind::Acknowledgement) => &[
            "I understand your point, but",
            "I see where you're coming from, but",
        ],
        Some(StrategyKind::Elaboration) => &[
            "It sounds like you're saying otherwise, but",
            "Are you suggesting the opposite? I think",
        ],
        Some(StrategyKind::Grounding) => &[
            "I also think we both care about this, but",
            "I also believe we want the same thing, but",
        ],
        Some(StrategyKind::Gratitude) => &[
            "Thank you for sharing your view, but",
            "Thank you for your comment, but",
        ],
        Some(StrategyKind::Agreement) => &["I agree that this matters, but", "You're right in part, but"],
        Some(StrategyKind::BaselineParaphrase) => &["In other words,"],
        Some(StrategyKind::BaselineReceptive) => &["I hear you, and respectfully,"],
        _ => &["Respectfully,"],
    }
}

/// Default mock reframer: replays the built-in exemplar reframes when the
/// target is an exemplar, otherwise prefixes the reply with a strategy-typed
/// opener chosen by `seed`, capped at 30 words.
pub fn default_reframer(seed: u64) -> ChatResponder {
    Arc::new(move |messages: &[ChatMessage]| {
        let kind = messages
            .iter()
            .find(|m| m.role == Role::System)
            .and_then(|m| strategies::kind_from_instruction(&m.content));
        let Some((comment, reply)) = messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .and_then(|m| split_turn(&m.content))
        else {
            return String::new();
        };
        if let Some(k) = kind.filter(|k| k.is_strategy()) {
            if let Some(ex) = strategies::exemplars()
                .iter()
                .find(|e| e.comment == comment && e.reply == reply)
            {
                return ex.reframes[&k].clone();
            }
        }
        let choices = openers(kind);
        let opener = choices[(fnv1a(seed, &[comment, reply]) % choices.len() as u64) as usize];
        let mut words: Vec<String> = opener.split_whitespace().map(str::to_string).collect();
        for (i, w) in reply.split_whitespace().enumerate() {
            // lowercase the reply's first word unless it is "I" or a contraction of it
            let keep = w == "I" || w.starts_with("I'") || w.starts_with("I\u{2019}");
            words.push(if i == 0 && !keep { w.to_lowercase() } else { w.to_string() });
        }
        words.truncate(30);
        words.join(" ")
    })
}

/// Fixed-vocabulary letter histogram: a–z, 0–9 and one bucket for any other
/// non-whitespace character, L2-normalized.
pub fn letter_histogram(text: &str) -> Vec<f64> {
    let mut v = vec![0.0f64; 37];
    for c in text.chars().flat_map(char::to_lowercase) {
        let idx = match c {
            'a'..='z' => (c as u8 - b'a') as usize,
            '0'..='9' => 26 + (c as u8 - b'0') as usize,
            c if c.is_whitespace() => continue,
            _ => 36,
        };
        v[idx] += 1.0;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut v {
            *x /= norm;
        }
    }
    v
}

pub struct MockEmbed;

impl Transport for MockEmbed {
    fn post_json(&self, request: &HttpRequest) -> Result<HttpResponse, NetworkError> {
        let Some(input) = request.body.get("input").and_then(Value::as_str) else {
            return Ok(bad_request("input missing"));
        };
        Ok(HttpResponse::ok(
            json!({ "data": [{ "index": 0, "embedding": letter_histogram(input) }] }).to_string(),
        ))
    }
}

fn nli_tokens(text: &str) -> (HashSet<String>, usize) {
    let mut content = HashSet::new();
    let mut negations = 0;
    for raw in text.split_whitespace() {
        let tok: String = raw
            .trim_matches(|c: char| !c.is_alphanumeric())
            .to_lowercase()
            .replace('\u{2019}', "'");
        if tok.is_empty() {
            continue;
        }
        if matches!(tok.as_str(), "not" | "no" | "never") {
            negations += 1;
        } else if let Some(stem) = tok.strip_suffix("n't") {
            negations += 1;
            if !stem.is_empty() {
                content.insert(stem.to_string());
            }
        } else {
            content.insert(tok);
        }
    }
    (content, negations)
}

/// Deterministic NLI heuristic: identical texts entail; the same content with
/// a different negation parity contradicts; content inclusion entails;
/// anything else is neutral.
pub fn mock_nli_label(premise: &str, hypothesis: &str) -> NliLabel {
    let norm = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    if norm(premise) == norm(hypothesis) {
        return NliLabel::Entailment;
    }
    let (p, pn) = nli_tokens(premise);
    let (h, hn) = nli_tokens(hypothesis);
    let inter = p.intersection(&h).count();
    let union = p.union(&h).count();
    let overlap = if union == 0 { 1.0 } else { inter as f64 / union as f64 };
    if pn % 2 != hn % 2 && overlap >= 0.5 {
        NliLabel::Contradiction
    } else if pn % 2 == hn % 2 && h.is_subset(&p) {
        NliLabel::Entailment
    } else {
        NliLabel::Neutral
    }
}

pub struct MockNli;

impl Transport for MockNli {
    fn post_json(&self, request: &HttpRequest) -> Result<HttpResponse, NetworkError> {
        let (Some(p), Some(h)) = (
            request.body.get("premise").and_then(Value::as_str),
            request.body.get("hypothesis").and_then(Value::as_str),
        ) else {
            return Ok(bad_request("premise and hypothesis required"));
        };
        let label = mock_nli_label(p, h);
        let scores: Vec<f64> = NliLabel::ORDER
            .iter()
            .map(|&l| if l == label { 0.8 } else { 0.1 })
            .collect();
        Ok(HttpResponse::ok(
            json!({ "labels": ["entailment", "neutral", "contradiction"], "scores": scores })
                .to_string(),
        ))
    }
}

pub struct MockToxicity {
    /// When unset, the score is a deterministic function of the text.
    pub constant: Option<f64>,
}

impl Transport for MockToxicity {
    fn post_json(&self, request: &HttpRequest) -> Result<HttpResponse, NetworkError> {
        let Some(text) = request.body.pointer("/comment/text").and_then(Value::as_str) else {
            return Ok(bad_request("comment.text missing"));
        };
        let score = self
            .constant
            .unwrap_or_else(|| (fnv1a(0, &[text]) % 1000) as f64 / 1000.0);
        Ok(HttpResponse::ok(
            json!({
                "attributeScores": {
                    "TOXICITY": { "summaryScore": { "value": score, "type": "PROBABILITY" } }
                },
                "languages": ["en"],
            })
            .to_string(),
        ))
    }
}

/// Replays a fixed sequence of outcomes, then repeats the last one.
pub struct ScriptedTransport {
    script: Mutex<VecDeque<Result<HttpResponse, NetworkError>>>,
    last: Mutex<Option<Result<HttpResponse, NetworkError>>>,
}

impl ScriptedTransport {
    pub fn new(script: Vec<Result<HttpResponse, NetworkError>>) -> Self {
        Self {
            script: Mutex::new(script.into()),
            last: Mutex::new(None),
        }
    }

    pub fn status(code: u16, body: &str) -> Result<HttpResponse, NetworkError> {
        Ok(HttpResponse {
            status: code,
            body: body.to_string(),
        })
    }
}

impl Transport for ScriptedTransport {
    fn post_json(&self, _request: &HttpRequest) -> Result<HttpResponse, NetworkError> {
        let next = self.script.lock().unwrap().pop_front();
        match next {
            Some(r) => {
                *self.last.lock().unwrap() = Some(r.clone());
                r
            }
            None => self
                .last
                .lock()
                .unwrap()
                .clone()
                .unwrap_or_else(|| Err(NetworkError("empty script".into()))),
        }
    }
}

/// Wraps a transport, recording call count and peak concurrency.
pub struct CountingTransport<T> {
    inner: T,
    delay: Duration,
    calls: AtomicUsize,
    in_flight: AtomicUsize,
    peak: AtomicUsize,
}

impl<T: Transport> CountingTransport<T> {
    pub fn new(inner: T, delay: Duration) -> Self {
        Self {
            inner,
            delay,
            calls: AtomicUsize::new(0),
            in_flight: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn peak_in_flight(&self) -> usize {
        self.peak.load(Ordering::SeqCst)
    }
}

impl<T: Transport> Transport for CountingTransport<T> {
    fn post_json(&self, request: &HttpRequest) -> Result<HttpResponse, NetworkError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
        if !self.delay.is_zero() {
            std::thread::sleep(self.delay);
        }
        let out = self.inner.post_json(request);
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        out
    }
}
