use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::mock;
use super::{Codec, GatewayError, ProviderConfig, Transport};
use crate::strategies::PromptBundle;

/// Decoding parameters sent with every chat request.
pub const CHAT_TEMPERATURE: f64 = 0.0;
pub const CHAT_MAX_TOKENS: u32 = 120;

pub(crate) fn excerpt(body: &str) -> String {
    const MAX: usize = 200;
    if body.len() <= MAX {
        body.to_string()
    } else {
        let mut end = MAX;
        while !body.is_char_boundary(end) {
            end -= 1;
        }
        format!("{}...", &body[..end])
    }
}

fn parse_json(body: &str) -> Result<Value, GatewayError> {
    serde_json::from_str(body).map_err(|e| GatewayError::Parse {
        reason: e.to_string(),
        excerpt: excerpt(body),
    })
}

fn shape_error(reason: &str, body: &str) -> GatewayError {
    GatewayError::Parse {
        reason: reason.to_string(),
        excerpt: excerpt(body),
    }
}

pub enum AuthStyle {
    Bearer,
    /// Credential passed as a `key` query parameter.
    QueryKey,
}

/// OpenAI-compatible chat completion.
pub struct Chat;

impl Codec for Chat {
    type Input = PromptBundle;
    type Output = String;
    const NAME: &'static str = "chat";
    const DEFAULT_ENDPOINT: &'static str = "https://api.openai.com/v1/chat/completions";
    const DEFAULT_MODEL: &'static str = "gpt-4";
    const AUTH: AuthStyle = AuthStyle::Bearer;

    fn check_input(input: &PromptBundle) -> Result<(), GatewayError> {
        if input.instruction.trim().is_empty() || input.target_reply.trim().is_empty() {
            return Err(GatewayError::InvalidInput("empty prompt bundle".into()));
        }
        Ok(())
    }

    fn request_body(model: &str, input: &PromptBundle) -> Value {
        json!({
            "model": model,
            "messages": input.messages(),
            "temperature": CHAT_TEMPERATURE,
            "n": 1,
            "max_tokens": CHAT_MAX_TOKENS,
        })
    }

    fn parse_response(body: &str) -> Result<String, GatewayError> {
        let v = parse_json(body)?;
        let choice = v
            .get("choices")
            .and_then(|c| c.get(0))
            .ok_or_else(|| shape_error("missing choices[0]", body))?;
        if choice.get("finish_reason").and_then(Value::as_str) == Some("content_filter") {
            return Err(GatewayError::Refusal);
        }
        let content = choice
            .pointer("/message/content")
            .map(|c| c.as_str().unwrap_or(""))
            .ok_or_else(|| shape_error("missing choices[0].message.content", body))?;
        let text = content.trim();
        if text.is_empty() {
            return Err(GatewayError::Refusal);
        }
        Ok(text.to_string())
    }

    fn mock_transport(cfg: &ProviderConfig) -> Arc<dyn Transport> {
        Arc::new(mock::MockChat::new(mock::default_reframer(cfg.mock_seed)))
    }
}

/// OpenAI-compatible embeddings.
pub struct Embed;

impl Codec for Embed {
    type Input = str;
    type Output = Vec<f64>;
    const NAME: &'static str = "embed";
    const DEFAULT_ENDPOINT: &'static str = "http://127.0.0.1:8080/v1/embeddings";
    const DEFAULT_MODEL: &'static str = "all-mpnet-base-v2";
    const AUTH: AuthStyle = AuthStyle::Bearer;

    fn check_input(input: &str) -> Result<(), GatewayError> {
        if input.trim().is_empty() {
            return Err(GatewayError::InvalidInput("empty text".into()));
        }
        Ok(())
    }

    fn request_body(model: &str, input: &str) -> Value {
        json!({ "model": model, "input": input })
    }

    fn parse_response(body: &str) -> Result<Vec<f64>, GatewayError> {
        let v = parse_json(body)?;
        let arr = v
            .pointer("/data/0/embedding")
            .and_then(Value::as_array)
            .ok_or_else(|| shape_error("missing data[0].embedding", body))?;
        let vec = arr
            .iter()
            .map(|x| x.as_f64().filter(|f| f.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| shape_error("non-numeric embedding component", body))?;
        if vec.is_empty() {
            return Err(shape_error("empty embedding", body));
        }
        Ok(vec)
    }

    fn mock_transport(_cfg: &ProviderConfig) -> Arc<dyn Transport> {
        Arc::new(mock::MockEmbed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NliLabel {
    Entailment,
    Neutral,
    Contradiction,
}

impl NliLabel {
    pub const ORDER: [NliLabel; 3] = [NliLabel::Entailment, NliLabel::Neutral, NliLabel::Contradiction];

    fn parse(s: &str) -> Option<NliLabel> {
        match s.trim().to_lowercase().as_str() {
            "entailment" => Some(NliLabel::Entailment),
            "neutral" => Some(NliLabel::Neutral),
            "contradiction" => Some(NliLabel::Contradiction),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliVerdict {
    pub label: NliLabel,
    /// Entailment, neutral, contradiction; sums to 1.
    pub scores: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NliInput {
    pub premise: String,
    pub hypothesis: String,
}

/// `{premise, hypothesis}` → `{labels, scores}` classifier endpoint.
pub struct Nli;

impl Codec for Nli {
    type Input = NliInput;
    type Output = NliVerdict;
    const NAME: &'static str = "nli";
    const DEFAULT_ENDPOINT: &'static str = "http://127.0.0.1:8081/nli";
    const DEFAULT_MODEL: &'static str = "cross-encoder/nli-deberta-v3-large";
    const AUTH: AuthStyle = AuthStyle::Bearer;

    fn check_input(input: &NliInput) -> Result<(), GatewayError> {
        if input.premise.trim().is_empty() || input.hypothesis.trim().is_empty() {
            return Err(GatewayError::InvalidInput("empty premise or hypothesis".into()));
        }
        Ok(())
    }

    fn request_body(_model: &str, input: &NliInput) -> Value {
        json!({ "premise": input.premise, "hypothesis": input.hypothesis })
    }

    fn parse_response(body: &str) -> Result<NliVerdict, GatewayError> {
        let v = parse_json(body)?;
        let labels = v
            .get("labels")
            .and_then(Value::as_array)
            .ok_or_else(|| shape_error("missing labels", body))?;
        let scores = v
            .get("scores")
            .and_then(Value::as_array)
            .ok_or_else(|| shape_error("missing scores", body))?;
        if labels.len() != scores.len() {
            return Err(shape_error("labels and scores differ in length", body));
        }
        let mut out = [f64::NAN; 3];
        for (l, s) in labels.iter().zip(scores) {
            let label = l
                .as_str()
                .and_then(NliLabel::parse)
                .ok_or_else(|| shape_error("unknown NLI label", body))?;
            let score = s
                .as_f64()
                .filter(|x| x.is_finite() && *x >= 0.0)
                .ok_or_else(|| shape_error("invalid NLI score", body))?;
            let idx = NliLabel::ORDER.iter().position(|&o| o == label).unwrap();
            out[idx] = score;
        }
        if out.iter().any(|x| x.is_nan()) {
            return Err(shape_error("missing one of the three NLI labels", body));
        }
        let total: f64 = out.iter().sum();
        if total <= 0.0 {
            return Err(shape_error("NLI scores sum to zero", body));
        }
        for x in &mut out {
            *x /= total;
        }
        let best = (0..3)
            .max_by(|&a, &b| out[a].total_cmp(&out[b]).then(b.cmp(&a)))
            .unwrap();
        Ok(NliVerdict {
            label: NliLabel::ORDER[best],
            scores: out,
        })
    }

    fn mock_transport(_cfg: &ProviderConfig) -> Arc<dyn Transport> {
        Arc::new(mock::MockNli)
    }
}

/// Perspective-compatible `comments:analyze`, TOXICITY attribute.
pub struct Toxicity;

impl Codec for Toxicity {
    type Input = str;
    type Output = f64;
    const NAME: &'static str = "toxicity";
    const DEFAULT_ENDPOINT: &'static str =
        "https://commentanalyzer.googleapis.com/v1alpha1/comments:analyze";
    const DEFAULT_MODEL: &'static str = "perspective-toxicity";
    const AUTH: AuthStyle = AuthStyle::QueryKey;

    fn check_input(input: &str) -> Result<(), GatewayError> {
        if input.trim().is_empty() {
            return Err(GatewayError::InvalidInput("empty text".into()));
        }
        Ok(())
    }

    fn request_body(_model: &str, input: &str) -> Value {
        json!({
            "comment": { "text": input },
            "languages": ["en"],
            "requestedAttributes": { "TOXICITY": {} },
        })
    }

    fn parse_response(body: &str) -> Result<f64, GatewayError> {
        let v = parse_json(body)?;
        let score = v
            .pointer("/attributeScores/TOXICITY/summaryScore/value")
            .and_then(Value::as_f64)
            .ok_or_else(|| shape_error("missing attributeScores.TOXICITY.summaryScore.value", body))?;
        if !(0.0..=1.0).contains(&score) {
            return Err(GatewayError::Validation(format!(
                "toxicity score {score} outside [0, 1]"
            )));
        }
        Ok(score)
    }

    fn mock_transport(cfg: &ProviderConfig) -> Arc<dyn Transport> {
        Arc::new(mock::MockToxicity {
            constant: cfg.mock_constant,
        })
    }
}
