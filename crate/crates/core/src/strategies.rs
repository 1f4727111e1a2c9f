//! Receptiveness strategies, baselines, few-shot exemplars and prompt rendering.
//!
//! Definitions and exemplars live in `data/strategies.json`, embedded at build
//! time. Rendering is byte-deterministic: the same `(kind, pair)` always yields
//! the same chat messages.

use std::fmt;
use std::str::FromStr;

use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CommentReplyPair;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StrategyError {
    #[error("{0} is not a reframing strategy")]
    NotAStrategy(StrategyKind),
    #[error("the original reply has no prompt")]
    Original,
    #[error("unknown strategy kind {0:?}")]
    Unknown(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Hedging,
    Acknowledgement,
    Elaboration,
    Grounding,
    Gratitude,
    Agreement,
    BaselineParaphrase,
    BaselineReceptive,
    Original,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 9] = [
        StrategyKind::Hedging,
        StrategyKind::Acknowledgement,
        StrategyKind::Elaboration,
        StrategyKind::Grounding,
        StrategyKind::Gratitude,
        StrategyKind::Agreement,
        StrategyKind::BaselineParaphrase,
        StrategyKind::BaselineReceptive,
        StrategyKind::Original,
    ];

    pub const STRATEGIES: [StrategyKind; 6] = [
        StrategyKind::Hedging,
        StrategyKind::Acknowledgement,
        StrategyKind::Elaboration,
        StrategyKind::Grounding,
        StrategyKind::Gratitude,
        StrategyKind::Agreement,
    ];

    pub const BASELINES: [StrategyKind; 2] =
        [StrategyKind::BaselineParaphrase, StrategyKind::BaselineReceptive];

    /// The eight kinds a model is asked to produce.
    pub const GENERATABLE: [StrategyKind; 8] = [
        StrategyKind::Hedging,
        StrategyKind::Acknowledgement,
        StrategyKind::Elaboration,
        StrategyKind::Grounding,
        StrategyKind::Gratitude,
        StrategyKind::Agreement,
        StrategyKind::BaselineParaphrase,
        StrategyKind::BaselineReceptive,
    ];

    pub fn is_strategy(self) -> bool {
        Self::STRATEGIES.contains(&self)
    }

    pub fn is_baseline(self) -> bool {
        Self::BASELINES.contains(&self)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Hedging => "hedging",
            StrategyKind::Acknowledgement => "acknowledgement",
            StrategyKind::Elaboration => "elaboration",
            StrategyKind::Grounding => "grounding",
            StrategyKind::Gratitude => "gratitude",
            StrategyKind::Agreement => "agreement",
            StrategyKind::BaselineParaphrase => "baseline_paraphrase",
            StrategyKind::BaselineReceptive => "baseline_receptive",
            StrategyKind::Original => "original",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            StrategyKind::BaselineParaphrase => "Paraphrase (B1)",
            StrategyKind::BaselineReceptive => "Receptive (B2)",
            StrategyKind::Original => "Original",
            k => &strategy(k).expect("strategy kind").display_name,
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = StrategyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_lowercase().replace([' ', '-'], "_");
        let alias = match norm.as_str() {
            "paraphrase" | "b1" | "paraphrase_(b1)" => Some(StrategyKind::BaselineParaphrase),
            "receptive" | "b2" | "receptive_(b2)" => Some(StrategyKind::BaselineReceptive),
            "acknowledge" => Some(StrategyKind::Acknowledgement),
            _ => None,
        };
        alias
            .or_else(|| Self::ALL.into_iter().find(|k| k.as_str() == norm))
            .ok_or_else(|| StrategyError::Unknown(s.to_string()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Strategy {
    pub kind: StrategyKind,
    pub display_name: String,
    /// Text substituted into the instruction's `<strategy>` slot.
    pub prompt_label: String,
    pub definition: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Exemplar {
    pub comment: String,
    pub reply: String,
    pub reframes: std::collections::BTreeMap<StrategyKind, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrategyData {
    pub version: u32,
    pub template: String,
    pub paraphrase_instruction: String,
    pub receptive_instruction: String,
    pub strategies: Vec<Strategy>,
    pub exemplars: Vec<Exemplar>,
}

pub const STRATEGY_DATA_JSON: &str = include_str!("../data/strategies.json");

static DATA: Lazy<StrategyData> = Lazy::new(|| {
    let data: StrategyData =
        serde_json::from_str(STRATEGY_DATA_JSON).expect("embedded strategy data is valid JSON");
    assert_eq!(data.strategies.len(), 6, "six strategies");
    assert_eq!(data.exemplars.len(), 5, "five exemplars");
    for ex in &data.exemplars {
        for k in StrategyKind::STRATEGIES {
            assert!(ex.reframes.contains_key(&k), "exemplar missing {k}");
        }
    }
    data
});

pub fn data() -> &'static StrategyData {
    &DATA
}

pub fn strategy(kind: StrategyKind) -> Result<&'static Strategy, StrategyError> {
    match kind {
        StrategyKind::Original => Err(StrategyError::Original),
        k if k.is_baseline() => Err(StrategyError::NotAStrategy(k)),
        k => Ok(DATA
            .strategies
            .iter()
            .find(|s| s.kind == k)
            .expect("every strategy kind has an entry")),
    }
}

pub fn strategy_definition(kind: StrategyKind) -> Result<&'static str, StrategyError> {
    strategy(kind).map(|s| s.definition.as_str())
}

pub fn exemplars() -> &'static [Exemplar] {
    &DATA.exemplars
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shot {
    pub comment: String,
    pub reply: String,
    pub reframe: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub instruction: String,
    pub shots: Vec<Shot>,
    pub target_comment: String,
    pub target_reply: String,
}

pub fn format_turn(comment: &str, reply: &str) -> String {
    format!("Comment: {comment}\nReply: {reply}")
}

impl PromptBundle {
    /// One system turn, a user/assistant turn per shot, then the target user turn.
    pub fn messages(&self) -> Vec<ChatMessage> {
        let mut out = Vec::with_capacity(2 + 2 * self.shots.len());
        out.push(ChatMessage {
            role: Role::System,
            content: self.instruction.clone(),
        });
        for shot in &self.shots {
            out.push(ChatMessage {
                role: Role::User,
                content: format_turn(&shot.comment, &shot.reply),
            });
            out.push(ChatMessage {
                role: Role::Assistant,
                content: shot.reframe.clone(),
            });
        }
        out.push(ChatMessage {
            role: Role::User,
            content: format_turn(&self.target_comment, &self.target_reply),
        });
        out
    }

    /// Plain-text transcript, used for golden files and audit dumps.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for m in self.messages() {
            let role = match m.role {
                Role::System => "system",
                Role::User => "user",
                Role::Assistant => "assistant",
            };
            s.push_str(&format!("[{role}]\n{}\n\n", m.content));
        }
        s
    }

    pub fn with_reminder(&self, sentence: &str) -> PromptBundle {
        let mut b = self.clone();
        b.instruction.push(' ');
        b.instruction.push_str(sentence);
        b
    }
}

pub fn instruction(kind: StrategyKind) -> Result<String, StrategyError> {
    match kind {
        StrategyKind::Original => Err(StrategyError::Original),
        StrategyKind::BaselineParaphrase => Ok(DATA.paraphrase_instruction.clone()),
        StrategyKind::BaselineReceptive => Ok(DATA.receptive_instruction.clone()),
        k => {
            let s = strategy(k)?;
            Ok(DATA
                .template
                .replace("{label}", &s.prompt_label)
                .replace("{display}", &s.display_name)
                .replace("{definition}", &s.definition))
        }
    }
}

pub fn build_prompt(
    kind: StrategyKind,
    pair: &CommentReplyPair,
) -> Result<PromptBundle, StrategyError> {
    let instruction = instruction(kind)?;
    let shots = if kind.is_strategy() {
        DATA.exemplars
            .iter()
            .map(|ex| Shot {
                comment: ex.comment.clone(),
                reply: ex.reply.clone(),
                reframe: ex.reframes[&kind].clone(),
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(PromptBundle {
        instruction,
        shots,
        target_comment: pair.comment.clone(),
        target_reply: pair.reply.clone(),
    })
}

/// Recovers the kind from an instruction produced by [`instruction`], ignoring
/// any appended reminder.
pub fn kind_from_instruction(text: &str) -> Option<StrategyKind> {
    StrategyKind::GENERATABLE.into_iter().find(|&k| {
        instruction(k)
            .map(|i| text.starts_with(&i))
            .unwrap_or(false)
    })
}

/// Text dump of every definition, instruction and exemplar.
pub fn dump() -> String {
    let mut s = format!("strategy data version {}\n\n", DATA.version);
    for k in StrategyKind::GENERATABLE {
        s.push_str(&format!("== {k}\n"));
        if let Ok(st) = strategy(k) {
            s.push_str(&format!("definition: {}\n", st.definition));
            s.push_str(&format!("prompt label: {}\n", st.prompt_label));
        }
        s.push_str(&format!("instruction: {}\n\n", instruction(k).unwrap()));
    }
    for (i, ex) in DATA.exemplars.iter().enumerate() {
        s.push_str(&format!("== exemplar {}\ncomment: {}\nreply: {}\n", i + 1, ex.comment, ex.reply));
        for (k, r) in &ex.reframes {
            s.push_str(&format!("{k}: {r}\n"));
        }
        s.push('\n');
    }
    s
}
