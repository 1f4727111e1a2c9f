//! Comment/reply corpus loading, validation and inclusion filtering.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("pair {id:?} has no toxicity score but the toxicity rule is enabled")]
    MissingToxicity { id: String },
    #[error("invalid filter config: {0}")]
    InvalidConfig(String),
}

/// Stance of a reply toward the comment, as labelled upstream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Agree,
    Disagree,
    Neutral,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Agree => "agree",
            Label::Disagree => "disagree",
            Label::Neutral => "neutral",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "agree" => Ok(Label::Agree),
            "disagree" => Ok(Label::Disagree),
            "neutral" => Ok(Label::Neutral),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommentReplyPair {
    pub id: String,
    pub subreddit: String,
    pub comment: String,
    pub reply: String,
    pub label: Label,
    #[serde(rename = "toxicity", default, skip_serializing_if = "Option::is_none")]
    pub reply_toxicity: Option<f64>,
}

impl CommentReplyPair {
    pub fn validate(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("empty id".into());
        }
        if self.comment.trim().is_empty() {
            return Err("empty comment".into());
        }
        if self.reply.trim().is_empty() {
            return Err("empty reply".into());
        }
        if let Some(t) = self.reply_toxicity {
            if !(0.0..=1.0).contains(&t) {
                return Err(format!("toxicity {t} outside [0, 1]"));
            }
        }
        Ok(())
    }
}

// Wire form: the label arrives as free text and is normalized before validation.
#[derive(Deserialize)]
struct RawPair {
    id: String,
    subreddit: String,
    comment: String,
    reply: String,
    label: String,
    #[serde(default)]
    toxicity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub max_words: usize,
    /// `None` disables the toxicity rule.
    pub toxicity_cutoff: Option<f64>,
    pub required_label: Label,
    pub excluded_subreddits: BTreeSet<String>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            max_words: 30,
            toxicity_cutoff: Some(0.9),
            required_label: Label::Disagree,
            excluded_subreddits: BTreeSet::from(["Brexit".to_string()]),
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.max_words < 1 {
            return Err(CorpusError::InvalidConfig("max_words must be at least 1".into()));
        }
        if let Some(c) = self.toxicity_cutoff {
            if !(c > 0.0 && c <= 1.0) {
                return Err(CorpusError::InvalidConfig(format!(
                    "toxicity_cutoff {c} outside (0, 1]"
                )));
            }
        }
        Ok(())
    }

    fn excludes_subreddit(&self, subreddit: &str) -> bool {
        let name = normalize_subreddit(subreddit);
        self.excluded_subreddits
            .iter()
            .any(|s| normalize_subreddit(s) == name)
    }
}

fn normalize_subreddit(s: &str) -> String {
    let s = s.trim();
    let s = s
        .strip_prefix("r/")
        .or_else(|| s.strip_prefix("/r/"))
        .unwrap_or(s);
    s.to_lowercase()
}

/// Exclusion counts per rule, in the order the rules are applied.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionReport {
    pub input: usize,
    pub label: usize,
    pub length: usize,
    pub subreddit: usize,
    pub toxicity: usize,
    pub retained: usize,
}

impl ExclusionReport {
    pub fn rows(&self) -> [(&'static str, usize); 6] {
        [
            ("input", self.input),
            ("label", self.label),
            ("length", self.length),
            ("subreddit", self.subreddit),
            ("toxicity", self.toxicity),
            ("retained", self.retained),
        ]
    }
}

/// Number of maximal non-whitespace runs. Punctuation stays attached to its word.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

pub fn parse_corpus<R: BufRead>(reader: R) -> Result<Vec<CommentReplyPair>, CorpusError> {
    let mut pairs = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| CorpusError::Malformed {
            line: line_no,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawPair = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: line_no,
            reason: e.to_string(),
        })?;
        let label = raw.label.parse::<Label>().map_err(|reason| CorpusError::Malformed {
            line: line_no,
            reason,
        })?;
        let pair = CommentReplyPair {
            id: raw.id,
            subreddit: raw.subreddit,
            comment: raw.comment,
            reply: raw.reply,
            label,
            reply_toxicity: raw.toxicity,
        };
        pair.validate().map_err(|reason| CorpusError::Malformed {
            line: line_no,
            reason,
        })?;
        if !seen.insert(pair.id.clone()) {
            return Err(CorpusError::DuplicateId {
                line: line_no,
                id: pair.id,
            });
        }
        pairs.push(pair);
    }
    Ok(pairs)
}

pub fn load_corpus(path: &Path) -> Result<Vec<CommentReplyPair>, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_corpus(BufReader::new(file))
}

pub fn write_corpus<W: Write>(mut out: W, pairs: &[CommentReplyPair]) -> std::io::Result<()> {
    for p in pairs {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Applies label, length, subreddit and toxicity rules in that order.
pub fn filter_pairs(
    pairs: &[CommentReplyPair],
    config: &FilterConfig,
) -> Result<(Vec<CommentReplyPair>, ExclusionReport), CorpusError> {
    config.validate()?;
    let mut report = ExclusionReport {
        input: pairs.len(),
        ..Default::default()
    };
    let mut kept = Vec::new();
    for p in pairs {
        if p.label != config.required_label {
            report.label += 1;
            continue;
        }
        if word_count(&p.comment) > config.max_words || word_count(&p.reply) > config.max_words {
            report.length += 1;
            continue;
        }
        if config.excludes_subreddit(&p.subreddit) {
            report.subreddit += 1;
            continue;
        }
        if let Some(cutoff) = config.toxicity_cutoff {
            let tox = p
                .reply_toxicity
                .ok_or_else(|| CorpusError::MissingToxicity { id: p.id.clone() })?;
            if tox > cutoff {
                report.toxicity += 1;
                continue;
            }
        }
        kept.push(p.clone());
    }
    report.retained = kept.len();
    Ok((kept, report))
}
