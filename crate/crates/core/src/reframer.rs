//! Generation of strategy and baseline reframes for a filtered corpus.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::SystemTime;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{word_count, CommentReplyPair};
use crate::gateway::{self, Chat, ChatClient, GatewayError};
use crate::strategies::{build_prompt, PromptBundle, StrategyError, StrategyKind};

pub const MAX_WORDS: usize = 30;

/// Appended to the instruction when the first completion runs over length.
pub const LENGTH_REMINDER: &str = "Your answer must be 30 words or fewer.";

#[derive(Debug, Error)]
pub enum ReframeError {
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error("pair {pair_id}, {kind}: {source}")]
    Gateway {
        pair_id: String,
        kind: StrategyKind,
        #[source]
        source: GatewayError,
    },
    #[error("{kind} cannot be generated")]
    NotGeneratable { kind: StrategyKind },
    #[error("reframe file line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reframe {
    pub pair_id: String,
    #[serde(rename = "strategy")]
    pub kind: StrategyKind,
    pub text: String,
    pub word_count: usize,
    pub over_length: bool,
    pub model: String,
    pub hash: String,
    /// In-memory only; excluded from the wire format so outputs stay reproducible.
    #[serde(skip)]
    pub created_at: Option<SystemTime>,
}

impl Reframe {
    /// The untouched reply, represented as a variant of kind `original`.
    pub fn original(pair: &CommentReplyPair) -> Self {
        let wc = word_count(&pair.reply);
        Self {
            pair_id: pair.id.clone(),
            kind: StrategyKind::Original,
            text: pair.reply.clone(),
            word_count: wc,
            over_length: wc > MAX_WORDS,
            model: "human".into(),
            hash: gateway::content_hash(&[b"original", pair.reply.as_bytes()]),
            created_at: None,
        }
    }
}

/// Finds the prompt that produced `reframe`: either the base prompt or the
/// base prompt with the length reminder.
pub fn reconstruct_prompt(reframe: &Reframe, pair: &CommentReplyPair) -> Option<PromptBundle> {
    let base = build_prompt(reframe.kind, pair).ok()?;
    let retry = base.with_reminder(LENGTH_REMINDER);
    [base, retry]
        .into_iter()
        .find(|b| gateway::request_hash::<Chat>(&reframe.model, b) == reframe.hash)
}

pub fn generate_reframe(
    client: &ChatClient,
    pair: &CommentReplyPair,
    kind: StrategyKind,
) -> Result<Reframe, ReframeError> {
    if !StrategyKind::GENERATABLE.contains(&kind) {
        return Err(ReframeError::NotGeneratable { kind });
    }
    let annotate = |source| ReframeError::Gateway {
        pair_id: pair.id.clone(),
        kind,
        source,
    };
    let bundle = build_prompt(kind, pair)?;
    let mut completion = client.call_with_meta(&bundle).map_err(annotate)?;
    if word_count(&completion.value) > MAX_WORDS {
        completion = client
            .call_with_meta(&bundle.with_reminder(LENGTH_REMINDER))
            .map_err(annotate)?;
    }
    let wc = word_count(&completion.value);
    Ok(Reframe {
        pair_id: pair.id.clone(),
        kind,
        text: completion.value,
        word_count: wc,
        over_length: wc > MAX_WORDS,
        model: client.model().to_string(),
        hash: completion.hash,
        created_at: Some(SystemTime::now()),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindProgress {
    pub generated: usize,
    pub resumed: usize,
    pub failed: usize,
    pub over_length: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemFailure {
    pub pair_id: String,
    pub kind: StrategyKind,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub per_kind: BTreeMap<StrategyKind, KindProgress>,
    pub failures: Vec<ItemFailure>,
}

#[derive(Debug, Clone)]
pub struct GenerationOutput {
    /// Ordered by (pair index, kind); failed items are absent.
    pub reframes: Vec<Reframe>,
    pub report: GenerationReport,
}

/// Generates every `(pair, kind)` combination not already present in
/// `existing`. Per-item failures are recorded and the batch continues.
pub fn generate_all(
    client: &ChatClient,
    pairs: &[CommentReplyPair],
    kinds: &[StrategyKind],
    existing: &[Reframe],
) -> Result<GenerationOutput, ReframeError> {
    let mut kinds: Vec<StrategyKind> = kinds.to_vec();
    kinds.sort();
    kinds.dedup();
    if let Some(&kind) = kinds.iter().find(|k| !StrategyKind::GENERATABLE.contains(k)) {
        return Err(ReframeError::NotGeneratable { kind });
    }
    let done: HashMap<(&str, StrategyKind), &Reframe> = existing
        .iter()
        .map(|r| ((r.pair_id.as_str(), r.kind), r))
        .collect();

    let items: Vec<(&CommentReplyPair, StrategyKind)> = pairs
        .iter()
        .flat_map(|p| kinds.iter().map(move |&k| (p, k)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(client.config().parallelism)
        .build()
        .map_err(|e| std::io::Error::other(e.to_string()))?;
    let results: Vec<(bool, Result<Reframe, ReframeError>)> = pool.install(|| {
        items
            .par_iter()
            .map(|&(pair, kind)| match done.get(&(pair.id.as_str(), kind)) {
                Some(r) => (true, Ok((*r).clone())),
                None => (false, generate_reframe(client, pair, kind)),
            })
            .collect()
    });

    let mut report = GenerationReport::default();
    let mut reframes = Vec::with_capacity(results.len());
    for ((pair, kind), (resumed, result)) in items.iter().zip(results) {
        let progress = report.per_kind.entry(*kind).or_default();
        match result {
            Ok(r) => {
                if resumed {
                    progress.resumed += 1;
                } else {
                    progress.generated += 1;
                }
                if r.over_length {
                    progress.over_length += 1;
                }
                reframes.push(r);
            }
            Err(e) => {
                progress.failed += 1;
                report.failures.push(ItemFailure {
                    pair_id: pair.id.clone(),
                    kind: *kind,
                    error: e.to_string(),
                });
            }
        }
    }
    Ok(GenerationOutput { reframes, report })
}

pub fn parse_kinds(spec: &str) -> Result<Vec<StrategyKind>, StrategyError> {
    if spec.trim() == "all" {
        return Ok(StrategyKind::GENERATABLE.to_vec());
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let k: StrategyKind = part.parse()?;
        if seen.insert(k) {
            out.push(k);
        }
    }
    Ok(out)
}

pub fn load_reframes(path: &Path) -> Result<Vec<Reframe>, ReframeError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: Reframe = serde_json::from_str(&line).map_err(|e| ReframeError::Malformed {
            line: i + 1,
            reason: e.to_string(),
        })?;
        if r.text.trim().is_empty() {
            return Err(ReframeError::Malformed {
                line: i + 1,
                reason: "empty text".into(),
            });
        }
        out.push(r);
    }
    Ok(out)
}

pub fn write_reframes<W: Write>(mut out: W, reframes: &[Reframe]) -> std::io::Result<()> {
    for r in reframes {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;
    use crate::gateway::mock::{CountingTransport, MockChat};
    use crate::gateway::{mock, ProviderConfig};
    use crate::strategies::exemplars;
    use std::sync::Arc;
    use std::time::Duration;

    fn pair(id: &str, comment: &str, reply: &str) -> CommentReplyPair {
        CommentReplyPair {
            id: id.into(),
            subreddit: "democrats".into(),
            comment: comment.into(),
            reply: reply.into(),
            label: Label::Disagree,
            reply_toxicity: Some(0.2),
        }
    }

    fn exemplar_pair(i: usize) -> CommentReplyPair {
        let ex = &exemplars()[i];
        pair(&format!("ex{}", i + 1), &ex.comment, &ex.reply)
    }

    fn mock_client() -> ChatClient {
        ChatClient::from_config(&ProviderConfig::mock()).unwrap()
    }

    #[test]
    fn exemplar_replay() {
        let r = generate_reframe(&mock_client(), &exemplar_pair(1), StrategyKind::Hedging).unwrap();
        assert_eq!(r.text, "Perhaps being a single issue voter is not the best position to hold.");
        assert_eq!(r.word_count, 13);
        assert!(!r.over_length);
    }

    #[test]
    fn over_length_retries_once_then_flags() {
        let long = vec!["word"; 40].join(" ");
        let counting = Arc::new(CountingTransport::new(MockChat::fixed(long), Duration::ZERO));
        let client = ChatClient::with_transport(&ProviderConfig::mock(), counting.clone()).unwrap();
        let p = pair("a", "comment", "reply");
        let r = generate_reframe(&client, &p, StrategyKind::Gratitude).unwrap();
        assert!(r.over_length);
        assert_eq!(r.word_count, 40);
        assert_eq!(counting.calls(), 2);
        let prompt = reconstruct_prompt(&r, &p).unwrap();
        assert!(prompt.instruction.ends_with(LENGTH_REMINDER));
    }

    #[test]
    fn retry_that_fits_is_not_flagged() {
        let responder: mock::ChatResponder = Arc::new(|msgs| {
            if msgs[0].content.ends_with(LENGTH_REMINDER) {
                "short enough now".to_string()
            } else {
                vec!["word"; 31].join(" ")
            }
        });
        let client =
            ChatClient::with_transport(&ProviderConfig::mock(), Arc::new(MockChat::new(responder)))
                .unwrap();
        let r = generate_reframe(&client, &pair("a", "c", "r"), StrategyKind::Hedging).unwrap();
        assert_eq!(r.text, "short enough now");
        assert!(!r.over_length);
    }

    #[test]
    fn original_is_rejected() {
        assert!(matches!(
            generate_reframe(&mock_client(), &exemplar_pair(0), StrategyKind::Original),
            Err(ReframeError::NotGeneratable { .. })
        ));
    }

    #[test]
    fn generate_all_cardinality_order_and_resume() {
        let client = mock_client();
        let pairs = vec![
            pair("p1", "Masks do nothing.", "They clearly reduce spread, read a study."),
            pair("p2", "Taxes are theft.", "That's a silly slogan, not an argument."),
        ];
        let out = generate_all(&client, &pairs, &StrategyKind::GENERATABLE, &[]).unwrap();
        assert_eq!(out.reframes.len(), 16);
        assert!(out.report.failures.is_empty());
        let order: Vec<(&str, StrategyKind)> =
            out.reframes.iter().map(|r| (r.pair_id.as_str(), r.kind)).collect();
        let expected: Vec<(&str, StrategyKind)> = ["p1", "p2"]
            .iter()
            .flat_map(|p| StrategyKind::GENERATABLE.iter().map(move |&k| (*p, k)))
            .collect();
        assert_eq!(order, expected);
        for r in &out.reframes {
            let p = pairs.iter().find(|p| p.id == r.pair_id).unwrap();
            assert!(reconstruct_prompt(r, p).is_some());
        }

        let calls = client.network_calls();
        let fresh = mock_client();
        let again = generate_all(&fresh, &pairs, &StrategyKind::GENERATABLE, &out.reframes).unwrap();
        assert_eq!(fresh.network_calls(), 0);
        assert_eq!(again.reframes, out.reframes);
        assert_eq!(again.report.per_kind[&StrategyKind::Hedging].resumed, 2);
        assert_eq!(calls, 16);
    }

    #[test]
    fn failures_are_collected_not_fatal() {
        let responder: mock::ChatResponder = Arc::new(|msgs| {
            if msgs.last().unwrap().content.contains("bad") {
                String::new()
            } else {
                "fine reframe".to_string()
            }
        });
        let client =
            ChatClient::with_transport(&ProviderConfig::mock(), Arc::new(MockChat::new(responder)))
                .unwrap();
        let pairs = vec![pair("ok", "c", "good reply"), pair("ko", "c", "bad reply")];
        let out = generate_all(&client, &pairs, &[StrategyKind::Hedging], &[]).unwrap();
        assert_eq!(out.reframes.len(), 1);
        assert_eq!(out.report.failures.len(), 1);
        assert_eq!(out.report.failures[0].pair_id, "ko");
        assert!(matches!(
            generate_all(&client, &pairs, &[StrategyKind::Original], &[]),
            Err(ReframeError::NotGeneratable { .. })
        ));
    }

    #[test]
    fn subset_generation_matches_single_items() {
        let client = mock_client();
        let pairs: Vec<_> = (0..5)
            .map(|i| pair(&format!("p{i}"), "some comment", &format!("reply number {i} here")))
            .collect();
        let all = generate_all(&client, &pairs, &StrategyKind::GENERATABLE, &[]).unwrap();
        let other = mock_client();
        for r in &all.reframes {
            let p = pairs.iter().find(|p| p.id == r.pair_id).unwrap();
            let single = generate_reframe(&other, p, r.kind).unwrap();
            assert_eq!((&single.text, &single.hash), (&r.text, &r.hash));
        }
    }

    #[test]
    fn kinds_parse() {
        assert_eq!(parse_kinds("all").unwrap().len(), 8);
        assert_eq!(
            parse_kinds("hedging, gratitude,hedging").unwrap(),
            vec![StrategyKind::Hedging, StrategyKind::Gratitude]
        );
        assert!(parse_kinds("hedging,bogus").is_err());
    }

    #[test]
    fn wire_format_round_trip() {
        let r = Reframe::original(&exemplar_pair(0));
        let mut buf = Vec::new();
        write_reframes(&mut buf, std::slice::from_ref(&r)).unwrap();
        let line = String::from_utf8(buf.clone()).unwrap();
        for field in ["pair_id", "strategy", "text", "word_count", "over_length", "model", "hash"] {
            assert!(line.contains(&format!("\"{field}\"")), "{field}");
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        std::fs::write(&path, buf).unwrap();
        assert_eq!(load_reframes(&path).unwrap(), vec![r]);
    }
}
