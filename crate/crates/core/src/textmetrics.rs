//! Automatic validation metrics: n-gram form dissimilarity, embedding
//! similarity, contradiction rate, added-trigram statistics per strategy and
//! pairwise strategy overlap.
//!
//! All n-gram computations use set semantics over [`tokenize`]d text.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CommentReplyPair;
use crate::gateway::{EmbedClient, GatewayError, NliClient, NliLabel};
use crate::reframer::Reframe;
use crate::strategies::StrategyKind;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("candidate text has no tokens")]
    EmptyCandidate,
    #[error("no items to score")]
    Empty,
    #[error("reframe refers to unknown pair {0:?}")]
    UnknownPair(String),
    #[error("strategy {0} has no reframes in these statistics")]
    MissingStrategy(StrategyKind),
    #[error("embedding dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

pub type Trigram = [String; 3];

/// Lowercased whitespace tokens with leading and trailing non-alphanumeric
/// characters removed; tokens left empty are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.to_lowercase()
                .trim_matches(|c: char| !c.is_alphanumeric())
                .to_string()
        })
        .filter(|t| !t.is_empty())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramSet {
    pub n: usize,
    pub grams: BTreeSet<Vec<String>>,
}

impl NGramSet {
    pub fn from_tokens(tokens: &[String], n: usize) -> Self {
        assert!((1..=4).contains(&n), "n-gram order must be in 1..=4");
        let grams = if tokens.len() < n {
            BTreeSet::new()
        } else {
            tokens.windows(n).map(|w| w.to_vec()).collect()
        };
        Self { n, grams }
    }

    pub fn from_text(text: &str, n: usize) -> Self {
        Self::from_tokens(&tokenize(text), n)
    }

    pub fn len(&self) -> usize {
        self.grams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grams.is_empty()
    }
}

/// Mean over n = 1..=4 of the fraction of distinct candidate n-grams absent
/// from the reference. Orders the candidate is too short for are skipped.
pub fn form_dissimilarity(candidate: &str, reference: &str) -> Result<f64, MetricError> {
    let cand = tokenize(candidate);
    if cand.is_empty() {
        return Err(MetricError::EmptyCandidate);
    }
    let reference = tokenize(reference);
    let mut sum = 0.0;
    let mut orders = 0;
    for n in 1..=4 {
        let c = NGramSet::from_tokens(&cand, n);
        if c.is_empty() {
            continue;
        }
        let r = NGramSet::from_tokens(&reference, n);
        let novel = c.grams.difference(&r.grams).count();
        sum += novel as f64 / c.len() as f64;
        orders += 1;
    }
    Ok(sum / orders as f64)
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::DimensionMismatch(a.len(), b.len()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

pub fn semantic_similarity(
    client: &EmbedClient,
    candidate: &str,
    reference: &str,
) -> Result<f64, MetricError> {
    let a = client.embed(candidate)?;
    let b = client.embed(reference)?;
    cosine(&a, &b)
}

/// Fraction of `(original, reframe)` items the NLI model labels a contradiction,
/// with the original as premise.
pub fn contradiction_rate(
    client: &NliClient,
    items: &[(String, String)],
) -> Result<f64, MetricError> {
    if items.is_empty() {
        return Err(MetricError::Empty);
    }
    let flags = items
        .par_iter()
        .map(|(orig, reframe)| {
            client
                .nli(orig, reframe)
                .map(|v| v.label == NliLabel::Contradiction)
        })
        .collect::<Result<Vec<bool>, GatewayError>>()?;
    Ok(flags.iter().filter(|&&c| c).count() as f64 / items.len() as f64)
}

fn trigrams(text: &str) -> BTreeSet<Trigram> {
    tokenize(text)
        .windows(3)
        .map(|w| [w[0].clone(), w[1].clone(), w[2].clone()])
        .collect()
}

/// Trigrams of the reframe that do not occur in the original.
pub fn added_trigrams(original: &str, reframe: &str) -> BTreeSet<Trigram> {
    let orig = trigrams(original);
    trigrams(reframe)
        .into_iter()
        .filter(|t| !orig.contains(t))
        .collect()
}

pub fn trigram_text(t: &Trigram) -> String {
    t.join(" ")
}

/// Document-frequency counts of added trigrams per strategy.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrigramStats {
    pub reframes_per_kind: BTreeMap<StrategyKind, usize>,
    /// Number of reframes of each kind whose added-trigram set contains t.
    pub counts: BTreeMap<StrategyKind, BTreeMap<Trigram, usize>>,
    pub totals: BTreeMap<Trigram, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigramRow {
    pub strategy: StrategyKind,
    pub trigram: String,
    pub count: usize,
    pub p_t_given_s: f64,
    pub p_s_given_t: f64,
}

impl TrigramStats {
    pub fn kinds(&self) -> impl Iterator<Item = StrategyKind> + '_ {
        self.reframes_per_kind.keys().copied()
    }

    pub fn count(&self, kind: StrategyKind, t: &Trigram) -> usize {
        self.counts
            .get(&kind)
            .and_then(|m| m.get(t))
            .copied()
            .unwrap_or(0)
    }

    pub fn p_t_given_s(&self, kind: StrategyKind, t: &Trigram) -> f64 {
        match self.reframes_per_kind.get(&kind) {
            Some(&n) if n > 0 => self.count(kind, t) as f64 / n as f64,
            _ => 0.0,
        }
    }

    pub fn p_s_given_t(&self, kind: StrategyKind, t: &Trigram) -> f64 {
        match self.totals.get(t) {
            Some(&total) if total > 0 => self.count(kind, t) as f64 / total as f64,
            _ => 0.0,
        }
    }

    /// Rows for one strategy sorted by P(t|s) descending, ties by trigram.
    pub fn ranked(&self, kind: StrategyKind) -> Vec<TrigramRow> {
        let Some(counts) = self.counts.get(&kind) else {
            return Vec::new();
        };
        let mut rows: Vec<(&Trigram, usize)> = counts.iter().map(|(t, &c)| (t, c)).collect();
        rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        rows.into_iter()
            .map(|(t, c)| TrigramRow {
                strategy: kind,
                trigram: trigram_text(t),
                count: c,
                p_t_given_s: self.p_t_given_s(kind, t),
                p_s_given_t: self.p_s_given_t(kind, t),
            })
            .collect()
    }

    pub fn vocabulary(&self, kind: StrategyKind) -> Option<BTreeSet<&Trigram>> {
        self.reframes_per_kind.get(&kind)?;
        Some(
            self.counts
                .get(&kind)
                .map(|m| m.iter().filter(|(_, &c)| c > 0).map(|(t, _)| t).collect())
                .unwrap_or_default(),
        )
    }
}

/// Builds added-trigram statistics. Reframes of kind `original` are ignored.
pub fn strategy_trigram_stats(
    reframes: &[Reframe],
    originals: &HashMap<String, String>,
) -> Result<TrigramStats, MetricError> {
    let mut stats = TrigramStats::default();
    for r in reframes.iter().filter(|r| r.kind != StrategyKind::Original) {
        let orig = originals
            .get(&r.pair_id)
            .ok_or_else(|| MetricError::UnknownPair(r.pair_id.clone()))?;
        *stats.reframes_per_kind.entry(r.kind).or_default() += 1;
        let counts = stats.counts.entry(r.kind).or_default();
        for t in added_trigrams(orig, &r.text) {
            *stats.totals.entry(t.clone()).or_default() += 1;
            *counts.entry(t).or_default() += 1;
        }
    }
    if stats.reframes_per_kind.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(stats)
}

/// Jaccard index of two strategies' added-trigram vocabularies.
pub fn strategy_overlap(
    a: StrategyKind,
    b: StrategyKind,
    stats: &TrigramStats,
) -> Result<f64, MetricError> {
    let va = stats.vocabulary(a).ok_or(MetricError::MissingStrategy(a))?;
    let vb = stats.vocabulary(b).ok_or(MetricError::MissingStrategy(b))?;
    if a == b {
        return Ok(1.0);
    }
    let union = va.union(&vb).count();
    if union == 0 {
        return Ok(1.0);
    }
    Ok(va.intersection(&vb).count() as f64 / union as f64)
}

/// Symmetric overlap matrix over the kinds present in `stats`.
pub fn overlap_matrix(stats: &TrigramStats) -> Vec<(StrategyKind, Vec<f64>)> {
    let kinds: Vec<StrategyKind> = stats.kinds().collect();
    kinds
        .iter()
        .map(|&a| {
            let row = kinds
                .iter()
                .map(|&b| strategy_overlap(a, b, stats).expect("kinds come from stats"))
                .collect();
            (a, row)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeaningRow {
    pub strategy: StrategyKind,
    pub n: usize,
    /// Form dissimilarity against comment + reply.
    pub distinct_ngrams_context: f64,
    /// Form dissimilarity against the reply alone.
    pub distinct_ngrams_reply: f64,
    pub similarity_context: f64,
    pub similarity_reply: f64,
    pub contradiction_rate: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Per-kind meaning-preservation summary over generated reframes.
pub fn meaning_preservation(
    embed: &EmbedClient,
    nli: &NliClient,
    pairs: &[CommentReplyPair],
    reframes: &[Reframe],
) -> Result<Vec<MeaningRow>, MetricError> {
    let by_id: HashMap<&str, &CommentReplyPair> = pairs.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut groups: BTreeMap<StrategyKind, Vec<(&CommentReplyPair, &Reframe)>> = BTreeMap::new();
    for r in reframes.iter().filter(|r| r.kind != StrategyKind::Original) {
        let p = by_id
            .get(r.pair_id.as_str())
            .ok_or_else(|| MetricError::UnknownPair(r.pair_id.clone()))?;
        groups.entry(r.kind).or_default().push((p, r));
    }
    let mut rows = Vec::new();
    for (kind, items) in groups {
        let per_item = items
            .par_iter()
            .map(|(p, r)| -> Result<[f64; 4], MetricError> {
                let context = format!("{} {}", p.comment, p.reply);
                Ok([
                    form_dissimilarity(&r.text, &context)?,
                    form_dissimilarity(&r.text, &p.reply)?,
                    semantic_similarity(embed, &r.text, &context)?,
                    semantic_similarity(embed, &r.text, &p.reply)?,
                ])
            })
            .collect::<Result<Vec<_>, _>>()?;
        let col = |i: usize| mean(&per_item.iter().map(|v| v[i]).collect::<Vec<_>>());
        let nli_items: Vec<(String, String)> = items
            .iter()
            .map(|(p, r)| (p.reply.clone(), r.text.clone()))
            .collect();
        rows.push(MeaningRow {
            strategy: kind,
            n: items.len(),
            distinct_ngrams_context: col(0),
            distinct_ngrams_reply: col(1),
            similarity_context: col(2),
            similarity_reply: col(3),
            contradiction_rate: contradiction_rate(nli, &nli_items)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::ProviderConfig;
    use proptest::prelude::*;

    fn tri(a: &str, b: &str, c: &str) -> Trigram {
        [a.into(), b.into(), c.into()]
    }

    fn reframe(pair_id: &str, kind: StrategyKind, text: &str) -> Reframe {
        Reframe {
            pair_id: pair_id.into(),
            kind,
            text: text.into(),
            word_count: text.split_whitespace().count(),
            over_length: false,
            model: "m".into(),
            hash: "h".into(),
            created_at: None,
        }
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("Thank you, for\u{2026}"), ["thank", "you", "for"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("I ALSO think"), ["i", "also", "think"]);
        assert_eq!(tokenize("don't -- \"stop\""), ["don't", "stop"]);
    }

    #[test]
    fn form_dissimilarity_examples() {
        assert_eq!(form_dissimilarity("we both agree", "we both agree").unwrap(), 0.0);
        assert_eq!(form_dissimilarity("alpha beta", "gamma delta").unwrap(), 1.0);
        let v = form_dissimilarity("we both believe so", "we both think so").unwrap();
        let expected = (1.0 / 4.0 + 2.0 / 3.0 + 2.0 / 2.0 + 1.0 / 1.0) / 4.0;
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 0.729).abs() < 1e-3);
        assert!(matches!(
            form_dissimilarity("...", "x"),
            Err(MetricError::EmptyCandidate)
        ));
        // two tokens: only unigrams and bigrams count
        assert_eq!(form_dissimilarity("a b", "a").unwrap(), (0.5 + 1.0) / 2.0);
    }

    #[test]
    fn added_trigram_examples() {
        assert!(added_trigrams("same words here now", "same words here now").is_empty());
        assert_eq!(
            added_trigrams("", "thank you for this"),
            BTreeSet::from([tri("thank", "you", "for"), tri("you", "for", "this")])
        );
        assert_eq!(
            added_trigrams("we agree", "i think we agree"),
            BTreeSet::from([tri("i", "think", "we"), tri("think", "we", "agree")])
        );
    }

    #[test]
    fn stats_use_document_frequency() {
        let originals = HashMap::from([("p".to_string(), "we disagree".to_string())]);
        let reframes = vec![
            reframe("p", StrategyKind::Gratitude, "thank you for this thank you for"),
            reframe("p", StrategyKind::Gratitude, "well we disagree"),
            reframe("p", StrategyKind::Hedging, "i think we disagree"),
        ];
        let stats = strategy_trigram_stats(&reframes, &originals).unwrap();
        let t = tri("thank", "you", "for");
        assert_eq!(stats.count(StrategyKind::Gratitude, &t), 1);
        assert_eq!(stats.p_t_given_s(StrategyKind::Gratitude, &t), 0.5);
        assert_eq!(stats.p_s_given_t(StrategyKind::Gratitude, &t), 1.0);
        let top = stats.ranked(StrategyKind::Gratitude);
        assert!(top[0].p_t_given_s >= top.last().unwrap().p_t_given_s);
        let missing = vec![reframe("zz", StrategyKind::Hedging, "x y z")];
        assert!(matches!(
            strategy_trigram_stats(&missing, &originals),
            Err(MetricError::UnknownPair(_))
        ));
    }

    fn stats_from_vocab(vocab: &[(StrategyKind, &[Trigram])]) -> TrigramStats {
        let mut s = TrigramStats::default();
        for (k, ts) in vocab {
            s.reframes_per_kind.insert(*k, 1);
            let m = s.counts.entry(*k).or_default();
            for t in ts.iter() {
                m.insert(t.clone(), 1);
                *s.totals.entry(t.clone()).or_default() += 1;
            }
        }
        s
    }

    #[test]
    fn overlap_examples() {
        let x = tri("x", "x", "x");
        let y = tri("y", "y", "y");
        let z = tri("z", "z", "z");
        let s = stats_from_vocab(&[
            (StrategyKind::Hedging, &[x.clone(), y.clone()]),
            (StrategyKind::Agreement, &[y.clone(), z.clone()]),
            (StrategyKind::Gratitude, &[tri("q", "q", "q")]),
        ]);
        assert_eq!(strategy_overlap(StrategyKind::Hedging, StrategyKind::Hedging, &s).unwrap(), 1.0);
        assert!((strategy_overlap(StrategyKind::Hedging, StrategyKind::Agreement, &s).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(strategy_overlap(StrategyKind::Hedging, StrategyKind::Gratitude, &s).unwrap(), 0.0);
        assert!(matches!(
            strategy_overlap(StrategyKind::Hedging, StrategyKind::Grounding, &s),
            Err(MetricError::MissingStrategy(StrategyKind::Grounding))
        ));
        let m = overlap_matrix(&s);
        assert_eq!(m.len(), 3);
    }

    #[test]
    fn similarity_with_mock_embeddings() {
        let client = EmbedClient::from_config(&ProviderConfig::mock()).unwrap();
        let v = semantic_similarity(&client, "hello there", "hello there").unwrap();
        assert!((v - 1.0).abs() < 1e-6);
        assert_eq!(semantic_similarity(&client, "abc", "xyz").unwrap(), 0.0);
    }

    #[test]
    fn contradiction_rate_counts() {
        let client = NliClient::from_config(&ProviderConfig::mock()).unwrap();
        let same: Vec<(String, String)> = (0..3)
            .map(|i| (format!("claim {i}"), format!("claim {i}")))
            .collect();
        assert_eq!(contradiction_rate(&client, &same).unwrap(), 0.0);
        let mut mixed = same.clone();
        mixed.push(("taxes help schools".into(), "not taxes help schools".into()));
        assert_eq!(contradiction_rate(&client, &mixed).unwrap(), 0.25);
        assert!(matches!(contradiction_rate(&client, &[]), Err(MetricError::Empty)));
    }

    proptest! {
        #[test]
        fn reference_growth_never_increases_dissimilarity(
            cand in "[a-c]( [a-c]){0,8}",
            reference in "[a-c]( [a-c]){0,8}",
            extra in "[a-d]( [a-d]){0,5}",
        ) {
            let base = form_dissimilarity(&cand, &reference).unwrap();
            let grown = form_dissimilarity(&cand, &format!("{reference} {extra}")).unwrap();
            prop_assert!(grown <= base + 1e-12);
            prop_assert_eq!(form_dissimilarity(&cand, &cand).unwrap(), 0.0);
            prop_assert!((0.0..=1.0).contains(&base));
        }

        #[test]
        fn posterior_sums_to_one(texts in proptest::collection::vec(("[0-5]", "[a-c]( [a-c]){2,7}"), 1..30)) {
            let originals = HashMap::from([("p".to_string(), "a b c".to_string())]);
            let reframes: Vec<Reframe> = texts
                .iter()
                .map(|(k, t)| reframe("p", StrategyKind::STRATEGIES[k.parse::<usize>().unwrap()], t))
                .collect();
            let stats = strategy_trigram_stats(&reframes, &originals).unwrap();
            for t in stats.totals.keys() {
                let sum: f64 = stats.kinds().map(|k| stats.p_s_given_t(k, t)).sum();
                prop_assert!((sum - 1.0).abs() < 1e-9);
            }
            for a in stats.kinds() {
                for b in stats.kinds() {
                    let ab = strategy_overlap(a, b, &stats).unwrap();
                    let ba = strategy_overlap(b, a, &stats).unwrap();
                    prop_assert_eq!(ab, ba);
                }
            }
        }
    }
}
