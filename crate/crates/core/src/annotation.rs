//! Human-annotation import, receptiveness index and factor scores,
//! reasonability aggregates, and Krippendorff's α.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::{paired_t_test, t_ci_half_width, PairedTTest, StatsError};
use crate::strategies::StrategyKind;

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("cannot read annotations: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Malformed { line: u64, reason: String },
    #[error("line {line}: missing answer in column {column}")]
    MissingAnswer { line: u64, column: String },
    #[error("answer {value} at position {position} is outside [-3, 3]")]
    AnswerOutOfRange { position: usize, value: i64 },
    #[error("reasonability score {0} is outside [0, 4]")]
    ScoreOutOfRange(i64),
    #[error("receptiveness records compare a reframe against the original; variant may not be original")]
    OriginalVariant,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("no items shared between {0} and the original")]
    NoOverlap(StrategyKind),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    /// Reverse coded.
    Negative,
    Positive,
}

/// Question order: F1a, F1b, F2a, F2b, F3a, F3b, F4a, F4b.
pub const POLARITY: [Polarity; 8] = [
    Polarity::Negative,
    Polarity::Positive,
    Polarity::Negative,
    Polarity::Positive,
    Polarity::Negative,
    Polarity::Negative,
    Polarity::Negative,
    Polarity::Negative,
];

pub const FACTOR_NAMES: [&str; 4] = ["Emotion", "Curiosity", "Bias", "Openness"];

pub const QUESTION_COLUMNS: [&str; 8] = ["q1", "q2", "q3", "q4", "q5", "q6", "q7", "q8"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceptivenessRecord {
    pub pair_id: String,
    pub variant: StrategyKind,
    pub annotator_id: String,
    pub answers: [i8; 8],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasonabilityRecord {
    pub pair_id: String,
    pub variant: StrategyKind,
    pub annotator_id: String,
    pub score: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceptivenessScore {
    pub index: f64,
    pub factors: [f64; 4],
}

/// Sign flip on reverse-coded questions; an involution.
pub fn apply_polarity(answers: [i8; 8]) -> [i8; 8] {
    let mut out = answers;
    for (a, p) in out.iter_mut().zip(POLARITY) {
        if p == Polarity::Negative {
            *a = -*a;
        }
    }
    out
}

fn check_answers(answers: &[i8; 8]) -> Result<(), AnnotationError> {
    match answers.iter().position(|a| !(-3..=3).contains(a)) {
        Some(position) => Err(AnnotationError::AnswerOutOfRange {
            position,
            value: answers[position] as i64,
        }),
        None => Ok(()),
    }
}

/// Coded answers: +3 always favours the reframed reply.
pub fn code_answers(record: &ReceptivenessRecord) -> Result<[f64; 8], AnnotationError> {
    check_answers(&record.answers)?;
    Ok(apply_polarity(record.answers).map(f64::from))
}

pub fn receptiveness_score(record: &ReceptivenessRecord) -> Result<ReceptivenessScore, AnnotationError> {
    let coded = code_answers(record)?;
    let factors = [0, 1, 2, 3].map(|f| (coded[2 * f] + coded[2 * f + 1]) / 2.0);
    Ok(ReceptivenessScore {
        index: coded.iter().sum::<f64>() / 8.0,
        factors,
    })
}

fn header_index(
    headers: &csv::StringRecord,
    name: &str,
) -> Result<usize, AnnotationError> {
    headers
        .iter()
        .position(|h| h.trim().eq_ignore_ascii_case(name))
        .ok_or_else(|| AnnotationError::Malformed {
            line: 1,
            reason: format!("missing column {name:?}"),
        })
}

struct Row<'a> {
    line: u64,
    record: &'a csv::StringRecord,
}

impl Row<'_> {
    fn field(&self, idx: usize, name: &str) -> Result<&str, AnnotationError> {
        match self.record.get(idx).map(str::trim) {
            Some(v) if !v.is_empty() => Ok(v),
            _ => Err(AnnotationError::MissingAnswer {
                line: self.line,
                column: name.to_string(),
            }),
        }
    }

    fn int(&self, idx: usize, name: &str) -> Result<i64, AnnotationError> {
        let raw = self.field(idx, name)?;
        raw.parse::<i64>()
            .or_else(|_| match raw.parse::<f64>() {
                Ok(f) if f.fract() == 0.0 && f.abs() < 1e6 => Ok(f as i64),
                _ => Err(()),
            })
            .map_err(|_| AnnotationError::Malformed {
                line: self.line,
                reason: format!("{name} is not an integer: {raw:?}"),
            })
    }

    fn variant(&self, idx: usize) -> Result<StrategyKind, AnnotationError> {
        self.field(idx, "variant")?
            .parse()
            .map_err(|e: crate::strategies::StrategyError| AnnotationError::Malformed {
                line: self.line,
                reason: e.to_string(),
            })
    }
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input)
}

fn each_row<R: Read>(
    input: R,
    mut f: impl FnMut(&csv::StringRecord, Row<'_>) -> Result<(), AnnotationError>,
) -> Result<(), AnnotationError> {
    let mut rdr = reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| AnnotationError::Malformed { line: 1, reason: e.to_string() })?
        .clone();
    let mut record = csv::StringRecord::new();
    loop {
        let more = rdr.read_record(&mut record).map_err(|e| AnnotationError::Malformed {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            reason: e.to_string(),
        })?;
        if !more {
            return Ok(());
        }
        if record.iter().all(|v| v.trim().is_empty()) {
            continue;
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        f(&headers, Row { line, record: &record })?;
    }
}

/// Columns `pair_id, variant, annotator_id, q1..q8` (raw, uncoded answers).
pub fn parse_receptiveness<R: Read>(input: R) -> Result<Vec<ReceptivenessRecord>, AnnotationError> {
    let mut out = Vec::new();
    let mut cols: Option<(usize, usize, usize, [usize; 8])> = None;
    each_row(input, |headers, row| {
        if cols.is_none() {
            let mut q = [0; 8];
            for (i, name) in QUESTION_COLUMNS.iter().enumerate() {
                q[i] = header_index(headers, name)?;
            }
            cols = Some((
                header_index(headers, "pair_id")?,
                header_index(headers, "variant")?,
                header_index(headers, "annotator_id")?,
                q,
            ));
        }
        let (p, v, a, q) = cols.expect("set above");
        let variant = row.variant(v)?;
        if variant == StrategyKind::Original {
            return Err(AnnotationError::OriginalVariant);
        }
        let mut answers = [0i8; 8];
        for (i, &idx) in q.iter().enumerate() {
            let value = row.int(idx, QUESTION_COLUMNS[i])?;
            if !(-3..=3).contains(&value) {
                return Err(AnnotationError::AnswerOutOfRange { position: i, value });
            }
            answers[i] = value as i8;
        }
        out.push(ReceptivenessRecord {
            pair_id: row.field(p, "pair_id")?.to_string(),
            variant,
            annotator_id: row.field(a, "annotator_id")?.to_string(),
            answers,
        });
        Ok(())
    })?;
    Ok(out)
}

/// Columns `pair_id, variant, annotator_id, score`.
pub fn parse_reasonability<R: Read>(input: R) -> Result<Vec<ReasonabilityRecord>, AnnotationError> {
    let mut out = Vec::new();
    let mut cols: Option<[usize; 4]> = None;
    each_row(input, |headers, row| {
        if cols.is_none() {
            cols = Some([
                header_index(headers, "pair_id")?,
                header_index(headers, "variant")?,
                header_index(headers, "annotator_id")?,
                header_index(headers, "score")?,
            ]);
        }
        let [p, v, a, s] = cols.expect("set above");
        let score = row.int(s, "score")?;
        if !(0..=4).contains(&score) {
            return Err(AnnotationError::ScoreOutOfRange(score));
        }
        out.push(ReasonabilityRecord {
            pair_id: row.field(p, "pair_id")?.to_string(),
            variant: row.variant(v)?,
            annotator_id: row.field(a, "annotator_id")?.to_string(),
            score: score as u8,
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn load_receptiveness(path: &Path) -> Result<Vec<ReceptivenessRecord>, AnnotationError> {
    parse_receptiveness(std::fs::File::open(path)?)
}

pub fn load_reasonability(path: &Path) -> Result<Vec<ReasonabilityRecord>, AnnotationError> {
    parse_reasonability(std::fs::File::open(path)?)
}

pub fn write_receptiveness<W: std::io::Write>(
    out: W,
    records: &[ReceptivenessRecord],
) -> Result<(), AnnotationError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["pair_id", "variant", "annotator_id"];
    header.extend(QUESTION_COLUMNS);
    w.write_record(&header).map_err(csv_io)?;
    for r in records {
        let mut row = vec![r.pair_id.clone(), r.variant.to_string(), r.annotator_id.clone()];
        row.extend(r.answers.iter().map(|a| a.to_string()));
        w.write_record(&row).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_reasonability<W: std::io::Write>(
    out: W,
    records: &[ReasonabilityRecord],
) -> Result<(), AnnotationError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["pair_id", "variant", "annotator_id", "score"]).map_err(csv_io)?;
    for r in records {
        w.write_record([
            r.pair_id.as_str(),
            r.variant.as_str(),
            r.annotator_id.as_str(),
            &r.score.to_string(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> AnnotationError {
    AnnotationError::Io(std::io::Error::other(e.to_string()))
}

fn sorted(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    xs
}

/// Interval-metric Krippendorff's α. Each unit lists the values it received;
/// units with fewer than two values are not pairable and are ignored.
pub fn krippendorff_alpha_interval(units: &[Vec<f64>]) -> Result<f64, AnnotationError> {
    let pairable: Vec<Vec<f64>> = units
        .iter()
        .filter(|u| u.len() >= 2)
        .map(|u| sorted(u.clone()))
        .collect();
    if pairable.len() < 2 {
        return Err(AnnotationError::InsufficientData(format!(
            "{} unit(s) with at least two values; need 2",
            pairable.len()
        )));
    }
    // Σ_{i≠j} (v_i - v_j)² = 2(m Σv² - (Σv)²)
    let spread = |vals: &[f64]| -> f64 {
        let m = vals.len() as f64;
        let (s, s2) = vals.iter().fold((0.0, 0.0), |(s, s2), v| (s + v, s2 + v * v));
        2.0 * (m * s2 - s * s)
    };
    let n: f64 = pairable.iter().map(|u| u.len() as f64).sum();
    let observed: f64 = pairable
        .iter()
        .map(|u| spread(u) / (u.len() as f64 - 1.0))
        .sum::<f64>()
        / n;
    let all = sorted(pairable.concat());
    let mean = all.iter().sum::<f64>() / n;
    let expected = 2.0 * n * all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n * (n - 1.0));
    if expected <= 1e-15 * (1.0 + mean * mean) {
        return Ok(1.0);
    }
    Ok(1.0 - observed.max(0.0) / expected)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaUnit {
    /// One value per record (the index); unit = (pair, variant).
    RecordIndex,
    /// One value per coded answer; unit = (pair, variant, question).
    PerQuestion,
}

pub fn receptiveness_alpha(
    records: &[ReceptivenessRecord],
    unit: AlphaUnit,
) -> Result<f64, AnnotationError> {
    let mut units: BTreeMap<(String, StrategyKind, usize), Vec<f64>> = BTreeMap::new();
    for r in records {
        match unit {
            AlphaUnit::RecordIndex => units
                .entry((r.pair_id.clone(), r.variant, 0))
                .or_default()
                .push(receptiveness_score(r)?.index),
            AlphaUnit::PerQuestion => {
                for (q, v) in code_answers(r)?.into_iter().enumerate() {
                    units.entry((r.pair_id.clone(), r.variant, q)).or_default().push(v);
                }
            }
        }
    }
    krippendorff_alpha_interval(&units.into_values().collect::<Vec<_>>())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasonabilityRow {
    pub variant: StrategyKind,
    pub n_items: usize,
    pub mean: f64,
    /// Half-width of the 95% t interval over item means; needs two items.
    pub ci_half_width: Option<f64>,
    /// Mean paired difference against the original over shared items.
    pub mean_diff: Option<f64>,
    /// Absent for the original itself and when the differences have no variance.
    pub vs_original: Option<PairedTTest>,
}

/// Annotator-averaged item scores keyed by variant then pair.
pub fn item_means(records: &[ReasonabilityRecord]) -> BTreeMap<StrategyKind, BTreeMap<String, f64>> {
    let mut raw: BTreeMap<StrategyKind, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for r in records {
        raw.entry(r.variant)
            .or_default()
            .entry(r.pair_id.clone())
            .or_default()
            .push(f64::from(r.score));
    }
    raw.into_iter()
        .map(|(k, items)| {
            let means = items
                .into_iter()
                .map(|(p, v)| {
                    let v = sorted(v);
                    (p, v.iter().sum::<f64>() / v.len() as f64)
                })
                .collect();
            (k, means)
        })
        .collect()
}

/// Original first, then every other variant present in kind order.
pub fn reasonability_summary(
    records: &[ReasonabilityRecord],
) -> Result<Vec<ReasonabilityRow>, AnnotationError> {
    let means = item_means(records);
    let original = means
        .get(&StrategyKind::Original)
        .ok_or_else(|| AnnotationError::InsufficientData("no original-variant scores".into()))?;
    let mut order = vec![StrategyKind::Original];
    order.extend(means.keys().copied().filter(|&k| k != StrategyKind::Original));
    let mut rows = Vec::new();
    for variant in order {
        let items = &means[&variant];
        let values: Vec<f64> = items.values().copied().collect();
        let (mean_diff, vs_original) = if variant == StrategyKind::Original {
            (None, None)
        } else {
            let (a, b): (Vec<f64>, Vec<f64>) = items
                .iter()
                .filter_map(|(p, v)| original.get(p).map(|o| (*v, *o)))
                .unzip();
            if a.is_empty() {
                return Err(AnnotationError::NoOverlap(variant));
            }
            match paired_t_test(&a, &b) {
                Ok(t) => (Some(t.mean_diff), Some(t)),
                Err(StatsError::ZeroVariance { mean_diff }) => (Some(mean_diff), None),
                Err(StatsError::TooFew { .. }) => {
                    (Some(a.iter().zip(&b).map(|(x, y)| x - y).sum::<f64>() / a.len() as f64), None)
                }
                Err(e) => return Err(e.into()),
            }
        };
        rows.push(ReasonabilityRow {
            variant,
            n_items: values.len(),
            mean: values.iter().sum::<f64>() / values.len() as f64,
            ci_half_width: t_ci_half_width(&values).ok(),
            mean_diff,
            vs_original,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(answers: [i8; 8]) -> ReceptivenessRecord {
        ReceptivenessRecord {
            pair_id: "p".into(),
            variant: StrategyKind::Hedging,
            annotator_id: "a".into(),
            answers,
        }
    }

    #[test]
    fn coding_examples() {
        assert_eq!(code_answers(&rec([0; 8])).unwrap(), [0.0; 8]);
        let raw = [-2, 1, -1, 2, -3, -1, -2, -2];
        assert_eq!(
            code_answers(&rec(raw)).unwrap(),
            [2.0, 1.0, 1.0, 2.0, 3.0, 1.0, 2.0, 2.0]
        );
        assert_eq!(code_answers(&rec([0, 3, 0, 0, 0, 0, 0, 0])).unwrap()[1], 3.0);
        assert!(matches!(
            code_answers(&rec([0, 0, 4, 0, 0, 0, 0, 0])),
            Err(AnnotationError::AnswerOutOfRange { position: 2, value: 4 })
        ));
    }

    #[test]
    fn score_examples() {
        let s = receptiveness_score(&rec([-2, 1, -1, 2, -3, -1, -2, -2])).unwrap();
        assert_eq!(s.index, 1.75);
        assert_eq!(s.factors, [1.5, 1.5, 2.0, 2.0]);
        let zero = receptiveness_score(&rec([0; 8])).unwrap();
        assert_eq!((zero.index, zero.factors), (0.0, [0.0; 4]));
        let max = receptiveness_score(&rec([-3, 3, -3, 3, -3, -3, -3, -3])).unwrap();
        assert_eq!(max.index, 3.0);
    }

    #[test]
    fn import_receptiveness() {
        let csv = "pair_id,variant,annotator_id,q1,q2,q3,q4,q5,q6,q7,q8\n\
                   p1,hedging,w1,-2,1,-1,2,-3,-1,-2,-2\n\
                   \n\
                   p1,Paraphrase,w2,0,0,0,0,0,0,0,0\n";
        let recs = parse_receptiveness(csv.as_bytes()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1].variant, StrategyKind::BaselineParaphrase);
        let missing = "pair_id,variant,annotator_id,q1,q2,q3,q4,q5,q6,q7,q8\np1,hedging,w1,1,1,1,,1,1,1,1\n";
        assert!(matches!(
            parse_receptiveness(missing.as_bytes()),
            Err(AnnotationError::MissingAnswer { line: 2, ref column }) if column == "q4"
        ));
        let orig = "pair_id,variant,annotator_id,q1,q2,q3,q4,q5,q6,q7,q8\np1,original,w1,1,1,1,1,1,1,1,1\n";
        assert!(matches!(
            parse_receptiveness(orig.as_bytes()),
            Err(AnnotationError::OriginalVariant)
        ));
        let no_col = "pair_id,variant,annotator_id,q1\np1,hedging,w1,1\n";
        assert!(matches!(
            parse_receptiveness(no_col.as_bytes()),
            Err(AnnotationError::Malformed { .. })
        ));
        let mut buf = Vec::new();
        write_receptiveness(&mut buf, &recs).unwrap();
        assert_eq!(parse_receptiveness(buf.as_slice()).unwrap(), recs);
    }

    #[test]
    fn import_reasonability() {
        let csv = "pair_id,variant,annotator_id,score\np1,original,w1,2\np1,hedging,w1,4\n";
        let recs = parse_reasonability(csv.as_bytes()).unwrap();
        assert_eq!(recs[0].variant, StrategyKind::Original);
        assert!(matches!(
            parse_reasonability("pair_id,variant,annotator_id,score\np,hedging,w,5\n".as_bytes()),
            Err(AnnotationError::ScoreOutOfRange(5))
        ));
        let mut buf = Vec::new();
        write_reasonability(&mut buf, &recs).unwrap();
        assert_eq!(parse_reasonability(buf.as_slice()).unwrap(), recs);
    }

    /// Coincidence-matrix definition over distinct values.
    fn alpha_oracle(units: &[Vec<f64>]) -> f64 {
        let mut values: Vec<f64> = units.iter().flatten().copied().collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        let k = values.len();
        let idx = |v: f64| values.iter().position(|&x| x == v).unwrap();
        let mut o = vec![vec![0.0; k]; k];
        for u in units.iter().filter(|u| u.len() >= 2) {
            let m = u.len() as f64;
            for i in 0..u.len() {
                for j in 0..u.len() {
                    if i != j {
                        o[idx(u[i])][idx(u[j])] += 1.0 / (m - 1.0);
                    }
                }
            }
        }
        let nc: Vec<f64> = o.iter().map(|r| r.iter().sum()).collect();
        let n: f64 = nc.iter().sum();
        let (mut dobs, mut dexp) = (0.0, 0.0);
        for c in 0..k {
            for kk in 0..k {
                let d = (values[c] - values[kk]).powi(2);
                dobs += o[c][kk] * d;
                dexp += nc[c] * nc[kk] * d;
            }
        }
        if dexp == 0.0 {
            return 1.0;
        }
        1.0 - (n - 1.0) * dobs / dexp
    }

    #[test]
    fn alpha_examples() {
        let perfect = vec![vec![1.0, 1.0], vec![2.0, 2.0, 2.0]];
        assert_eq!(krippendorff_alpha_interval(&perfect).unwrap(), 1.0);
        let same = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert_eq!(krippendorff_alpha_interval(&same).unwrap(), 1.0);
        let one_off = vec![vec![1.0, 1.0], vec![1.0, 2.0]];
        let a = krippendorff_alpha_interval(&one_off).unwrap();
        assert!((a - alpha_oracle(&one_off)).abs() < 1e-12);
        assert!(matches!(
            krippendorff_alpha_interval(&[vec![1.0, 2.0], vec![3.0]]),
            Err(AnnotationError::InsufficientData(_))
        ));
    }

    #[test]
    fn alpha_unit_choices() {
        let mut recs = Vec::new();
        for (pair, ann) in [("p1", [1i8, 1]), ("p2", [-1, -2])] {
            for (i, v) in ann.iter().enumerate() {
                let mut r = rec([-v, *v, -v, *v, -v, -v, -v, -v]);
                r.pair_id = pair.into();
                r.annotator_id = format!("w{i}");
                recs.push(r);
            }
        }
        let by_index = receptiveness_alpha(&recs, AlphaUnit::RecordIndex).unwrap();
        let by_question = receptiveness_alpha(&recs, AlphaUnit::PerQuestion).unwrap();
        assert!(by_index <= 1.0 && by_question <= 1.0);
    }

    #[test]
    fn reasonability_rows() {
        let mut recs = Vec::new();
        let scores = [(0, 2, 3), (1, 1, 3), (2, 2, 4), (3, 3, 3)];
        for (i, o, h) in scores {
            for (variant, s) in [(StrategyKind::Original, o), (StrategyKind::Hedging, h)] {
                recs.push(ReasonabilityRecord {
                    pair_id: format!("p{i}"),
                    variant,
                    annotator_id: "w".into(),
                    score: s,
                });
            }
        }
        let rows = reasonability_summary(&recs).unwrap();
        assert_eq!(rows[0].variant, StrategyKind::Original);
        assert_eq!(rows[0].mean, 2.0);
        assert_eq!(rows[1].mean, 3.25);
        let t = rows[1].vs_original.unwrap();
        assert_eq!(t.mean_diff, 1.25);
        assert_eq!(t.n, 4);
        recs.push(ReasonabilityRecord {
            pair_id: "other".into(),
            variant: StrategyKind::Gratitude,
            annotator_id: "w".into(),
            score: 3,
        });
        assert!(matches!(
            reasonability_summary(&recs),
            Err(AnnotationError::NoOverlap(StrategyKind::Gratitude))
        ));
    }

    proptest! {
        #[test]
        fn polarity_is_involution(a in proptest::array::uniform8(-3i8..=3)) {
            prop_assert_eq!(apply_polarity(apply_polarity(a)), a);
            let s = receptiveness_score(&rec(a)).unwrap();
            prop_assert!((s.index - s.factors.iter().sum::<f64>() / 4.0).abs() < 1e-12);
        }

        #[test]
        fn alpha_matches_oracle(
            units in proptest::collection::vec(proptest::collection::vec(-3i8..=3, 0..6), 2..10)
        ) {
            let units: Vec<Vec<f64>> = units
                .into_iter()
                .map(|u| u.into_iter().map(|v| f64::from(v) / 2.0).collect())
                .collect();
            let pairable = units.iter().filter(|u| u.len() >= 2).count();
            match krippendorff_alpha_interval(&units) {
                Ok(a) => prop_assert!((a - alpha_oracle(&units)).abs() < 1e-9),
                Err(_) => prop_assert!(pairable < 2),
            }
        }

        #[test]
        fn annotator_order_is_irrelevant(
            units in proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 2..6), 2..8),
            seed in 0u64..1000,
        ) {
            let shuffled: Vec<Vec<f64>> = units
                .iter()
                .map(|u| {
                    let mut v = u.clone();
                    let len = v.len();
                    v.rotate_left((seed as usize) % len);
                    v.reverse();
                    v
                })
                .collect();
            prop_assert_eq!(
                krippendorff_alpha_interval(&units).unwrap(),
                krippendorff_alpha_interval(&shuffled).unwrap()
            );
        }
    }
}
