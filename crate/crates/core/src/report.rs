//! Reproduction tables. Each table is written as CSV with reals fixed to four
//! decimals, plus a JSON mirror holding exactly the same cell values.

use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::annotation::{ReasonabilityRow, FACTOR_NAMES};
use crate::corpus::ExclusionReport;
use crate::reframer::GenerationReport;
use crate::stats::{BinContrast, Contrast, Emm, FactorTable};
use crate::textmetrics::{MeaningRow, TrigramRow};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Int(i64),
    Real(f64),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Real(x) => format_real(*x),
            Cell::Empty => String::new(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Int(i) => json!(i),
            Cell::Real(x) if x.is_finite() => {
                json!(format_real(*x).parse::<f64>().expect("formatted real parses"))
            }
            Cell::Real(x) => Value::String(format_real(*x)),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Real(x)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as i64)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

/// Four decimals; negative zero prints as zero.
pub fn format_real(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x:.4}");
    if s == "-0.0000" {
        "0.0000".into()
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut m = Map::new();
                for (c, v) in self.columns.iter().zip(row) {
                    m.insert(c.clone(), v.to_json());
                }
                Value::Object(m)
            })
            .collect();
        json!({ "table": self.name, "columns": self.columns, "rows": rows })
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("json values serialize");
        s.push('\n');
        s
    }

    /// Writes `<name>.csv` and `<name>.json` into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let csv = dir.join(format!("{}.csv", self.name));
        let json = dir.join(format!("{}.json", self.name));
        std::fs::write(&csv, self.to_csv())?;
        std::fs::write(&json, self.to_json_string())?;
        Ok(vec![csv, json])
    }
}

pub fn exclusion_table(report: &ExclusionReport) -> Table {
    let mut t = Table::new("ingest_exclusions", &["stage", "count"]);
    for (stage, n) in report.rows() {
        t.push(vec![stage.into(), n.into()]);
    }
    t
}

pub fn generation_table(report: &GenerationReport) -> Table {
    let mut t = Table::new(
        "generation",
        &["strategy", "generated", "resumed", "failed", "over_length"],
    );
    for (kind, p) in &report.per_kind {
        t.push(vec![
            kind.as_str().into(),
            p.generated.into(),
            p.resumed.into(),
            p.failed.into(),
            p.over_length.into(),
        ]);
    }
    t
}

pub fn meaning_table(rows: &[MeaningRow]) -> Table {
    let mut t = Table::new(
        "meaning_preservation",
        &[
            "strategy",
            "n",
            "distinct_ngrams_context",
            "distinct_ngrams_reply",
            "similarity_context",
            "similarity_reply",
            "contradiction_rate",
        ],
    );
    for r in rows {
        t.push(vec![
            r.strategy.as_str().into(),
            r.n.into(),
            r.distinct_ngrams_context.into(),
            r.distinct_ngrams_reply.into(),
            r.similarity_context.into(),
            r.similarity_reply.into(),
            r.contradiction_rate.into(),
        ]);
    }
    t
}

pub fn trigram_table(rows: &[TrigramRow]) -> Table {
    let mut t = Table::new(
        "trigrams",
        &["strategy", "rank", "trigram", "count", "p_t_given_s", "p_s_given_t"],
    );
    let mut rank = 0;
    let mut current = None;
    for r in rows {
        if current != Some(r.strategy) {
            current = Some(r.strategy);
            rank = 0;
        }
        rank += 1;
        t.push(vec![
            r.strategy.as_str().into(),
            rank.into(),
            r.trigram.clone().into(),
            r.count.into(),
            r.p_t_given_s.into(),
            r.p_s_given_t.into(),
        ]);
    }
    t
}

pub fn overlap_table(matrix: &[(crate::strategies::StrategyKind, Vec<f64>)]) -> Table {
    let mut cols = vec!["strategy"];
    cols.extend(matrix.iter().map(|(k, _)| k.as_str()));
    let mut t = Table::new("trigram_overlap", &cols);
    for (k, row) in matrix {
        let mut cells: Vec<Cell> = vec![k.as_str().into()];
        cells.extend(row.iter().map(|&v| Cell::Real(v)));
        t.push(cells);
    }
    t
}

pub fn factor_table(ft: &FactorTable) -> Table {
    let mut cols = vec!["strategy", "n"];
    cols.extend(FACTOR_NAMES);
    cols.push("average");
    let mut t = Table::new("receptiveness_factors", &cols);
    for r in &ft.rows {
        let mut row: Vec<Cell> = vec![r.strategy.as_str().into(), r.n.into()];
        row.extend(r.factors.iter().map(|&f| Cell::Real(f)));
        row.push(r.average.into());
        t.push(row);
    }
    let mut avg: Vec<Cell> = vec!["average".into(), Cell::Empty];
    avg.extend(ft.average.iter().map(|&f| Cell::Real(f)));
    avg.push(ft.overall.into());
    t.push(avg);
    t
}

pub fn alpha_table(entries: &[(&str, Result<f64, String>)]) -> Table {
    let mut t = Table::new("krippendorff_alpha", &["unit", "alpha", "note"]);
    for (unit, v) in entries {
        match v {
            Ok(a) => t.push(vec![(*unit).into(), (*a).into(), Cell::Empty]),
            Err(e) => t.push(vec![(*unit).into(), Cell::Empty, e.clone().into()]),
        }
    }
    t
}

pub fn reasonability_table(rows: &[ReasonabilityRow]) -> Table {
    let mut t = Table::new(
        "reasonability",
        &["variant", "n_items", "mean", "ci95", "mean_diff", "t", "df", "p"],
    );
    for r in rows {
        let test = r.vs_original.as_ref();
        t.push(vec![
            r.variant.as_str().into(),
            r.n_items.into(),
            r.mean.into(),
            r.ci_half_width.into(),
            r.mean_diff.into(),
            test.map(|x| x.t).into(),
            test.map(|x| x.df).into(),
            test.map(|x| x.p).into(),
        ]);
    }
    t
}

pub fn contrast_table(name: &str, rows: &[Contrast]) -> Table {
    let mut t = Table::new(name, &["term", "estimate", "se", "z", "p"]);
    for c in rows {
        t.push(vec![
            c.label.clone().into(),
            c.estimate.into(),
            c.se.into(),
            c.z.into(),
            c.p.into(),
        ]);
    }
    t
}

pub fn emm_table(name: &str, rows: &[Emm]) -> Table {
    let mut t = Table::new(name, &["strategy", "bin", "mean", "se", "lower", "upper"]);
    for e in rows {
        t.push(vec![
            e.strategy.as_str().into(),
            e.bin.map(|b| b.to_string()).into(),
            e.mean.into(),
            e.se.into(),
            e.lower.into(),
            e.upper.into(),
        ]);
    }
    t
}

pub fn toxicity_contrast_table(rows: &[BinContrast]) -> Table {
    let mut t = Table::new(
        "toxicity_contrasts",
        &["group", "pair", "estimate", "se", "z", "p"],
    );
    for r in rows {
        t.push(vec![
            r.group.clone().into(),
            r.pair.clone().into(),
            r.contrast.estimate.into(),
            r.contrast.se.into(),
            r.contrast.z.into(),
            r.contrast.p.into(),
        ]);
    }
    t
}
