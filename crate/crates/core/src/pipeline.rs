//! Staged runner behind the CLI: ingest → generate → validate → trigrams →
//! score → analyze. Every stage reads and writes files under the configured
//! paths and records itself in `manifest.json` in the output directory.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::annotation::{
    self, AlphaUnit, AnnotationError, ReceptivenessRecord,
};
use crate::corpus::{self, CommentReplyPair, CorpusError, FilterConfig};
use crate::gateway::{
    content_hash, ChatClient, EmbedClient, GatewayConfig, GatewayError, NliClient,
    ProviderConfig, ToxicityClient,
};
use crate::reframer::{self, Reframe, ReframeError};
use crate::report::{self, Cell, Table};
use crate::stats::{
    self, estimated_marginal_means, fit_random_intercept, toxicity_bin, toxicity_contrasts,
    wald_contrast, Coding, Estimation, ModelFit, ModelSpec, ObservationRow, StatsError,
};
use crate::strategies::{StrategyError, StrategyKind};
use crate::textmetrics::{self, MetricError};

pub const TOOL: &str = "reframe-lab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("provider error: {0}")]
    Provider(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("stage {stage} needs {}, which does not exist", path.display())]
    Precondition { stage: &'static str, path: PathBuf },
    #[error("cannot write {}: {source}", path.display())]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl PipelineError {
    /// 2 config, 3 provider, 4 data.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Provider(_) => 3,
            PipelineError::Data(_) | PipelineError::Precondition { .. } | PipelineError::Output { .. } => 4,
        }
    }
}

impl From<GatewayError> for PipelineError {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::Config(m) => PipelineError::Config(m),
            other => PipelineError::Provider(other.to_string()),
        }
    }
}

impl From<CorpusError> for PipelineError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::InvalidConfig(m) => PipelineError::Config(m),
            other => PipelineError::Data(other.to_string()),
        }
    }
}

impl From<ReframeError> for PipelineError {
    fn from(e: ReframeError) -> Self {
        match e {
            ReframeError::Gateway { source, .. } => source.into(),
            ReframeError::NotGeneratable { .. } | ReframeError::Strategy(_) => {
                PipelineError::Config(e.to_string())
            }
            other => PipelineError::Data(other.to_string()),
        }
    }
}

impl From<MetricError> for PipelineError {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::Gateway(g) => g.into(),
            other => PipelineError::Data(other.to_string()),
        }
    }
}

impl From<AnnotationError> for PipelineError {
    fn from(e: AnnotationError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<StatsError> for PipelineError {
    fn from(e: StatsError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<StrategyError> for PipelineError {
    fn from(e: StrategyError) -> Self {
        PipelineError::Config(e.to_string())
    }
}

/// File locations, relative to the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: PathBuf,
    pub receptiveness: PathBuf,
    pub reasonability: PathBuf,
    pub cache: Option<PathBuf>,
    pub output: PathBuf,
    /// Defaults to `<output>/filtered.jsonl`.
    pub filtered: Option<PathBuf>,
    /// Defaults to `<output>/reframes.jsonl`.
    pub reframes: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            corpus: "data/corpus.jsonl".into(),
            receptiveness: "data/receptiveness.csv".into(),
            reasonability: "data/reasonability.csv".into(),
            cache: Some("cache".into()),
            output: "out".into(),
            filtered: None,
            reframes: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub method: Estimation,
    /// Trigram rows kept per strategy.
    pub top_trigrams: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            method: Estimation::Ml,
            top_trigrams: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Recorded in the manifest; no stage resamples.
    pub seed: u64,
    /// `"all"` or a comma-separated list of kinds to generate.
    pub strategies: String,
    pub paths: Paths,
    pub filter: FilterConfig,
    pub providers: GatewayConfig,
    pub analysis: AnalysisConfig,
    #[serde(skip)]
    pub base: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            strategies: "all".into(),
            paths: Paths::default(),
            filter: FilterConfig::default(),
            providers: GatewayConfig::default(),
            analysis: AnalysisConfig::default(),
            base: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, PipelineError> {
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.base = base.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let base = if base.as_os_str().is_empty() { PathBuf::from(".") } else { base };
        Self::from_toml(&text, &base)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.filter.validate()?;
        reframer::parse_kinds(&self.strategies)?;
        for p in [
            &self.providers.chat,
            &self.providers.embed,
            &self.providers.nli,
            &self.providers.toxicity,
        ] {
            p.validate()?;
        }
        if self.analysis.top_trigrams == 0 {
            return Err(PipelineError::Config("analysis.top_trigrams must be positive".into()));
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    fn rel_filtered(&self) -> PathBuf {
        self.paths
            .filtered
            .clone()
            .unwrap_or_else(|| self.paths.output.join("filtered.jsonl"))
    }

    fn rel_reframes(&self) -> PathBuf {
        self.paths
            .reframes
            .clone()
            .unwrap_or_else(|| self.paths.output.join("reframes.jsonl"))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.paths.output)
    }

    /// Provider config with the shared cache directory filled in.
    fn provider(&self, p: &ProviderConfig) -> ProviderConfig {
        let mut p = p.clone();
        if p.cache_dir.is_none() {
            p.cache_dir = self.paths.cache.as_ref().map(|c| self.resolve(c));
        } else if let Some(dir) = &p.cache_dir {
            p.cache_dir = Some(self.resolve(dir));
        }
        p
    }

    pub fn use_mock_providers(&mut self) {
        for p in [
            &mut self.providers.chat,
            &mut self.providers.embed,
            &mut self.providers.nli,
            &mut self.providers.toxicity,
        ] {
            p.mock = true;
            p.retry_base_ms = 0;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationKind {
    Receptiveness,
    Reasonability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisModel {
    Receptiveness,
    ToxicityInteraction,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageOutcome {
    pub stage: String,
    pub outputs: Vec<PathBuf>,
    pub notes: Vec<String>,
}

pub struct Pipeline {
    pub config: RunConfig,
}

fn sha256_file(path: &Path) -> Option<String> {
    std::fs::read(path).ok().map(|b| content_hash(&[&b]))
}

impl Pipeline {
    pub fn new(config: RunConfig) -> Self {
        Self { config }
    }

    fn require(&self, stage: &'static str, rel: &Path) -> Result<PathBuf, PipelineError> {
        let p = self.config.resolve(rel);
        if p.is_file() {
            Ok(p)
        } else {
            Err(PipelineError::Precondition { stage, path: p })
        }
    }

    fn write_table(&self, t: &Table, out: &mut StageOutcome) -> Result<(), PipelineError> {
        let dir = self.config.output_dir();
        let files = t.write(&dir).map_err(|source| PipelineError::Output { path: dir, source })?;
        out.outputs.extend(files);
        Ok(())
    }

    fn write_file(&self, path: &Path, bytes: &[u8], out: &mut StageOutcome) -> Result<(), PipelineError> {
        let wrap = |source| PipelineError::Output { path: path.to_path_buf(), source };
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(wrap)?;
        }
        std::fs::write(path, bytes).map_err(wrap)?;
        out.outputs.push(path.to_path_buf());
        Ok(())
    }

    fn relative(&self, p: &Path) -> String {
        p.strip_prefix(&self.config.base)
            .unwrap_or(p)
            .to_string_lossy()
            .replace('\\', "/")
    }

    /// Merges this stage's entry into `manifest.json`.
    fn record(
        &self,
        outcome: &StageOutcome,
        args: Value,
        inputs: &[PathBuf],
    ) -> Result<(), PipelineError> {
        let dir = self.config.output_dir();
        let path = dir.join("manifest.json");
        let mut stages: BTreeMap<String, Value> = std::fs::read(&path)
            .ok()
            .and_then(|b| serde_json::from_slice::<Value>(&b).ok())
            .and_then(|v| v.get("stages").cloned())
            .and_then(|s| serde_json::from_value(s).ok())
            .unwrap_or_default();
        let hashes = |files: &[PathBuf]| -> BTreeMap<String, Option<String>> {
            files.iter().map(|f| (self.relative(f), sha256_file(f))).collect()
        };
        stages.insert(
            outcome.stage.clone(),
            json!({
                "args": args,
                "inputs": hashes(inputs),
                "outputs": hashes(&outcome.outputs),
                "notes": outcome.notes,
            }),
        );
        let manifest = json!({
            "tool": TOOL,
            "version": VERSION,
            "config": serde_json::to_value(&self.config).expect("config serializes"),
            "stages": stages,
        });
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        std::fs::create_dir_all(&dir).map_err(|source| PipelineError::Output { path: dir.clone(), source })?;
        std::fs::write(&path, text).map_err(|source| PipelineError::Output { path, source })
    }

    fn load_filtered(&self, stage: &'static str) -> Result<(PathBuf, Vec<CommentReplyPair>), PipelineError> {
        let path = self.require(stage, &self.config.rel_filtered())?;
        let pairs = corpus::load_corpus(&path)?;
        Ok((path, pairs))
    }

    fn load_reframes(&self, stage: &'static str) -> Result<(PathBuf, Vec<Reframe>), PipelineError> {
        let path = self.require(stage, &self.config.rel_reframes())?;
        let reframes = reframer::load_reframes(&path)?;
        Ok((path, reframes))
    }

    pub fn ingest(&self) -> Result<StageOutcome, PipelineError> {
        let src = self.require("ingest", &self.config.paths.corpus)?;
        let mut pairs = corpus::load_corpus(&src)?;
        let filter = &self.config.filter;
        filter.validate()?;
        if filter.toxicity_cutoff.is_some() {
            let pre = FilterConfig { toxicity_cutoff: None, ..filter.clone() };
            let (survivors, _) = corpus::filter_pairs(&pairs, &pre)?;
            let missing: Vec<String> = survivors
                .iter()
                .filter(|p| p.reply_toxicity.is_none())
                .map(|p| p.id.clone())
                .collect();
            if !missing.is_empty() {
                let client = ToxicityClient::from_config(&self.config.provider(&self.config.providers.toxicity))?;
                let wanted: HashMap<&str, ()> = missing.iter().map(|id| (id.as_str(), ())).collect();
                let scores: Vec<(usize, f64)> = pairs
                    .par_iter()
                    .enumerate()
                    .filter(|(_, p)| wanted.contains_key(p.id.as_str()))
                    .map(|(i, p)| client.toxicity(&p.reply).map(|s| (i, s)))
                    .collect::<Result<_, _>>()?;
                for (i, s) in scores {
                    pairs[i].reply_toxicity = Some(s);
                }
            }
        }
        let (kept, exclusions) = corpus::filter_pairs(&pairs, filter)?;
        let mut out = StageOutcome { stage: "ingest".into(), ..Default::default() };
        let mut buf = Vec::new();
        corpus::write_corpus(&mut buf, &kept).expect("in-memory write");
        self.write_file(&self.config.resolve(&self.config.rel_filtered()), &buf, &mut out)?;
        self.write_table(&report::exclusion_table(&exclusions), &mut out)?;
        out.notes.push(format!("{} of {} pairs retained", exclusions.retained, exclusions.input));
        self.record(&out, json!({}), &[src])?;
        Ok(out)
    }

    pub fn generate(&self, kinds: Option<&str>) -> Result<StageOutcome, PipelineError> {
        let spec = kinds.unwrap_or(&self.config.strategies);
        let kinds = reframer::parse_kinds(spec)?;
        let (src, pairs) = self.load_filtered("generate")?;
        let target = self.config.resolve(&self.config.rel_reframes());
        let existing = if target.is_file() { reframer::load_reframes(&target)? } else { Vec::new() };
        let client = ChatClient::from_config(&self.config.provider(&self.config.providers.chat))?;
        let result = reframer::generate_all(&client, &pairs, &kinds, &existing)?;

        // keep earlier reframes this run did not cover
        let covered: std::collections::HashSet<(String, StrategyKind)> = result
            .reframes
            .iter()
            .map(|r| (r.pair_id.clone(), r.kind))
            .collect();
        let mut all = result.reframes.clone();
        all.extend(existing.into_iter().filter(|r| !covered.contains(&(r.pair_id.clone(), r.kind))));

        let mut out = StageOutcome { stage: "generate".into(), ..Default::default() };
        let mut buf = Vec::new();
        reframer::write_reframes(&mut buf, &all).expect("in-memory write");
        self.write_file(&target, &buf, &mut out)?;
        self.write_table(&report::generation_table(&result.report), &mut out)?;
        for f in &result.report.failures {
            out.notes.push(format!("{} / {}: {}", f.pair_id, f.kind, f.error));
        }
        self.record(&out, json!({ "strategies": spec }), &[src])?;
        if !result.report.failures.is_empty() {
            return Err(PipelineError::Provider(format!(
                "{} item(s) failed; partial reframes kept in {}",
                result.report.failures.len(),
                target.display()
            )));
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<StageOutcome, PipelineError> {
        let (corpus_path, pairs) = self.load_filtered("validate")?;
        let (reframe_path, reframes) = self.load_reframes("validate")?;
        let embed = EmbedClient::from_config(&self.config.provider(&self.config.providers.embed))?;
        let nli = NliClient::from_config(&self.config.provider(&self.config.providers.nli))?;
        let rows = textmetrics::meaning_preservation(&embed, &nli, &pairs, &reframes)?;
        let mut out = StageOutcome { stage: "validate".into(), ..Default::default() };
        self.write_table(&report::meaning_table(&rows), &mut out)?;
        self.record(&out, json!({}), &[corpus_path, reframe_path])?;
        Ok(out)
    }

    pub fn trigrams(&self) -> Result<StageOutcome, PipelineError> {
        let (corpus_path, pairs) = self.load_filtered("trigrams")?;
        let (reframe_path, reframes) = self.load_reframes("trigrams")?;
        let originals: HashMap<String, String> =
            pairs.iter().map(|p| (p.id.clone(), p.reply.clone())).collect();
        let strategy_reframes: Vec<Reframe> =
            reframes.into_iter().filter(|r| r.kind.is_strategy()).collect();
        let stats = textmetrics::strategy_trigram_stats(&strategy_reframes, &originals)?;
        let k = self.config.analysis.top_trigrams;
        let rows: Vec<_> = stats
            .kinds()
            .flat_map(|kind| stats.ranked(kind).into_iter().take(k))
            .collect();
        let mut out = StageOutcome { stage: "trigrams".into(), ..Default::default() };
        self.write_table(&report::trigram_table(&rows), &mut out)?;
        self.write_table(&report::overlap_table(&textmetrics::overlap_matrix(&stats)), &mut out)?;
        self.record(&out, json!({ "top": k }), &[corpus_path, reframe_path])?;
        Ok(out)
    }

    pub fn score_annotations(&self, kind: AnnotationKind) -> Result<StageOutcome, PipelineError> {
        let mut out = StageOutcome::default();
        let input = match kind {
            AnnotationKind::Receptiveness => {
                out.stage = "score-receptiveness".into();
                let path = self.require("score-annotations", &self.config.paths.receptiveness)?;
                let records = annotation::load_receptiveness(&path)?;
                self.write_table(&receptiveness_score_table(&records)?, &mut out)?;
                let alpha = |unit| {
                    annotation::receptiveness_alpha(&records, unit).map_err(|e| e.to_string())
                };
                self.write_table(
                    &report::alpha_table(&[
                        ("record_index", alpha(AlphaUnit::RecordIndex)),
                        ("per_question", alpha(AlphaUnit::PerQuestion)),
                    ]),
                    &mut out,
                )?;
                let scored = records
                    .iter()
                    .map(|r| annotation::receptiveness_score(r).map(|s| (r.variant, s.factors)))
                    .collect::<Result<Vec<_>, _>>()?;
                self.write_table(&report::factor_table(&stats::factor_breakdown(&scored)?), &mut out)?;
                path
            }
            AnnotationKind::Reasonability => {
                out.stage = "score-reasonability".into();
                let path = self.require("score-annotations", &self.config.paths.reasonability)?;
                let records = annotation::load_reasonability(&path)?;
                let rows = annotation::reasonability_summary(&records)?;
                self.write_table(&report::reasonability_table(&rows), &mut out)?;
                path
            }
        };
        self.record(&out, json!({ "kind": kind }), &[input])?;
        Ok(out)
    }

    pub fn analyze(&self, model: AnalysisModel) -> Result<StageOutcome, PipelineError> {
        let method = self.config.analysis.method;
        let path = self.require("analyze", &self.config.paths.receptiveness)?;
        let records = annotation::load_receptiveness(&path)?;
        let mut out = StageOutcome::default();
        let mut inputs = vec![path];
        match model {
            AnalysisModel::Receptiveness => {
                out.stage = "analyze-receptiveness".into();
                let rows = observation_rows(&records, None)?;
                let analysis = analyze_receptiveness(&rows, method)?;
                self.write_table(&fit_table("model_fit_receptiveness", &[&analysis.cell_means, &analysis.treatment]), &mut out)?;
                self.write_table(&report::contrast_table("coefficients", &analysis.treatment.coefficients()), &mut out)?;
                self.write_table(&report::emm_table("emm_receptiveness", &analysis.emms), &mut out)?;
                self.write_table(&report::contrast_table("strategy_contrasts", &analysis.contrasts), &mut out)?;
            }
            AnalysisModel::ToxicityInteraction => {
                out.stage = "analyze-toxicity".into();
                let (corpus_path, pairs) = self.load_filtered("analyze")?;
                inputs.push(corpus_path);
                let tox: HashMap<String, f64> = pairs
                    .iter()
                    .filter_map(|p| p.reply_toxicity.map(|t| (p.id.clone(), t)))
                    .collect();
                let rows = observation_rows(&records, Some(&tox))?;
                let fit = fit_random_intercept(&rows, ModelSpec::StrategyByBin, method)?;
                self.write_table(&fit_table("model_fit_toxicity", &[&fit]), &mut out)?;
                self.write_table(&report::emm_table("emm_toxicity", &estimated_marginal_means(&fit)?), &mut out)?;
                self.write_table(&report::toxicity_contrast_table(&toxicity_contrasts(&fit)?), &mut out)?;
            }
        }
        self.record(&out, json!({ "model": model, "method": method }), &inputs)?;
        Ok(out)
    }

    /// Runs every stage whose inputs exist. Annotation stages are skipped,
    /// with a note, when their files are absent.
    pub fn report(&self) -> Result<Vec<StageOutcome>, PipelineError> {
        let mut done = vec![self.ingest()?, self.generate(None)?, self.validate()?, self.trigrams()?];
        let have = |p: &Path| self.config.resolve(p).is_file();
        let mut skipped = Vec::new();
        if have(&self.config.paths.receptiveness) {
            done.push(self.score_annotations(AnnotationKind::Receptiveness)?);
            done.push(self.analyze(AnalysisModel::Receptiveness)?);
            done.push(self.analyze(AnalysisModel::ToxicityInteraction)?);
        } else {
            skipped.push(format!("receptiveness annotations absent: {}", self.config.paths.receptiveness.display()));
        }
        if have(&self.config.paths.reasonability) {
            done.push(self.score_annotations(AnnotationKind::Reasonability)?);
        } else {
            skipped.push(format!("reasonability annotations absent: {}", self.config.paths.reasonability.display()));
        }
        let summary = StageOutcome {
            stage: "report".into(),
            outputs: Vec::new(),
            notes: skipped,
        };
        let stages: Vec<&str> = done.iter().map(|s| s.stage.as_str()).collect();
        self.record(&summary, json!({ "stages": stages }), &[])?;
        done.push(summary);
        Ok(done)
    }
}

/// Model rows from receptiveness records; with `toxicity`, each row also
/// carries its pair's toxicity bin.
pub fn observation_rows(
    records: &[ReceptivenessRecord],
    toxicity: Option<&HashMap<String, f64>>,
) -> Result<Vec<ObservationRow>, PipelineError> {
    records
        .iter()
        .map(|r| {
            let score = annotation::receptiveness_score(r)?;
            let toxicity_bin = match toxicity {
                None => None,
                Some(map) => {
                    let t = map.get(&r.pair_id).ok_or_else(|| {
                        PipelineError::Data(format!("no toxicity score for pair {:?}", r.pair_id))
                    })?;
                    Some(toxicity_bin(*t)?)
                }
            };
            Ok(ObservationRow {
                response: score.index,
                strategy: r.variant,
                group: r.pair_id.clone(),
                toxicity_bin,
            })
        })
        .collect()
}

pub struct ReceptivenessAnalysis {
    pub cell_means: ModelFit,
    /// Intercept at the paraphrase baseline.
    pub treatment: ModelFit,
    pub emms: Vec<stats::Emm>,
    /// Each strategy against the paraphrase baseline.
    pub contrasts: Vec<stats::Contrast>,
}

pub fn analyze_receptiveness(
    rows: &[ObservationRow],
    method: Estimation,
) -> Result<ReceptivenessAnalysis, PipelineError> {
    let cell_means = fit_random_intercept(rows, ModelSpec::Strategy(Coding::CellMeans), method)?;
    let treatment = fit_random_intercept(
        rows,
        ModelSpec::Strategy(Coding::Treatment { reference: StrategyKind::BaselineParaphrase }),
        method,
    )?;
    let emms = estimated_marginal_means(&cell_means)?;
    let reference = StrategyKind::BaselineParaphrase.as_str();
    let contrasts = StrategyKind::STRATEGIES
        .iter()
        .filter(|k| cell_means.level(k.as_str()).is_ok())
        .map(|k| wald_contrast(&cell_means, k.as_str(), reference))
        .collect::<Result<Vec<_>, StatsError>>()?;
    Ok(ReceptivenessAnalysis { cell_means, treatment, emms, contrasts })
}

fn fit_table(name: &str, fits: &[&ModelFit]) -> Table {
    let mut t = Table::new(
        name,
        &["spec", "method", "n_obs", "n_groups", "sigma2", "tau2", "loglik", "converged"],
    );
    for f in fits {
        let spec = match f.spec {
            ModelSpec::Strategy(Coding::CellMeans) => "strategy_cell_means".to_string(),
            ModelSpec::Strategy(Coding::Treatment { reference }) => format!("strategy_treatment_{reference}"),
            ModelSpec::StrategyByBin => "strategy_by_bin".to_string(),
        };
        t.push(vec![
            spec.into(),
            match f.lmm.method {
                Estimation::Ml => "ml",
                Estimation::Reml => "reml",
            }
            .into(),
            f.lmm.n_obs.into(),
            f.lmm.n_groups.into(),
            f.lmm.sigma2.into(),
            f.lmm.tau2.into(),
            f.lmm.loglik.into(),
            (if f.lmm.converged { "true" } else { "false" }).into(),
        ]);
    }
    t
}

fn receptiveness_score_table(records: &[ReceptivenessRecord]) -> Result<Table, PipelineError> {
    let mut t = Table::new(
        "receptiveness_scores",
        &["pair_id", "variant", "annotator_id", "index", "f1", "f2", "f3", "f4"],
    );
    for r in records {
        let s = annotation::receptiveness_score(r)?;
        let mut row: Vec<Cell> = vec![
            r.pair_id.clone().into(),
            r.variant.as_str().into(),
            r.annotator_id.clone().into(),
            s.index.into(),
        ];
        row.extend(s.factors.iter().map(|&f| Cell::Real(f)));
        t.push(row);
    }
    Ok(t)
}
