use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use reframe_core::pipeline::{AnalysisModel, AnnotationKind, Pipeline, PipelineError, RunConfig, StageOutcome};
use reframe_core::stats::Estimation;
use reframe_core::strategies::{self, StrategyKind};

#[derive(Parser)]
#[command(name = "reframe-lab", version, about = "Receptive reframing of disagreeing replies: generation, validation and analysis")]
struct Cli {
    /// TOML run configuration; relative paths inside it resolve against its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Replace every provider with its deterministic offline mock.
    #[arg(long, global = true)]
    mock: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Filter the raw corpus into the working set.
    Ingest {
        /// Remove a subreddit from the exclusion list (repeatable).
        #[arg(long = "keep-subreddit")]
        keep_subreddit: Vec<String>,
    },
    /// Generate reframes, resuming from any existing output.
    Generate {
        /// "all" or a comma-separated list of kinds.
        #[arg(long)]
        strategies: Option<String>,
    },
    /// Meaning-preservation metrics for generated reframes.
    Validate,
    /// Added-trigram statistics and strategy overlap.
    Trigrams {
        #[arg(long)]
        top: Option<usize>,
    },
    /// Score imported annotation files.
    ScoreAnnotations {
        #[arg(long, value_enum)]
        kind: KindArg,
    },
    /// Fit the random-intercept models.
    Analyze {
        #[arg(long, value_enum, default_value = "receptiveness")]
        model: ModelArg,
        /// Restricted maximum likelihood instead of ML.
        #[arg(long)]
        reml: bool,
    },
    /// Run every stage whose inputs exist and write the full bundle.
    Report,
    /// List strategies; with --dump print definitions, instructions and exemplars.
    Strategies {
        #[arg(long)]
        dump: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Receptiveness,
    Reasonability,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Receptiveness,
    ToxicityInteraction,
}

fn load_config(cli: &Cli) -> Result<RunConfig, PipelineError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if cli.mock {
        cfg.use_mock_providers();
    }
    Ok(cfg)
}

fn print(outcomes: &[StageOutcome]) {
    for o in outcomes {
        println!("[{}]", o.stage);
        for n in &o.notes {
            println!("  note: {n}");
        }
        for f in &o.outputs {
            println!("  wrote {}", f.display());
        }
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    if let Command::Strategies { dump } = cli.command {
        if dump {
            print!("{}", strategies::dump());
        } else {
            for k in StrategyKind::GENERATABLE {
                println!("{:<22}{}", k.as_str(), k.display_name());
            }
        }
        return Ok(());
    }
    let mut cfg = load_config(&cli)?;
    let outcomes = match cli.command {
        Command::Ingest { keep_subreddit } => {
            for keep in &keep_subreddit {
                let k = keep.trim().trim_start_matches("r/").to_lowercase();
                cfg.filter.excluded_subreddits.retain(|s| s.trim().trim_start_matches("r/").to_lowercase() != k);
            }
            vec![Pipeline::new(cfg).ingest()?]
        }
        Command::Generate { strategies } => vec![Pipeline::new(cfg).generate(strategies.as_deref())?],
        Command::Validate => vec![Pipeline::new(cfg).validate()?],
        Command::Trigrams { top } => {
            if let Some(t) = top {
                if t == 0 {
                    return Err(PipelineError::Config("--top must be positive".into()));
                }
                cfg.analysis.top_trigrams = t;
            }
            vec![Pipeline::new(cfg).trigrams()?]
        }
        Command::ScoreAnnotations { kind } => {
            let kind = match kind {
                KindArg::Receptiveness => AnnotationKind::Receptiveness,
                KindArg::Reasonability => AnnotationKind::Reasonability,
            };
            vec![Pipeline::new(cfg).score_annotations(kind)?]
        }
        Command::Analyze { model, reml } => {
            if reml {
                cfg.analysis.method = Estimation::Reml;
            }
            let model = match model {
                ModelArg::Receptiveness => AnalysisModel::Receptiveness,
                ModelArg::ToxicityInteraction => AnalysisModel::ToxicityInteraction,
            };
            vec![Pipeline::new(cfg).analyze(model)?]
        }
        Command::Report => Pipeline::new(cfg).report()?,
        Command::Strategies { .. } => unreachable!("handled above"),
    };
    print(&outcomes);
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("reframe-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
