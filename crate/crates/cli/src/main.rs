//! `statefulrec` command-line interface.
//!
//! Subcommands: `synth` (seeded synthetic interaction log), `ingest` (apply
//! a log to a state store), `recommend` (one recommendation under either
//! condition), `experiment` (the full two-condition comparison), and
//! `diagnose` (re-run the comparison on a saved matched-item file).
//!
//! Exit codes: 0 success, 2 config error, 3 data error, 4 backend error,
//! 5 degenerate statistics.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use statefulrec_core::experiment::{
    ingest_log, read_items, recommend, run_experiment, sha256_hex, write_json_atomic,
    ExperimentConfig,
};
use statefulrec_core::{
    compare_conditions, Condition, DiagnosticsReport, EmbedderBackend, Error, GeneratorBackend,
    Store,
};

#[derive(Parser)]
#[command(
    name = "statefulrec",
    about = "Contextual vs. memory-based recommendation conditioning, with behavior-level diagnostics",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic interaction log (JSONL).
    Synth {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long = "n-questions", default_value_t = 50)]
        n_questions: u32,
        #[arg(long = "n-learners", default_value_t = 20)]
        n_learners: u32,
        /// Output path for the interaction log.
        #[arg(long, default_value = "interactions.jsonl")]
        out: PathBuf,
    },
    /// Apply an interaction log to a learner-state store.
    Ingest {
        /// Interaction log (JSONL).
        #[arg(long)]
        log: PathBuf,
        /// Learner-state store file (created if absent).
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        alpha: f64,
        /// Lexicon directory overriding the built-in lexicons.
        #[arg(long)]
        lexicons: Option<PathBuf>,
    },
    /// Generate one recommendation for a question.
    Recommend {
        /// The student question.
        #[arg(long)]
        question: String,
        /// Learner id (required for --condition memory).
        #[arg(long)]
        learner: Option<String>,
        /// contextual or memory
        #[arg(long, default_value = "contextual")]
        condition: String,
        /// Learner-state store file (required for --condition memory).
        #[arg(long)]
        store: Option<PathBuf>,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Run the full two-condition experiment and write a diagnostics report.
    Experiment {
        /// JSON config file mirroring the experiment configuration;
        /// explicit flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "n-questions")]
        n_questions: Option<u32>,
        #[arg(long = "n-learners")]
        n_learners: Option<u32>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Use an existing interaction log instead of synthesizing one.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Report output path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the matched items (JSONL) for later `diagnose` runs.
        #[arg(long)]
        items: Option<PathBuf>,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Re-run the condition comparison on a saved matched-item file.
    Diagnose {
        /// Matched-item JSONL produced by `experiment --items`.
        #[arg(long)]
        items: PathBuf,
        #[arg(long, default_value = "report.json")]
        out: PathBuf,
    },
}

/// Flags shared by the pipeline-driving subcommands.
#[derive(Args)]
struct PipelineArgs {
    /// Tactic-mapping JSON path overriding the built-in table.
    #[arg(long)]
    mapping: Option<PathBuf>,
    /// Template directory overriding the built-in templates.
    #[arg(long)]
    templates: Option<PathBuf>,
    /// stub or http
    #[arg(long)]
    backend: Option<String>,
    /// Model endpoint for --backend http.
    #[arg(long)]
    endpoint: Option<String>,
}

impl PipelineArgs {
    fn apply(&self, config: &mut ExperimentConfig) -> Result<(), Error> {
        if let Some(mapping) = &self.mapping {
            config.mapping = Some(mapping.clone());
        }
        if let Some(templates) = &self.templates {
            config.templates = Some(templates.clone());
        }
        if let Some(backend) = &self.backend {
            match backend.as_str() {
                "stub" => {
                    config.generator.backend = GeneratorBackend::Stub;
                    config.embedder.backend = EmbedderBackend::Stub;
                }
                "http" => {
                    config.generator.backend = GeneratorBackend::Http;
                    // The embedder stays on the stub unless an embedding
                    // endpoint is configured via the config file.
                }
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "unknown backend {other:?} (expected stub or http)"
                    )))
                }
            }
        }
        if let Some(endpoint) = &self.endpoint {
            config.generator.endpoint = Some(endpoint.clone());
        }
        Ok(())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Synth {
            seed,
            n_questions,
            n_learners,
            out,
        } => {
            let bank = statefulrec_core::synth::QuestionBank::default();
            let events =
                statefulrec_core::synth::generate_corpus(seed, n_questions, n_learners, &bank)?;
            statefulrec_core::synth::write_corpus(&events, &out)?;
            println!(
                "wrote {} interactions for {} learners to {}",
                events.len(),
                events
                    .iter()
                    .map(|e| e.learner_id.as_str())
                    .collect::<std::collections::BTreeSet<_>>()
                    .len(),
                out.display()
            );
            Ok(())
        }
        Command::Ingest {
            log,
            store,
            alpha,
            lexicons,
        } => {
            let lexicon_set = match lexicons {
                Some(dir) => statefulrec_core::LexiconSet::load_dir(&dir)?,
                None => statefulrec_core::LexiconSet::default(),
            };
            let mut store = Store::open(store)?;
            let states = ingest_log(&mut store, &log, alpha, &lexicon_set)?;
            store.flush()?;
            println!("{} learners after ingest:", states.len());
            for state in &states {
                println!(
                    "  {}  need=({:.3}, {:.3}, {:.3})  dominant={}  persona={}  count={}",
                    state.learner_id(),
                    state.need().performance(),
                    state.need().engagement(),
                    state.need().skill_progression(),
                    state.dominant_need(),
                    state.persona(),
                    state.interaction_count()
                );
            }
            Ok(())
        }
        Command::Recommend {
            question,
            learner,
            condition,
            store,
            pipeline,
        } => {
            let condition = Condition::parse(&condition)?;
            let mut config = ExperimentConfig::default();
            pipeline.apply(&mut config)?;
            let bundle = config.bundle()?;
            let store = match store {
                Some(path) => Store::open(path)?,
                None => {
                    if condition == Condition::MemoryBased {
                        return Err(Error::InvalidConfig(
                            "--condition memory requires --store".into(),
                        ));
                    }
                    Store::in_memory()
                }
            };
            let rec = recommend(&store, &question, learner.as_deref(), condition, &bundle)?;
            println!("{}", rec.text);
            println!("{}", serde_json::to_string_pretty(&rec).expect("serializable"));
            Ok(())
        }
        Command::Experiment {
            config,
            seed,
            n_questions,
            n_learners,
            alpha,
            log,
            out,
            items,
            pipeline,
        } => {
            let mut experiment = match config {
                Some(path) => ExperimentConfig::load(&path)?,
                None => ExperimentConfig::default(),
            };
            if let Some(seed) = seed {
                experiment.seed = seed;
            }
            if let Some(n) = n_questions {
                experiment.n_questions = n;
            }
            if let Some(n) = n_learners {
                experiment.n_learners = n;
            }
            if let Some(alpha) = alpha {
                experiment.alpha = alpha;
            }
            if let Some(log) = log {
                experiment.log = Some(log);
            }
            if let Some(out) = out {
                experiment.out = out;
            }
            if let Some(items) = items {
                experiment.items_out = Some(items);
            }
            pipeline.apply(&mut experiment)?;

            let outcome = run_experiment(&experiment)?;
            print_report(&outcome.report);
            println!("report written to {}", experiment.out.display());
            if let Some(items) = &experiment.items_out {
                println!("matched items written to {}", items.display());
            }
            Ok(())
        }
        Command::Diagnose { items, out } => {
            let matched = read_items(&items)?;
            // The digest identifies the input file in place of a pipeline
            // config.
            let digest = sha256_hex(&std::fs::read(&items)?);
            let report = compare_conditions(&matched, digest)?;
            write_json_atomic(&out, &report)?;
            print_report(&report);
            println!("report written to {}", out.display());
            Ok(())
        }
    }
}

fn print_report(report: &DiagnosticsReport) {
    println!("n_items: {}", report.n_items);
    println!(
        "deviation correlation: contextual rho={:.4}  memory rho={:.4}",
        report.rho_contextual, report.rho_memory
    );
    println!(
        "flat pearson:          contextual r={:.4}    memory r={:.4}",
        report.flat_pearson_contextual, report.flat_pearson_memory
    );
    println!(
        "paired t:  t={:.4}  p={:.3e}  (n={})",
        report.t_result.statistic, report.t_result.p_value, report.t_result.n_effective
    );
    println!(
        "wilcoxon:  W={:.1}  p={:.3e}  (n_eff={})",
        report.wilcoxon_result.statistic,
        report.wilcoxon_result.p_value,
        report.wilcoxon_result.n_effective
    );
    println!("effect size: dz={:.4}", report.effect.cohens_dz);
    match &report.divergence {
        Some(d) => {
            println!(
                "divergence probe on {} across ({}, {}):",
                d.question_id, d.learner_ids.0, d.learner_ids.1
            );
            println!(
                "  tactics: ({}, {})",
                d.tactics.0.display_name(),
                d.tactics.1.display_name()
            );
            println!(
                "  contextual texts identical: {}",
                d.contextual_texts_identical
            );
            println!("  memory texts identical:     {}", d.memory_texts_identical);
            println!("  memory embedding cosine:    {:.4}", d.memory_embedding_cosine);
        }
        None => println!("divergence probe: skipped (fewer than two learners)"),
    }
    println!("config digest: {}", report.config_digest);
}
