//! End-to-end two-condition experiment: synthesize (or load) a corpus,
//! build learner states, generate both conditions per question over
//! identical inputs, embed, and run the diagnostics.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::conditioning::{compose_prompt, select_tactic, Condition, PromptTemplates, TacticMapping};
use crate::diagnostics::{
    compare_conditions, divergence_probe, ConditioningBundle, DiagnosticsReport, MatchedItem,
};
use crate::embedding::{embed, EmbedderConfig};
use crate::error::{Error, Result};
use crate::generation::{generate, generate_batch, GenerationRequest, GeneratorConfig, Recommendation};
use crate::learner::{InteractionEvent, InteractionRecord, LearnerState, LexiconSet, PersonaConfig};
use crate::store::Store;
use crate::synth::{generate_corpus, QuestionBank};

fn default_seed() -> u64 {
    42
}
fn default_n_questions() -> u32 {
    50
}
fn default_n_learners() -> u32 {
    20
}
fn default_alpha() -> f64 {
    0.2
}
fn default_out() -> PathBuf {
    PathBuf::from("report.json")
}

/// Experiment parameters; mirrors the CLI config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub n_questions: u32,
    pub n_learners: u32,
    pub alpha: f64,
    /// Tactic mapping JSON path; `None` uses the built-in table.
    pub mapping: Option<PathBuf>,
    /// Template directory with contextual.tmpl and memory.tmpl; `None`
    /// uses the built-in templates.
    pub templates: Option<PathBuf>,
    /// Lexicon directory; `None` uses the built-in lexicons.
    pub lexicons: Option<PathBuf>,
    pub generator: GeneratorConfig,
    pub embedder: EmbedderConfig,
    /// Report output path.
    pub out: PathBuf,
    /// Optional matched-item JSONL output for later `diagnose` runs.
    pub items_out: Option<PathBuf>,
    /// Optional interaction log to use instead of synthesizing one.
    pub log: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: default_seed(),
            n_questions: default_n_questions(),
            n_learners: default_n_learners(),
            alpha: default_alpha(),
            mapping: None,
            templates: None,
            lexicons: None,
            generator: GeneratorConfig::default(),
            embedder: EmbedderConfig::default(),
            out: default_out(),
            items_out: None,
            log: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)?;
        serde_json::from_str(&raw)
            .map_err(|e| Error::InvalidConfig(format!("config file {}: {e}", path.display())))
    }

    /// Checks invariants and that every referenced path resolves.
    pub fn validate(&self) -> Result<()> {
        if self.n_questions < 2 {
            return Err(Error::InvalidConfig(
                "n_questions must be at least 2".into(),
            ));
        }
        if self.n_learners == 0 {
            return Err(Error::InvalidConfig("n_learners must be positive".into()));
        }
        if !self.alpha.is_finite() || self.alpha <= 0.0 || self.alpha > 1.0 {
            return Err(Error::InvalidConfig(format!(
                "alpha={} must lie in (0, 1]",
                self.alpha
            )));
        }
        for (name, path) in [
            ("mapping", &self.mapping),
            ("templates", &self.templates),
            ("lexicons", &self.lexicons),
            ("log", &self.log),
        ] {
            if let Some(p) = path {
                if !p.exists() {
                    return Err(Error::InvalidConfig(format!(
                        "{name} path does not exist: {}",
                        p.display()
                    )));
                }
            }
        }
        self.generator.validate()?;
        self.embedder.validate()?;
        Ok(())
    }

    /// Resolves mapping, templates, and backend configs into one bundle.
    pub fn bundle(&self) -> Result<ConditioningBundle> {
        let mapping = match &self.mapping {
            Some(path) => TacticMapping::load(path)?,
            None => TacticMapping::default(),
        };
        let templates = match &self.templates {
            Some(dir) => PromptTemplates::load_dir(dir)?,
            None => PromptTemplates::default(),
        };
        templates.validate()?;
        Ok(ConditioningBundle {
            mapping,
            templates,
            generator: self.generator.clone(),
            embedder: self.embedder.clone(),
        })
    }

    pub fn lexicon_set(&self) -> Result<LexiconSet> {
        match &self.lexicons {
            Some(dir) => LexiconSet::load_dir(dir),
            None => Ok(LexiconSet::default()),
        }
    }

    /// Hex digest identifying everything that shapes stub outputs: seed,
    /// backends, dimensions, alpha, the mapping table, the templates, and
    /// the persona configuration.
    pub fn digest(&self, bundle: &ConditioningBundle, persona: &PersonaConfig) -> String {
        #[derive(Serialize)]
        struct DigestInput<'a> {
            seed: u64,
            n_questions: u32,
            n_learners: u32,
            alpha: f64,
            generator_backend: &'a str,
            generator_seed: u64,
            embedder_backend: &'a crate::embedding::EmbedderBackend,
            dimension: usize,
            mapping: &'a TacticMapping,
            templates: &'a PromptTemplates,
            persona: &'a PersonaConfig,
        }
        let canonical = serde_json::to_vec(&DigestInput {
            seed: self.seed,
            n_questions: self.n_questions,
            n_learners: self.n_learners,
            alpha: self.alpha,
            generator_backend: bundle.generator.backend_name(),
            generator_seed: bundle.generator.seed,
            embedder_backend: &bundle.embedder.backend,
            dimension: bundle.embedder.dimension,
            mapping: &bundle.mapping,
            templates: &bundle.templates,
            persona,
        })
        .expect("digest input serializes");
        sha256_hex(&canonical)
    }
}

/// Lowercase hex SHA-256 of the given bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Everything a finished experiment produced.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: DiagnosticsReport,
    pub items: Vec<MatchedItem>,
    pub corpus: Vec<InteractionEvent>,
    pub final_states: Vec<LearnerState>,
}

fn at_stage(stage: &str, e: Error) -> Error {
    match e {
        Error::InvalidInput(m) => Error::InvalidInput(format!("[{stage}] {m}")),
        Error::InvalidConfig(m) => Error::InvalidConfig(format!("[{stage}] {m}")),
        Error::DegenerateSample(m) => Error::DegenerateSample(format!("[{stage}] {m}")),
        Error::Backend { status, message } => Error::Backend {
            status,
            message: format!("[{stage}] {message}"),
        },
        other => other,
    }
}

/// Runs the full two-condition comparison and writes the report (and the
/// optional matched-item file). No partial report is ever written: output
/// lands via temp file + rename after every stage has succeeded.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let bundle = config.bundle().map_err(|e| at_stage("configuration", e))?;
    let lexicons = config.lexicon_set().map_err(|e| at_stage("configuration", e))?;
    let persona = PersonaConfig::default();
    let digest = config.digest(&bundle, &persona);

    let outcome = run_pipeline(config, &bundle, &lexicons, digest)?;

    write_json_atomic(&config.out, &outcome.report).map_err(|e| at_stage("report", e))?;
    if let Some(items_path) = &config.items_out {
        write_items(items_path, &outcome.items).map_err(|e| at_stage("report", e))?;
    }
    Ok(outcome)
}

/// The experiment body, separated so tests can run it without touching the
/// filesystem.
pub fn run_pipeline(
    config: &ExperimentConfig,
    bundle: &ConditioningBundle,
    lexicons: &LexiconSet,
    digest: String,
) -> Result<ExperimentOutcome> {
    // Corpus: load or synthesize.
    let corpus = match &config.log {
        Some(path) => crate::synth::read_corpus(path).map_err(|e| at_stage("corpus", e))?,
        None => generate_corpus(
            config.seed,
            config.n_questions,
            config.n_learners,
            &QuestionBank::default(),
        )
        .map_err(|e| at_stage("corpus", e))?,
    };
    if corpus.len() < 2 {
        return Err(at_stage(
            "corpus",
            Error::InvalidInput("need at least 2 interactions".into()),
        ));
    }
    let mut seen = BTreeSet::new();
    for event in &corpus {
        if !seen.insert(event.question_id.clone()) {
            return Err(at_stage(
                "corpus",
                Error::InvalidInput(format!("duplicate question_id {:?}", event.question_id)),
            ));
        }
    }

    // States and prompts. Each recommendation is conditioned on the state
    // as of before the current question; the interaction is applied after.
    let mut store = Store::in_memory();
    let mut contextual_requests = Vec::with_capacity(corpus.len());
    let mut memory_requests = Vec::with_capacity(corpus.len());
    for event in &corpus {
        let record = InteractionRecord::from_event(event.clone(), lexicons)
            .map_err(|e| at_stage("ingest", e))?;
        let state_before = store
            .get_state(&record.learner_id)
            .cloned()
            .unwrap_or_else(|| LearnerState::new_learner(record.learner_id.clone()));
        let contextual = compose_prompt(
            Condition::Contextual,
            &record.question_text,
            None,
            None,
            &bundle.templates,
        )
        .map_err(|e| at_stage("conditioning", e))?;
        let tactic = select_tactic(&state_before, &bundle.mapping);
        let memory = compose_prompt(
            Condition::MemoryBased,
            &record.question_text,
            Some(&state_before),
            Some(tactic),
            &bundle.templates,
        )
        .map_err(|e| at_stage("conditioning", e))?;
        contextual_requests.push(GenerationRequest {
            prompt: contextual,
            question_id: record.question_id.clone(),
            learner_id: None,
        });
        memory_requests.push(GenerationRequest {
            prompt: memory,
            question_id: record.question_id.clone(),
            learner_id: Some(record.learner_id.clone()),
        });
        store
            .apply_interaction(&record, config.alpha)
            .map_err(|e| at_stage("ingest", e))?;
    }

    // Generation, both conditions over the same question ids in the same
    // order.
    let contextual_recs = generate_batch(&contextual_requests, &bundle.generator)
        .map_err(|e| at_stage("generation", e))?;
    let memory_recs = generate_batch(&memory_requests, &bundle.generator)
        .map_err(|e| at_stage("generation", e))?;

    // Embedding.
    let mut items = Vec::with_capacity(corpus.len());
    for ((event, contextual), memory) in corpus.iter().zip(&contextual_recs).zip(&memory_recs) {
        items.push(MatchedItem {
            question_id: event.question_id.clone(),
            question_vec: embed(&event.question_text, &bundle.embedder)
                .map_err(|e| at_stage("embedding", e))?,
            rec_vec_contextual: embed(&contextual.text, &bundle.embedder)
                .map_err(|e| at_stage("embedding", e))?,
            rec_vec_memory: embed(&memory.text, &bundle.embedder)
                .map_err(|e| at_stage("embedding", e))?,
        });
    }

    // Diagnostics.
    let mut report =
        compare_conditions(&items, digest).map_err(|e| at_stage("diagnostics", e))?;

    // Divergence probe on the first question, across the most distinct
    // final learner pair (when two learners exist).
    let final_states: Vec<LearnerState> = store.states().cloned().collect();
    if let Some((a, b)) = most_distinct_pair(&final_states) {
        let first = &corpus[0];
        report.divergence = Some(
            divergence_probe(&first.question_id, &first.question_text, a, b, bundle)
                .map_err(|e| at_stage("diagnostics", e))?,
        );
    }

    Ok(ExperimentOutcome {
        report,
        items,
        corpus,
        final_states,
    })
}

/// The pair of states maximizing (different dominant needs, then euclidean
/// need distance), tie-broken by learner-id order for determinism.
pub fn most_distinct_pair(states: &[LearnerState]) -> Option<(&LearnerState, &LearnerState)> {
    let mut best: Option<((bool, f64), (&LearnerState, &LearnerState))> = None;
    for (i, a) in states.iter().enumerate() {
        for b in &states[i + 1..] {
            let differs = a.dominant_need() != b.dominant_need();
            let dist: f64 = a
                .need()
                .components()
                .iter()
                .zip(b.need().components())
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            let score = (differs, dist);
            let better = match &best {
                None => true,
                Some((current, _)) => {
                    score.0 > current.0 || (score.0 == current.0 && score.1 > current.1)
                }
            };
            if better {
                best = Some((score, (a, b)));
            }
        }
    }
    best.map(|(_, pair)| pair)
}

/// Serializes a value as pretty JSON to `path` via temp file + rename.
pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    let body = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    tmp.write_all(body.as_bytes())?;
    tmp.write_all(b"\n")?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Writes matched items as JSONL.
pub fn write_items(path: &Path, items: &[MatchedItem]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    for item in items {
        serde_json::to_writer(&mut tmp, item)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        tmp.write_all(b"\n")?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Reads matched items back from JSONL, reporting the offending line.
pub fn read_items(path: &Path) -> Result<Vec<MatchedItem>> {
    let raw = std::fs::read_to_string(path)?;
    let mut items = Vec::new();
    for (idx, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item: MatchedItem = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        items.push(item);
    }
    Ok(items)
}

/// Applies an interaction log to a store in file order. Any parse or
/// stale-event failure aborts with the offending line number.
pub fn ingest_log(
    store: &mut Store,
    log_path: &Path,
    alpha: f64,
    lexicons: &LexiconSet,
) -> Result<Vec<LearnerState>> {
    let raw = std::fs::read_to_string(log_path)?;
    for (idx, line) in raw.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let event: InteractionEvent = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let record = InteractionRecord::from_event(event, lexicons).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        store
            .apply_interaction(&record, alpha)
            .map_err(|e| match e {
                Error::StaleEvent { .. } => Error::Parse {
                    line: line_no,
                    message: e.to_string(),
                },
                other => other,
            })?;
    }
    Ok(store.states().cloned().collect())
}

/// Generates one recommendation for an ad-hoc question under the given
/// condition. Memory-based generation requires the learner to exist in the
/// store; there is no silent fallback to contextual.
pub fn recommend(
    store: &Store,
    question_text: &str,
    learner_id: Option<&str>,
    condition: Condition,
    bundle: &ConditioningBundle,
) -> Result<Recommendation> {
    let (prompt, learner) = match condition {
        Condition::Contextual => (
            compose_prompt(condition, question_text, None, None, &bundle.templates)?,
            None,
        ),
        Condition::MemoryBased => {
            let learner_id = learner_id.ok_or_else(|| {
                Error::InvalidInput("memory-based recommendation requires a learner id".into())
            })?;
            let state = store
                .get_state(learner_id)
                .ok_or_else(|| Error::MissingState(learner_id.to_string()))?;
            let tactic = select_tactic(state, &bundle.mapping);
            (
                compose_prompt(
                    condition,
                    question_text,
                    Some(state),
                    Some(tactic),
                    &bundle.templates,
                )?,
                Some(learner_id.to_string()),
            )
        }
    };
    generate(
        &GenerationRequest {
            prompt,
            question_id: "adhoc".into(),
            learner_id: learner,
        },
        &bundle.generator,
    )
}
