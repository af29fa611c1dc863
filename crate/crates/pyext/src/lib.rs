//! Python bindings for the conditioning pipelines, the stub backends, the
//! paired statistics, and the end-to-end experiment.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use statefulrec_core as core;
use statefulrec_core::experiment::{recommend as core_recommend, ExperimentConfig};

fn to_py_err(e: core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn need_vector(components: (f64, f64, f64)) -> PyResult<core::NeedVector> {
    core::NeedVector::new(components.0, components.1, components.2).map_err(to_py_err)
}

/// Paired-test outcome.
#[pyclass(frozen, get_all)]
struct TestResult {
    statistic: f64,
    p_value: f64,
    method: String,
    n_effective: usize,
}

impl From<core::TestResult> for TestResult {
    fn from(r: core::TestResult) -> Self {
        Self {
            statistic: r.statistic,
            p_value: r.p_value,
            method: match r.method {
                core::TestMethod::PairedT => "paired_t".into(),
                core::TestMethod::WilcoxonExact => "wilcoxon_exact".into(),
                core::TestMethod::WilcoxonNormal => "wilcoxon_normal".into(),
            },
            n_effective: r.n_effective,
        }
    }
}

/// Persistent learner state as plain fields.
#[pyclass(frozen, get_all)]
struct LearnerState {
    learner_id: String,
    need: (f64, f64, f64),
    dominant_need: String,
    persona: String,
    interaction_count: u64,
    updated_at: i64,
}

impl From<&core::LearnerState> for LearnerState {
    fn from(s: &core::LearnerState) -> Self {
        let [p, e, sp] = s.need().components();
        Self {
            learner_id: s.learner_id().to_string(),
            need: (p, e, sp),
            dominant_need: s.dominant_need().as_str().to_string(),
            persona: s.persona().id().to_string(),
            interaction_count: s.interaction_count(),
            updated_at: s.updated_at(),
        }
    }
}

/// Learner-state store over a JSONL file.
#[pyclass]
struct Store {
    inner: core::Store,
    lexicons: core::LexiconSet,
}

#[pymethods]
impl Store {
    /// Open (or create) a store backed by the given path.
    #[staticmethod]
    fn open(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: core::Store::open(path).map_err(to_py_err)?,
            lexicons: core::LexiconSet::default(),
        })
    }

    /// Classify the question, advance the learner's state, and return it.
    fn apply_interaction(
        &mut self,
        learner_id: &str,
        question_id: &str,
        question_text: &str,
        timestamp: i64,
        alpha: f64,
    ) -> PyResult<LearnerState> {
        let record = core::InteractionRecord::from_event(
            core::InteractionEvent {
                learner_id: learner_id.into(),
                question_id: question_id.into(),
                question_text: question_text.into(),
                timestamp,
            },
            &self.lexicons,
        )
        .map_err(to_py_err)?;
        let state = self
            .inner
            .apply_interaction(&record, alpha)
            .map_err(to_py_err)?;
        Ok(LearnerState::from(&state))
    }

    fn get_state(&self, learner_id: &str) -> Option<LearnerState> {
        self.inner.get_state(learner_id).map(LearnerState::from)
    }

    fn flush(&mut self) -> PyResult<()> {
        self.inner.flush().map_err(to_py_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Rule-based need signal for a question: (performance, engagement,
/// skill_progression), summing to 1.
#[pyfunction]
fn classify_signal(question_text: &str) -> PyResult<(f64, f64, f64)> {
    let v = core::classify_signal(question_text, &core::LexiconSet::default())
        .map_err(to_py_err)?;
    let [p, e, s] = v.components();
    Ok((p, e, s))
}

/// Exponentially weighted need update.
#[pyfunction]
fn update_need_vector(
    prior: (f64, f64, f64),
    signal: (f64, f64, f64),
    alpha: f64,
) -> PyResult<(f64, f64, f64)> {
    let out = core::update_need_vector(&need_vector(prior)?, &need_vector(signal)?, alpha)
        .map_err(to_py_err)?;
    let [p, e, s] = out.components();
    Ok((p, e, s))
}

/// Argmax need with canonical tie-breaking.
#[pyfunction]
fn derive_dominant_need(need: (f64, f64, f64)) -> PyResult<String> {
    Ok(core::derive_dominant_need(&need_vector(need)?)
        .as_str()
        .to_string())
}

/// Tactic selected for a dominant need under the default mapping table.
#[pyfunction]
fn select_tactic(dominant_need: &str) -> PyResult<String> {
    let need = core::Need::parse(dominant_need).map_err(to_py_err)?;
    Ok(core::TacticMapping::default().get(need).as_str().to_string())
}

/// Rendered prompt for the given condition. Memory-based prompts need
/// persona, need, and tactic.
#[pyfunction]
#[pyo3(signature = (condition, question, persona=None, need=None, tactic=None))]
fn compose_prompt(
    condition: &str,
    question: &str,
    persona: Option<&str>,
    need: Option<(f64, f64, f64)>,
    tactic: Option<&str>,
) -> PyResult<String> {
    let condition = core::Condition::parse(condition).map_err(to_py_err)?;
    let templates = core::PromptTemplates::default();
    let prompt = match condition {
        core::Condition::Contextual => {
            core::compose_prompt(condition, question, None, None, &templates)
                .map_err(to_py_err)?
        }
        core::Condition::MemoryBased => {
            let (persona, need, tactic) = match (persona, need, tactic) {
                (Some(p), Some(n), Some(t)) => (p, n, t),
                _ => {
                    return Err(PyValueError::new_err(
                        "memory condition requires persona, need, and tactic",
                    ))
                }
            };
            let state = core::LearnerState::from_parts(
                "adhoc",
                need_vector(need)?,
                core::PersonaLabel::new(persona).map_err(to_py_err)?,
                1,
                0,
            );
            let tactic = core::Tactic::parse(tactic).map_err(to_py_err)?;
            core::compose_prompt(condition, question, Some(&state), Some(tactic), &templates)
                .map_err(to_py_err)?
        }
    };
    Ok(prompt.rendered)
}

/// Deterministic stub recommendation text for a question, optionally
/// conditioned on learner fields.
#[pyfunction]
#[pyo3(signature = (condition, question, persona=None, need=None, tactic=None))]
fn generate_stub(
    condition: &str,
    question: &str,
    persona: Option<&str>,
    need: Option<(f64, f64, f64)>,
    tactic: Option<&str>,
) -> PyResult<String> {
    let parsed = core::Condition::parse(condition).map_err(to_py_err)?;
    let templates = core::PromptTemplates::default();
    let prompt = match parsed {
        core::Condition::Contextual => {
            core::compose_prompt(parsed, question, None, None, &templates).map_err(to_py_err)?
        }
        core::Condition::MemoryBased => {
            let (persona, need, tactic) = match (persona, need, tactic) {
                (Some(p), Some(n), Some(t)) => (p, n, t),
                _ => {
                    return Err(PyValueError::new_err(
                        "memory condition requires persona, need, and tactic",
                    ))
                }
            };
            let state = core::LearnerState::from_parts(
                "adhoc",
                need_vector(need)?,
                core::PersonaLabel::new(persona).map_err(to_py_err)?,
                1,
                0,
            );
            let tactic = core::Tactic::parse(tactic).map_err(to_py_err)?;
            core::compose_prompt(parsed, question, Some(&state), Some(tactic), &templates)
                .map_err(to_py_err)?
        }
    };
    let rec = core::generate(
        &core::GenerationRequest {
            prompt,
            question_id: "adhoc".into(),
            learner_id: None,
        },
        &core::GeneratorConfig::default(),
    )
    .map_err(to_py_err)?;
    Ok(rec.text)
}

/// Feature-hashing stub embedding.
#[pyfunction]
#[pyo3(signature = (text, dimension=64))]
fn embed(text: &str, dimension: usize) -> PyResult<Vec<f64>> {
    let config = core::EmbedderConfig {
        dimension,
        ..core::EmbedderConfig::default()
    };
    Ok(core::embed(text, &config).map_err(to_py_err)?.values().to_vec())
}

#[pyfunction]
fn cosine(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    let va = core::EmbeddingVector::new(a).map_err(to_py_err)?;
    let vb = core::EmbeddingVector::new(b).map_err(to_py_err)?;
    if va.dim() != vb.dim() {
        return Err(PyValueError::new_err("dimension mismatch"));
    }
    Ok(core::cosine(&va, &vb))
}

#[pyfunction]
fn mean_vector(vectors: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    let vs: Vec<core::EmbeddingVector> = vectors
        .into_iter()
        .map(|v| core::EmbeddingVector::new(v).map_err(to_py_err))
        .collect::<PyResult<_>>()?;
    Ok(core::mean_vector(&vs).map_err(to_py_err)?.values().to_vec())
}

#[pyfunction]
fn paired_t_test(a: Vec<f64>, b: Vec<f64>) -> PyResult<TestResult> {
    let sample = core::PairedSample::new(a, b).map_err(to_py_err)?;
    Ok(core::paired_t_test(&sample).map_err(to_py_err)?.into())
}

#[pyfunction]
fn wilcoxon_signed_rank(a: Vec<f64>, b: Vec<f64>) -> PyResult<TestResult> {
    let sample = core::PairedSample::new(a, b).map_err(to_py_err)?;
    Ok(core::wilcoxon_signed_rank(&sample).map_err(to_py_err)?.into())
}

#[pyfunction]
fn cohens_dz(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    let sample = core::PairedSample::new(a, b).map_err(to_py_err)?;
    Ok(core::cohens_dz(&sample).map_err(to_py_err)?.cohens_dz)
}

#[pyfunction]
fn regularized_incomplete_beta(x: f64, p: f64, q: f64) -> PyResult<f64> {
    core::regularized_incomplete_beta(x, p, q).map_err(to_py_err)
}

/// Per-item deviation cosines and their mean.
#[pyfunction]
fn deviation_correlation(
    questions: Vec<Vec<f64>>,
    recs: Vec<Vec<f64>>,
) -> PyResult<(Vec<f64>, f64)> {
    let qs: Vec<core::EmbeddingVector> = questions
        .into_iter()
        .map(|v| core::EmbeddingVector::new(v).map_err(to_py_err))
        .collect::<PyResult<_>>()?;
    let rs: Vec<core::EmbeddingVector> = recs
        .into_iter()
        .map(|v| core::EmbeddingVector::new(v).map_err(to_py_err))
        .collect::<PyResult<_>>()?;
    let scores = core::deviation_correlation(&qs, &rs).map_err(to_py_err)?;
    Ok((scores.per_item, scores.rho))
}

/// Run the stub end-to-end experiment and return the diagnostics report as
/// a JSON string. Writes nothing to disk.
#[pyfunction]
#[pyo3(signature = (seed=42, n_questions=50, n_learners=20, alpha=0.2))]
fn run_experiment(seed: u64, n_questions: u32, n_learners: u32, alpha: f64) -> PyResult<String> {
    let config = ExperimentConfig {
        seed,
        n_questions,
        n_learners,
        alpha,
        ..ExperimentConfig::default()
    };
    config.validate().map_err(to_py_err)?;
    let bundle = config.bundle().map_err(to_py_err)?;
    let lexicons = config.lexicon_set().map_err(to_py_err)?;
    let persona = core::PersonaConfig::default();
    let digest = config.digest(&bundle, &persona);
    let outcome = core::experiment::run_pipeline(&config, &bundle, &lexicons, digest)
        .map_err(to_py_err)?;
    serde_json::to_string_pretty(&outcome.report)
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// One recommendation from a stored learner state.
#[pyfunction]
#[pyo3(signature = (store, question, condition, learner=None))]
fn recommend_from_store(
    store: &Store,
    question: &str,
    condition: &str,
    learner: Option<&str>,
) -> PyResult<String> {
    let condition = core::Condition::parse(condition).map_err(to_py_err)?;
    let bundle = core::ConditioningBundle::default();
    let rec = core_recommend(&store.inner, question, learner, condition, &bundle)
        .map_err(to_py_err)?;
    Ok(rec.text)
}

#[pymodule]
fn statefulrec_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Store>()?;
    m.add_class::<LearnerState>()?;
    m.add_class::<TestResult>()?;
    m.add_function(wrap_pyfunction!(classify_signal, m)?)?;
    m.add_function(wrap_pyfunction!(update_need_vector, m)?)?;
    m.add_function(wrap_pyfunction!(derive_dominant_need, m)?)?;
    m.add_function(wrap_pyfunction!(select_tactic, m)?)?;
    m.add_function(wrap_pyfunction!(compose_prompt, m)?)?;
    m.add_function(wrap_pyfunction!(generate_stub, m)?)?;
    m.add_function(wrap_pyfunction!(embed, m)?)?;
    m.add_function(wrap_pyfunction!(cosine, m)?)?;
    m.add_function(wrap_pyfunction!(mean_vector, m)?)?;
    m.add_function(wrap_pyfunction!(paired_t_test, m)?)?;
    m.add_function(wrap_pyfunction!(wilcoxon_signed_rank, m)?)?;
    m.add_function(wrap_pyfunction!(cohens_dz, m)?)?;
    m.add_function(wrap_pyfunction!(regularized_incomplete_beta, m)?)?;
    m.add_function(wrap_pyfunction!(deviation_correlation, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(recommend_from_store, m)?)?;
    Ok(())
}
