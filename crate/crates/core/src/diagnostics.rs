//! Behavior-level diagnostics: deviation correlation per condition, the
//! paired comparison between conditions, and the identical-input divergence
//! probe.

use serde::{Deserialize, Serialize};

use crate::conditioning::{
    compose_prompt, select_tactic, Condition, PromptTemplates, Tactic, TacticMapping,
};
use crate::embedding::{cosine, embed, mean_vector, EmbedderConfig, EmbeddingVector};
use crate::error::{Error, Result};
use crate::generation::{generate, GenerationRequest, GeneratorConfig};
use crate::learner::LearnerState;
use crate::stats::{
    cohens_dz, paired_t_test, wilcoxon_signed_rank, EffectSize, PairedSample, TestMethod,
    TestResult,
};

/// One question evaluated under both conditions: the question embedding and
/// the recommendation embedding per condition. All vectors share one
/// dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedItem {
    pub question_id: String,
    pub question_vec: EmbeddingVector,
    pub rec_vec_contextual: EmbeddingVector,
    pub rec_vec_memory: EmbeddingVector,
}

/// Per-item deviation cosines and their mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationScores {
    pub per_item: Vec<f64>,
    pub rho: f64,
}

/// Outcome of one identical-input divergence probe across two learners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceSummary {
    pub question_id: String,
    pub learner_ids: (String, String),
    pub contextual_texts_identical: bool,
    pub memory_texts_identical: bool,
    pub memory_embedding_cosine: f64,
    pub tactics: (Tactic, Tactic),
}

/// Full diagnostics over a matched-item set, mirroring the reported
/// quantities: deviation correlation per condition, paired tests, effect
/// size, and the divergence probe.
///
/// `flat_pearson_*` is the secondary reading of deviation correlation (one
/// Pearson coefficient over flattened deviation components); the primary
/// `rho_*` is the per-item mean that feeds the paired tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub rho_contextual: f64,
    pub rho_memory: f64,
    pub flat_pearson_contextual: f64,
    pub flat_pearson_memory: f64,
    pub t_result: TestResult,
    pub wilcoxon_result: TestResult,
    pub effect: EffectSize,
    pub divergence: Option<DivergenceSummary>,
    pub n_items: usize,
    pub config_digest: String,
}

/// Mean per-item cosine between question and recommendation deviations from
/// their respective means. Items with a zero deviation score 0 rather than
/// being dropped, keeping the pairing intact.
pub fn deviation_correlation(
    questions: &[EmbeddingVector],
    recs: &[EmbeddingVector],
) -> Result<DeviationScores> {
    if questions.len() != recs.len() {
        return Err(Error::InvalidInput(format!(
            "question/recommendation count mismatch: {} vs {}",
            questions.len(),
            recs.len()
        )));
    }
    if questions.len() < 2 {
        return Err(Error::InvalidInput(
            "deviation correlation needs at least 2 items; deviations from a singleton mean are identically zero"
                .into(),
        ));
    }
    let q_mean = mean_vector(questions)?;
    let r_mean = mean_vector(recs)?;
    if questions[0].dim() != recs[0].dim() {
        return Err(Error::InvalidInput(format!(
            "question/recommendation dimension mismatch: {} vs {}",
            questions[0].dim(),
            recs[0].dim()
        )));
    }
    let per_item: Vec<f64> = questions
        .iter()
        .zip(recs)
        .map(|(q, r)| cosine(&q.sub(&q_mean), &r.sub(&r_mean)))
        .collect();
    let rho = per_item.iter().sum::<f64>() / per_item.len() as f64;
    Ok(DeviationScores { per_item, rho })
}

/// Pearson correlation over the flattened deviation components of the two
/// sets; 0 when either side has no variance.
pub fn flat_pearson(questions: &[EmbeddingVector], recs: &[EmbeddingVector]) -> Result<f64> {
    if questions.len() != recs.len() || questions.len() < 2 {
        return Err(Error::InvalidInput(
            "flat pearson needs two equal-length sets of at least 2 items".into(),
        ));
    }
    let q_mean = mean_vector(questions)?;
    let r_mean = mean_vector(recs)?;
    let xs: Vec<f64> = questions
        .iter()
        .flat_map(|q| q.sub(&q_mean).values().to_vec())
        .collect();
    let ys: Vec<f64> = recs
        .iter()
        .flat_map(|r| r.sub(&r_mean).values().to_vec())
        .collect();
    // Deviations from the mean already have zero mean componentwise when
    // flattened, but compute the centered moments anyway for robustness.
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx < 1e-24 || syy < 1e-24 {
        return Ok(0.0);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Compares the two conditions over one matched-item set: deviation scores
/// per condition on the same questions, then paired t, Wilcoxon, and
/// Cohen's dz on the per-item scores (contextual as `a`, memory as `b`).
///
/// Items are processed in question-id order so reordering the input cannot
/// change the report. A null comparison (identical per-item scores) reports
/// t = 0, p = 1, and a zero effect rather than erroring.
///
/// With exactly two items the deviation construction mirrors the per-item
/// scores, so their paired differences are constant for every input; the
/// t-test and effect size are then structurally uninformative rather than
/// evidence of collapse, and are reported as t = 0, p = 1 with
/// `n_effective = 0` and dz = 0. From three items up, constant nonzero
/// differences are a genuine degeneracy and propagate as errors.
pub fn compare_conditions(
    items: &[MatchedItem],
    config_digest: impl Into<String>,
) -> Result<DiagnosticsReport> {
    if items.len() < 2 {
        return Err(Error::InvalidInput(
            "condition comparison needs at least 2 matched items".into(),
        ));
    }
    let mut ordered: Vec<&MatchedItem> = items.iter().collect();
    ordered.sort_by(|a, b| a.question_id.cmp(&b.question_id));

    let questions: Vec<EmbeddingVector> =
        ordered.iter().map(|i| i.question_vec.clone()).collect();
    let contextual: Vec<EmbeddingVector> = ordered
        .iter()
        .map(|i| i.rec_vec_contextual.clone())
        .collect();
    let memory: Vec<EmbeddingVector> =
        ordered.iter().map(|i| i.rec_vec_memory.clone()).collect();

    let scores_contextual = deviation_correlation(&questions, &contextual)
        .map_err(|e| annotate(e, "contextual"))?;
    let scores_memory =
        deviation_correlation(&questions, &memory).map_err(|e| annotate(e, "memory"))?;
    let flat_contextual =
        flat_pearson(&questions, &contextual).map_err(|e| annotate(e, "contextual"))?;
    let flat_memory = flat_pearson(&questions, &memory).map_err(|e| annotate(e, "memory"))?;

    let sample = PairedSample::new(
        scores_contextual.per_item.clone(),
        scores_memory.per_item.clone(),
    )?;
    let diffs = sample.differences();
    let diffs_all_zero = diffs.iter().all(|d| *d == 0.0);
    let two_item_constant = ordered.len() == 2 && !diffs_all_zero;

    let no_evidence = |method: TestMethod| TestResult {
        statistic: 0.0,
        p_value: 1.0,
        method,
        n_effective: 0,
    };

    let t_result = if two_item_constant {
        no_evidence(TestMethod::PairedT)
    } else {
        // The all-zero case is well defined here: t = 0, p = 1.
        paired_t_test(&sample).map_err(|e| annotate(e, "contextual vs memory"))?
    };
    let wilcoxon_result = if diffs_all_zero {
        // Null comparison: nothing to rank, no evidence against the null.
        no_evidence(TestMethod::WilcoxonExact)
    } else {
        wilcoxon_signed_rank(&sample).map_err(|e| annotate(e, "contextual vs memory"))?
    };
    let effect = if diffs_all_zero || two_item_constant {
        EffectSize { cohens_dz: 0.0 }
    } else {
        cohens_dz(&sample).map_err(|e| annotate(e, "contextual vs memory"))?
    };

    Ok(DiagnosticsReport {
        rho_contextual: scores_contextual.rho,
        rho_memory: scores_memory.rho,
        flat_pearson_contextual: flat_contextual,
        flat_pearson_memory: flat_memory,
        t_result,
        wilcoxon_result,
        effect,
        divergence: None,
        n_items: ordered.len(),
        config_digest: config_digest.into(),
    })
}

fn annotate(e: Error, which: &str) -> Error {
    match e {
        Error::DegenerateSample(msg) => {
            Error::DegenerateSample(format!("{which} condition collapsed: {msg}"))
        }
        Error::InvalidInput(msg) => Error::InvalidInput(format!("{which}: {msg}")),
        other => other,
    }
}

/// Everything the conditioning pipeline needs to turn a question and a
/// learner state into a recommendation: mapping table, templates, and the
/// backend configurations.
#[derive(Debug, Clone, Default)]
pub struct ConditioningBundle {
    pub mapping: TacticMapping,
    pub templates: PromptTemplates,
    pub generator: GeneratorConfig,
    pub embedder: EmbedderConfig,
}

/// Runs one identical-input probe: generates contextual and memory-based
/// recommendations for two learners on the same question and records
/// whether the outputs diverge, the cosine between the two memory
/// recommendation embeddings, and both selected tactics.
pub fn divergence_probe(
    question_id: &str,
    question_text: &str,
    state_a: &LearnerState,
    state_b: &LearnerState,
    bundle: &ConditioningBundle,
) -> Result<DivergenceSummary> {
    if state_a.learner_id() == state_b.learner_id() {
        return Err(Error::InvalidInput(
            "divergence probe requires two distinct learner states".into(),
        ));
    }
    let generate_for = |condition: Condition, state: Option<&LearnerState>| -> Result<String> {
        let tactic = state.map(|s| select_tactic(s, &bundle.mapping));
        let prompt = compose_prompt(condition, question_text, state, tactic, &bundle.templates)?;
        let request = GenerationRequest {
            prompt,
            question_id: question_id.to_string(),
            learner_id: state.map(|s| s.learner_id().to_string()),
        };
        Ok(generate(&request, &bundle.generator)?.text)
    };

    let contextual_a = generate_for(Condition::Contextual, None)?;
    let contextual_b = generate_for(Condition::Contextual, None)?;
    let memory_a = generate_for(Condition::MemoryBased, Some(state_a))?;
    let memory_b = generate_for(Condition::MemoryBased, Some(state_b))?;

    let embed_a = embed(&memory_a, &bundle.embedder)?;
    let embed_b = embed(&memory_b, &bundle.embedder)?;

    Ok(DivergenceSummary {
        question_id: question_id.to_string(),
        learner_ids: (
            state_a.learner_id().to_string(),
            state_b.learner_id().to_string(),
        ),
        contextual_texts_identical: contextual_a == contextual_b,
        memory_texts_identical: memory_a == memory_b,
        memory_embedding_cosine: cosine(&embed_a, &embed_b),
        tactics: (
            select_tactic(state_a, &bundle.mapping),
            select_tactic(state_b, &bundle.mapping),
        ),
    })
}
