//! Two recommendation-conditioning pipelines over a persistent learner-state
//! store, plus the behavior-level diagnostics that tell them apart.
//!
//! The contextual pipeline conditions generation on the current student
//! question alone; the memory-based pipeline additionally conditions on a
//! persisted learner state (need vector, dominant need, persona) and a
//! pedagogical tactic selected from it. Deterministic stub backends make
//! the whole comparison runnable offline: deviation correlation per
//! condition, paired t and Wilcoxon signed-rank tests, effect size, and an
//! identical-input divergence probe.

pub mod conditioning;
pub mod diagnostics;
pub mod embedding;
pub mod error;
pub mod experiment;
pub mod generation;
pub mod learner;
pub mod stats;
pub mod store;
pub mod synth;
pub mod text;

pub use conditioning::{
    compose_prompt, select_tactic, Condition, ConditionedPrompt, LearnerFields, PromptTemplates,
    Tactic, TacticMapping,
};
pub use diagnostics::{
    compare_conditions, deviation_correlation, divergence_probe, ConditioningBundle,
    DeviationScores, DiagnosticsReport, DivergenceSummary, MatchedItem,
};
pub use embedding::{cosine, embed, mean_vector, EmbedderBackend, EmbedderConfig, EmbeddingVector};
pub use error::{Error, Result};
pub use experiment::{run_experiment, ExperimentConfig, ExperimentOutcome};
pub use generation::{
    generate, generate_batch, GenerationRequest, GeneratorBackend, GeneratorConfig,
    Recommendation,
};
pub use learner::{
    assign_persona, classify_signal, derive_dominant_need, update_need_vector, InteractionEvent,
    InteractionRecord, LearnerState, LexiconSet, Need, NeedVector, PersonaConfig, PersonaLabel,
    PersonaVocabulary,
};
pub use stats::{
    cohens_dz, paired_t_test, regularized_incomplete_beta, wilcoxon_signed_rank, EffectSize,
    PairedSample, TestMethod, TestResult,
};
pub use store::Store;
