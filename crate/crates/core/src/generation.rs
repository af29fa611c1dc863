//! Pluggable recommendation generation. The stub backend is a deterministic
//! template generator for offline reproduction; the http backend posts the
//! rendered prompt to a model server. Both satisfy one contract: the same
//! generation mechanism serves both conditioning modes.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::conditioning::{Condition, ConditionedPrompt, Tactic};
use crate::error::{Error, Result};
use crate::text::{content_words, default_stopwords};

/// Environment variable holding an optional bearer token for the http
/// backend.
pub const API_TOKEN_ENV: &str = "STATEFULREC_API_TOKEN";

/// A generated recommendation plus the metadata needed to pair it back to
/// its question and learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub text: String,
    pub condition: Condition,
    pub question_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learner_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tactic: Option<Tactic>,
    pub backend_name: String,
}

/// Generator backend selection and parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub backend: GeneratorBackend,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    pub timeout_ms: u64,
    pub max_parallel: usize,
    /// Stub-only; folded into the experiment's config digest.
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorBackend {
    Stub,
    Http,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            backend: GeneratorBackend::Stub,
            endpoint: None,
            timeout_ms: 10_000,
            max_parallel: 4,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.backend == GeneratorBackend::Http && self.endpoint.is_none() {
            return Err(Error::InvalidConfig(
                "http generator requires an endpoint".into(),
            ));
        }
        if self.max_parallel == 0 {
            return Err(Error::InvalidConfig("max_parallel must be positive".into()));
        }
        Ok(())
    }

    pub fn backend_name(&self) -> &'static str {
        match self.backend {
            GeneratorBackend::Stub => "stub",
            GeneratorBackend::Http => "http",
        }
    }
}

/// One unit of generation work: the composed prompt plus pairing metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRequest {
    pub prompt: ConditionedPrompt,
    pub question_id: String,
    pub learner_id: Option<String>,
}

/// Generates one recommendation with the configured backend.
pub fn generate(request: &GenerationRequest, config: &GeneratorConfig) -> Result<Recommendation> {
    config.validate()?;
    let text = match config.backend {
        GeneratorBackend::Stub => stub_text(&request.prompt),
        GeneratorBackend::Http => http_text(&request.prompt.rendered, config)?,
    };
    Ok(Recommendation {
        text,
        condition: request.prompt.condition,
        question_id: request.question_id.clone(),
        learner_id: request.learner_id.clone(),
        tactic: request.prompt.tactic,
        backend_name: config.backend_name().to_string(),
    })
}

/// Deterministic stub output, a pure function of the prompt.
///
/// Contextual recommendations draw only on question tokens, so two learners
/// asking the same question get byte-identical text. Memory-based
/// recommendations interleave the persona and top-need tokens with at most
/// six question content words under a tactic-specific template, so they
/// diverge whenever persona, dominant need, or tactic differ.
fn stub_text(prompt: &ConditionedPrompt) -> String {
    let stopwords: &BTreeSet<String> = {
        use std::sync::OnceLock;
        static STOPWORDS: OnceLock<BTreeSet<String>> = OnceLock::new();
        STOPWORDS.get_or_init(default_stopwords)
    };
    match prompt.condition {
        Condition::Contextual => {
            let topic = content_words(&prompt.question_text, stopwords, 12);
            format!(
                "Have the student justify: {topic} using a claim-evidence-reasoning structure."
            )
        }
        Condition::MemoryBased => {
            let fields = prompt
                .learner_fields
                .as_ref()
                .expect("memory prompt carries learner fields");
            let tactic = prompt.tactic.expect("memory prompt carries a tactic");
            let topic = content_words(&prompt.question_text, stopwords, 6);
            let persona = fields.persona.display_name();
            let top_need = fields.dominant_need.as_str();
            match tactic {
                Tactic::FeedUp => format!(
                    "Clarify the purpose of the task around {topic} and why it matters; \
                     have this {persona} student, whose top need is {top_need}, restate \
                     the goal in their own words before proceeding."
                ),
                Tactic::FeedBack => format!(
                    "Provide accuracy-based feedback relative to course mastery thresholds \
                     on {topic}; identify the specific misconception for this {persona} \
                     student, whose top need is {top_need}, and highlight what is already \
                     mastered."
                ),
                Tactic::FeedForward => format!(
                    "Lay out the next action steps on {topic} for this {persona} student, \
                     whose top need is {top_need}, ending with one concrete exercise to \
                     attempt before the next session."
                ),
            }
        }
    }
}

fn build_client(config: &GeneratorConfig) -> Result<reqwest::blocking::Client> {
    reqwest::blocking::Client::builder()
        .timeout(std::time::Duration::from_millis(config.timeout_ms))
        .build()
        .map_err(|e| Error::Backend {
            status: None,
            message: format!("failed to build http client: {e}"),
        })
}

fn http_text(rendered: &str, config: &GeneratorConfig) -> Result<String> {
    let client = build_client(config)?;
    http_text_with_client(rendered, config, &client)
}

fn http_text_with_client(
    rendered: &str,
    config: &GeneratorConfig,
    client: &reqwest::blocking::Client,
) -> Result<String> {
    let endpoint = config
        .endpoint
        .as_deref()
        .expect("validated before dispatch");
    let mut request = client
        .post(endpoint)
        .json(&serde_json::json!({ "prompt": rendered }));
    if let Ok(token) = std::env::var(API_TOKEN_ENV) {
        if !token.is_empty() {
            request = request.bearer_auth(token);
        }
    }
    let response = request.send().map_err(|e| Error::Backend {
        status: None,
        message: format!("generation request failed: {e}"),
    })?;
    let status = response.status();
    if !status.is_success() {
        return Err(Error::Backend {
            status: Some(status.as_u16()),
            message: "generation endpoint returned a non-success status".into(),
        });
    }
    #[derive(Deserialize)]
    struct Body {
        text: String,
    }
    let body: Body = response.json().map_err(|e| Error::Backend {
        status: Some(status.as_u16()),
        message: format!("malformed generation response: {e}"),
    })?;
    if body.text.is_empty() {
        return Err(Error::Backend {
            status: Some(status.as_u16()),
            message: "generation endpoint returned empty text".into(),
        });
    }
    Ok(body.text)
}

/// Failure report for a batch: the indices that failed, with messages, and
/// the recommendations that did complete.
#[derive(Debug)]
pub struct BatchError {
    pub failures: Vec<(usize, Error)>,
    pub completed: Vec<(usize, Recommendation)>,
}

impl fmt::Display for BatchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let indices: Vec<String> = self
            .failures
            .iter()
            .map(|(i, e)| format!("{i}: {e}"))
            .collect();
        write!(
            f,
            "batch generation failed for {} of {} items [{}]",
            self.failures.len(),
            self.failures.len() + self.completed.len(),
            indices.join("; ")
        )
    }
}

impl std::error::Error for BatchError {}

/// Generates a batch, preserving input order in the output. The http
/// backend keeps at most `max_parallel` requests in flight; the call
/// returns only when every item has resolved. Any item failure yields a
/// [`BatchError`] naming the failing indices while keeping the successes.
pub fn generate_batch(
    requests: &[GenerationRequest],
    config: &GeneratorConfig,
) -> Result<Vec<Recommendation>> {
    config.validate()?;
    if requests.is_empty() {
        return Err(Error::InvalidInput("empty generation batch".into()));
    }
    let outcomes: Vec<Result<Recommendation>> = match config.backend {
        GeneratorBackend::Stub => requests.iter().map(|r| generate(r, config)).collect(),
        GeneratorBackend::Http => {
            let client = build_client(config)?;
            let slots: Mutex<Vec<Option<Result<Recommendation>>>> =
                Mutex::new((0..requests.len()).map(|_| None).collect());
            let cursor = AtomicUsize::new(0);
            let workers = config.max_parallel.min(requests.len());
            std::thread::scope(|scope| {
                for _ in 0..workers {
                    scope.spawn(|| loop {
                        let index = cursor.fetch_add(1, Ordering::SeqCst);
                        if index >= requests.len() {
                            break;
                        }
                        let request = &requests[index];
                        let outcome = http_text_with_client(
                            &request.prompt.rendered,
                            config,
                            &client,
                        )
                        .map(|text| Recommendation {
                            text,
                            condition: request.prompt.condition,
                            question_id: request.question_id.clone(),
                            learner_id: request.learner_id.clone(),
                            tactic: request.prompt.tactic,
                            backend_name: config.backend_name().to_string(),
                        });
                        slots.lock().unwrap()[index] = Some(outcome);
                    });
                }
            });
            slots
                .into_inner()
                .unwrap()
                .into_iter()
                .map(|slot| slot.expect("every index visited"))
                .collect()
        }
    };

    let mut failures = Vec::new();
    let mut completed = Vec::new();
    for (index, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(rec) => completed.push((index, rec)),
            Err(e) => failures.push((index, e)),
        }
    }
    if failures.is_empty() {
        Ok(completed.into_iter().map(|(_, rec)| rec).collect())
    } else {
        Err(Error::Batch(BatchError {
            failures,
            completed,
        }))
    }
}
