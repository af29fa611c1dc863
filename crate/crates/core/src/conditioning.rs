//! Tactic selection and prompt composition for the two conditioning modes.
//!
//! The contextual prompt carries only the student question; the memory-based
//! prompt additionally carries the persisted learner fields and the selected
//! pedagogical tactic. The delta is strictly additive: both prompts share the
//! same question block.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::{LearnerState, Need, NeedVector, PersonaLabel};

/// The three pedagogical roles a recommendation can take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tactic {
    FeedUp,
    FeedBack,
    FeedForward,
}

impl Tactic {
    pub fn as_str(&self) -> &'static str {
        match self {
            Tactic::FeedUp => "feed_up",
            Tactic::FeedBack => "feed_back",
            Tactic::FeedForward => "feed_forward",
        }
    }

    /// Stable display form used in rendered prompts.
    pub fn display_name(&self) -> &'static str {
        match self {
            Tactic::FeedUp => "Feed Up: Goal Clarity",
            Tactic::FeedBack => "Feed Back: Mastery Status",
            Tactic::FeedForward => "Feed Forward: Action Steps",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "feed_up" => Ok(Tactic::FeedUp),
            "feed_back" => Ok(Tactic::FeedBack),
            "feed_forward" => Ok(Tactic::FeedForward),
            other => Err(Error::InvalidConfig(format!("unknown tactic: {other:?}"))),
        }
    }
}

impl fmt::Display for Tactic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Conditioning mode of a prompt or recommendation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Condition {
    #[serde(rename = "contextual")]
    Contextual,
    #[serde(rename = "memory")]
    MemoryBased,
}

impl Condition {
    pub fn as_str(&self) -> &'static str {
        match self {
            Condition::Contextual => "contextual",
            Condition::MemoryBased => "memory",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "contextual" => Ok(Condition::Contextual),
            "memory" | "memory_based" => Ok(Condition::MemoryBased),
            other => Err(Error::InvalidConfig(format!(
                "unknown condition: {other:?} (expected contextual or memory)"
            ))),
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Total map from dominant need to tactic. Validated at load time: every
/// need must be assigned exactly once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, String>", into = "BTreeMap<String, String>")]
pub struct TacticMapping(BTreeMap<Need, Tactic>);

impl Default for TacticMapping {
    fn default() -> Self {
        Self(BTreeMap::from([
            (Need::Engagement, Tactic::FeedUp),
            (Need::Performance, Tactic::FeedBack),
            (Need::SkillProgression, Tactic::FeedForward),
        ]))
    }
}

impl TryFrom<BTreeMap<String, String>> for TacticMapping {
    type Error = Error;

    fn try_from(raw: BTreeMap<String, String>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (need_name, tactic_name) in &raw {
            let need = Need::parse(need_name)
                .map_err(|_| Error::InvalidConfig(format!("unknown need: {need_name:?}")))?;
            map.insert(need, Tactic::parse(tactic_name)?);
        }
        for need in Need::ALL {
            if !map.contains_key(&need) {
                return Err(Error::InvalidConfig(format!(
                    "tactic mapping is missing an entry for need {need}"
                )));
            }
        }
        Ok(Self(map))
    }
}

impl From<TacticMapping> for BTreeMap<String, String> {
    fn from(mapping: TacticMapping) -> Self {
        mapping
            .0
            .into_iter()
            .map(|(n, t)| (n.as_str().to_string(), t.as_str().to_string()))
            .collect()
    }
}

impl TacticMapping {
    /// Parses a JSON object of need-name to tactic-name.
    pub fn from_json(raw: &str) -> Result<Self> {
        let map: BTreeMap<String, String> = serde_json::from_str(raw)
            .map_err(|e| Error::InvalidConfig(format!("tactic mapping is not valid JSON: {e}")))?;
        Self::try_from(map)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, need: Need) -> Tactic {
        self.0[&need]
    }
}

/// Selects the tactic for a learner; depends on the state only through its
/// dominant need.
pub fn select_tactic(state: &LearnerState, mapping: &TacticMapping) -> Tactic {
    mapping.get(state.dominant_need())
}

/// Learner-state fields that enter a memory-based prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerFields {
    pub persona: PersonaLabel,
    pub dominant_need: Need,
    pub need: NeedVector,
}

impl From<&LearnerState> for LearnerFields {
    fn from(state: &LearnerState) -> Self {
        Self {
            persona: state.persona().clone(),
            dominant_need: state.dominant_need(),
            need: *state.need(),
        }
    }
}

/// Prompt templates for the two conditions, with named placeholders
/// {question}, {persona}, {top_need}, {need_vector}, {tactic}.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplates {
    pub contextual: String,
    pub memory: String,
}

const KNOWN_PLACEHOLDERS: [&str; 5] =
    ["question", "persona", "top_need", "need_vector", "tactic"];

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            contextual: include_str!("../data/templates/contextual.tmpl").to_string(),
            memory: include_str!("../data/templates/memory.tmpl").to_string(),
        }
    }
}

impl PromptTemplates {
    /// Loads `contextual.tmpl` and `memory.tmpl` from a directory and
    /// validates their placeholders.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let templates = Self {
            contextual: std::fs::read_to_string(dir.join("contextual.tmpl"))?,
            memory: std::fs::read_to_string(dir.join("memory.tmpl"))?,
        };
        templates.validate()?;
        Ok(templates)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, tmpl) in [("contextual", &self.contextual), ("memory", &self.memory)] {
            let used = placeholder_names(tmpl).map_err(|e| {
                Error::InvalidConfig(format!("{name} template: {e}"))
            })?;
            for p in &used {
                if !KNOWN_PLACEHOLDERS.contains(&p.as_str()) {
                    return Err(Error::InvalidConfig(format!(
                        "{name} template uses unknown placeholder {{{p}}}"
                    )));
                }
            }
            if !used.iter().any(|p| p == "question") {
                return Err(Error::InvalidConfig(format!(
                    "{name} template must contain the {{question}} placeholder"
                )));
            }
        }
        Ok(())
    }
}

/// Structured prompt: the conditioning mode, its inputs, and the rendered
/// text. `rendered` is a pure function of the other fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionedPrompt {
    pub condition: Condition,
    pub question_text: String,
    pub learner_fields: Option<LearnerFields>,
    pub tactic: Option<Tactic>,
    pub rendered: String,
}

/// Composes a prompt for the given condition. Contextual prompts must not
/// carry learner state or a tactic; memory-based prompts must carry both.
pub fn compose_prompt(
    condition: Condition,
    question_text: &str,
    state: Option<&LearnerState>,
    tactic: Option<Tactic>,
    templates: &PromptTemplates,
) -> Result<ConditionedPrompt> {
    match condition {
        Condition::Contextual => {
            if state.is_some() || tactic.is_some() {
                return Err(Error::ContractViolation(
                    "contextual prompts take neither learner state nor a tactic".into(),
                ));
            }
            let rendered = render_template(
                &templates.contextual,
                &[("question", question_text.to_string())],
            )?;
            Ok(ConditionedPrompt {
                condition,
                question_text: question_text.to_string(),
                learner_fields: None,
                tactic: None,
                rendered,
            })
        }
        Condition::MemoryBased => {
            let (state, tactic) = match (state, tactic) {
                (Some(s), Some(t)) => (s, t),
                _ => {
                    return Err(Error::ContractViolation(
                        "memory-based prompts require learner state and a tactic".into(),
                    ))
                }
            };
            let fields = LearnerFields::from(state);
            let rendered = render_template(
                &templates.memory,
                &[
                    ("question", question_text.to_string()),
                    ("persona", fields.persona.display_name()),
                    ("top_need", fields.dominant_need.as_str().to_string()),
                    ("need_vector", fields.need.render_two_decimals()),
                    ("tactic", tactic.display_name().to_string()),
                ],
            )?;
            Ok(ConditionedPrompt {
                condition,
                question_text: question_text.to_string(),
                learner_fields: Some(fields),
                tactic: Some(tactic),
                rendered,
            })
        }
    }
}

/// Placeholder names appearing in a template, or an error for malformed
/// braces.
fn placeholder_names(template: &str) -> std::result::Result<Vec<String>, String> {
    let mut names = Vec::new();
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        let after = &rest[start + 1..];
        match after.find('}') {
            Some(end) => {
                names.push(after[..end].to_string());
                rest = &after[end + 1..];
            }
            None => return Err("unbalanced '{' in template".into()),
        }
    }
    Ok(names)
}

/// Single-pass substitution of named placeholders. Substituted values are
/// emitted verbatim and never re-scanned, so braces inside a student
/// question cannot be interpreted as placeholders.
fn render_template(template: &str, values: &[(&str, String)]) -> Result<String> {
    let mut out = String::with_capacity(template.len() + 128);
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        let after = &rest[start + 1..];
        let end = after.find('}').ok_or_else(|| {
            Error::InvalidConfig("unbalanced '{' in template".into())
        })?;
        let name = &after[..end];
        match values.iter().find(|(k, _)| *k == name) {
            Some((_, value)) => out.push_str(value),
            None => {
                return Err(Error::InvalidConfig(format!(
                    "template placeholder {{{name}}} has no value in this condition"
                )))
            }
        }
        rest = &after[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::{LearnerState, NeedVector, PersonaLabel};

    fn figure_state() -> LearnerState {
        LearnerState::from_parts(
            "learner_a",
            NeedVector::new(0.38, 0.62, 0.56).unwrap(),
            PersonaLabel::help_seekers(),
            4,
            1_000,
        )
    }

    #[test]
    fn default_mapping_matches_divergence_table() {
        let mapping = TacticMapping::default();
        assert_eq!(mapping.get(Need::Engagement), Tactic::FeedUp);
        assert_eq!(mapping.get(Need::Performance), Tactic::FeedBack);
        assert_eq!(mapping.get(Need::SkillProgression), Tactic::FeedForward);
    }

    #[test]
    fn select_tactic_uses_only_the_dominant_need() {
        let mapping = TacticMapping::default();
        let a = LearnerState::from_parts(
            "a",
            NeedVector::new(0.1, 0.8, 0.1).unwrap(),
            PersonaLabel::help_seekers(),
            2,
            0,
        );
        let b = LearnerState::from_parts(
            "b",
            NeedVector::new(0.3, 0.6, 0.1).unwrap(),
            PersonaLabel::balanced(),
            9,
            5,
        );
        assert_eq!(a.dominant_need(), b.dominant_need());
        assert_eq!(select_tactic(&a, &mapping), select_tactic(&b, &mapping));
    }

    #[test]
    fn mapping_must_cover_every_need() {
        let err = TacticMapping::from_json(r#"{"engagement":"feed_up"}"#).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
        let err =
            TacticMapping::from_json(r#"{"engagement":"feed_up","performance":"feed_back","velocity":"feed_forward"}"#)
                .unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
        let err = TacticMapping::from_json(
            r#"{"engagement":"feed_sideways","performance":"feed_back","skill_progression":"feed_forward"}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }

    #[test]
    fn mapping_round_trips_through_json() {
        let mapping = TacticMapping::default();
        let json = serde_json::to_string(&mapping).unwrap();
        assert_eq!(TacticMapping::from_json(&json).unwrap(), mapping);
    }

    #[test]
    fn memory_prompt_carries_the_figure_lines() {
        let prompt = compose_prompt(
            Condition::MemoryBased,
            "True or false, design according to some people, is the cognitive task with the most economic value",
            Some(&figure_state()),
            Some(Tactic::FeedForward),
            &PromptTemplates::default(),
        )
        .unwrap();
        assert!(prompt
            .rendered
            .contains("persona=Help Seekers; top_need=engagement"));
        assert!(prompt
            .rendered
            .contains("performance=0.38, engagement=0.62, skill_progression=0.56"));
        assert!(prompt.rendered.contains("Tactic: Feed Forward: Action Steps."));
    }

    #[test]
    fn contextual_prompt_has_no_student_context() {
        let prompt = compose_prompt(
            Condition::Contextual,
            "why is the sky blue",
            None,
            None,
            &PromptTemplates::default(),
        )
        .unwrap();
        assert!(prompt.rendered.contains("why is the sky blue"));
        assert!(!prompt.rendered.contains("Student context"));
        assert!(prompt.learner_fields.is_none() && prompt.tactic.is_none());
    }

    #[test]
    fn composition_is_pure() {
        let templates = PromptTemplates::default();
        let a = compose_prompt(
            Condition::MemoryBased,
            "why",
            Some(&figure_state()),
            Some(Tactic::FeedUp),
            &templates,
        )
        .unwrap();
        let b = compose_prompt(
            Condition::MemoryBased,
            "why",
            Some(&figure_state()),
            Some(Tactic::FeedUp),
            &templates,
        )
        .unwrap();
        assert_eq!(a.rendered, b.rendered);
        assert_eq!(a, b);
    }

    #[test]
    fn memory_prompt_contains_the_contextual_question_block() {
        let templates = PromptTemplates::default();
        let q = "how do I practice semantic networks";
        let memory = compose_prompt(
            Condition::MemoryBased,
            q,
            Some(&figure_state()),
            Some(Tactic::FeedUp),
            &templates,
        )
        .unwrap();
        let block = format!("Student question: \"{q}\"");
        assert!(memory.rendered.contains(&block));
        let contextual =
            compose_prompt(Condition::Contextual, q, None, None, &templates).unwrap();
        assert!(contextual.rendered.contains(&block));
    }

    #[test]
    fn condition_field_consistency_is_enforced() {
        let templates = PromptTemplates::default();
        let state = figure_state();
        assert!(matches!(
            compose_prompt(Condition::Contextual, "q", Some(&state), None, &templates),
            Err(Error::ContractViolation(_))
        ));
        assert!(matches!(
            compose_prompt(Condition::Contextual, "q", None, Some(Tactic::FeedUp), &templates),
            Err(Error::ContractViolation(_))
        ));
        assert!(matches!(
            compose_prompt(Condition::MemoryBased, "q", Some(&state), None, &templates),
            Err(Error::ContractViolation(_))
        ));
        assert!(matches!(
            compose_prompt(Condition::MemoryBased, "q", None, Some(Tactic::FeedUp), &templates),
            Err(Error::ContractViolation(_))
        ));
    }

    #[test]
    fn braces_in_question_text_are_inert() {
        let templates = PromptTemplates::default();
        let q = "what does {persona} mean in this {need_vector} context";
        let prompt =
            compose_prompt(Condition::Contextual, q, None, None, &templates).unwrap();
        assert!(prompt.rendered.contains(q));
        let memory = compose_prompt(
            Condition::MemoryBased,
            q,
            Some(&figure_state()),
            Some(Tactic::FeedUp),
            &templates,
        )
        .unwrap();
        assert!(memory.rendered.contains(q));
    }

    #[test]
    fn template_validation_rejects_unknown_placeholders() {
        let bad = PromptTemplates {
            contextual: "Q: {question} {seat_number}".into(),
            memory: "Q: {question}".into(),
        };
        assert!(matches!(bad.validate(), Err(Error::InvalidConfig(_))));
        let missing_question = PromptTemplates {
            contextual: "no placeholder".into(),
            memory: "Q: {question}".into(),
        };
        assert!(matches!(
            missing_question.validate(),
            Err(Error::InvalidConfig(_))
        ));
        assert!(PromptTemplates::default().validate().is_ok());
    }

    #[test]
    fn floats_render_with_exactly_two_decimals() {
        let v = NeedVector::new(0.5, 0.375, 1.0).unwrap();
        assert_eq!(
            v.render_two_decimals(),
            "performance=0.50, engagement=0.38, skill_progression=1.00"
        );
    }
}
