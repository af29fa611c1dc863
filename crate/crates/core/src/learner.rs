//! Learner-state domain types and the estimators that derive need vectors,
//! dominant needs, and persona labels from interaction history.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{parse_word_list, tokenize};

/// Per-learner instructional-need profile over the three canonical needs,
/// in fixed order (performance, engagement, skill_progression).
/// Every component is finite and within [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNeedVector")]
pub struct NeedVector {
    performance: f64,
    engagement: f64,
    skill_progression: f64,
}

#[derive(Deserialize)]
struct RawNeedVector {
    performance: f64,
    engagement: f64,
    skill_progression: f64,
}

impl TryFrom<RawNeedVector> for NeedVector {
    type Error = Error;

    fn try_from(raw: RawNeedVector) -> Result<Self> {
        NeedVector::new(raw.performance, raw.engagement, raw.skill_progression)
    }
}

impl NeedVector {
    pub fn new(performance: f64, engagement: f64, skill_progression: f64) -> Result<Self> {
        for (name, v) in [
            ("performance", performance),
            ("engagement", engagement),
            ("skill_progression", skill_progression),
        ] {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidInput(format!(
                    "need component {name}={v} is not a finite fraction in [0, 1]"
                )));
            }
        }
        Ok(Self {
            performance,
            engagement,
            skill_progression,
        })
    }

    /// The no-evidence profile used for new learners and signal fallback.
    pub fn uniform() -> Self {
        Self {
            performance: 1.0 / 3.0,
            engagement: 1.0 / 3.0,
            skill_progression: 1.0 / 3.0,
        }
    }

    pub fn performance(&self) -> f64 {
        self.performance
    }

    pub fn engagement(&self) -> f64 {
        self.engagement
    }

    pub fn skill_progression(&self) -> f64 {
        self.skill_progression
    }

    /// Components in canonical order.
    pub fn components(&self) -> [f64; 3] {
        [self.performance, self.engagement, self.skill_progression]
    }

    pub fn component(&self, need: Need) -> f64 {
        match need {
            Need::Performance => self.performance,
            Need::Engagement => self.engagement,
            Need::SkillProgression => self.skill_progression,
        }
    }

    /// Prompt-facing rendering with exactly two decimal places per component.
    pub fn render_two_decimals(&self) -> String {
        format!(
            "performance={:.2}, engagement={:.2}, skill_progression={:.2}",
            self.performance, self.engagement, self.skill_progression
        )
    }
}

/// The three instructional needs, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Need {
    Performance,
    Engagement,
    SkillProgression,
}

impl Need {
    /// Canonical order, also the argmax tie-break order.
    pub const ALL: [Need; 3] = [Need::Performance, Need::Engagement, Need::SkillProgression];

    pub fn as_str(&self) -> &'static str {
        match self {
            Need::Performance => "performance",
            Need::Engagement => "engagement",
            Need::SkillProgression => "skill_progression",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "performance" => Ok(Need::Performance),
            "engagement" => Ok(Need::Engagement),
            "skill_progression" => Ok(Need::SkillProgression),
            other => Err(Error::InvalidInput(format!("unknown need: {other:?}"))),
        }
    }
}

impl fmt::Display for Need {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Categorical learner tag drawn from a closed vocabulary.
///
/// The canonical identifier is lowercase snake_case; `display_name` renders
/// it for prompts ("help_seekers" -> "Help Seekers").
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PersonaLabel(String);

impl PersonaLabel {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty()
            || !id
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
        {
            return Err(Error::InvalidInput(format!(
                "persona label {id:?} must be non-empty lowercase snake_case"
            )));
        }
        Ok(Self(id))
    }

    pub fn id(&self) -> &str {
        &self.0
    }

    /// Title-cased rendering used in prompts.
    pub fn display_name(&self) -> String {
        self.0
            .split('_')
            .map(|w| {
                let mut chars = w.chars();
                match chars.next() {
                    Some(c) => c.to_uppercase().chain(chars).collect::<String>(),
                    None => String::new(),
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn help_seekers() -> Self {
        Self("help_seekers".into())
    }

    pub fn performers() -> Self {
        Self("performers".into())
    }

    pub fn explorers() -> Self {
        Self("explorers".into())
    }

    pub fn balanced() -> Self {
        Self("balanced".into())
    }
}

impl TryFrom<String> for PersonaLabel {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        PersonaLabel::new(s)
    }
}

impl From<PersonaLabel> for String {
    fn from(label: PersonaLabel) -> String {
        label.0
    }
}

impl fmt::Display for PersonaLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Closed set of persona labels accepted at parse time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PersonaVocabulary(BTreeSet<PersonaLabel>);

impl Default for PersonaVocabulary {
    fn default() -> Self {
        Self(BTreeSet::from([
            PersonaLabel::help_seekers(),
            PersonaLabel::performers(),
            PersonaLabel::explorers(),
            PersonaLabel::balanced(),
        ]))
    }
}

impl PersonaVocabulary {
    pub fn from_labels(labels: impl IntoIterator<Item = PersonaLabel>) -> Self {
        Self(labels.into_iter().collect())
    }

    pub fn contains(&self, label: &PersonaLabel) -> bool {
        self.0.contains(label)
    }

    /// Parses a label string, rejecting anything outside the vocabulary.
    pub fn parse_label(&self, s: &str) -> Result<PersonaLabel> {
        let label = PersonaLabel::new(s)?;
        if self.contains(&label) {
            Ok(label)
        } else {
            Err(Error::InvalidInput(format!(
                "persona label {s:?} is not in the configured vocabulary"
            )))
        }
    }
}

/// One rule of the persona mapping table: matches when the learner's dominant
/// need equals `dominant` and, if `min_rate` is set, the observed
/// questions-per-day rate is at least that value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaRule {
    pub dominant: Need,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_rate: Option<f64>,
    pub label: PersonaLabel,
}

/// Ordered persona rules plus a fallback label; fully data-driven so the
/// taxonomy can be replaced without code changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaConfig {
    pub rules: Vec<PersonaRule>,
    pub fallback: PersonaLabel,
}

impl Default for PersonaConfig {
    fn default() -> Self {
        Self {
            rules: vec![
                PersonaRule {
                    dominant: Need::Engagement,
                    min_rate: Some(1.0),
                    label: PersonaLabel::help_seekers(),
                },
                PersonaRule {
                    dominant: Need::Performance,
                    min_rate: None,
                    label: PersonaLabel::performers(),
                },
                PersonaRule {
                    dominant: Need::SkillProgression,
                    min_rate: None,
                    label: PersonaLabel::explorers(),
                },
            ],
            fallback: PersonaLabel::balanced(),
        }
    }
}

impl PersonaConfig {
    /// All labels this configuration can produce.
    pub fn vocabulary(&self) -> PersonaVocabulary {
        PersonaVocabulary::from_labels(
            self.rules
                .iter()
                .map(|r| r.label.clone())
                .chain(std::iter::once(self.fallback.clone())),
        )
    }
}

/// One student question event with its derived need signal.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionRecord {
    pub learner_id: String,
    pub question_id: String,
    pub question_text: String,
    /// Milliseconds since the Unix epoch.
    pub timestamp: i64,
    /// Per-interaction evidence derived from the question text.
    pub signal: NeedVector,
}

/// Wire form of an interaction, as found in interaction log files
/// (JSONL: learner_id, question_id, question_text, timestamp).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionEvent {
    pub learner_id: String,
    pub question_id: String,
    pub question_text: String,
    pub timestamp: i64,
}

impl InteractionRecord {
    /// Validates the event and derives its need signal from the question text.
    pub fn from_event(event: InteractionEvent, lexicons: &LexiconSet) -> Result<Self> {
        let signal = classify_signal(&event.question_text, lexicons)?;
        Ok(Self {
            learner_id: event.learner_id,
            question_id: event.question_id,
            question_text: event.question_text,
            timestamp: event.timestamp,
            signal,
        })
    }
}

/// Persistent per-learner memory: need vector, dominant need, persona label,
/// and update bookkeeping. `dominant_need` always equals
/// `derive_dominant_need(need)`; the store re-checks this at parse time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLearnerState")]
pub struct LearnerState {
    learner_id: String,
    need: NeedVector,
    dominant_need: Need,
    persona: PersonaLabel,
    interaction_count: u64,
    updated_at: i64,
}

#[derive(Deserialize)]
struct RawLearnerState {
    learner_id: String,
    need: NeedVector,
    dominant_need: Need,
    persona: PersonaLabel,
    interaction_count: u64,
    updated_at: i64,
}

impl TryFrom<RawLearnerState> for LearnerState {
    type Error = Error;

    fn try_from(raw: RawLearnerState) -> Result<Self> {
        let derived = derive_dominant_need(&raw.need);
        if raw.dominant_need != derived {
            return Err(Error::InvalidInput(format!(
                "dominant_need {} does not match need vector (expected {})",
                raw.dominant_need, derived
            )));
        }
        Ok(Self {
            learner_id: raw.learner_id,
            need: raw.need,
            dominant_need: raw.dominant_need,
            persona: raw.persona,
            interaction_count: raw.interaction_count,
            updated_at: raw.updated_at,
        })
    }
}

impl LearnerState {
    /// Fresh state before any interaction: uniform need vector, balanced
    /// persona, zero interactions.
    pub fn new_learner(learner_id: impl Into<String>) -> Self {
        let need = NeedVector::uniform();
        Self {
            learner_id: learner_id.into(),
            dominant_need: derive_dominant_need(&need),
            need,
            persona: PersonaLabel::balanced(),
            interaction_count: 0,
            updated_at: 0,
        }
    }

    pub fn learner_id(&self) -> &str {
        &self.learner_id
    }

    pub fn need(&self) -> &NeedVector {
        &self.need
    }

    pub fn dominant_need(&self) -> Need {
        self.dominant_need
    }

    pub fn persona(&self) -> &PersonaLabel {
        &self.persona
    }

    pub fn interaction_count(&self) -> u64 {
        self.interaction_count
    }

    pub fn updated_at(&self) -> i64 {
        self.updated_at
    }

    /// Returns a copy advanced by one interaction. The dominant need is
    /// recomputed; the persona is reassigned from `config` using
    /// `questions_per_day`.
    pub fn advanced(
        &self,
        signal: &NeedVector,
        alpha: f64,
        timestamp: i64,
        questions_per_day: f64,
        config: &PersonaConfig,
    ) -> Result<Self> {
        let need = update_need_vector(&self.need, signal, alpha)?;
        let mut next = Self {
            learner_id: self.learner_id.clone(),
            dominant_need: derive_dominant_need(&need),
            need,
            persona: self.persona.clone(),
            interaction_count: self.interaction_count + 1,
            updated_at: timestamp,
        };
        next.persona = assign_persona(&next, questions_per_day, config)?;
        Ok(next)
    }

    /// Test-support constructor that derives the dominant need and otherwise
    /// takes fields verbatim.
    pub fn from_parts(
        learner_id: impl Into<String>,
        need: NeedVector,
        persona: PersonaLabel,
        interaction_count: u64,
        updated_at: i64,
    ) -> Self {
        Self {
            learner_id: learner_id.into(),
            dominant_need: derive_dominant_need(&need),
            need,
            persona,
            interaction_count,
            updated_at,
        }
    }
}

/// Keyword lexicons backing the rule-based signal classifier, one per need.
#[derive(Debug, Clone)]
pub struct LexiconSet {
    performance: BTreeSet<String>,
    engagement: BTreeSet<String>,
    skill_progression: BTreeSet<String>,
}

impl Default for LexiconSet {
    fn default() -> Self {
        Self {
            performance: parse_word_list(include_str!("../data/lexicons/performance.lex")),
            engagement: parse_word_list(include_str!("../data/lexicons/engagement.lex")),
            skill_progression: parse_word_list(include_str!(
                "../data/lexicons/skill_progression.lex"
            )),
        }
    }
}

impl LexiconSet {
    /// Loads `performance.lex`, `engagement.lex`, `skill_progression.lex`
    /// from a directory; one token per line.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let read = |name: &str| -> Result<BTreeSet<String>> {
            let path = dir.join(name);
            let raw = std::fs::read_to_string(&path)?;
            let words = parse_word_list(&raw);
            if words.is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "lexicon {} contains no tokens",
                    path.display()
                )));
            }
            Ok(words)
        };
        Ok(Self {
            performance: read("performance.lex")?,
            engagement: read("engagement.lex")?,
            skill_progression: read("skill_progression.lex")?,
        })
    }

    fn hits(&self, tokens: &[String]) -> [u64; 3] {
        let mut counts = [0u64; 3];
        for token in tokens {
            if self.performance.contains(token) {
                counts[0] += 1;
            }
            if self.engagement.contains(token) {
                counts[1] += 1;
            }
            if self.skill_progression.contains(token) {
                counts[2] += 1;
            }
        }
        counts
    }
}

/// Derives a per-interaction need signal from question text by counting
/// case-insensitive whole-token lexicon hits. Components are each lexicon's
/// share of all hits; with no hits at all the signal is uniform.
pub fn classify_signal(question_text: &str, lexicons: &LexiconSet) -> Result<NeedVector> {
    if question_text.trim().is_empty() {
        return Err(Error::InvalidInput(
            "question text is empty after trimming".into(),
        ));
    }
    let tokens = tokenize(question_text);
    let counts = lexicons.hits(&tokens);
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Ok(NeedVector::uniform());
    }
    NeedVector::new(
        counts[0] as f64 / total as f64,
        counts[1] as f64 / total as f64,
        counts[2] as f64 / total as f64,
    )
}

/// Exponentially weighted update: each component moves from `prior` toward
/// `signal` by factor `alpha` in (0, 1]. Results are clamped to the closed
/// interval spanned by the two inputs to keep rounding inside bounds.
pub fn update_need_vector(prior: &NeedVector, signal: &NeedVector, alpha: f64) -> Result<NeedVector> {
    if !alpha.is_finite() || alpha <= 0.0 || alpha > 1.0 {
        return Err(Error::InvalidParameter(format!(
            "alpha={alpha} must lie in (0, 1]"
        )));
    }
    let p = prior.components();
    let s = signal.components();
    let mut out = [0.0; 3];
    for i in 0..3 {
        let lo = p[i].min(s[i]);
        let hi = p[i].max(s[i]);
        out[i] = ((1.0 - alpha) * p[i] + alpha * s[i]).clamp(lo, hi);
    }
    NeedVector::new(out[0], out[1], out[2])
}

/// The need with the maximal component; ties break in canonical order
/// (performance, then engagement, then skill_progression).
pub fn derive_dominant_need(need: &NeedVector) -> Need {
    let mut best = Need::Performance;
    let mut best_value = need.component(best);
    for candidate in [Need::Engagement, Need::SkillProgression] {
        let value = need.component(candidate);
        if value > best_value {
            best = candidate;
            best_value = value;
        }
    }
    best
}

/// Maps (dominant need, questions-per-day rate) to a persona label via the
/// first matching rule, falling back to `config.fallback`. Requires at least
/// one recorded interaction.
pub fn assign_persona(
    state: &LearnerState,
    questions_per_day: f64,
    config: &PersonaConfig,
) -> Result<PersonaLabel> {
    if state.interaction_count() == 0 {
        return Err(Error::InsufficientHistory(format!(
            "learner {} has no recorded interactions",
            state.learner_id()
        )));
    }
    for rule in &config.rules {
        if rule.dominant != state.dominant_need() {
            continue;
        }
        match rule.min_rate {
            Some(min) if questions_per_day < min => continue,
            _ => return Ok(rule.label.clone()),
        }
    }
    Ok(config.fallback.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lex() -> LexiconSet {
        LexiconSet::default()
    }

    #[test]
    fn classify_skill_only_question() {
        // Only the skill lexicon hits: how, practice, next, steps
        let v = classify_signal("how do I practice the next steps", &lex()).unwrap();
        assert_eq!(v.components(), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn classify_no_hits_is_uniform() {
        let v = classify_signal("zzz qqq", &lex()).unwrap();
        assert_eq!(v.components(), [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
    }

    #[test]
    fn classify_mixed_question() {
        // exam + score vs why: (2/3, 1/3, 0)
        let v = classify_signal("why is my exam score low", &lex()).unwrap();
        let [p, e, s] = v.components();
        assert!((p - 2.0 / 3.0).abs() < 1e-15);
        assert!((e - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(s, 0.0);
    }

    #[test]
    fn classify_is_case_insensitive_on_whole_tokens() {
        let v = classify_signal("WHY? Exam!", &lex()).unwrap();
        let [p, e, s] = v.components();
        assert!((p - 0.5).abs() < 1e-15);
        assert!((e - 0.5).abs() < 1e-15);
        assert_eq!(s, 0.0);
        // "scored" is not the token "score"
        let v = classify_signal("scored examination", &lex()).unwrap();
        assert_eq!(v.components(), [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
    }

    #[test]
    fn classify_empty_text_is_an_error() {
        assert!(matches!(
            classify_signal("   ", &lex()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn update_fixed_point() {
        let v = NeedVector::new(0.5, 0.5, 0.5).unwrap();
        let out = update_need_vector(&v, &v, 0.3).unwrap();
        assert_eq!(out.components(), [0.5, 0.5, 0.5]);
    }

    #[test]
    fn update_full_replacement_at_alpha_one() {
        let prior = NeedVector::new(0.0, 0.0, 0.0).unwrap();
        let signal = NeedVector::new(1.0, 0.0, 0.0).unwrap();
        let out = update_need_vector(&prior, &signal, 1.0).unwrap();
        assert_eq!(out.components(), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn update_quarter_step() {
        let prior = NeedVector::new(0.4, 0.6, 0.5).unwrap();
        let signal = NeedVector::new(1.0, 0.0, 0.0).unwrap();
        let out = update_need_vector(&prior, &signal, 0.25).unwrap();
        let expect = [
            0.75 * 0.4 + 0.25,
            0.75 * 0.6,
            0.75 * 0.5,
        ];
        for (got, want) in out.components().iter().zip(expect) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn update_rejects_alpha_outside_unit_interval() {
        let v = NeedVector::uniform();
        for bad in [0.0, -0.1, 1.0001, f64::NAN] {
            assert!(matches!(
                update_need_vector(&v, &v, bad),
                Err(Error::InvalidParameter(_))
            ));
        }
    }

    #[test]
    fn dominant_need_figure_values() {
        let v = NeedVector::new(0.38, 0.62, 0.56).unwrap();
        assert_eq!(derive_dominant_need(&v), Need::Engagement);
    }

    #[test]
    fn dominant_need_tie_breaks_in_canonical_order() {
        let all_tied = NeedVector::new(0.5, 0.5, 0.5).unwrap();
        assert_eq!(derive_dominant_need(&all_tied), Need::Performance);
        let two_way = NeedVector::new(0.2, 0.7, 0.7).unwrap();
        assert_eq!(derive_dominant_need(&two_way), Need::Engagement);
    }

    fn state_with_dominant(need: NeedVector, count: u64) -> LearnerState {
        LearnerState::from_parts("learner_a", need, PersonaLabel::balanced(), count, 0)
    }

    #[test]
    fn persona_default_table() {
        let cfg = PersonaConfig::default();
        let engaged = state_with_dominant(NeedVector::new(0.1, 0.8, 0.1).unwrap(), 3);
        assert_eq!(
            assign_persona(&engaged, 2.0, &cfg).unwrap(),
            PersonaLabel::help_seekers()
        );
        let performer = state_with_dominant(NeedVector::new(0.9, 0.1, 0.1).unwrap(), 3);
        assert_eq!(
            assign_persona(&performer, 0.1, &cfg).unwrap(),
            PersonaLabel::performers()
        );
        let explorer = state_with_dominant(NeedVector::new(0.1, 0.1, 0.9).unwrap(), 3);
        assert_eq!(
            assign_persona(&explorer, 0.5, &cfg).unwrap(),
            PersonaLabel::explorers()
        );
    }

    #[test]
    fn persona_below_rate_threshold_falls_back() {
        let cfg = PersonaConfig::default();
        let engaged = state_with_dominant(NeedVector::new(0.1, 0.8, 0.1).unwrap(), 3);
        assert_eq!(
            assign_persona(&engaged, 0.0, &cfg).unwrap(),
            PersonaLabel::balanced()
        );
    }

    #[test]
    fn persona_requires_history() {
        let cfg = PersonaConfig::default();
        let fresh = LearnerState::new_learner("learner_a");
        assert!(matches!(
            assign_persona(&fresh, 5.0, &cfg),
            Err(Error::InsufficientHistory(_))
        ));
    }

    #[test]
    fn persona_label_display_name() {
        assert_eq!(PersonaLabel::help_seekers().display_name(), "Help Seekers");
        assert_eq!(PersonaLabel::balanced().display_name(), "Balanced");
    }

    #[test]
    fn persona_vocabulary_rejects_unknown_labels() {
        let vocab = PersonaVocabulary::default();
        assert!(vocab.parse_label("help_seekers").is_ok());
        assert!(vocab.parse_label("overachievers").is_err());
        assert!(vocab.parse_label("Help Seekers").is_err());
    }

    #[test]
    fn need_serializes_snake_case() {
        assert_eq!(
            serde_json::to_string(&Need::SkillProgression).unwrap(),
            "\"skill_progression\""
        );
        assert_eq!(
            serde_json::from_str::<Need>("\"engagement\"").unwrap(),
            Need::Engagement
        );
        assert!(serde_json::from_str::<Need>("\"Engagement\"").is_err());
    }

    #[test]
    fn need_vector_deserialization_validates_range() {
        let err = serde_json::from_str::<NeedVector>(
            r#"{"performance":1.5,"engagement":0.2,"skill_progression":0.2}"#,
        );
        assert!(err.is_err());
    }

    #[test]
    fn learner_state_deserialization_rejects_dominant_mismatch() {
        let raw = r#"{"learner_id":"x","need":{"performance":0.9,"engagement":0.05,"skill_progression":0.05},"dominant_need":"engagement","persona":"balanced","interaction_count":1,"updated_at":5}"#;
        assert!(serde_json::from_str::<LearnerState>(raw).is_err());
    }

    proptest! {
        // Components sum to one within documented float tolerance.
        #[test]
        fn classify_components_sum_to_one(text in "[a-z ]{1,60}") {
            prop_assume!(!text.trim().is_empty());
            let v = classify_signal(&text, &lex()).unwrap();
            let sum: f64 = v.components().iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
        }

        // Each output component stays inside the interval spanned by prior
        // and signal.
        #[test]
        fn update_stays_within_componentwise_bounds(
            p in proptest::array::uniform3(0.0f64..=1.0),
            s in proptest::array::uniform3(0.0f64..=1.0),
            alpha in 0.000001f64..=1.0,
        ) {
            let prior = NeedVector::new(p[0], p[1], p[2]).unwrap();
            let signal = NeedVector::new(s[0], s[1], s[2]).unwrap();
            let out = update_need_vector(&prior, &signal, alpha).unwrap();
            for i in 0..3 {
                let lo = p[i].min(s[i]);
                let hi = p[i].max(s[i]);
                prop_assert!(out.components()[i] >= lo && out.components()[i] <= hi);
            }
        }

        // Argmax is invariant under adding a common constant while results
        // stay within [0, 1].
        #[test]
        fn dominant_need_shift_invariance(
            v in proptest::array::uniform3(0.0f64..=0.5),
            shift in 0.0f64..=0.5,
        ) {
            let base = NeedVector::new(v[0], v[1], v[2]).unwrap();
            let shifted = NeedVector::new(v[0] + shift, v[1] + shift, v[2] + shift).unwrap();
            prop_assert_eq!(derive_dominant_need(&base), derive_dominant_need(&shifted));
        }

        // Persona assignment is a pure function of dominant need and rate.
        #[test]
        fn persona_is_pure(count in 1u64..100, rate in 0.0f64..5.0) {
            let cfg = PersonaConfig::default();
            let state = state_with_dominant(NeedVector::new(0.2, 0.7, 0.1).unwrap(), count);
            let first = assign_persona(&state, rate, &cfg).unwrap();
            let second = assign_persona(&state, rate, &cfg).unwrap();
            prop_assert_eq!(first, second);
        }
    }
}
