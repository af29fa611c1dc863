//! Seeded synthetic interaction corpus, standing in for a private question
//! corpus while preserving its format. Questions come from a shipped
//! template bank keyed to the need lexicons, so learner need signals are
//! recoverable downstream; with uniform question content, memory states
//! would stay uniform and divergence would be vacuous.
//!
//! PRNG: xoshiro256++ seeded from the 64-bit seed via SplitMix64
//! (`rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64`). Uniform doubles use
//! the top 53 bits; bounded picks use 128-bit multiply-shift. The same seed
//! therefore produces a byte-identical corpus.

use std::io::Write;
use std::path::Path;

use rand_xoshiro::rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::learner::InteractionEvent;

/// First synthetic timestamp (fixed so output is seed-determined).
const BASE_TIMESTAMP_MS: i64 = 1_700_000_000_000;
/// Nominal spacing between consecutive events.
const STEP_MS: i64 = 3_600_000;
/// Probability that an event follows the round-robin learner order rather
/// than a uniform pick (the "jitter").
const ROUND_ROBIN_BIAS: f64 = 0.7;

/// Question templates per need category plus the topic fillers.
#[derive(Debug, Clone, Deserialize)]
pub struct QuestionBank {
    pub performance: Vec<String>,
    pub engagement: Vec<String>,
    pub skill_progression: Vec<String>,
    pub topics: Vec<String>,
}

impl Default for QuestionBank {
    fn default() -> Self {
        serde_json::from_str(include_str!("../data/question_bank.json"))
            .expect("embedded question bank parses")
    }
}

impl QuestionBank {
    fn category(&self, index: usize) -> &[String] {
        match index {
            0 => &self.performance,
            1 => &self.engagement,
            _ => &self.skill_progression,
        }
    }
}

/// Deterministic helpers over the raw generator.
struct SeededRng(Xoshiro256PlusPlus);

impl SeededRng {
    fn new(seed: u64) -> Self {
        Self(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    /// Uniform double in [0, 1) from the top 53 bits.
    fn next_f64(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in [0, n) via 128-bit multiply-shift.
    fn pick(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.0.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Index sampled proportionally to the given nonnegative weights.
    fn pick_weighted(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let mut r = self.next_f64() * total;
        for (i, w) in weights.iter().enumerate() {
            r -= w;
            if r < 0.0 {
                return i;
            }
        }
        weights.len() - 1
    }
}

/// Generates a synthetic interaction corpus. Each learner gets an unnormalized
/// need-tendency triple drawn uniformly per component; each question picks
/// its learner round-robin with jitter, samples a need category from that
/// learner's tendency, and fills a bank template with a topic. Timestamps
/// increase strictly.
pub fn generate_corpus(
    seed: u64,
    n_questions: u32,
    n_learners: u32,
    bank: &QuestionBank,
) -> Result<Vec<InteractionEvent>> {
    if n_questions == 0 {
        return Err(Error::InvalidConfig("n_questions must be positive".into()));
    }
    if n_learners == 0 {
        return Err(Error::InvalidConfig("n_learners must be positive".into()));
    }
    if bank.topics.is_empty()
        || bank.performance.is_empty()
        || bank.engagement.is_empty()
        || bank.skill_progression.is_empty()
    {
        return Err(Error::InvalidConfig(
            "question bank must populate every category and the topic list".into(),
        ));
    }
    let mut rng = SeededRng::new(seed);
    let tendencies: Vec<[f64; 3]> = (0..n_learners)
        .map(|_| [rng.next_f64(), rng.next_f64(), rng.next_f64()])
        .collect();

    let mut events = Vec::with_capacity(n_questions as usize);
    for i in 0..n_questions as usize {
        let learner_index = if rng.next_f64() < ROUND_ROBIN_BIAS {
            i % n_learners as usize
        } else {
            rng.pick(n_learners as usize)
        };
        let category = rng.pick_weighted(&tendencies[learner_index]);
        let templates = bank.category(category);
        let template = &templates[rng.pick(templates.len())];
        let topic = &bank.topics[rng.pick(bank.topics.len())];
        let question_text = template.replace("{topic}", topic);
        // Jitter below STEP/2 keeps timestamps strictly increasing.
        let jitter = rng.pick((STEP_MS / 2) as usize) as i64;
        events.push(InteractionEvent {
            learner_id: format!("learner_{:04}", learner_index + 1),
            question_id: format!("q_{:04}", i + 1),
            question_text,
            timestamp: BASE_TIMESTAMP_MS + i as i64 * STEP_MS + jitter,
        });
    }
    Ok(events)
}

/// Writes a corpus as JSONL via temp file + rename.
pub fn write_corpus(events: &[InteractionEvent], path: &Path) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    for event in events {
        serde_json::to_writer(&mut tmp, event)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        tmp.write_all(b"\n")?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Reads an interaction log (JSONL), reporting the offending line on
/// failure.
pub fn read_corpus(path: &Path) -> Result<Vec<InteractionEvent>> {
    let raw = std::fs::read_to_string(path)?;
    let mut events = Vec::new();
    for (idx, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let event: InteractionEvent = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        events.push(event);
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn same_seed_same_corpus() {
        let bank = QuestionBank::default();
        let a = generate_corpus(42, 50, 20, &bank).unwrap();
        let b = generate_corpus(42, 50, 20, &bank).unwrap();
        assert_eq!(a, b);
        let c = generate_corpus(43, 50, 20, &bank).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn corpus_counts_and_learner_bound() {
        let bank = QuestionBank::default();
        let events = generate_corpus(42, 50, 20, &bank).unwrap();
        assert_eq!(events.len(), 50);
        let distinct: BTreeSet<&str> =
            events.iter().map(|e| e.learner_id.as_str()).collect();
        assert!(distinct.len() <= 20);
        assert!(distinct.len() > 1);
    }

    #[test]
    fn timestamps_strictly_increase() {
        let bank = QuestionBank::default();
        let events = generate_corpus(7, 100, 5, &bank).unwrap();
        for pair in events.windows(2) {
            assert!(pair[1].timestamp > pair[0].timestamp);
        }
    }

    #[test]
    fn minimal_two_question_corpus() {
        let bank = QuestionBank::default();
        let events = generate_corpus(1, 2, 1, &bank).unwrap();
        assert_eq!(events.len(), 2);
        assert!(events.iter().all(|e| !e.question_text.trim().is_empty()));
    }

    #[test]
    fn questions_carry_lexicon_signal() {
        use crate::learner::{classify_signal, LexiconSet};
        let bank = QuestionBank::default();
        let lexicons = LexiconSet::default();
        let events = generate_corpus(42, 50, 20, &bank).unwrap();
        let uniform = crate::learner::NeedVector::uniform();
        let informative = events
            .iter()
            .filter(|e| classify_signal(&e.question_text, &lexicons).unwrap() != uniform)
            .count();
        // Every bank template contains at least one lexicon token.
        assert_eq!(informative, events.len());
    }

    #[test]
    fn round_trip_through_file_is_byte_identical() {
        let bank = QuestionBank::default();
        let events = generate_corpus(11, 10, 3, &bank).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        write_corpus(&events, &path).unwrap();
        let first = std::fs::read(&path).unwrap();
        write_corpus(&events, &path).unwrap();
        let second = std::fs::read(&path).unwrap();
        assert_eq!(first, second);
        assert_eq!(read_corpus(&path).unwrap(), events);
    }

    #[test]
    fn read_corpus_reports_offending_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        std::fs::write(
            &path,
            "{\"learner_id\":\"l1\",\"question_id\":\"q1\",\"question_text\":\"why\",\"timestamp\":1}\nnot json\n",
        )
        .unwrap();
        match read_corpus(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
