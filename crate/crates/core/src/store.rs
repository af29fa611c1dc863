//! Persistent learner-state store: a JSONL file of one state per learner,
//! retrieved before generation and updated after each interaction.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::learner::{
    InteractionRecord, LearnerState, PersonaConfig, PersonaVocabulary,
};

const MS_PER_DAY: f64 = 86_400_000.0;

/// Handle over the learner-state map. One owner at a time; the experiment
/// pipeline uses a single writer.
#[derive(Debug)]
pub struct Store {
    path: Option<PathBuf>,
    states: BTreeMap<String, LearnerState>,
    dirty: bool,
    persona_config: PersonaConfig,
}

impl Store {
    /// Opens a store file with the default persona configuration. An absent
    /// file yields an empty store; a malformed file is an error, never a
    /// silent reset.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        Self::open_with(path, PersonaConfig::default())
    }

    /// Opens a store file, validating persona labels against the vocabulary
    /// implied by `persona_config`.
    pub fn open_with(path: impl Into<PathBuf>, persona_config: PersonaConfig) -> Result<Self> {
        let path = path.into();
        let states = if path.exists() {
            parse_states(&std::fs::read_to_string(&path)?, &persona_config.vocabulary())?
        } else {
            BTreeMap::new()
        };
        Ok(Self {
            path: Some(path),
            states,
            dirty: false,
            persona_config,
        })
    }

    /// A store with no backing file, for single-run pipelines. `flush`
    /// is rejected until a path is bound.
    pub fn in_memory() -> Self {
        Self {
            path: None,
            states: BTreeMap::new(),
            dirty: false,
            persona_config: PersonaConfig::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn is_dirty(&self) -> bool {
        self.dirty
    }

    pub fn persona_config(&self) -> &PersonaConfig {
        &self.persona_config
    }

    /// The exact stored state, or `None` for an unknown learner. Never
    /// fabricates a default.
    pub fn get_state(&self, learner_id: &str) -> Option<&LearnerState> {
        self.states.get(learner_id)
    }

    /// States in learner-id order.
    pub fn states(&self) -> impl Iterator<Item = &LearnerState> {
        self.states.values()
    }

    /// Creates the learner's state if absent, then advances it with the
    /// record's signal. Events must move strictly forward in time per
    /// learner; a stale event is rejected and the store left unchanged.
    ///
    /// The questions-per-day rate fed to persona assignment is estimated
    /// from the gap to the learner's previous interaction; a learner's
    /// first interaction carries no rate evidence and uses 0.
    pub fn apply_interaction(
        &mut self,
        record: &InteractionRecord,
        alpha: f64,
    ) -> Result<LearnerState> {
        let current = self
            .states
            .get(&record.learner_id)
            .cloned()
            .unwrap_or_else(|| LearnerState::new_learner(record.learner_id.clone()));
        let rate = if current.interaction_count() == 0 {
            0.0
        } else {
            if record.timestamp <= current.updated_at() {
                return Err(Error::StaleEvent {
                    learner_id: record.learner_id.clone(),
                    timestamp: record.timestamp,
                    last_updated: current.updated_at(),
                });
            }
            MS_PER_DAY / (record.timestamp - current.updated_at()) as f64
        };
        let next = current.advanced(
            &record.signal,
            alpha,
            record.timestamp,
            rate,
            &self.persona_config,
        )?;
        self.states
            .insert(record.learner_id.clone(), next.clone());
        self.dirty = true;
        Ok(next)
    }

    /// Writes all states as sorted JSONL via a temp file and atomic rename,
    /// so a failed write leaves the previous file intact.
    pub fn flush(&mut self) -> Result<()> {
        let path = self.path.clone().ok_or_else(|| {
            Error::InvalidConfig("store has no backing file to flush to".into())
        })?;
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
        let mut tmp = match dir {
            Some(dir) => tempfile::NamedTempFile::new_in(dir)?,
            None => tempfile::NamedTempFile::new_in(".")?,
        };
        for state in self.states.values() {
            serde_json::to_writer(&mut tmp, state)
                .map_err(|e| Error::Io(std::io::Error::other(e)))?;
            tmp.write_all(b"\n")?;
        }
        tmp.as_file().sync_all()?;
        tmp.persist(&path)
            .map_err(|e| Error::Io(e.error))?;
        self.dirty = false;
        Ok(())
    }
}

fn parse_states(
    raw: &str,
    vocabulary: &PersonaVocabulary,
) -> Result<BTreeMap<String, LearnerState>> {
    let mut states = BTreeMap::new();
    for (idx, line) in raw.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let state: LearnerState =
            serde_json::from_str(line).map_err(|e| Error::CorruptStore {
                line: line_no,
                message: e.to_string(),
            })?;
        if !vocabulary.contains(state.persona()) {
            return Err(Error::CorruptStore {
                line: line_no,
                message: format!(
                    "persona {:?} is not in the configured vocabulary",
                    state.persona().id()
                ),
            });
        }
        if states
            .insert(state.learner_id().to_string(), state)
            .is_some()
        {
            return Err(Error::CorruptStore {
                line: line_no,
                message: "duplicate learner_id".into(),
            });
        }
    }
    Ok(states)
}
