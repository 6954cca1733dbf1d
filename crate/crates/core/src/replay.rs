//! Replay memory of transitions and the pool of final states kept for state
//! retrieval.

use std::collections::VecDeque;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Query;
use crate::encoder::{cosine, HashEncoder, Vector};
use crate::error::{Error, Result};
use crate::state::{SlateAction, State};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: State,
    pub action: SlateAction,
    pub reward: f64,
    pub next_state: State,
    pub terminal: bool,
    #[serde(default)]
    pub augmentations: Vec<State>,
    /// Candidate set `T_q` the next action is drawn from.
    #[serde(default)]
    pub candidates: Vec<u32>,
}

/// Fixed-capacity ring buffer; the oldest transition is dropped when full.
#[derive(Debug, Clone)]
pub struct ReplayMemory {
    capacity: usize,
    buf: VecDeque<Transition>,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        ReplayMemory {
            capacity: capacity.max(1),
            buf: VecDeque::new(),
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.buf.len() == self.capacity {
            self.buf.pop_front();
        }
        self.buf.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.buf.iter()
    }

    /// Uniform sample with replacement.
    pub fn sample(&self, rng: &mut impl Rng, batch: usize) -> Result<Vec<&Transition>> {
        if self.buf.is_empty() {
            return Err(Error::EmptyMemory);
        }
        Ok((0..batch).map(|_| &self.buf[rng.gen_range(0..self.buf.len())]).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub query_id: String,
    pub query_text: String,
    pub embedding: Vector,
    pub feedback: Vec<String>,
    pub reward: f64,
}

/// Best final state per query, searchable by query-text similarity.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeedbackPool {
    entries: Vec<PoolEntry>,
}

impl FeedbackPool {
    pub fn new() -> Self {
        FeedbackPool::default()
    }

    pub fn entries(&self) -> &[PoolEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Stores `state` for its query when `reward` beats the stored one (or
    /// none is stored). Replacement keeps the entry's position. Returns
    /// whether the pool changed.
    pub fn push_final_state(&mut self, enc: &HashEncoder, state: &State, reward: f64) -> bool {
        if !reward.is_finite() {
            return false;
        }
        let entry = PoolEntry {
            query_id: state.query.query_id.clone(),
            query_text: state.query.text.clone(),
            embedding: enc.encode_single(&state.query.text),
            feedback: state.feedback.clone(),
            reward,
        };
        match self.entries.iter_mut().find(|e| e.query_id == entry.query_id) {
            Some(e) if reward > e.reward => {
                *e = entry;
                true
            }
            Some(_) => false,
            None => {
                self.entries.push(entry);
                true
            }
        }
    }

    /// Most similar stored entry with cosine strictly above `psi` (earliest on
    /// ties), and its similarity.
    pub fn nearest(&self, enc: &HashEncoder, query_text: &str, psi: f64) -> Option<(&PoolEntry, f64)> {
        let e = enc.encode_single(query_text);
        let mut best: Option<(&PoolEntry, f64)> = None;
        for entry in &self.entries {
            let Ok(c) = cosine(&e, &entry.embedding) else { continue };
            if c > psi && best.map_or(true, |(_, b)| c > b) {
                best = Some((entry, c));
            }
        }
        best
    }

    /// Initial state for `query`: the feedback of the nearest stored state
    /// rebound to `query`, or an empty-feedback state.
    pub fn retrieve_state(&self, enc: &HashEncoder, query: &Query, psi: f64) -> State {
        match self.nearest(enc, &query.text, psi) {
            Some((e, _)) => State::with_feedback(query.clone(), e.feedback.clone()),
            None => State::new(query.clone()),
        }
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(content: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            entries.push(serde_json::from_str(line).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?);
        }
        Ok(FeedbackPool { entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_jsonl()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_jsonl(&s)
    }
}
