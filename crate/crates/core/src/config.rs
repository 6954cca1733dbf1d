//! Training and search configuration, read from flat JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How slate rewards are obtained during offline training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// Labeled nDCG when every slate document is judged, else the reward
    /// transition estimate from logged slates.
    Auto,
    Labeled,
    Transition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub epsilon: f64,
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
    pub gamma: f64,
    /// Target sync period in training steps.
    pub c: usize,
    /// Steps per episode.
    #[serde(rename = "T")]
    pub steps: usize,
    pub episodes: usize,
    /// Slate size.
    #[serde(rename = "N")]
    pub n: usize,
    /// Sliding window width.
    pub m: usize,
    /// Sentences considered per document.
    #[serde(rename = "M")]
    pub sentences: usize,
    #[serde(rename = "E_max")]
    pub e_max: usize,
    #[serde(rename = "size_I")]
    pub size_i: usize,
    #[serde(rename = "size_T")]
    pub size_t: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
    pub n_augment: usize,
    pub psi: f64,
    /// Feedback acceptance threshold for simulated users.
    pub tau: f64,
    pub replay_capacity: usize,
    pub hidden: usize,
    pub dim: usize,
    pub pretrain: bool,
    pub pretrain_epochs: usize,
    pub pretrain_batch: usize,
    pub pretrain_lr: f64,
    pub rearrangement: bool,
    pub state_retrieval: bool,
    /// Average TD targets over augmented next states as well.
    pub augment_targets: bool,
    /// Simulated feedback rounds per query during evaluation.
    pub eval_rounds: usize,
    pub reward_mode: RewardMode,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            epsilon: 0.9,
            epsilon_decay: 0.95,
            epsilon_min: 0.05,
            gamma: 0.6,
            c: 10,
            steps: 15,
            episodes: 200,
            n: 10,
            m: 4,
            sentences: 10,
            e_max: 5,
            size_i: 100,
            size_t: 20,
            batch: 16,
            lr: 0.001,
            seed: 0,
            n_augment: 2,
            psi: 0.85,
            tau: 0.5,
            replay_capacity: 10_000,
            hidden: 128,
            dim: 256,
            pretrain: true,
            pretrain_epochs: 20,
            pretrain_batch: 32,
            pretrain_lr: 0.01,
            rearrangement: true,
            state_retrieval: true,
            augment_targets: false,
            eval_rounds: 3,
            reward_mode: RewardMode::Auto,
        }
    }
}

fn bad(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

fn unit(field: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(bad(field, format!("{v} is outside [0, 1]")))
    }
}

fn positive(field: &str, v: usize) -> Result<()> {
    if v == 0 {
        Err(bad(field, "must be at least 1"))
    } else {
        Ok(())
    }
}

impl TrainerConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let c: TrainerConfig = serde_json::from_str(s).map_err(|e| bad(&unknown_field(&e.to_string()), e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        unit("epsilon", self.epsilon)?;
        unit("epsilon_decay", self.epsilon_decay)?;
        unit("epsilon_min", self.epsilon_min)?;
        unit("gamma", self.gamma)?;
        unit("psi", self.psi)?;
        unit("tau", self.tau)?;
        positive("c", self.c)?;
        positive("T", self.steps)?;
        positive("N", self.n)?;
        positive("M", self.sentences)?;
        positive("batch", self.batch)?;
        positive("hidden", self.hidden)?;
        positive("replay_capacity", self.replay_capacity)?;
        positive("pretrain_batch", self.pretrain_batch)?;
        if self.m < 2 || self.m > self.n {
            return Err(bad("m", format!("window {} must lie in [2, N={}]", self.m, self.n)));
        }
        if self.size_t < self.n {
            return Err(bad("size_T", format!("{} is smaller than N={}", self.size_t, self.n)));
        }
        if self.size_i < self.size_t {
            return Err(bad("size_I", format!("{} is smaller than size_T={}", self.size_i, self.size_t)));
        }
        if self.dim < 16 {
            return Err(bad("dim", "must be at least 16"));
        }
        for (f, v) in [("lr", self.lr), ("pretrain_lr", self.pretrain_lr)] {
            if !v.is_finite() || v < 0.0 {
                return Err(bad(f, format!("{v} is not a finite non-negative rate")));
            }
        }
        Ok(())
    }
}

fn unknown_field(msg: &str) -> String {
    msg.split('`').nth(1).unwrap_or("config").to_string()
}
