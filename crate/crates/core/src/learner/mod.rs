//! Heuristic multi-agent Q-learning (ResQ) and its plain Q-learning ablation.
//!
//! Action selection first narrows each agent to the actions whose Q-value is
//! within `tie_tol` of its best, then uses the greedy-matching heuristic
//! distance to choose among them. With the heuristic disabled the same
//! learner degenerates to ordinary epsilon-greedy Q-learning.

mod matching;
mod qtable;
mod select;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use matching::{greedy_match, heuristic_distance, MatchPair, MatchScratch, Matching};
pub use qtable::{
    joint_from_index, joint_index, world_key, LocalKey, QMode, QTable, JOINT_MAX_AGENTS, Q_INIT,
};
pub use select::{greedy_joint_action, heuristic_action_selection};
pub use train::{agent_reward, q_update, train, CurvePoint, LearnedPolicy, TrainingRun};

use crate::grid::EnvError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LearnerError {
    #[error("no victims to match")]
    NoVictims,
    #[error("joint mode supports 1..={JOINT_MAX_AGENTS} agents, got {0}")]
    JointTooLarge(usize),
    #[error("q-table mode {table:?} does not match configured mode {config:?}")]
    ModeMismatch { table: QMode, config: QMode },
    #[error("step outcome does not follow from the given world and joint action")]
    StateMismatch,
    #[error("invalid learner configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed q-table document: {0}")]
    Format(String),
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// Which reward each agent's table is updated with.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardCredit {
    /// The agent's own share: rescues it made, its own off-grid penalty and
    /// step cost.
    #[default]
    Own,
    /// The whole team reward of the step.
    Team,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_episodes: u32,
    pub tie_tol: f64,
    pub mode: QMode,
    pub heuristic_enabled: bool,
    #[serde(default)]
    pub credit: RewardCredit,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            gamma: 0.95,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_episodes: 100,
            tie_tol: 1.0,
            mode: QMode::Factorized,
            heuristic_enabled: true,
            credit: RewardCredit::Own,
        }
    }
}

impl LearnerConfig {
    /// ResQ defaults, decaying exploration over the first tenth of training.
    pub fn resq(episodes: u32) -> Self {
        Self {
            epsilon_decay_episodes: (episodes / 10).max(1),
            ..Self::default()
        }
    }

    /// Same learner without the heuristic: plain argmax over Q-values.
    pub fn plain(episodes: u32) -> Self {
        Self {
            heuristic_enabled: false,
            tie_tol: 0.0,
            ..Self::resq(episodes)
        }
    }

    pub fn validate(&self) -> Result<(), LearnerError> {
        let bad = |m: String| Err(LearnerError::InvalidConfig(m));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha {} not in (0,1)", self.alpha));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("gamma {} not in [0,1)", self.gamma));
        }
        for (name, e) in [("epsilon_start", self.epsilon_start), ("epsilon_end", self.epsilon_end)] {
            if !(0.0..=1.0).contains(&e) {
                return bad(format!("{name} {e} not in [0,1]"));
            }
        }
        if self.epsilon_end > self.epsilon_start {
            return bad("epsilon_end exceeds epsilon_start".into());
        }
        if !(self.tie_tol >= 0.0 && self.tie_tol.is_finite()) {
            return bad(format!("tie_tol {} must be a nonnegative number", self.tie_tol));
        }
        Ok(())
    }

    /// Exploration rate for a 0-based training episode: linear decay over
    /// `epsilon_decay_episodes`, then constant.
    pub fn epsilon_at(&self, episode: u32) -> f64 {
        if self.epsilon_decay_episodes == 0 || episode >= self.epsilon_decay_episodes {
            return self.epsilon_end;
        }
        let frac = episode as f64 / self.epsilon_decay_episodes as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }
}
