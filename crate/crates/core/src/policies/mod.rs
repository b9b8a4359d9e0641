//! Baseline schedulers and the common [`Policy`] interface.

mod greedy;
mod random;
mod rule;
mod value_iteration;

use std::fmt;
use std::ops::Deref;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Action, GridConfig, WorldState};

pub use greedy::{greedy_best_first, GreedyBestFirst};
pub use random::{random_walk, RandomWalk};
pub use rule::{rule_based, rule_scores, train_cell_values, CellValueTable, RuleBased};
pub use value_iteration::{
    value_iteration_policy, value_iteration_solve, victim_set_key, ValueIteration,
    ValueIterationSettings, ValueTable,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("no waiting victims")]
    NoWaitingVictims,
    #[error("value iteration did not converge within {0} sweeps")]
    NonConvergence(u32),
    #[error("value table was solved for a different victim set")]
    StaleTable,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Env(#[from] crate::grid::EnvError),
}

/// One action per agent, in agent order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JointAction(pub Vec<Action>);

impl JointAction {
    pub fn uniform(action: Action, agents: usize) -> Self {
        Self(vec![action; agents])
    }
}

impl Deref for JointAction {
    type Target = [Action];

    fn deref(&self) -> &[Action] {
        &self.0
    }
}

impl From<Vec<Action>> for JointAction {
    fn from(v: Vec<Action>) -> Self {
        Self(v)
    }
}

impl fmt::Display for JointAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(a.name())?;
        }
        Ok(())
    }
}

/// A decision rule mapping the current world to a joint action.
///
/// Implementations are shared read-only across evaluation threads, so any
/// internal memoization must be synchronized.
pub trait Policy: Send + Sync {
    fn name(&self) -> &str;

    fn act(
        &self,
        world: &WorldState,
        config: &GridConfig,
        rng: &mut dyn RngCore,
    ) -> Result<JointAction, PolicyError>;
}
