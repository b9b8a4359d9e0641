//! Rescue scheduling on a discrete grid.
//!
//! Volunteers are scheduled to victims by a heuristic multi-agent Q-learner
//! ([`learner`]), compared against random walk, greedy best-first,
//! rule-based and value-iteration baselines ([`policies`]). An exact
//! assignment solver ([`assignment`]) bounds the matching heuristic, and
//! [`harness`] runs seeded experiments and reports reward rate and rescuing
//! cost.

pub mod assignment;
pub mod geo;
pub mod grid;
pub mod harness;
pub mod learner;
pub mod policies;

pub use grid::{
    apply_joint_action, is_terminal, manhattan, new_world, Action, Cell, EntityId, EnvError,
    GridConfig, StepOutcome, VictimStatus, WorldState,
};
