//! Episode execution, metrics, experiments and reports.

mod experiment;
mod metrics;
mod report;

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::PathBuf;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::GeoError;
use crate::grid::{apply_joint_action, is_terminal, EnvError, GridConfig, WorldState};
use crate::learner::LearnerError;
use crate::policies::{JointAction, Policy, PolicyError};

pub use experiment::{
    run_experiment, start_world, synthetic_world, train_learner, ExperimentConfig, LearnerOverrides, Placement,
    RewardConfig, RunOptions, SyntheticConfig, POLICY_NAMES,
};
pub use metrics::{rate_from_totals, rescuing_cost, reward_rate, MetricError, RunSummary};
pub use report::{emit_report, summary_csv, summary_json, SUMMARY_CSV_HEADER};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error at {path}: {reason}")]
    Config { path: String, reason: String },
    #[error("start world is already terminal")]
    TerminalStart,
    #[error("nothing to report")]
    NoSummaries,
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

impl HarnessError {
    pub fn config(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::Config {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub fn is_config(&self) -> bool {
        matches!(self, Self::Config { .. })
    }
}

/// Independent, reproducible random stream for `(seed, purpose, index)`.
pub fn stream_rng(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub digest: u64,
    pub joint: JointAction,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub steps: u32,
    pub total_reward: f64,
    pub rescued: u32,
    pub trajectory: Option<Vec<TrajectoryStep>>,
}

fn digest(world: &WorldState) -> u64 {
    let mut h = DefaultHasher::new();
    world.hash(&mut h);
    h.finish()
}

/// Runs `policy` from `start` until every victim is rescued or the step cap
/// is hit. One step is one joint action by all volunteers.
pub fn run_episode(
    start: &WorldState,
    policy: &dyn Policy,
    config: &GridConfig,
    rng: &mut dyn RngCore,
    record_trajectory: bool,
) -> Result<EpisodeRecord, HarnessError> {
    if is_terminal(start, config) {
        return Err(HarnessError::TerminalStart);
    }
    let initially_waiting = start.waiting_count();
    let mut trajectory = record_trajectory.then(Vec::new);
    let mut world = start.clone();
    let mut total_reward = 0.0;
    while !is_terminal(&world, config) {
        let joint = policy.act(&world, config, rng)?;
        let outcome = apply_joint_action(config, &world, &joint)?;
        total_reward += outcome.team_reward;
        if let Some(t) = trajectory.as_mut() {
            t.push(TrajectoryStep {
                digest: digest(&world),
                joint,
                reward: outcome.team_reward,
            });
        }
        world = outcome.next;
    }
    Ok(EpisodeRecord {
        steps: world.t - start.t,
        total_reward,
        rescued: (initially_waiting - world.waiting_count()) as u32,
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Cell;
    use crate::policies::{GreedyBestFirst, RandomWalk};

    #[test]
    fn adjacent_victim_takes_one_step() {
        let cfg = GridConfig::default();
        let w = WorldState::new(&cfg, &[Cell::new(3, 3)], &[Cell::new(4, 3)]).unwrap();
        let mut rng = stream_rng(1, 0, 0);
        let r = run_episode(&w, &GreedyBestFirst, &cfg, &mut rng, true).unwrap();
        assert_eq!(r.steps, 1);
        assert_eq!(r.rescued, 1);
        assert_eq!(r.total_reward, 10.0);
        assert_eq!(r.trajectory.unwrap().len(), 1);
    }

    #[test]
    fn truncation_at_step_cap() {
        let cfg = GridConfig {
            step_cap: 5,
            ..GridConfig::default()
        };
        let w = WorldState::new(&cfg, &[Cell::new(0, 0)], &[Cell::new(24, 24)]).unwrap();
        let mut rng = stream_rng(1, 0, 0);
        let r = run_episode(&w, &RandomWalk, &cfg, &mut rng, false).unwrap();
        assert_eq!(r.steps, 5);
        assert_eq!(r.rescued, 0);
    }

    #[test]
    fn seeded_episodes_repeat() {
        let cfg = GridConfig {
            step_cap: 300,
            ..GridConfig::with_size(6, 6)
        };
        let w = WorldState::new(&cfg, &[Cell::new(0, 0), Cell::new(5, 5)], &[Cell::new(2, 3)])
            .unwrap();
        let a = run_episode(&w, &RandomWalk, &cfg, &mut stream_rng(4, 1, 2), true).unwrap();
        let b = run_episode(&w, &RandomWalk, &cfg, &mut stream_rng(4, 1, 2), true).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn terminal_start_rejected() {
        let cfg = GridConfig::default();
        let mut w = WorldState::new(&cfg, &[Cell::new(0, 0)], &[Cell::new(1, 1)]).unwrap();
        w.victims[0].status = crate::grid::VictimStatus::Rescued;
        let mut rng = stream_rng(1, 0, 0);
        assert!(matches!(
            run_episode(&w, &GreedyBestFirst, &cfg, &mut rng, false),
            Err(HarnessError::TerminalStart)
        ));
    }
}
