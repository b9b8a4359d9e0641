use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::matching::MatchScratch;
use super::qtable::{joint_index, world_key, LocalKey, QMode, QTable};
use super::select::{greedy_joint_action, heuristic_action_selection};
use super::{LearnerConfig, LearnerError, RewardCredit};
use crate::grid::{apply_joint_action, is_terminal, Action, GridConfig, StepOutcome, WorldState};
use crate::policies::{JointAction, Policy, PolicyError};

/// Per-agent local keys of a non-terminal world.
fn local_keys(world: &WorldState, scratch: &mut MatchScratch) -> Vec<LocalKey> {
    let agents = world.agent_cells();
    let victims = world.waiting_cells();
    scratch.run(&agents, &victims);
    agents
        .iter()
        .enumerate()
        .map(|(i, &cell)| LocalKey {
            cell,
            target: victims[scratch.target(i)],
        })
        .collect()
}

fn check_outcome(
    pre: &WorldState,
    joint: &[Action],
    outcome: &StepOutcome,
    grid: &GridConfig,
) -> Result<(), LearnerError> {
    let next = &outcome.next;
    let consistent = joint.len() == pre.agents.len()
        && next.t == pre.t + 1
        && next.agents.len() == pre.agents.len()
        && next.victims.len() == pre.victims.len()
        && pre
            .agents
            .iter()
            .zip(&next.agents)
            .zip(joint)
            .all(|((a, b), act)| a.id == b.id && act.apply(a.cell, grid) == b.cell);
    if consistent {
        Ok(())
    } else {
        Err(LearnerError::StateMismatch)
    }
}

/// Reward credited to agent `i` for one step.
pub fn agent_reward(
    outcome: &StepOutcome,
    agent: usize,
    credit: RewardCredit,
    grid: &GridConfig,
) -> f64 {
    match credit {
        RewardCredit::Team => outcome.team_reward,
        RewardCredit::Own => {
            let me = &outcome.next.agents[agent];
            let rescues = outcome
                .next
                .victims
                .iter()
                .filter(|v| v.cell == me.cell && outcome.rescued_ids.contains(&v.id))
                .count();
            let offgrid = outcome.offgrid_agents.contains(&me.id);
            grid.rescue_reward * rescues as f64
                + if offgrid { grid.offgrid_penalty } else { 0.0 }
                + grid.step_cost
        }
    }
}

/// One temporal-difference backup for the transition `pre --joint--> outcome`.
///
/// Each agent is credited per `learner.credit`. A next state with no waiting
/// victims contributes no future value; truncation by the step cap still
/// bootstraps.
pub fn q_update(
    table: &mut QTable,
    pre: &WorldState,
    joint: &[Action],
    outcome: &StepOutcome,
    learner: &LearnerConfig,
    grid: &GridConfig,
) -> Result<(), LearnerError> {
    if table.mode() != learner.mode {
        return Err(LearnerError::ModeMismatch {
            table: table.mode(),
            config: learner.mode,
        });
    }
    check_outcome(pre, joint, outcome, grid)?;
    if pre.all_rescued() {
        return Err(LearnerError::NoVictims);
    }
    let next = &outcome.next;
    let done = next.all_rescued();
    let (alpha, gamma) = (learner.alpha, learner.gamma);
    let reward = |i: usize| agent_reward(outcome, i, learner.credit, grid);

    match table.mode() {
        QMode::Factorized => {
            let mut scratch = MatchScratch::new();
            let keys = local_keys(pre, &mut scratch);
            let next_keys = if done {
                Vec::new()
            } else {
                local_keys(next, &mut scratch)
            };
            for (i, key) in keys.into_iter().enumerate() {
                let future = if done {
                    0.0
                } else {
                    table
                        .local(i, &next_keys[i])
                        .into_iter()
                        .fold(f64::NEG_INFINITY, f64::max)
                };
                let q = &mut table.local_mut(i, key)[joint[i].index()];
                *q += alpha * (reward(i) + gamma * future - *q);
            }
        }
        QMode::Joint => {
            let agents = table.joint_agents().expect("joint table");
            if agents != pre.agents.len() {
                return Err(LearnerError::StateMismatch);
            }
            // Cooperative continuation: the deterministic greedy joint action
            // at the next state, averaged over the agents' tables.
            let future = if done {
                0.0
            } else {
                let best = joint_index(&greedy_joint_action(next, table, learner, grid));
                let key = world_key(next);
                (0..agents)
                    .map(|j| table.joint_value(j, &key, best))
                    .sum::<f64>()
                    / agents as f64
            };
            let state = world_key(pre);
            let a = joint_index(joint);
            for i in 0..agents {
                let q = &mut table.joint_row_mut(i, &state)[a];
                *q = (1.0 - alpha) * *q + alpha * (reward(i) + gamma * future);
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub episode: u32,
    pub reward: f64,
    pub steps: u32,
}

#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub table: QTable,
    pub curve: Vec<CurvePoint>,
}

/// Runs `episodes` training episodes, each restarting from `start`.
pub fn train<R: Rng + ?Sized>(
    start: &WorldState,
    grid: &GridConfig,
    learner: &LearnerConfig,
    episodes: u32,
    rng: &mut R,
) -> Result<TrainingRun, LearnerError> {
    learner.validate()?;
    grid.validate()?;
    if episodes == 0 {
        return Err(LearnerError::InvalidConfig("episodes must be at least 1".into()));
    }
    let mut table = QTable::new(learner.mode, start.agents.len())?;
    let mut curve = Vec::with_capacity(episodes as usize);
    for episode in 0..episodes {
        let epsilon = learner.epsilon_at(episode);
        let mut world = start.clone();
        let mut reward = 0.0;
        while !is_terminal(&world, grid) {
            let joint = heuristic_action_selection(&world, &table, learner, grid, epsilon, rng);
            let outcome = apply_joint_action(grid, &world, &joint)?;
            q_update(&mut table, &world, &joint, &outcome, learner, grid)?;
            reward += outcome.team_reward;
            world = outcome.next;
        }
        curve.push(CurvePoint {
            episode,
            reward,
            steps: world.t - start.t,
        });
    }
    Ok(TrainingRun { table, curve })
}

/// Frozen trained table acting epsilon-greedily; `epsilon = 0` is the pure
/// greedy policy.
#[derive(Debug, Clone)]
pub struct LearnedPolicy {
    pub name: String,
    pub table: QTable,
    pub config: LearnerConfig,
    pub epsilon: f64,
}

impl Policy for LearnedPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn act(
        &self,
        world: &WorldState,
        config: &GridConfig,
        rng: &mut dyn RngCore,
    ) -> Result<JointAction, PolicyError> {
        if world.all_rescued() {
            return Err(PolicyError::NoWaitingVictims);
        }
        if self.epsilon > 0.0 {
            return Ok(heuristic_action_selection(
                world,
                &self.table,
                &self.config,
                config,
                self.epsilon,
                rng,
            ));
        }
        Ok(greedy_joint_action(world, &self.table, &self.config, config))
    }
}
