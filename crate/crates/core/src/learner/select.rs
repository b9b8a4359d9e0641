use rand::Rng;

use super::matching::MatchScratch;
use super::qtable::{joint_from_index, world_key, LocalKey, QMode, QTable};
use super::LearnerConfig;
use crate::grid::{Action, GridConfig, WorldState};
use crate::policies::{random_walk, JointAction};

/// Epsilon-greedy wrapper around [`greedy_joint_action`]. One uniform draw is
/// always consumed so the stream advances identically for any epsilon.
pub fn heuristic_action_selection<R: Rng + ?Sized>(
    world: &WorldState,
    table: &QTable,
    learner: &LearnerConfig,
    grid: &GridConfig,
    epsilon: f64,
    rng: &mut R,
) -> JointAction {
    if rng.gen::<f64>() < epsilon {
        random_walk(world, rng)
    } else {
        greedy_joint_action(world, table, learner, grid)
    }
}

/// Indices of the actions within `tol` of the best value.
fn near_best(values: &[f64], tol: f64) -> impl Iterator<Item = usize> + '_ {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .enumerate()
        .filter(move |(_, &v)| v >= best - tol)
        .map(|(i, _)| i)
}

/// Deterministic greedy choice.
///
/// Factorized mode decides agent by agent in id order. Each agent's candidate
/// set is every action near its best Q-value; each candidate is scored by the
/// heuristic distance of the world in which this agent (and every earlier
/// agent, already committed) has moved. The last candidate reaching the
/// minimum wins. Joint mode applies the same rule to whole joint actions
/// scored by the summed per-agent values.
pub fn greedy_joint_action(
    world: &WorldState,
    table: &QTable,
    learner: &LearnerConfig,
    grid: &GridConfig,
) -> JointAction {
    let victims = world.waiting_cells();
    if victims.is_empty() {
        return JointAction::uniform(Action::Up, world.agents.len());
    }
    match table.mode() {
        QMode::Factorized => factorized_choice(world, &victims, table, learner, grid),
        QMode::Joint => joint_choice(world, &victims, table, learner, grid),
    }
}

fn factorized_choice(
    world: &WorldState,
    victims: &[crate::grid::Cell],
    table: &QTable,
    learner: &LearnerConfig,
    grid: &GridConfig,
) -> JointAction {
    let origin = world.agent_cells();
    let mut scratch = MatchScratch::new();
    scratch.run(&origin, victims);
    let keys: Vec<LocalKey> = origin
        .iter()
        .enumerate()
        .map(|(i, &cell)| LocalKey {
            cell,
            target: victims[scratch.target(i)],
        })
        .collect();

    let mut hypothetical = origin.clone();
    let mut chosen = Vec::with_capacity(origin.len());
    for (i, key) in keys.iter().enumerate() {
        let values = table.local(i, key);
        let mut found = Action::Up;
        let mut min_distance = u32::MAX;
        for a in near_best(&values, learner.tie_tol).map(Action::from_index) {
            if learner.heuristic_enabled {
                hypothetical[i] = a.apply(origin[i], grid);
                let d = scratch.run(&hypothetical, victims);
                if d <= min_distance {
                    min_distance = d;
                    found = a;
                }
            } else {
                found = a;
            }
        }
        hypothetical[i] = found.apply(origin[i], grid);
        chosen.push(found);
    }
    JointAction(chosen)
}

fn joint_choice(
    world: &WorldState,
    victims: &[crate::grid::Cell],
    table: &QTable,
    learner: &LearnerConfig,
    grid: &GridConfig,
) -> JointAction {
    let n = world.agents.len();
    let state = world_key(world);
    let width = 4usize.pow(n as u32);
    let agents = table.joint_agents().unwrap_or(n);
    let scores: Vec<f64> = (0..width)
        .map(|j| (0..agents).map(|i| table.joint_value(i, &state, j)).sum())
        .collect();

    let origin = world.agent_cells();
    let mut scratch = MatchScratch::new();
    let mut hypothetical = origin.clone();
    let mut found = 0;
    let mut min_distance = u32::MAX;
    for j in near_best(&scores, learner.tie_tol) {
        if learner.heuristic_enabled {
            for (slot, (&from, a)) in hypothetical
                .iter_mut()
                .zip(origin.iter().zip(joint_from_index(j, n)))
            {
                *slot = a.apply(from, grid);
            }
            let d = scratch.run(&hypothetical, victims);
            if d <= min_distance {
                min_distance = d;
                found = j;
            }
        } else {
            found = j;
        }
    }
    JointAction(joint_from_index(found, n))
}
