use rand::RngCore;

use super::{JointAction, Policy, PolicyError};
use crate::grid::{manhattan, Action, Cell, GridConfig, WorldState};

/// Nearest waiting victim; ties go to the earlier victim.
fn nearest(from: Cell, world: &WorldState) -> Option<Cell> {
    world
        .waiting()
        .map(|v| v.cell)
        .min_by_key(|&c| manhattan(from, c))
}

/// Step toward `to`, closing the row gap before the column gap.
fn step_toward(from: Cell, to: Cell) -> Option<Action> {
    if from.row < to.row {
        Some(Action::Down)
    } else if from.row > to.row {
        Some(Action::Up)
    } else if from.col < to.col {
        Some(Action::Right)
    } else if from.col > to.col {
        Some(Action::Left)
    } else {
        None
    }
}

/// Every agent independently heads for its closest waiting victim.
pub fn greedy_best_first(
    world: &WorldState,
    config: &GridConfig,
) -> Result<JointAction, PolicyError> {
    world
        .agents
        .iter()
        .map(|agent| {
            let target = nearest(agent.cell, world).ok_or(PolicyError::NoWaitingVictims)?;
            // Standing on a waiting victim: step off so the next step rescues it.
            Ok(step_toward(agent.cell, target).unwrap_or_else(|| {
                Action::ALL
                    .into_iter()
                    .find(|a| a.target(agent.cell, config).is_some())
                    .unwrap_or(Action::Up)
            }))
        })
        .collect::<Result<Vec<_>, _>>()
        .map(JointAction)
}

#[derive(Debug, Clone, Default)]
pub struct GreedyBestFirst;

impl Policy for GreedyBestFirst {
    fn name(&self) -> &str {
        "greedy"
    }

    fn act(
        &self,
        world: &WorldState,
        config: &GridConfig,
        _rng: &mut dyn RngCore,
    ) -> Result<JointAction, PolicyError> {
        greedy_best_first(world, config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{apply_joint_action, VictimStatus};

    fn c(r: u32, col: u32) -> Cell {
        Cell::new(r, col)
    }

    #[test]
    fn targets_closest_victim() {
        let cfg = GridConfig::default();
        let w = WorldState::new(&cfg, &[c(0, 0)], &[c(5, 0), c(0, 9)]).unwrap();
        assert_eq!(greedy_best_first(&w, &cfg).unwrap()[0], Action::Down);
    }

    #[test]
    fn row_aligned_moves_in_columns() {
        let cfg = GridConfig::default();
        let w = WorldState::new(&cfg, &[c(3, 3)], &[c(3, 7)]).unwrap();
        assert_eq!(greedy_best_first(&w, &cfg).unwrap()[0], Action::Right);
    }

    #[test]
    fn tie_prefers_lower_victim_id() {
        let cfg = GridConfig::default();
        // Victim 0 is above, victim 1 to the left; both at distance 2.
        let w = WorldState::new(&cfg, &[c(4, 4)], &[c(2, 4), c(4, 2)]).unwrap();
        assert_eq!(greedy_best_first(&w, &cfg).unwrap()[0], Action::Up);
        let w = WorldState::new(&cfg, &[c(4, 4)], &[c(4, 2), c(2, 4)]).unwrap();
        assert_eq!(greedy_best_first(&w, &cfg).unwrap()[0], Action::Left);
    }

    #[test]
    fn distance_strictly_decreases() {
        let cfg = GridConfig::default();
        let mut w = WorldState::new(&cfg, &[c(0, 0)], &[c(7, 11)]).unwrap();
        let mut d = manhattan(w.agents[0].cell, w.victims[0].cell);
        while w.victims[0].status == VictimStatus::Waiting {
            let joint = greedy_best_first(&w, &cfg).unwrap();
            w = apply_joint_action(&cfg, &w, &joint).unwrap().next;
            let nd = manhattan(w.agents[0].cell, w.victims[0].cell);
            assert!(nd < d);
            d = nd;
        }
        assert_eq!(w.t, 18);
    }

    #[test]
    fn no_waiting_victims_is_an_error() {
        let cfg = GridConfig::default();
        let mut w = WorldState::new(&cfg, &[c(0, 0)], &[c(1, 1)]).unwrap();
        w.victims[0].status = VictimStatus::Rescued;
        assert_eq!(
            greedy_best_first(&w, &cfg),
            Err(PolicyError::NoWaitingVictims)
        );
    }
}
