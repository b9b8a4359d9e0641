//! Rule-based search over per-cell average rewards.
//!
//! Cell averages are collected from random-walk episodes. An agent in cell
//! `g` scores the move into neighbor `h` as `V(g) / (V(g) + V(h))` and takes
//! the best-scoring move.

use std::collections::HashSet;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{random_walk, JointAction, Policy, PolicyError};
use crate::grid::{apply_joint_action, is_terminal, Action, Cell, GridConfig, WorldState};

/// Running average of the team reward observed in each cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellValueTable {
    pub rows: u32,
    pub cols: u32,
    sums: Vec<f64>,
    counts: Vec<u64>,
}

impl CellValueTable {
    pub fn new(rows: u32, cols: u32) -> Self {
        let n = rows as usize * cols as usize;
        Self {
            rows,
            cols,
            sums: vec![0.0; n],
            counts: vec![0; n],
        }
    }

    fn index(&self, cell: Cell) -> usize {
        cell.row as usize * self.cols as usize + cell.col as usize
    }

    pub fn record(&mut self, cell: Cell, reward: f64) {
        let i = self.index(cell);
        self.sums[i] += reward;
        self.counts[i] += 1;
    }

    /// Average reward in `cell`; 0 for cells never visited.
    pub fn value(&self, cell: Cell) -> f64 {
        let i = self.index(cell);
        match self.counts[i] {
            0 => 0.0,
            n => self.sums[i] / n as f64,
        }
    }

    pub fn visits(&self, cell: Cell) -> u64 {
        self.counts[self.index(cell)]
    }

    pub fn set_value(&mut self, cell: Cell, value: f64) {
        let i = self.index(cell);
        self.sums[i] = value;
        self.counts[i] = 1;
    }
}

/// Runs random-walk episodes from `start`, crediting each step's team reward
/// once to every distinct cell occupied after the step.
pub fn train_cell_values<R: Rng + ?Sized>(
    config: &GridConfig,
    start: &WorldState,
    episodes: u32,
    rng: &mut R,
) -> Result<CellValueTable, PolicyError> {
    if episodes == 0 {
        return Err(PolicyError::InvalidParameter(
            "episodes must be at least 1".into(),
        ));
    }
    let mut table = CellValueTable::new(config.rows, config.cols);
    let mut occupied = HashSet::new();
    for _ in 0..episodes {
        let mut world = start.clone();
        while !is_terminal(&world, config) {
            let joint = random_walk(&world, rng);
            let out = apply_joint_action(config, &world, &joint)?;
            occupied.clear();
            occupied.extend(out.next.agents.iter().map(|a| a.cell));
            for &cell in &occupied {
                table.record(cell, out.team_reward);
            }
            world = out.next;
        }
    }
    Ok(table)
}

/// Score of each action from `cell`; `None` for off-grid moves and for moves
/// whose denominator is zero.
pub fn rule_scores(cell: Cell, table: &CellValueTable, config: &GridConfig) -> [Option<f64>; 4] {
    let here = table.value(cell);
    Action::ALL.map(|a| {
        let there = table.value(a.target(cell, config)?);
        let denom = here + there;
        (denom != 0.0).then(|| here / denom)
    })
}

pub fn rule_based(world: &WorldState, table: &CellValueTable, config: &GridConfig) -> JointAction {
    world
        .agents
        .iter()
        .map(|agent| {
            let scores = rule_scores(agent.cell, table, config);
            let mut best: Option<(Action, f64)> = None;
            for (a, s) in Action::ALL.into_iter().zip(scores) {
                if let Some(s) = s {
                    if best.is_none_or(|(_, b)| s > b) {
                        best = Some((a, s));
                    }
                }
            }
            best.map(|(a, _)| a).unwrap_or_else(|| {
                Action::ALL
                    .into_iter()
                    .find(|a| a.target(agent.cell, config).is_some())
                    .unwrap_or(Action::Up)
            })
        })
        .collect::<Vec<_>>()
        .into()
}

#[derive(Debug, Clone)]
pub struct RuleBased {
    pub table: CellValueTable,
}

impl Policy for RuleBased {
    fn name(&self) -> &str {
        "rule"
    }

    fn act(
        &self,
        world: &WorldState,
        config: &GridConfig,
        _rng: &mut dyn RngCore,
    ) -> Result<JointAction, PolicyError> {
        Ok(rule_based(world, &self.table, config))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unvisited_cells_are_zero_and_average_is_mean() {
        let mut t = CellValueTable::new(3, 3);
        let c = Cell::new(1, 1);
        assert_eq!(t.value(c), 0.0);
        t.record(c, 10.0);
        t.record(c, 0.0);
        assert_eq!(t.value(c), 5.0);
        assert_eq!(t.visits(c), 2);
    }

    #[test]
    fn score_formula() {
        let cfg = GridConfig::with_size(3, 3);
        let mut t = CellValueTable::new(3, 3);
        let here = Cell::new(1, 1);
        t.set_value(here, 2.0);
        t.set_value(Cell::new(0, 1), 6.0);
        t.set_value(Cell::new(2, 1), 2.0);
        let s = rule_scores(here, &t, &cfg);
        assert_eq!(s[Action::Up.index()], Some(0.25));
        assert_eq!(s[Action::Down.index()], Some(0.5));
        // Right and Left neighbors are 0: score is 2/(2+0) = 1.
        assert_eq!(s[Action::Right.index()], Some(1.0));
    }

    #[test]
    fn zero_table_falls_back_to_first_in_bounds_action() {
        let cfg = GridConfig::with_size(5, 5);
        let t = CellValueTable::new(5, 5);
        let w = WorldState::new(&cfg, &[Cell::new(2, 2), Cell::new(0, 2)], &[Cell::new(4, 4)])
            .unwrap();
        let j = rule_based(&w, &t, &cfg);
        assert_eq!(j[0], Action::Up);
        assert_eq!(j[1], Action::Down);
    }

    #[test]
    fn offgrid_neighbors_excluded() {
        let cfg = GridConfig::with_size(3, 3);
        let t = CellValueTable::new(3, 3);
        let s = rule_scores(Cell::new(0, 0), &t, &cfg);
        assert_eq!(s[Action::Up.index()], None);
        assert_eq!(s[Action::Left.index()], None);
    }

    #[test]
    fn training_is_seeded() {
        let cfg = GridConfig {
            step_cap: 50,
            ..GridConfig::with_size(5, 5)
        };
        let w = WorldState::new(&cfg, &[Cell::new(0, 0)], &[Cell::new(4, 4)]).unwrap();
        let a = train_cell_values(&cfg, &w, 20, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = train_cell_values(&cfg, &w, 20, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        assert!(train_cell_values(&cfg, &w, 0, &mut ChaCha8Rng::seed_from_u64(5)).is_err());
    }
}
