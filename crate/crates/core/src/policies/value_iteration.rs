//! Value iteration on the single-agent projection of the grid.
//!
//! Every waiting victim cell is absorbing: stepping into one earns the rescue
//! reward and ends the trajectory, and the victim cell itself carries the
//! rescue reward as its value. The table is only valid for the victim set it
//! was solved for, so callers re-solve after each rescue.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, Mutex};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{JointAction, Policy, PolicyError};
use crate::grid::{Action, Cell, GridConfig, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueIterationSettings {
    pub gamma: f64,
    pub tol: f64,
    pub max_sweeps: u32,
}

impl Default for ValueIterationSettings {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            tol: 1e-6,
            max_sweeps: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    pub rows: u32,
    pub cols: u32,
    pub values: Vec<f64>,
    pub sweeps: u32,
    victims_key: u64,
}

impl ValueTable {
    pub fn value(&self, cell: Cell) -> f64 {
        self.values[cell.row as usize * self.cols as usize + cell.col as usize]
    }

    pub fn victims_key(&self) -> u64 {
        self.victims_key
    }
}

/// Fingerprint of the waiting victim set (ids and cells).
pub fn victim_set_key(world: &WorldState) -> u64 {
    let mut hasher = DefaultHasher::new();
    for v in world.waiting() {
        v.id.hash(&mut hasher);
        v.cell.hash(&mut hasher);
    }
    hasher.finish()
}

struct Backup<'a> {
    config: &'a GridConfig,
    gamma: f64,
    victim: Vec<bool>,
}

impl Backup<'_> {
    /// One-step return of `action` from `cell` under `values`.
    fn action_value(&self, values: &[f64], cell: Cell, action: Action) -> Option<f64> {
        let cfg = self.config;
        match action.target(cell, cfg) {
            None => None,
            Some(to) if self.victim[cfg.index(to)] => Some(cfg.rescue_reward + cfg.step_cost),
            Some(to) => Some(cfg.step_cost + self.gamma * values[cfg.index(to)]),
        }
    }

    fn offgrid_value(&self, values: &[f64], cell: Cell) -> f64 {
        self.config.offgrid_penalty + self.config.step_cost + self.gamma * values[self.config.index(cell)]
    }
}

pub fn value_iteration_solve(
    world: &WorldState,
    config: &GridConfig,
    settings: &ValueIterationSettings,
) -> Result<ValueTable, PolicyError> {
    let ValueIterationSettings {
        gamma,
        tol,
        max_sweeps,
    } = *settings;
    if !(0.0..1.0).contains(&gamma) {
        return Err(PolicyError::InvalidParameter(format!("gamma {gamma} not in [0,1)")));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(PolicyError::InvalidParameter(format!("tol {tol} must be positive")));
    }
    if world.all_rescued() {
        return Err(PolicyError::NoWaitingVictims);
    }

    let n = config.cell_count();
    let mut victim = vec![false; n];
    for v in world.waiting() {
        victim[config.index(v.cell)] = true;
    }
    let backup = Backup {
        config,
        gamma,
        victim,
    };

    let mut values: Vec<f64> = backup
        .victim
        .iter()
        .map(|&is_victim| if is_victim { config.rescue_reward } else { 0.0 })
        .collect();
    let mut next = values.clone();
    let mut sweeps = 0;
    loop {
        if sweeps >= max_sweeps {
            return Err(PolicyError::NonConvergence(max_sweeps));
        }
        sweeps += 1;
        let mut delta = 0.0f64;
        for (i, slot) in next.iter_mut().enumerate() {
            if backup.victim[i] {
                continue;
            }
            let cell = config.cell_at(i);
            let best = Action::ALL
                .into_iter()
                .map(|a| {
                    backup
                        .action_value(&values, cell, a)
                        .unwrap_or_else(|| backup.offgrid_value(&values, cell))
                })
                .fold(f64::NEG_INFINITY, f64::max);
            delta = delta.max((best - values[i]).abs());
            *slot = best;
        }
        std::mem::swap(&mut values, &mut next);
        if delta < tol {
            break;
        }
    }

    Ok(ValueTable {
        rows: config.rows,
        cols: config.cols,
        values,
        sweeps,
        victims_key: victim_set_key(world),
    })
}

/// Each agent takes the in-bounds move with the largest one-step lookahead
/// value; ties go to the canonical action order.
pub fn value_iteration_policy(
    world: &WorldState,
    table: &ValueTable,
    config: &GridConfig,
    gamma: f64,
) -> Result<JointAction, PolicyError> {
    if victim_set_key(world) != table.victims_key {
        return Err(PolicyError::StaleTable);
    }
    let mut victim = vec![false; config.cell_count()];
    for v in world.waiting() {
        victim[config.index(v.cell)] = true;
    }
    let backup = Backup {
        config,
        gamma,
        victim,
    };
    Ok(world
        .agents
        .iter()
        .map(|agent| {
            let mut best: Option<(Action, f64)> = None;
            for a in Action::ALL {
                if let Some(q) = backup.action_value(&table.values, agent.cell, a) {
                    if best.is_none_or(|(_, b)| q > b) {
                        best = Some((a, q));
                    }
                }
            }
            best.map_or(Action::Up, |(a, _)| a)
        })
        .collect::<Vec<_>>()
        .into())
}

/// Value-iteration scheduler that re-solves whenever the victim set changes.
/// Solved tables are memoized by victim set.
#[derive(Debug, Default)]
pub struct ValueIteration {
    pub settings: ValueIterationSettings,
    cache: Mutex<HashMap<u64, Arc<ValueTable>>>,
}

impl ValueIteration {
    pub fn new(settings: ValueIterationSettings) -> Self {
        Self {
            settings,
            cache: Mutex::default(),
        }
    }

    pub fn table_for(
        &self,
        world: &WorldState,
        config: &GridConfig,
    ) -> Result<Arc<ValueTable>, PolicyError> {
        let key = victim_set_key(world);
        if let Some(t) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(t));
        }
        let table = Arc::new(value_iteration_solve(world, config, &self.settings)?);
        self.cache
            .lock()
            .expect("cache lock")
            .insert(key, Arc::clone(&table));
        Ok(table)
    }
}

impl Policy for ValueIteration {
    fn name(&self) -> &str {
        "vi"
    }

    fn act(
        &self,
        world: &WorldState,
        config: &GridConfig,
        _rng: &mut dyn RngCore,
    ) -> Result<JointAction, PolicyError> {
        let table = self.table_for(world, config)?;
        value_iteration_policy(world, &table, config, self.settings.gamma)
    }
}
