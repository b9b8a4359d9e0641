//! Deterministic discrete grid world.
//!
//! Volunteers (agents) move one cell per step in one of four directions.
//! Victims are stationary and become rescued the first time an agent ends a
//! step on their cell. A move that would leave the grid is converted into a
//! penalized no-op, so every agent keeps all four actions everywhere.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("cell {0} lies outside the grid")]
    OutOfBounds(Cell),
    #[error("world needs at least one agent and one victim")]
    EmptyPopulation,
    #[error("joint action has {got} entries but the world has {expected} agents")]
    ArityMismatch { expected: usize, got: usize },
    #[error("no waiting victims remain")]
    TerminalState,
    #[error("duplicate entity id {0}")]
    DuplicateId(EntityId),
    #[error("invalid grid configuration: {0}")]
    InvalidConfig(String),
}

/// Grid dimensions, episode cap and reward shaping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub rows: u32,
    pub cols: u32,
    pub step_cap: u32,
    pub rescue_reward: f64,
    pub offgrid_penalty: f64,
    pub step_cost: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            rows: 25,
            cols: 25,
            step_cap: 500,
            rescue_reward: 10.0,
            offgrid_penalty: -1.0,
            step_cost: 0.0,
        }
    }
}

impl GridConfig {
    pub fn with_size(rows: u32, cols: u32) -> Self {
        Self {
            rows,
            cols,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |msg: &str| Err(EnvError::InvalidConfig(msg.to_string()));
        if self.rows == 0 || self.cols == 0 {
            return bad("rows and cols must be at least 1");
        }
        if self.rows > u16::MAX as u32 || self.cols > u16::MAX as u32 {
            return bad("rows and cols must fit in 16 bits");
        }
        if self.step_cap == 0 {
            return bad("step_cap must be at least 1");
        }
        if !(self.rescue_reward.is_finite() && self.rescue_reward > 0.0) {
            return bad("rescue_reward must be positive");
        }
        if !(self.offgrid_penalty.is_finite() && self.offgrid_penalty <= 0.0) {
            return bad("offgrid_penalty must be nonpositive");
        }
        if !(self.step_cost.is_finite() && self.step_cost <= 0.0) {
            return bad("step_cost must be nonpositive");
        }
        Ok(())
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.row < self.rows && cell.col < self.cols
    }

    pub fn cell_count(&self) -> usize {
        self.rows as usize * self.cols as usize
    }

    /// Row-major index of an in-bounds cell.
    pub fn index(&self, cell: Cell) -> usize {
        cell.row as usize * self.cols as usize + cell.col as usize
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new(
            (index / self.cols as usize) as u32,
            (index % self.cols as usize) as u32,
        )
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.cell_count()).map(|i| self.cell_at(i))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: u32,
    pub col: u32,
}

impl Cell {
    pub const fn new(row: u32, col: u32) -> Self {
        Self { row, col }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

/// Manhattan distance between two cells.
pub fn manhattan(a: Cell, b: Cell) -> u32 {
    a.row.abs_diff(b.row) + a.col.abs_diff(b.col)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Up,
    Down,
    Right,
    Left,
}

impl Action {
    /// Canonical order; every tie-break in the crate follows it.
    pub const ALL: [Action; 4] = [Action::Up, Action::Down, Action::Right, Action::Left];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Action {
        Self::ALL[i]
    }

    /// Destination cell, or `None` when the move leaves the grid.
    pub fn target(self, from: Cell, config: &GridConfig) -> Option<Cell> {
        let to = match self {
            Action::Up => Cell::new(from.row.checked_sub(1)?, from.col),
            Action::Down => Cell::new(from.row + 1, from.col),
            Action::Right => Cell::new(from.row, from.col + 1),
            Action::Left => Cell::new(from.row, from.col.checked_sub(1)?),
        };
        config.contains(to).then_some(to)
    }

    /// Position after the move; off-grid moves leave the agent in place.
    pub fn apply(self, from: Cell, config: &GridConfig) -> Cell {
        self.target(from, config).unwrap_or(from)
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Up => "Up",
            Action::Down => "Down",
            Action::Right => "Right",
            Action::Left => "Left",
        }
    }

    pub fn parse(s: &str) -> Option<Action> {
        Self::ALL.into_iter().find(|a| a.name() == s)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Identifier of an agent or victim. Cheap to clone.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityId(Arc<str>);

impl EntityId {
    pub fn new(id: impl AsRef<str>) -> Self {
        Self(Arc::from(id.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<usize> for EntityId {
    fn from(n: usize) -> Self {
        Self::new(n.to_string())
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VictimStatus {
    Waiting,
    Rescued,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Agent {
    pub id: EntityId,
    pub cell: Cell,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Victim {
    pub id: EntityId,
    pub cell: Cell,
    pub status: VictimStatus,
}

impl Victim {
    pub fn is_waiting(&self) -> bool {
        self.status == VictimStatus::Waiting
    }
}

/// Positions of all volunteers and victims at one time step.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WorldState {
    pub t: u32,
    pub agents: Vec<Agent>,
    pub victims: Vec<Victim>,
}

impl WorldState {
    /// Builds a world with ids taken from list order.
    pub fn new(
        config: &GridConfig,
        agent_cells: &[Cell],
        victim_cells: &[Cell],
    ) -> Result<Self, EnvError> {
        Self::from_entities(
            config,
            agent_cells
                .iter()
                .enumerate()
                .map(|(i, &c)| (EntityId::from(i), c))
                .collect(),
            victim_cells
                .iter()
                .enumerate()
                .map(|(i, &c)| (EntityId::from(i), c))
                .collect(),
        )
    }

    /// Builds a world from explicitly identified entities; all victims start waiting.
    pub fn from_entities(
        config: &GridConfig,
        agents: Vec<(EntityId, Cell)>,
        victims: Vec<(EntityId, Cell)>,
    ) -> Result<Self, EnvError> {
        if agents.is_empty() || victims.is_empty() {
            return Err(EnvError::EmptyPopulation);
        }
        let world = Self {
            t: 0,
            agents: agents
                .into_iter()
                .map(|(id, cell)| Agent { id, cell })
                .collect(),
            victims: victims
                .into_iter()
                .map(|(id, cell)| Victim {
                    id,
                    cell,
                    status: VictimStatus::Waiting,
                })
                .collect(),
        };
        world.check(config)?;
        Ok(world)
    }

    /// Verifies bounds and id uniqueness.
    pub fn check(&self, config: &GridConfig) -> Result<(), EnvError> {
        let cells = self
            .agents
            .iter()
            .map(|a| a.cell)
            .chain(self.victims.iter().map(|v| v.cell));
        for cell in cells {
            if !config.contains(cell) {
                return Err(EnvError::OutOfBounds(cell));
            }
        }
        let mut seen = HashSet::new();
        for a in &self.agents {
            if !seen.insert(&a.id) {
                return Err(EnvError::DuplicateId(a.id.clone()));
            }
        }
        seen.clear();
        for v in &self.victims {
            if !seen.insert(&v.id) {
                return Err(EnvError::DuplicateId(v.id.clone()));
            }
        }
        Ok(())
    }

    pub fn agent_cells(&self) -> Vec<Cell> {
        self.agents.iter().map(|a| a.cell).collect()
    }

    pub fn waiting(&self) -> impl Iterator<Item = &Victim> + '_ {
        self.victims.iter().filter(|v| v.is_waiting())
    }

    pub fn waiting_cells(&self) -> Vec<Cell> {
        self.waiting().map(|v| v.cell).collect()
    }

    pub fn waiting_count(&self) -> usize {
        self.waiting().count()
    }

    pub fn rescued_count(&self) -> usize {
        self.victims.len() - self.waiting_count()
    }

    pub fn all_rescued(&self) -> bool {
        self.waiting().next().is_none()
    }
}

/// Result of one joint step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next: WorldState,
    pub team_reward: f64,
    pub rescued_ids: Vec<EntityId>,
    pub offgrid_agents: Vec<EntityId>,
}

/// Constructor with ids assigned by list order.
pub fn new_world(
    config: &GridConfig,
    agent_cells: &[Cell],
    victim_cells: &[Cell],
) -> Result<WorldState, EnvError> {
    WorldState::new(config, agent_cells, victim_cells)
}

/// Moves every agent simultaneously, then rescues each waiting victim whose
/// cell holds at least one agent. The team reward is credited once per victim.
pub fn apply_joint_action(
    config: &GridConfig,
    world: &WorldState,
    joint: &[Action],
) -> Result<StepOutcome, EnvError> {
    if joint.len() != world.agents.len() {
        return Err(EnvError::ArityMismatch {
            expected: world.agents.len(),
            got: joint.len(),
        });
    }
    if world.all_rescued() {
        return Err(EnvError::TerminalState);
    }

    let mut next = world.clone();
    next.t += 1;
    let mut offgrid_agents = Vec::new();
    for (agent, &action) in next.agents.iter_mut().zip(joint) {
        match action.target(agent.cell, config) {
            Some(to) => agent.cell = to,
            None => offgrid_agents.push(agent.id.clone()),
        }
    }

    let mut rescued_ids = Vec::new();
    for victim in next.victims.iter_mut().filter(|v| v.is_waiting()) {
        if next.agents.iter().any(|a| a.cell == victim.cell) {
            victim.status = VictimStatus::Rescued;
            rescued_ids.push(victim.id.clone());
        }
    }

    let team_reward = config.rescue_reward * rescued_ids.len() as f64
        + config.offgrid_penalty * offgrid_agents.len() as f64
        + config.step_cost * next.agents.len() as f64;

    Ok(StepOutcome {
        next,
        team_reward,
        rescued_ids,
        offgrid_agents,
    })
}

/// True once every victim is rescued or the step cap is reached.
pub fn is_terminal(world: &WorldState, config: &GridConfig) -> bool {
    world.all_rescued() || world.t >= config.step_cap
}
