use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_episode, stream_rng, EpisodeRecord, HarnessError, RunSummary};
use crate::geo::{apply_snapshot, parse_scenario, snapshot_to_world, GridDims};
use crate::grid::{Cell, GridConfig, WorldState};
use crate::learner::{train, LearnedPolicy, LearnerConfig, QMode, RewardCredit, TrainingRun};
use crate::policies::{
    train_cell_values, GreedyBestFirst, Policy, RandomWalk, RuleBased, ValueIteration,
    ValueIterationSettings,
};

/// Policy names accepted in experiment configs.
pub const POLICY_NAMES: [&str; 6] = ["resq", "rl", "greedy", "rule", "vi", "random"];

const PURPOSE_PLACEMENT: u64 = 1;
const PURPOSE_TRAIN: u64 = 2;
const PURPOSE_EVAL: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardConfig {
    #[serde(default = "default_rescue")]
    pub rescue_reward: f64,
    #[serde(default = "default_offgrid")]
    pub offgrid_penalty: f64,
    #[serde(default)]
    pub step_cost: f64,
}

fn default_rescue() -> f64 {
    GridConfig::default().rescue_reward
}

fn default_offgrid() -> f64 {
    GridConfig::default().offgrid_penalty
}

impl Default for RewardConfig {
    fn default() -> Self {
        let g = GridConfig::default();
        Self {
            rescue_reward: g.rescue_reward,
            offgrid_penalty: g.offgrid_penalty,
            step_cost: g.step_cost,
        }
    }
}

/// How synthetic volunteers are placed. Victims always occupy distinct,
/// uniformly drawn cells.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    /// All volunteers start together at one uniformly drawn staging cell.
    #[default]
    Depot,
    /// Every volunteer gets its own uniformly drawn cell.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub agents: usize,
    pub victims: usize,
    /// Defaults to the experiment seed.
    #[serde(default)]
    pub placement_seed: Option<u64>,
    #[serde(default)]
    pub placement: Placement,
}

/// Optional overrides applied to both learners.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerOverrides {
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub epsilon_start: Option<f64>,
    pub epsilon_end: Option<f64>,
    pub epsilon_decay_episodes: Option<u32>,
    /// ResQ only; plain Q-learning always takes the exact argmax.
    pub tie_tol: Option<f64>,
    pub mode: Option<QMode>,
    pub credit: Option<RewardCredit>,
    /// Exploration rate of the frozen learners during evaluation; defaults
    /// to the final training rate.
    pub eval_epsilon: Option<f64>,
}

impl LearnerOverrides {
    fn apply(&self, mut c: LearnerConfig) -> LearnerConfig {
        c.alpha = self.alpha.unwrap_or(c.alpha);
        c.gamma = self.gamma.unwrap_or(c.gamma);
        c.epsilon_start = self.epsilon_start.unwrap_or(c.epsilon_start);
        c.epsilon_end = self.epsilon_end.unwrap_or(c.epsilon_end);
        c.epsilon_decay_episodes = self.epsilon_decay_episodes.unwrap_or(c.epsilon_decay_episodes);
        c.tie_tol = self.tie_tol.unwrap_or(c.tie_tol);
        c.mode = self.mode.unwrap_or(c.mode);
        c.credit = self.credit.unwrap_or(c.credit);
        c
    }
}

fn default_train_episodes() -> u32 {
    1000
}

fn default_eval_episodes() -> u32 {
    2000
}

fn default_step_cap() -> u32 {
    GridConfig::default().step_cap
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Taken from the scenario file when omitted; 25x25 for synthetic worlds.
    #[serde(default)]
    pub grid: Option<GridDims>,
    #[serde(default)]
    pub rewards: RewardConfig,
    /// Scenario file, relative to the config file's directory.
    #[serde(default)]
    pub scenario: Option<PathBuf>,
    /// Hourly instance: snapshots `0..=snapshot` applied in order.
    #[serde(default)]
    pub snapshot: usize,
    /// Clamp out-of-region scenario points instead of rejecting them.
    #[serde(default)]
    pub clamp: bool,
    #[serde(default)]
    pub synthetic: Option<SyntheticConfig>,
    pub policies: Vec<String>,
    #[serde(default = "default_train_episodes")]
    pub train_episodes: u32,
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: u32,
    pub seed: u64,
    #[serde(default = "default_step_cap")]
    pub step_cap: u32,
    #[serde(default)]
    pub learner: LearnerOverrides,
}

impl ExperimentConfig {
    /// Synthetic benchmark with every policy.
    pub fn synthetic(agents: usize, victims: usize, seed: u64) -> Self {
        Self {
            grid: None,
            rewards: RewardConfig::default(),
            scenario: None,
            snapshot: 0,
            clamp: false,
            synthetic: Some(SyntheticConfig {
                agents,
                victims,
                placement_seed: None,
                placement: Placement::default(),
            }),
            policies: POLICY_NAMES.iter().map(|s| s.to_string()).collect(),
            train_episodes: default_train_episodes(),
            eval_episodes: default_eval_episodes(),
            seed,
            step_cap: default_step_cap(),
            learner: LearnerOverrides::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            HarnessError::config(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            HarnessError::config(".", format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.policies.is_empty() {
            return Err(HarnessError::config("policies", "at least one policy is required"));
        }
        let mut seen = HashSet::new();
        for (i, p) in self.policies.iter().enumerate() {
            if !POLICY_NAMES.contains(&p.as_str()) {
                return Err(HarnessError::config(
                    format!("policies[{i}]"),
                    format!("unknown policy {p:?}; expected one of {}", POLICY_NAMES.join(", ")),
                ));
            }
            if !seen.insert(p.as_str()) {
                return Err(HarnessError::config(format!("policies[{i}]"), format!("duplicate policy {p:?}")));
            }
        }
        if self.eval_episodes == 0 {
            return Err(HarnessError::config("eval_episodes", "must be at least 1"));
        }
        if self.train_episodes == 0 && self.needs_training() {
            return Err(HarnessError::config("train_episodes", "must be at least 1"));
        }
        if let Some(g) = self.grid {
            if g.rows == 0 || g.cols == 0 {
                return Err(HarnessError::config("grid", "rows and cols must be at least 1"));
            }
        }
        self.grid_config(self.grid.unwrap_or_default())?;
        match (&self.scenario, &self.synthetic) {
            (Some(_), Some(_)) => {
                return Err(HarnessError::config("scenario", "set either scenario or synthetic, not both"))
            }
            (None, None) => {
                return Err(HarnessError::config("synthetic", "either scenario or synthetic is required"))
            }
            (None, Some(s)) => {
                let dims = self.grid.unwrap_or_default();
                let cells = dims.rows as usize * dims.cols as usize;
                if s.agents == 0 {
                    return Err(HarnessError::config("synthetic.agents", "must be at least 1"));
                }
                if s.victims == 0 {
                    return Err(HarnessError::config("synthetic.victims", "must be at least 1"));
                }
                if occupied_cells(s.placement, s.agents, s.victims) > cells {
                    return Err(HarnessError::config(
                        "synthetic",
                        format!("{} agents and {} victims do not fit on {cells} cells", s.agents, s.victims),
                    ));
                }
            }
            (Some(_), None) => {}
        }
        if let Some(e) = self.learner.eval_epsilon {
            if !(0.0..=1.0).contains(&e) {
                return Err(HarnessError::config("learner.eval_epsilon", format!("{e} not in [0,1]")));
            }
        }
        for (name, config) in [("resq", self.resq_config()), ("rl", self.rl_config())] {
            if self.policies.iter().any(|p| p == name) {
                config
                    .validate()
                    .map_err(|e| HarnessError::config("learner", e.to_string()))?;
            }
        }
        Ok(())
    }

    fn needs_training(&self) -> bool {
        self.policies.iter().any(|p| matches!(p.as_str(), "resq" | "rl" | "rule"))
    }

    /// Exploration rate of the learners during evaluation.
    pub fn eval_epsilon(&self, learner: &LearnerConfig) -> f64 {
        self.learner.eval_epsilon.unwrap_or(learner.epsilon_end)
    }

    pub fn resq_config(&self) -> LearnerConfig {
        self.learner.apply(LearnerConfig::resq(self.train_episodes))
    }

    pub fn rl_config(&self) -> LearnerConfig {
        LearnerConfig {
            tie_tol: 0.0,
            ..self.learner.apply(LearnerConfig::plain(self.train_episodes))
        }
    }

    fn grid_config(&self, dims: GridDims) -> Result<GridConfig, HarnessError> {
        let config = GridConfig {
            rows: dims.rows,
            cols: dims.cols,
            step_cap: self.step_cap,
            rescue_reward: self.rewards.rescue_reward,
            offgrid_penalty: self.rewards.offgrid_penalty,
            step_cost: self.rewards.step_cost,
        };
        config.validate().map_err(|e| {
            let path = if self.step_cap == 0 { "step_cap" } else { "rewards" };
            HarnessError::config(path, e.to_string())
        })?;
        Ok(config)
    }
}

fn occupied_cells(placement: Placement, agents: usize, victims: usize) -> usize {
    match placement {
        Placement::Depot => 1 + victims,
        Placement::Uniform => agents + victims,
    }
}

/// Seeded synthetic start state. Volunteers and victims never share a cell.
pub fn synthetic_world(
    config: &GridConfig,
    agents: usize,
    victims: usize,
    placement: Placement,
    placement_seed: u64,
) -> Result<WorldState, HarnessError> {
    let cells = config.cell_count();
    let needed = occupied_cells(placement, agents, victims);
    if needed > cells {
        return Err(HarnessError::config(
            "synthetic",
            format!("{agents} agents and {victims} victims do not fit on {cells} cells"),
        ));
    }
    let mut rng = stream_rng(placement_seed, PURPOSE_PLACEMENT, 0);
    let picked: Vec<Cell> = sample(&mut rng, cells, needed)
        .into_iter()
        .map(|i| config.cell_at(i))
        .collect();
    let (agent_cells, victim_cells) = match placement {
        Placement::Depot => (vec![picked[0]; agents], &picked[1..]),
        Placement::Uniform => (picked[..agents].to_vec(), &picked[agents..]),
    };
    Ok(WorldState::new(config, &agent_cells, victim_cells)?)
}

/// Grid configuration and episode start state for an experiment.
pub fn start_world(
    cfg: &ExperimentConfig,
    base_dir: &Path,
) -> Result<(GridConfig, WorldState), HarnessError> {
    match (&cfg.scenario, &cfg.synthetic) {
        (Some(path), _) => {
            let full = base_dir.join(path);
            let text = std::fs::read_to_string(&full).map_err(|e| {
                HarnessError::config("scenario", format!("cannot read {}: {e}", full.display()))
            })?;
            let scenario = parse_scenario(&text)?;
            let dims = cfg.grid.unwrap_or(scenario.grid);
            let grid = cfg.grid_config(dims)?;
            if cfg.snapshot >= scenario.snapshots.len() {
                return Err(HarnessError::config(
                    "snapshot",
                    format!(
                        "snapshot {} requested but the scenario has {}",
                        cfg.snapshot,
                        scenario.snapshots.len()
                    ),
                ));
            }
            let mut world =
                snapshot_to_world(&scenario.snapshots[0], &scenario.bounds, &grid, cfg.clamp)?;
            for snap in &scenario.snapshots[1..=cfg.snapshot] {
                world = apply_snapshot(&world, snap, &scenario.bounds, &grid, cfg.clamp)?;
            }
            Ok((grid, world))
        }
        (None, Some(s)) => {
            let grid = cfg.grid_config(cfg.grid.unwrap_or_default())?;
            let world = synthetic_world(
                &grid,
                s.agents,
                s.victims,
                s.placement,
                s.placement_seed.unwrap_or(cfg.seed),
            )?;
            Ok((grid, world))
        }
        (None, None) => Err(HarnessError::config("synthetic", "either scenario or synthetic is required")),
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Caps evaluation parallelism; `None` uses the global pool.
    pub threads: Option<usize>,
    /// Directory that relative scenario paths are resolved against.
    pub base_dir: PathBuf,
}

/// Trains the `resq` or `rl` learner of an experiment exactly as
/// [`run_experiment`] does.
pub fn train_learner(
    cfg: &ExperimentConfig,
    name: &str,
    base_dir: &Path,
) -> Result<(LearnerConfig, TrainingRun), HarnessError> {
    cfg.validate()?;
    let (grid, start) = start_world(cfg, base_dir)?;
    train_on(cfg, name, &grid, &start)
}

fn train_on(
    cfg: &ExperimentConfig,
    name: &str,
    grid: &GridConfig,
    start: &WorldState,
) -> Result<(LearnerConfig, TrainingRun), HarnessError> {
    let config = match name {
        "resq" => cfg.resq_config(),
        "rl" => cfg.rl_config(),
        other => {
            return Err(HarnessError::config(
                "policy",
                format!("{other:?} is not a learner; expected resq or rl"),
            ))
        }
    };
    config
        .validate()
        .map_err(|e| HarnessError::config("learner", e.to_string()))?;
    // Both learners see the same training stream.
    let mut rng = stream_rng(cfg.seed, PURPOSE_TRAIN, 0);
    let run = train(start, grid, &config, cfg.train_episodes, &mut rng)?;
    Ok((config, run))
}

fn evaluate(
    policy: &dyn Policy,
    start: &WorldState,
    grid: &GridConfig,
    episodes: u32,
    seed: u64,
) -> Result<Vec<EpisodeRecord>, HarnessError> {
    (0..episodes)
        .into_par_iter()
        .map(|e| {
            let mut rng = stream_rng(seed, PURPOSE_EVAL, e as u64);
            run_episode(start, policy, grid, &mut rng, false)
        })
        .collect()
}

/// Trains the learners, then evaluates every configured policy from the same
/// start state with the same per-episode random streams. Summaries follow the
/// order of `cfg.policies`.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    options: &RunOptions,
) -> Result<Vec<RunSummary>, HarnessError> {
    cfg.validate()?;
    let (grid, start) = start_world(cfg, &options.base_dir)?;
    let body = || -> Result<Vec<RunSummary>, HarnessError> {
        let mut summaries = Vec::with_capacity(cfg.policies.len());
        for name in &cfg.policies {
            let mut curve = None;
            let policy: Box<dyn Policy> = match name.as_str() {
                "random" => Box::new(RandomWalk),
                "greedy" => Box::new(GreedyBestFirst),
                "vi" => Box::new(ValueIteration::new(ValueIterationSettings::default())),
                "rule" => {
                    let mut rng = stream_rng(cfg.seed, PURPOSE_TRAIN, 1);
                    let table = train_cell_values(&grid, &start, cfg.train_episodes, &mut rng)?;
                    Box::new(RuleBased { table })
                }
                "resq" | "rl" => {
                    let (config, run) = train_on(cfg, name, &grid, &start)?;
                    curve = Some(run.curve);
                    Box::new(LearnedPolicy {
                        name: name.clone(),
                        table: run.table,
                        epsilon: cfg.eval_epsilon(&config),
                        config,
                    })
                }
                other => unreachable!("validated policy name {other}"),
            };
            let records = evaluate(policy.as_ref(), &start, &grid, cfg.eval_episodes, cfg.seed)?;
            let mut summary = RunSummary::from_records(name.clone(), &records)?;
            summary.learning_curve = curve;
            summaries.push(summary);
        }
        Ok(summaries)
    };
    match options.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| HarnessError::config("threads", e.to_string()))?
            .install(body),
        None => body(),
    }
}
