//! Greedy agent-victim matching and the heuristic distance built on it.
//!
//! All agent-victim Manhattan distances are sorted ascending (ties by agent,
//! then victim) and scanned; a pair is taken when both sides are still free.
//! Agents left over once every victim is taken share their nearest victim.

use serde::{Deserialize, Serialize};

use super::LearnerError;
use crate::grid::{manhattan, Cell, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchPair {
    pub agent: usize,
    pub victim: usize,
    pub distance: u32,
    /// Assigned after the scan to a victim already taken by another agent.
    pub shared: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matching {
    /// One entry per agent, in agent order.
    pub pairs: Vec<MatchPair>,
    pub total_distance: u32,
}

impl Matching {
    pub fn target_of(&self, agent: usize) -> usize {
        self.pairs[agent].victim
    }

    /// Distance summed over the one-to-one pairs chosen by the scan.
    pub fn exclusive_distance(&self) -> u32 {
        self.pairs
            .iter()
            .filter(|p| !p.shared)
            .map(|p| p.distance)
            .sum()
    }
}

/// Reusable buffers for the matching scan.
#[derive(Debug, Default, Clone)]
pub struct MatchScratch {
    keys: Vec<u64>,
    target: Vec<u32>,
    shared: Vec<bool>,
    victim_taken: Vec<bool>,
}

impl MatchScratch {
    pub fn new() -> Self {
        Self::default()
    }

    /// Runs the greedy scan and returns the total distance. Per-agent targets
    /// stay available through [`MatchScratch::target`].
    pub fn run(&mut self, agents: &[Cell], victims: &[Cell]) -> u32 {
        debug_assert!(!victims.is_empty());
        debug_assert!(agents.len() <= u16::MAX as usize && victims.len() <= u16::MAX as usize);
        self.keys.clear();
        for (a, &ac) in agents.iter().enumerate() {
            for (v, &vc) in victims.iter().enumerate() {
                let d = manhattan(ac, vc) as u64;
                self.keys.push(d << 32 | (a as u64) << 16 | v as u64);
            }
        }
        self.keys.sort_unstable();

        self.target.clear();
        self.target.resize(agents.len(), u32::MAX);
        self.shared.clear();
        self.shared.resize(agents.len(), false);
        self.victim_taken.clear();
        self.victim_taken.resize(victims.len(), false);

        let mut total = 0u32;
        let mut assigned = 0;
        let pairs_possible = agents.len().min(victims.len());
        for &key in &self.keys {
            if assigned == pairs_possible {
                break;
            }
            let a = (key >> 16 & 0xffff) as usize;
            let v = (key & 0xffff) as usize;
            if self.target[a] == u32::MAX && !self.victim_taken[v] {
                self.target[a] = v as u32;
                self.victim_taken[v] = true;
                total += (key >> 32) as u32;
                assigned += 1;
            }
        }

        for (a, &ac) in agents.iter().enumerate() {
            if self.target[a] != u32::MAX {
                continue;
            }
            let (v, d) = victims
                .iter()
                .enumerate()
                .map(|(v, &vc)| (v, manhattan(ac, vc)))
                .min_by_key(|&(v, d)| (d, v))
                .expect("victims non-empty");
            self.target[a] = v as u32;
            self.shared[a] = true;
            total += d;
        }
        total
    }

    pub fn target(&self, agent: usize) -> usize {
        self.target[agent] as usize
    }
}

pub fn greedy_match(agents: &[Cell], victims: &[Cell]) -> Result<Matching, LearnerError> {
    if victims.is_empty() {
        return Err(LearnerError::NoVictims);
    }
    let mut scratch = MatchScratch::new();
    let total_distance = scratch.run(agents, victims);
    let pairs = agents
        .iter()
        .enumerate()
        .map(|(a, &ac)| {
            let v = scratch.target(a);
            MatchPair {
                agent: a,
                victim: v,
                distance: manhattan(ac, victims[v]),
                shared: scratch.shared[a],
            }
        })
        .collect();
    Ok(Matching {
        pairs,
        total_distance,
    })
}

/// Total greedy-matching distance from agents to waiting victims; 0 when
/// nobody is waiting.
pub fn heuristic_distance(world: &WorldState) -> u32 {
    let victims = world.waiting_cells();
    if victims.is_empty() {
        return 0;
    }
    MatchScratch::new().run(&world.agent_cells(), &victims)
}
