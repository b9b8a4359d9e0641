//! Tabular action values.
//!
//! `Factorized` keeps one table per agent keyed by the agent's own cell and
//! the cell of the victim it is matched to. `Joint` keeps, per agent, a
//! table over the full world state and every joint action; it is only
//! tractable for a handful of agents on small grids.
//!
//! Unseen entries read as the initialization value.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::LearnerError;
use crate::grid::{Action, Cell, WorldState};

pub const Q_INIT: f64 = 1.0;

/// Joint mode enumerates 4^N joint actions; beyond this it is refused.
pub const JOINT_MAX_AGENTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QMode {
    Factorized,
    Joint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LocalKey {
    pub cell: Cell,
    pub target: Cell,
}

impl LocalKey {
    fn render(&self, action: Action) -> String {
        format!("{}|{}|{}", self.cell, self.target, action)
    }
}

/// Canonical text key of a world: agent cells, then waiting victim cells.
pub fn world_key(world: &WorldState) -> String {
    let mut key = String::new();
    for (i, a) in world.agents.iter().enumerate() {
        if i > 0 {
            key.push(';');
        }
        key.push_str(&a.cell.to_string());
    }
    key.push('>');
    for (i, v) in world.waiting().enumerate() {
        if i > 0 {
            key.push(';');
        }
        key.push_str(&v.cell.to_string());
    }
    key
}

/// Index of a joint action in lexicographic canonical order (agent 0 most significant).
pub fn joint_index(joint: &[Action]) -> usize {
    joint.iter().fold(0, |acc, a| acc * 4 + a.index())
}

pub fn joint_from_index(mut index: usize, agents: usize) -> Vec<Action> {
    let mut out = vec![Action::Up; agents];
    for slot in out.iter_mut().rev() {
        *slot = Action::from_index(index % 4);
        index /= 4;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Store {
    Factorized(Vec<HashMap<LocalKey, [f64; 4]>>),
    Joint {
        agents: usize,
        tables: Vec<HashMap<String, Vec<f64>>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    init: f64,
    store: Store,
}

impl QTable {
    pub fn factorized() -> Self {
        Self {
            init: Q_INIT,
            store: Store::Factorized(Vec::new()),
        }
    }

    pub fn joint(agents: usize) -> Result<Self, LearnerError> {
        if agents == 0 || agents > JOINT_MAX_AGENTS {
            return Err(LearnerError::JointTooLarge(agents));
        }
        Ok(Self {
            init: Q_INIT,
            store: Store::Joint {
                agents,
                tables: vec![HashMap::new(); agents],
            },
        })
    }

    pub fn new(mode: QMode, agents: usize) -> Result<Self, LearnerError> {
        match mode {
            QMode::Factorized => Ok(Self::factorized()),
            QMode::Joint => Self::joint(agents),
        }
    }

    pub fn mode(&self) -> QMode {
        match self.store {
            Store::Factorized(_) => QMode::Factorized,
            Store::Joint { .. } => QMode::Joint,
        }
    }

    pub fn init_value(&self) -> f64 {
        self.init
    }

    /// Number of stored (non-default) entries.
    pub fn len(&self) -> usize {
        match &self.store {
            Store::Factorized(t) => t.iter().map(|m| m.len() * 4).sum(),
            Store::Joint { tables, .. } => tables
                .iter()
                .map(|m| m.values().map(Vec::len).sum::<usize>())
                .sum(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Values of the four actions at an agent's local key.
    pub fn local(&self, agent: usize, key: &LocalKey) -> [f64; 4] {
        match &self.store {
            Store::Factorized(t) => t
                .get(agent)
                .and_then(|m| m.get(key))
                .copied()
                .unwrap_or([self.init; 4]),
            Store::Joint { .. } => panic!("local lookup on a joint table"),
        }
    }

    pub fn local_mut(&mut self, agent: usize, key: LocalKey) -> &mut [f64; 4] {
        let init = self.init;
        match &mut self.store {
            Store::Factorized(t) => {
                if t.len() <= agent {
                    t.resize_with(agent + 1, HashMap::new);
                }
                t[agent].entry(key).or_insert([init; 4])
            }
            Store::Joint { .. } => panic!("local lookup on a joint table"),
        }
    }

    pub fn joint_agents(&self) -> Option<usize> {
        match self.store {
            Store::Joint { agents, .. } => Some(agents),
            Store::Factorized(_) => None,
        }
    }

    /// Value of agent `agent`'s table at a world key and joint action index.
    pub fn joint_value(&self, agent: usize, state: &str, joint: usize) -> f64 {
        match &self.store {
            Store::Joint { tables, .. } => tables[agent]
                .get(state)
                .map_or(self.init, |row| row[joint]),
            Store::Factorized(_) => panic!("joint lookup on a factorized table"),
        }
    }

    pub fn joint_row_mut(&mut self, agent: usize, state: &str) -> &mut Vec<f64> {
        let init = self.init;
        match &mut self.store {
            Store::Joint { agents, tables } => {
                let width = 4usize.pow(*agents as u32);
                tables[agent]
                    .entry(state.to_string())
                    .or_insert_with(|| vec![init; width])
            }
            Store::Factorized(_) => panic!("joint lookup on a factorized table"),
        }
    }

    pub fn all_finite(&self) -> bool {
        match &self.store {
            Store::Factorized(t) => t
                .iter()
                .flat_map(|m| m.values())
                .all(|row| row.iter().all(|v| v.is_finite())),
            Store::Joint { tables, .. } => tables
                .iter()
                .flat_map(|m| m.values())
                .all(|row| row.iter().all(|v| v.is_finite())),
        }
    }

    /// Serializes to `{"mode": ..., "init": ..., "agents": [{key: value}]}`.
    /// Factorized keys read `(r,c)|(rv,cv)|Action`; joint keys read
    /// `<world key>|<Action>,<Action>...`. Keys are sorted.
    pub fn to_json(&self) -> String {
        let agents: Vec<BTreeMap<String, f64>> = match &self.store {
            Store::Factorized(t) => t
                .iter()
                .map(|m| {
                    m.iter()
                        .flat_map(|(key, row)| {
                            Action::ALL
                                .into_iter()
                                .map(move |a| (key.render(a), row[a.index()]))
                        })
                        .collect()
                })
                .collect(),
            Store::Joint { agents, tables } => tables
                .iter()
                .map(|m| {
                    m.iter()
                        .flat_map(|(state, row)| {
                            row.iter().enumerate().map(move |(j, &v)| {
                                let actions: Vec<&str> = joint_from_index(j, *agents)
                                    .iter()
                                    .map(|a| a.name())
                                    .collect();
                                (format!("{state}|{}", actions.join(",")), v)
                            })
                        })
                        .collect()
                })
                .collect(),
        };
        let doc = QTableDoc {
            mode: self.mode(),
            init: self.init,
            agents,
        };
        serde_json::to_string_pretty(&doc).expect("q-table serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, LearnerError> {
        let doc: QTableDoc =
            serde_json::from_str(text).map_err(|e| LearnerError::Format(e.to_string()))?;
        let bad = |k: &str| LearnerError::Format(format!("malformed key {k:?}"));
        let store = match doc.mode {
            QMode::Factorized => {
                let mut tables = Vec::with_capacity(doc.agents.len());
                for entries in &doc.agents {
                    let mut m: HashMap<LocalKey, [f64; 4]> = HashMap::new();
                    for (k, &v) in entries {
                        let mut parts = k.split('|');
                        let (Some(cell), Some(target), Some(action), None) =
                            (parts.next(), parts.next(), parts.next(), parts.next())
                        else {
                            return Err(bad(k));
                        };
                        let key = LocalKey {
                            cell: parse_cell(cell).ok_or_else(|| bad(k))?,
                            target: parse_cell(target).ok_or_else(|| bad(k))?,
                        };
                        let action = Action::parse(action).ok_or_else(|| bad(k))?;
                        m.entry(key).or_insert([doc.init; 4])[action.index()] = v;
                    }
                    tables.push(m);
                }
                Store::Factorized(tables)
            }
            QMode::Joint => {
                let agents = doc.agents.len();
                if agents == 0 || agents > JOINT_MAX_AGENTS {
                    return Err(LearnerError::JointTooLarge(agents));
                }
                let width = 4usize.pow(agents as u32);
                let mut tables = Vec::with_capacity(agents);
                for entries in &doc.agents {
                    let mut m: HashMap<String, Vec<f64>> = HashMap::new();
                    for (k, &v) in entries {
                        let (state, actions) = k.rsplit_once('|').ok_or_else(|| bad(k))?;
                        let joint = actions
                            .split(',')
                            .map(Action::parse)
                            .collect::<Option<Vec<_>>>()
                            .filter(|j| j.len() == agents)
                            .ok_or_else(|| bad(k))?;
                        m.entry(state.to_string())
                            .or_insert_with(|| vec![doc.init; width])[joint_index(&joint)] = v;
                    }
                    tables.push(m);
                }
                Store::Joint { agents, tables }
            }
        };
        Ok(Self {
            init: doc.init,
            store,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct QTableDoc {
    mode: QMode,
    init: f64,
    agents: Vec<BTreeMap<String, f64>>,
}

fn parse_cell(s: &str) -> Option<Cell> {
    let inner = s.strip_prefix('(')?.strip_suffix(')')?;
    let (r, c) = inner.split_once(',')?;
    Some(Cell::new(r.parse().ok()?, c.parse().ok()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridConfig;
    use proptest::prelude::*;

    #[test]
    fn unseen_entries_read_init() {
        let t = QTable::factorized();
        let key = LocalKey {
            cell: Cell::new(1, 2),
            target: Cell::new(3, 4),
        };
        assert_eq!(t.local(5, &key), [1.0; 4]);
        let j = QTable::joint(2).unwrap();
        assert_eq!(j.joint_value(1, "x", 7), 1.0);
    }

    #[test]
    fn joint_size_guard() {
        assert_eq!(QTable::joint(4), Err(LearnerError::JointTooLarge(4)));
        assert_eq!(QTable::joint(0), Err(LearnerError::JointTooLarge(0)));
    }

    #[test]
    fn joint_index_round_trip() {
        for n in 1..=3 {
            for i in 0..4usize.pow(n as u32) {
                assert_eq!(joint_index(&joint_from_index(i, n)), i);
            }
        }
        assert_eq!(joint_from_index(0, 2), vec![Action::Up, Action::Up]);
        assert_eq!(joint_from_index(1, 2), vec![Action::Up, Action::Down]);
    }

    #[test]
    fn factorized_key_format() {
        let mut t = QTable::factorized();
        let key = LocalKey {
            cell: Cell::new(1, 2),
            target: Cell::new(3, 4),
        };
        t.local_mut(0, key)[Action::Right.index()] = 1.9;
        let json = t.to_json();
        assert!(json.contains("\"(1,2)|(3,4)|Right\": 1.9"), "{json}");
        assert_eq!(QTable::from_json(&json).unwrap(), t);
    }

    #[test]
    fn joint_round_trip() {
        let cfg = GridConfig::with_size(3, 3);
        let w = WorldState::new(&cfg, &[Cell::new(0, 0), Cell::new(1, 1)], &[Cell::new(2, 2)])
            .unwrap();
        let mut t = QTable::joint(2).unwrap();
        let key = world_key(&w);
        assert_eq!(key, "(0,0);(1,1)>(2,2)");
        t.joint_row_mut(1, &key)[5] = -0.25;
        let back = QTable::from_json(&t.to_json()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.joint_value(1, &key, 5), -0.25);
    }

    #[test]
    fn rejects_malformed_documents() {
        assert!(QTable::from_json("[]").is_err());
        let doc = r#"{"mode":"factorized","init":1.0,"agents":[{"(1,2)|Up":0.5}]}"#;
        assert!(matches!(QTable::from_json(doc), Err(LearnerError::Format(_))));
    }

    proptest! {
        #[test]
        fn factorized_json_round_trips(
            entries in prop::collection::vec(
                (0usize..3, 0u32..25, 0u32..25, 0u32..25, 0u32..25, 0usize..4, -1e6f64..1e6),
                0..40,
            )
        ) {
            let mut t = QTable::factorized();
            for (agent, r, c, rv, cv, a, v) in entries {
                let key = LocalKey { cell: Cell::new(r, c), target: Cell::new(rv, cv) };
                t.local_mut(agent, key)[a] = v;
            }
            let text = t.to_json();
            let back = QTable::from_json(&text).unwrap();
            prop_assert_eq!(back.to_json(), text);
            prop_assert_eq!(back, t);
        }
    }
}
