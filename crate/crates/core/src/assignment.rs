//! Exact volunteer-victim assignment.
//!
//! Rows of a [`CostMatrix`] are victims and columns are volunteers. Each
//! volunteer serves at most one victim per round. When there are at least as
//! many volunteers as victims every victim is covered; otherwise the best
//! round covering as many victims as there are volunteers is returned.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{manhattan, WorldState};

/// Largest side the exhaustive solver accepts.
pub const BRUTE_FORCE_LIMIT: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssignError {
    #[error("cost matrix entries must be finite and nonnegative (row {row}, col {col})")]
    InvalidCost { row: usize, col: usize },
    #[error("cost matrix data has {got} entries, expected {expected}")]
    Shape { expected: usize, got: usize },
    #[error("brute force supports at most {BRUTE_FORCE_LIMIT} per side, got {0}")]
    TooLarge(usize),
    #[error("world needs at least one agent and one waiting victim")]
    EmptyPopulation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    victims: usize,
    volunteers: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(victims: usize, volunteers: usize, data: Vec<f64>) -> Result<Self, AssignError> {
        if data.len() != victims * volunteers {
            return Err(AssignError::Shape {
                expected: victims * volunteers,
                got: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(AssignError::InvalidCost {
                row: pos / volunteers,
                col: pos % volunteers,
            });
        }
        Ok(Self {
            victims,
            volunteers,
            data,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, AssignError> {
        let volunteers = rows.first().map_or(0, Vec::len);
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        if rows.iter().any(|r| r.len() != volunteers) {
            return Err(AssignError::Shape {
                expected: rows.len() * volunteers,
                got: data.len(),
            });
        }
        Self::new(rows.len(), volunteers, data)
    }

    pub fn victims(&self) -> usize {
        self.victims
    }

    pub fn volunteers(&self) -> usize {
        self.volunteers
    }

    /// Cost for victim `victim` served by volunteer `volunteer`.
    pub fn get(&self, victim: usize, volunteer: usize) -> f64 {
        self.data[victim * self.volunteers + volunteer]
    }

    pub fn scaled(&self, factor: f64) -> Result<Self, AssignError> {
        Self::new(
            self.victims,
            self.volunteers,
            self.data.iter().map(|d| d * factor).collect(),
        )
    }
}

/// A volunteer-to-victim pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pair {
    pub volunteer: usize,
    pub victim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// Sorted by volunteer, then victim.
    pub pairs: Vec<Pair>,
    pub total_cost: f64,
}

impl Assignment {
    /// Canonicalizes pair order and sums costs in that order, so two solvers
    /// that pick the same pairs report bit-identical totals.
    pub fn from_pairs(costs: &CostMatrix, mut pairs: Vec<Pair>) -> Self {
        pairs.sort_unstable();
        let total_cost = pairs.iter().map(|p| costs.get(p.victim, p.volunteer)).sum();
        Self { pairs, total_cost }
    }

    /// True when no volunteer serves two victims and no victim is served twice.
    pub fn is_valid_for(&self, costs: &CostMatrix) -> bool {
        let mut vol = vec![false; costs.volunteers];
        let mut vic = vec![false; costs.victims];
        for p in &self.pairs {
            if p.volunteer >= costs.volunteers || p.victim >= costs.victims {
                return false;
            }
            if std::mem::replace(&mut vol[p.volunteer], true)
                || std::mem::replace(&mut vic[p.victim], true)
            {
                return false;
            }
        }
        self.pairs.len() == costs.victims.min(costs.volunteers)
    }
}

/// Manhattan distances from every waiting victim (rows) to every agent (columns).
pub fn cost_matrix(world: &WorldState) -> Result<CostMatrix, AssignError> {
    let victims = world.waiting_cells();
    if world.agents.is_empty() || victims.is_empty() {
        return Err(AssignError::EmptyPopulation);
    }
    let data = victims
        .iter()
        .flat_map(|&v| world.agents.iter().map(move |a| manhattan(v, a.cell) as f64))
        .collect();
    CostMatrix::new(victims.len(), world.agents.len(), data)
}

/// Exhaustive search over all injective matchings of the smaller side.
/// Ties on cost resolve to the lexicographically smallest pair list.
pub fn brute_force_assign(costs: &CostMatrix) -> Result<Assignment, AssignError> {
    let (n, m) = (costs.victims, costs.volunteers);
    if n.max(m) > BRUTE_FORCE_LIMIT {
        return Err(AssignError::TooLarge(n.max(m)));
    }
    if n == 0 || m == 0 {
        return Ok(Assignment {
            pairs: Vec::new(),
            total_cost: 0.0,
        });
    }

    // Map each member of the smaller side, in order, onto a distinct member
    // of the larger side.
    let victims_smaller = n <= m;
    let (small, large) = if victims_smaller { (n, m) } else { (m, n) };
    let pair = |s: usize, l: usize| {
        if victims_smaller {
            Pair {
                volunteer: l,
                victim: s,
            }
        } else {
            Pair {
                volunteer: s,
                victim: l,
            }
        }
    };

    struct Search<'a, F: Fn(usize, usize) -> Pair> {
        costs: &'a CostMatrix,
        pair: F,
        small: usize,
        large: usize,
        used: Vec<bool>,
        current: Vec<usize>,
        best: Option<Assignment>,
    }

    impl<F: Fn(usize, usize) -> Pair> Search<'_, F> {
        fn run(&mut self) {
            let depth = self.current.len();
            if depth == self.small {
                let pairs = self
                    .current
                    .iter()
                    .enumerate()
                    .map(|(s, &l)| (self.pair)(s, l))
                    .collect();
                let candidate = Assignment::from_pairs(self.costs, pairs);
                let better = match &self.best {
                    None => true,
                    Some(b) => {
                        candidate.total_cost < b.total_cost
                            || (candidate.total_cost == b.total_cost && candidate.pairs < b.pairs)
                    }
                };
                if better {
                    self.best = Some(candidate);
                }
                return;
            }
            for l in 0..self.large {
                if !self.used[l] {
                    self.used[l] = true;
                    self.current.push(l);
                    self.run();
                    self.current.pop();
                    self.used[l] = false;
                }
            }
        }
    }

    let mut search = Search {
        costs,
        pair,
        small,
        large,
        used: vec![false; large],
        current: Vec::with_capacity(small),
        best: None,
    };
    search.run();
    Ok(search.best.expect("at least one matching exists"))
}

/// Hungarian algorithm (shortest augmenting paths with potentials) on the
/// zero-padded square matrix. Padded pairs are dropped from the result.
pub fn hungarian_assign(costs: &CostMatrix) -> Assignment {
    let (n, m) = (costs.victims, costs.volunteers);
    let size = n.max(m);
    if n == 0 || m == 0 {
        return Assignment {
            pairs: Vec::new(),
            total_cost: 0.0,
        };
    }
    let cost = |row: usize, col: usize| -> f64 {
        if row < n && col < m {
            costs.get(row, col)
        } else {
            0.0
        }
    };

    // 1-based arrays; column 0 is the virtual root of each augmenting search.
    let mut u = vec![0.0f64; size + 1];
    let mut v = vec![0.0f64; size + 1];
    let mut owner = vec![0usize; size + 1];
    let mut way = vec![0usize; size + 1];

    for row in 1..=size {
        owner[0] = row;
        let mut col0 = 0usize;
        let mut min_slack = vec![f64::INFINITY; size + 1];
        let mut used = vec![false; size + 1];
        loop {
            used[col0] = true;
            let row0 = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0usize;
            for col in 1..=size {
                if used[col] {
                    continue;
                }
                let slack = cost(row0 - 1, col - 1) - u[row0] - v[col];
                if slack < min_slack[col] {
                    min_slack[col] = slack;
                    way[col] = col0;
                }
                if min_slack[col] < delta {
                    delta = min_slack[col];
                    col1 = col;
                }
            }
            for col in 0..=size {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    min_slack[col] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }

    let pairs = (1..=size)
        .filter_map(|col| {
            let row = owner[col];
            (row >= 1 && row <= n && col <= m).then(|| Pair {
                volunteer: col - 1,
                victim: row - 1,
            })
        })
        .collect();
    Assignment::from_pairs(costs, pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Cell, GridConfig};

    fn pairs(list: &[(usize, usize)]) -> Vec<Pair> {
        list.iter()
            .map(|&(volunteer, victim)| Pair { volunteer, victim })
            .collect()
    }

    #[test]
    fn cost_matrix_from_world() {
        let cfg = GridConfig::default();
        let w = WorldState::new(&cfg, &[Cell::new(0, 0)], &[Cell::new(0, 3)]).unwrap();
        assert_eq!(cost_matrix(&w).unwrap(), CostMatrix::from_rows(&[vec![3.0]]).unwrap());

        let w = WorldState::new(
            &cfg,
            &[Cell::new(0, 0), Cell::new(4, 4)],
            &[Cell::new(0, 1), Cell::new(4, 3)],
        )
        .unwrap();
        assert_eq!(
            cost_matrix(&w).unwrap(),
            CostMatrix::from_rows(&[vec![1.0, 7.0], vec![7.0, 1.0]]).unwrap()
        );

        let w = WorldState::new(&cfg, &[Cell::new(2, 2)], &[Cell::new(2, 2)]).unwrap();
        assert_eq!(cost_matrix(&w).unwrap().get(0, 0), 0.0);
    }

    #[test]
    fn brute_force_examples() {
        let c = CostMatrix::from_rows(&[vec![1.0, 7.0], vec![7.0, 1.0]]).unwrap();
        let a = brute_force_assign(&c).unwrap();
        assert_eq!(a.pairs, pairs(&[(0, 0), (1, 1)]));
        assert_eq!(a.total_cost, 2.0);

        let a = brute_force_assign(&CostMatrix::from_rows(&[vec![5.0]]).unwrap()).unwrap();
        assert_eq!(a.total_cost, 5.0);

        let z = CostMatrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let a = brute_force_assign(&z).unwrap();
        assert_eq!(a.total_cost, 0.0);
        assert_eq!(a.pairs, pairs(&[(0, 0), (1, 1)]));
    }

    #[test]
    fn brute_force_size_limit() {
        let c = CostMatrix::new(9, 1, vec![1.0; 9]).unwrap();
        assert_eq!(brute_force_assign(&c), Err(AssignError::TooLarge(9)));
        let c = CostMatrix::new(8, 8, vec![1.0; 64]).unwrap();
        assert!(brute_force_assign(&c).is_ok());
    }

    #[test]
    fn hungarian_examples() {
        let mut rows = vec![vec![1.0; 4]; 4];
        for (i, row) in rows.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        let a = hungarian_assign(&CostMatrix::from_rows(&rows).unwrap());
        assert_eq!(a.pairs, pairs(&[(0, 0), (1, 1), (2, 2), (3, 3)]));
        assert_eq!(a.total_cost, 0.0);

        let a = hungarian_assign(&CostMatrix::from_rows(&[vec![2.0, 1.0, 9.0]]).unwrap());
        assert_eq!(a.pairs, pairs(&[(1, 0)]));
        assert_eq!(a.total_cost, 1.0);

        // More victims than volunteers: best single round covers two victims.
        let c = CostMatrix::from_rows(&[vec![4.0, 2.0], vec![1.0, 8.0], vec![3.0, 3.0]]).unwrap();
        let a = hungarian_assign(&c);
        assert!(a.is_valid_for(&c));
        assert_eq!(a.total_cost, 3.0);
    }

    #[test]
    fn rejects_bad_costs() {
        assert!(matches!(
            CostMatrix::from_rows(&[vec![1.0, -1.0]]),
            Err(AssignError::InvalidCost { row: 0, col: 1 })
        ));
        assert!(CostMatrix::from_rows(&[vec![f64::NAN]]).is_err());
        assert!(CostMatrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }
}
