use proptest::prelude::*;
use rand::Rng;
use resq_core::assignment::{brute_force_assign, cost_matrix, hungarian_assign, CostMatrix};
use resq_core::harness::stream_rng;
use resq_core::learner::greedy_match;
use resq_core::{Cell, GridConfig, WorldState};

fn cells<R: Rng>(rng: &mut R, n: usize) -> Vec<Cell> {
    (0..n).map(|_| Cell::new(rng.gen_range(0..25), rng.gen_range(0..25))).collect()
}

#[test]
fn hungarian_matches_brute_force_up_to_seven() {
    let grid = GridConfig::default();
    for n in 2..=7usize {
        let mut rng = stream_rng(n as u64, 9, 3);
        for _ in 0..1000 {
            let (agents, victims) = (cells(&mut rng, n), cells(&mut rng, n));
            let world = WorldState::new(&grid, &agents, &victims).unwrap();
            let costs = cost_matrix(&world).unwrap();
            let exact = brute_force_assign(&costs).unwrap();
            let fast = hungarian_assign(&costs);
            assert_eq!(exact.total_cost, fast.total_cost, "n={n}");
            assert!(fast.is_valid_for(&costs));
            let greedy = greedy_match(&agents, &victims).unwrap();
            assert!(greedy.total_distance as f64 >= exact.total_cost);
        }
    }
}

#[test]
fn rectangular_instances_agree() {
    let mut rng = stream_rng(11, 9, 4);
    for _ in 0..500 {
        let (rows, cols) = (rng.gen_range(1..=6usize), rng.gen_range(1..=6usize));
        let data: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(0..40) as f64).collect();
        let costs = CostMatrix::new(rows, cols, data).unwrap();
        assert_eq!(brute_force_assign(&costs).unwrap().total_cost, hungarian_assign(&costs).total_cost);
    }
}

#[test]
fn single_victim_greedy_pair_is_optimal() {
    let grid = GridConfig::default();
    let mut rng = stream_rng(3, 9, 5);
    for _ in 0..1000 {
        let n = rng.gen_range(1..=6);
        let agents = cells(&mut rng, n);
        let victims = cells(&mut rng, 1);
        let world = WorldState::new(&grid, &agents, &victims).unwrap();
        let exact = brute_force_assign(&cost_matrix(&world).unwrap()).unwrap();
        let greedy = greedy_match(&agents, &victims).unwrap();
        assert_eq!(greedy.exclusive_distance() as f64, exact.total_cost);
        assert!(greedy.total_distance as f64 >= exact.total_cost);
    }
}

proptest! {
    #[test]
    fn optimum_beats_random_assignments(seed in 0u64..5000, n in 1usize..6) {
        let mut rng = stream_rng(seed, 9, 6);
        let data: Vec<f64> = (0..n * n).map(|_| rng.gen_range(0.0..50.0)).collect();
        let costs = CostMatrix::new(n, n, data).unwrap();
        let best = hungarian_assign(&costs).total_cost;
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let random: f64 = perm.iter().enumerate().map(|(v, &u)| costs.get(v, u)).sum();
        prop_assert!(best <= random + 1e-9);
    }

    #[test]
    fn positive_scaling_keeps_the_pairs(seed in 0u64..5000, factor in 0.01f64..100.0) {
        let mut rng = stream_rng(seed, 9, 7);
        // Distinct powers of two give every assignment a distinct total.
        let mut values: Vec<f64> = (0..25).map(|v| f64::powi(2.0, v)).collect();
        for i in (1..25).rev() {
            values.swap(i, rng.gen_range(0..=i));
        }
        let costs = CostMatrix::new(5, 5, values).unwrap();
        let a = hungarian_assign(&costs);
        let b = hungarian_assign(&costs.scaled(factor).unwrap());
        prop_assert_eq!(a.pairs, b.pairs);
    }
}

#[test]
fn greedy_can_exceed_the_optimum_with_two_agents() {
    let grid = GridConfig::default();
    let agents = [Cell::new(0, 2), Cell::new(0, 5)];
    let victims = [Cell::new(0, 3), Cell::new(0, 0)];
    let world = WorldState::new(&grid, &agents, &victims).unwrap();
    let exact = brute_force_assign(&cost_matrix(&world).unwrap()).unwrap();
    assert_eq!(greedy_match(&agents, &victims).unwrap().total_distance, 6);
    assert_eq!(exact.total_cost, 4.0);
}
