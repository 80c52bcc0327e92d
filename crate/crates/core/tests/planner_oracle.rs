use canesim_core::gridworld::{Cell, CellState, GridMap};
use canesim_core::planner::{CostChange, DStarLite, GoalPolicy};
use canesim_testkit::graph::dijkstra_grid;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_grid(rng: &mut ChaCha8Rng, rows: usize, cols: usize, density: f64) -> GridMap {
    let mut map = GridMap::new(rows, cols, 0.4).unwrap();
    for r in 0..rows {
        for c in 0..cols {
            if rng.random_bool(density) {
                map.set_state(Cell::new(r, c), CellState::StaticObstacle).unwrap();
            }
        }
    }
    map
}

fn oracle(map: &GridMap, start: Cell, goal: Cell) -> Option<u32> {
    dijkstra_grid(
        map.rows(),
        map.cols(),
        |r, c| !map.is_traversable(Cell::new(r, c)),
        (start.row, start.col),
        (goal.row, goal.col),
    )
}

fn random_free(rng: &mut ChaCha8Rng, map: &GridMap) -> Cell {
    loop {
        let c = Cell::new(rng.random_range(0..map.rows()), rng.random_range(0..map.cols()));
        if map.is_traversable(c) {
            return c;
        }
    }
}

fn assert_valid_path(map: &GridMap, path: &[Cell], start: Cell, goal: Cell, cost: u32) {
    assert_eq!(path.first(), Some(&start));
    assert_eq!(path.last(), Some(&goal));
    assert_eq!(path.len(), cost as usize + 1);
    assert!(path.len() <= map.len());
    for w in path.windows(2) {
        assert_eq!(w[0].manhattan(w[1]), 1, "non-adjacent step {} -> {}", w[0], w[1]);
    }
    for c in path {
        assert!(map.is_traversable(*c), "path enters blocked cell {c}");
    }
}

#[test]
fn matches_dijkstra_on_random_grids() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xD57A);
    let mut solvable = 0;
    let mut unsolvable = 0;
    while solvable < 200 {
        let density = rng.random_range(0.0..=0.30);
        let map = random_grid(&mut rng, 20, 20, density);
        let start = random_free(&mut rng, &map);
        let goal = random_free(&mut rng, &map);
        let expected = oracle(&map, start, goal);
        let mut p = DStarLite::with_policy(&map, start, goal, GoalPolicy::AnyTraversable).unwrap();
        p.compute_shortest_path(&map);
        assert_eq!(p.start_cost().value(), expected, "start {start} goal {goal}");
        assert_eq!(p.stats().key_order_violations, 0);
        match expected {
            Some(cost) => {
                solvable += 1;
                let path = p.extract_path(&map).unwrap();
                assert_valid_path(&map, &path, start, goal, cost);
            }
            None => {
                unsolvable += 1;
                assert!(p.extract_path(&map).is_err());
            }
        }
    }
    assert!(unsolvable < 200);
}

#[test]
fn incremental_replan_matches_fresh_plan() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x4E91);
    for _ in 0..100 {
        let mut map = random_grid(&mut rng, 15, 15, 0.2);
        let goal = random_free(&mut rng, &map);
        let mut start = random_free(&mut rng, &map);
        let mut p = DStarLite::with_policy(&map, start, goal, GoalPolicy::AnyTraversable).unwrap();
        p.compute_shortest_path(&map);
        assert_eq!(p.start_cost().value(), oracle(&map, start, goal));

        let rounds = rng.random_range(1..=10);
        for _ in 0..rounds {
            // advance along the current path when one exists
            if let Ok(path) = p.extract_path(&map) {
                if path.len() > 1 {
                    start = path[1];
                }
            }
            let toggles = rng.random_range(1..=10);
            let mut changes = Vec::new();
            for _ in 0..toggles {
                let c = Cell::new(rng.random_range(0..15), rng.random_range(0..15));
                if c == start || c == goal {
                    continue;
                }
                let now = if map.is_traversable(c) {
                    CellState::StaticObstacle
                } else {
                    CellState::Free
                };
                map.set_state(c, now).unwrap();
                changes.push(CostChange {
                    cell: c,
                    new_traversable: now.is_traversable(),
                });
            }
            p.apply_changes(&map, &changes, start).unwrap();
            p.compute_shortest_path(&map);
            assert_eq!(p.stats().key_order_violations, 0);

            let mut fresh = DStarLite::with_policy(&map, start, goal, GoalPolicy::AnyTraversable).unwrap();
            fresh.compute_shortest_path(&map);
            assert_eq!(p.start_cost(), fresh.start_cost());
            assert_eq!(p.start_cost().value(), oracle(&map, start, goal));
            if let Some(cost) = p.start_cost().value() {
                let path = p.extract_path(&map).unwrap();
                assert_valid_path(&map, &path, start, goal, cost);
            }
        }
    }
}

#[test]
fn paths_are_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let map = random_grid(&mut rng, 20, 20, 0.2);
    let start = random_free(&mut rng, &map);
    let goal = random_free(&mut rng, &map);
    let run = || {
        let mut p = DStarLite::with_policy(&map, start, goal, GoalPolicy::AnyTraversable).unwrap();
        p.compute_shortest_path(&map);
        p.extract_path(&map).ok()
    };
    assert_eq!(run(), run());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn optimal_on_arbitrary_small_grids(
        rows in 1usize..8,
        cols in 1usize..8,
        bits in proptest::collection::vec(any::<bool>(), 64),
        s in (0usize..64, 0usize..64),
    ) {
        let mut map = GridMap::new(rows, cols, 0.4).unwrap();
        for r in 0..rows {
            for c in 0..cols {
                // roughly one cell in four blocked
                if bits[(r * cols + c) % 64] && bits[(r * 7 + c * 3) % 64] {
                    map.set_state(Cell::new(r, c), CellState::StaticObstacle).unwrap();
                }
            }
        }
        let start = map.cell_at(s.0 % map.len());
        let goal = map.cell_at(s.1 % map.len());
        prop_assume!(map.is_traversable(start) && map.is_traversable(goal));
        let mut p = DStarLite::with_policy(&map, start, goal, GoalPolicy::AnyTraversable).unwrap();
        p.compute_shortest_path(&map);
        prop_assert_eq!(p.start_cost().value(), oracle(&map, start, goal));
    }
}
