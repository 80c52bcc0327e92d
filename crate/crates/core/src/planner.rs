//! D* Lite over the occupancy grid.
//!
//! The search runs backward from the goal, so the start may move between
//! calls without invalidating the queue: keys are offset by the key
//! modifier `km`, which grows by the heuristic distance the start has
//! travelled. Edge costs are 1 between traversable 4-neighbors and
//! infinite into or out of any non-traversable cell. The heuristic is
//! Manhattan distance, which is consistent for that graph.
//!
//! Costs are integers with a saturating infinity, so optimality checks
//! against an oracle can use exact equality.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridworld::{Cell, GridMap, Heading};

/// Path cost with a saturating infinity.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cost(u32);

impl Cost {
    pub const ZERO: Cost = Cost(0);
    pub const INFINITY: Cost = Cost(u32::MAX);

    pub const fn new(v: u32) -> Self {
        Cost(v)
    }

    pub fn is_finite(self) -> bool {
        self != Cost::INFINITY
    }

    pub fn value(self) -> Option<u32> {
        self.is_finite().then_some(self.0)
    }

    fn plus(self, rhs: u32) -> Cost {
        if self.is_finite() {
            Cost(self.0.saturating_add(rhs).min(u32::MAX - 1))
        } else {
            Cost::INFINITY
        }
    }
}

impl fmt::Debug for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.value() {
            Some(v) => write!(f, "{v}"),
            None => f.write_str("inf"),
        }
    }
}

/// Two-component priority, ordered lexicographically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PlannerKey {
    pub k1: Cost,
    pub k2: Cost,
}

/// A traversability toggle the caller has already written into the map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostChange {
    pub cell: Cell,
    pub new_traversable: bool,
}

/// Which goal cells `DStarLite::new` accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GoalPolicy {
    /// Only vacant seats.
    #[default]
    SeatOnly,
    /// Any traversable cell; used by tests and synthetic grids.
    AnyTraversable,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PlannerStats {
    pub expansions: u64,
    pub compute_calls: u64,
    /// Pops whose key was smaller than the previous pop in the same call.
    pub key_order_violations: u64,
}

#[derive(Debug, Clone)]
pub struct DStarLite {
    rows: usize,
    cols: usize,
    g: Vec<Cost>,
    rhs: Vec<Cost>,
    // Live key per vertex; heap entries whose key differs are stale.
    queued: Vec<Option<PlannerKey>>,
    heap: BinaryHeap<Reverse<(PlannerKey, usize)>>,
    km: u32,
    start: Cell,
    last_start: Cell,
    goal: Cell,
    stats: PlannerStats,
}

impl DStarLite {
    pub fn new(map: &GridMap, start: Cell, goal: Cell) -> Result<Self> {
        Self::with_policy(map, start, goal, GoalPolicy::SeatOnly)
    }

    pub fn with_policy(map: &GridMap, start: Cell, goal: Cell, policy: GoalPolicy) -> Result<Self> {
        for (name, c) in [("start", start), ("goal", goal)] {
            if !map.in_bounds(c) {
                return Err(Error::InvalidArgument(format!(
                    "{name} {c} outside {}x{} grid",
                    map.rows(),
                    map.cols()
                )));
            }
        }
        let ok = match policy {
            GoalPolicy::SeatOnly => map.goal_eligible(goal),
            GoalPolicy::AnyTraversable => map.is_traversable(goal),
        };
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "goal {goal} is {:?}, not a valid goal",
                map.state_or_wall(goal)
            )));
        }
        let n = map.len();
        let mut planner = Self {
            rows: map.rows(),
            cols: map.cols(),
            g: vec![Cost::INFINITY; n],
            rhs: vec![Cost::INFINITY; n],
            queued: vec![None; n],
            heap: BinaryHeap::new(),
            km: 0,
            start,
            last_start: start,
            goal,
            stats: PlannerStats::default(),
        };
        let gi = planner.idx(goal);
        planner.rhs[gi] = Cost::ZERO;
        let key = planner.key(gi);
        planner.push(gi, key);
        Ok(planner)
    }

    pub fn start(&self) -> Cell {
        self.start
    }

    pub fn goal(&self) -> Cell {
        self.goal
    }

    pub fn key_modifier(&self) -> u32 {
        self.km
    }

    pub fn stats(&self) -> &PlannerStats {
        &self.stats
    }

    pub fn g(&self, cell: Cell) -> Cost {
        self.g[self.idx(cell)]
    }

    pub fn rhs(&self, cell: Cell) -> Cost {
        self.rhs[self.idx(cell)]
    }

    /// Cost-to-goal of the current start after `compute_shortest_path`.
    pub fn start_cost(&self) -> Cost {
        self.g(self.start)
    }

    pub fn queue_len(&self) -> usize {
        self.queued.iter().filter(|k| k.is_some()).count()
    }

    pub fn is_queued(&self, cell: Cell) -> bool {
        self.queued[self.idx(cell)].is_some()
    }

    fn idx(&self, c: Cell) -> usize {
        c.row * self.cols + c.col
    }

    fn cell(&self, i: usize) -> Cell {
        Cell::new(i / self.cols, i % self.cols)
    }

    fn h(&self, a: Cell, b: Cell) -> u32 {
        a.manhattan(b) as u32
    }

    fn key(&self, i: usize) -> PlannerKey {
        let m = self.g[i].min(self.rhs[i]);
        PlannerKey {
            k1: m.plus(self.h(self.start, self.cell(i))).plus(self.km),
            k2: m,
        }
    }

    fn push(&mut self, i: usize, key: PlannerKey) {
        self.queued[i] = Some(key);
        self.heap.push(Reverse((key, i)));
    }

    /// Smallest live entry, discarding stale heap entries on the way.
    fn top(&mut self) -> Option<(PlannerKey, usize)> {
        while let Some(Reverse((key, i))) = self.heap.peek().copied() {
            if self.queued[i] == Some(key) {
                return Some((key, i));
            }
            self.heap.pop();
        }
        None
    }

    fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let c = self.cell(i);
        Heading::ALL.into_iter().filter_map(move |h| {
            let n = c.step(h)?;
            (n.row < self.rows && n.col < self.cols).then(|| self.idx(n))
        })
    }

    fn edge_cost(map: &GridMap, a: Cell, b: Cell) -> Option<u32> {
        (map.is_traversable(a) && map.is_traversable(b)).then_some(1)
    }

    fn update_vertex(&mut self, map: &GridMap, i: usize) {
        let u = self.cell(i);
        if u != self.goal {
            let best = self
                .neighbors(i)
                .filter_map(|j| Self::edge_cost(map, u, self.cell(j)).map(|c| self.g[j].plus(c)))
                .min()
                .unwrap_or(Cost::INFINITY);
            self.rhs[i] = best;
        }
        self.queued[i] = None;
        if self.g[i] != self.rhs[i] {
            let key = self.key(i);
            self.push(i, key);
        }
    }

    /// Expands vertices until the start is locally consistent and no queued
    /// key sorts below it. Unreachability leaves `g(start)` infinite.
    pub fn compute_shortest_path(&mut self, map: &GridMap) {
        self.stats.compute_calls += 1;
        let si = self.idx(self.start);
        let mut last_popped: Option<PlannerKey> = None;
        while let Some((k_old, u)) = self.top() {
            let start_key = self.key(si);
            if k_old >= start_key && self.rhs[si] == self.g[si] {
                break;
            }
            if let Some(prev) = last_popped {
                if k_old < prev {
                    self.stats.key_order_violations += 1;
                }
            }
            last_popped = Some(k_old);
            self.stats.expansions += 1;

            let k_new = self.key(u);
            if k_old < k_new {
                self.push(u, k_new);
            } else if self.g[u] > self.rhs[u] {
                self.g[u] = self.rhs[u];
                self.queued[u] = None;
                let preds: Vec<usize> = self.neighbors(u).collect();
                for p in preds {
                    self.update_vertex(map, p);
                }
            } else {
                self.g[u] = Cost::INFINITY;
                let mut affected: Vec<usize> = self.neighbors(u).collect();
                affected.push(u);
                for p in affected {
                    self.update_vertex(map, p);
                }
            }
        }
    }

    /// Folds traversability changes already applied to `map` and a moved
    /// start into the planner state. Call `compute_shortest_path` next.
    pub fn apply_changes(&mut self, map: &GridMap, changes: &[CostChange], new_start: Cell) -> Result<()> {
        if !map.in_bounds(new_start) {
            return Err(Error::InvalidArgument(format!("start {new_start} out of bounds")));
        }
        self.km = self.km.saturating_add(self.h(self.last_start, new_start));
        self.last_start = new_start;
        self.start = new_start;
        for change in changes {
            if !map.in_bounds(change.cell) {
                return Err(Error::OutOfRange {
                    cell: change.cell,
                    rows: self.rows,
                    cols: self.cols,
                });
            }
            let ci = self.idx(change.cell);
            let mut affected: Vec<usize> = self.neighbors(ci).collect();
            affected.push(ci);
            for v in affected {
                self.update_vertex(map, v);
            }
        }
        Ok(())
    }

    pub fn goal_feasible(&self, map: &GridMap) -> bool {
        map.is_traversable(self.goal)
    }

    /// Greedy descent over `g` from the start, ties broken N, E, S, W.
    pub fn extract_path(&self, map: &GridMap) -> Result<Vec<Cell>> {
        if !self.goal_feasible(map) {
            return Err(Error::GoalInfeasible(self.goal));
        }
        let unreachable = Error::Unreachable {
            start: self.start,
            goal: self.goal,
        };
        let Some(total) = self.start_cost().value() else {
            return Err(unreachable);
        };
        let mut path = Vec::with_capacity(total as usize + 1);
        let mut cur = self.start;
        path.push(cur);
        while cur != self.goal {
            if path.len() > self.rows * self.cols {
                return Err(unreachable);
            }
            let ci = self.idx(cur);
            let next = self
                .neighbors(ci)
                .filter_map(|j| {
                    let n = self.cell(j);
                    Self::edge_cost(map, cur, n).map(|c| (self.g[j].plus(c), n))
                })
                .filter(|(c, _)| c.is_finite())
                // first minimum wins, i.e. N, E, S, W order
                .min_by_key(|(c, _)| *c);
            match next {
                Some((_, n)) => {
                    cur = n;
                    path.push(n);
                }
                None => return Err(unreachable),
            }
        }
        Ok(path)
    }
}
