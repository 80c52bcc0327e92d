//! Occupancy grid, headings and the three-cue movement model.
//!
//! Row 0 is the north edge of the map; rows grow southward and columns
//! grow eastward.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cell edge, one user step.
pub const DEFAULT_RESOLUTION_M: f64 = 0.40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    pub fn manhattan(self, other: Cell) -> usize {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }

    pub fn chebyshev(self, other: Cell) -> usize {
        self.row.abs_diff(other.row).max(self.col.abs_diff(other.col))
    }

    /// Center of the cell in metres, as (x east, y south).
    pub fn center_m(self, resolution: f64) -> (f64, f64) {
        (
            (self.col as f64 + 0.5) * resolution,
            (self.row as f64 + 0.5) * resolution,
        )
    }

    pub fn euclidean_m(self, other: Cell, resolution: f64) -> f64 {
        let (ax, ay) = self.center_m(resolution);
        let (bx, by) = other.center_m(resolution);
        (ax - bx).hypot(ay - by)
    }

    /// One cell along `heading`, or `None` when that would leave the
    /// non-negative quadrant.
    pub fn step(self, heading: Heading) -> Option<Cell> {
        let (dr, dc) = heading.delta();
        let row = self.row.checked_add_signed(dr)?;
        let col = self.col.checked_add_signed(dc)?;
        Some(Cell { row, col })
    }
}

impl From<[usize; 2]> for Cell {
    fn from([row, col]: [usize; 2]) -> Self {
        Cell { row, col }
    }
}

impl From<Cell> for [usize; 2] {
    fn from(c: Cell) -> Self {
        [c.row, c.col]
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellState {
    Free,
    StaticObstacle,
    SocialBlocked,
    SeatVacant,
    SeatOccupied,
    Human,
}

impl CellState {
    pub fn is_traversable(self) -> bool {
        matches!(self, CellState::Free | CellState::SeatVacant)
    }

    pub fn is_goal_eligible(self) -> bool {
        self == CellState::SeatVacant
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Heading {
    North,
    East,
    South,
    West,
}

impl Heading {
    /// Neighbor enumeration order used everywhere ties must be broken.
    pub const ALL: [Heading; 4] = [Heading::North, Heading::East, Heading::South, Heading::West];

    pub fn delta(self) -> (isize, isize) {
        match self {
            Heading::North => (-1, 0),
            Heading::East => (0, 1),
            Heading::South => (1, 0),
            Heading::West => (0, -1),
        }
    }

    pub fn turn_left(self) -> Heading {
        match self {
            Heading::North => Heading::West,
            Heading::West => Heading::South,
            Heading::South => Heading::East,
            Heading::East => Heading::North,
        }
    }

    pub fn turn_right(self) -> Heading {
        match self {
            Heading::North => Heading::East,
            Heading::East => Heading::South,
            Heading::South => Heading::West,
            Heading::West => Heading::North,
        }
    }

    pub fn reverse(self) -> Heading {
        self.turn_left().turn_left()
    }

    /// Compass angle in degrees, clockwise from north.
    pub fn bearing_deg(self) -> f64 {
        match self {
            Heading::North => 0.0,
            Heading::East => 90.0,
            Heading::South => 180.0,
            Heading::West => 270.0,
        }
    }

    /// Heading of a unit move between two orthogonally adjacent cells.
    pub fn between(from: Cell, to: Cell) -> Option<Heading> {
        Heading::ALL.into_iter().find(|h| from.step(*h) == Some(to))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pose {
    pub cell: Cell,
    pub heading: Heading,
}

impl Pose {
    pub const fn new(cell: Cell, heading: Heading) -> Self {
        Self { cell, heading }
    }
}

/// Outcome of mapping a one-cell move onto the three-cue vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelativeMove {
    Forward,
    Left,
    Right,
    NotReachableInOneMove,
}

impl RelativeMove {
    /// Heading after performing this move from `heading`.
    pub fn apply(self, heading: Heading) -> Heading {
        match self {
            RelativeMove::Forward | RelativeMove::NotReachableInOneMove => heading,
            RelativeMove::Left => heading.turn_left(),
            RelativeMove::Right => heading.turn_right(),
        }
    }
}

/// Classifies the displacement `from.cell -> to` against `from.heading`.
/// Backward and non-adjacent targets are not expressible as one cue.
pub fn relative_direction(from: Pose, to: Cell) -> RelativeMove {
    let Some(dir) = Heading::between(from.cell, to) else {
        return RelativeMove::NotReachableInOneMove;
    };
    if dir == from.heading {
        RelativeMove::Forward
    } else if dir == from.heading.turn_left() {
        RelativeMove::Left
    } else if dir == from.heading.turn_right() {
        RelativeMove::Right
    } else {
        RelativeMove::NotReachableInOneMove
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    rows: usize,
    cols: usize,
    resolution: f64,
    cells: Vec<CellState>,
}

impl GridMap {
    /// An all-free grid covering `width_m x length_m`, rounding partial
    /// cells up so the whole room is covered.
    pub fn from_dimensions(width_m: f64, length_m: f64, resolution: f64) -> Result<Self> {
        for (name, v) in [("width", width_m), ("length", length_m), ("resolution", resolution)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        let rows = cells_covering(length_m, resolution);
        let cols = cells_covering(width_m, resolution);
        Self::new(rows, cols, resolution)
    }

    pub fn new(rows: usize, cols: usize, resolution: f64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!("empty grid {rows}x{cols}")));
        }
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        Ok(Self {
            rows,
            cols,
            resolution,
            cells: vec![CellState::Free; rows * cols],
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn in_bounds(&self, cell: Cell) -> bool {
        cell.row < self.rows && cell.col < self.cols
    }

    pub fn index(&self, cell: Cell) -> usize {
        cell.row * self.cols + cell.col
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new(index / self.cols, index % self.cols)
    }

    fn check(&self, cell: Cell) -> Result<()> {
        if self.in_bounds(cell) {
            Ok(())
        } else {
            Err(Error::OutOfRange {
                cell,
                rows: self.rows,
                cols: self.cols,
            })
        }
    }

    pub fn state(&self, cell: Cell) -> Result<CellState> {
        self.check(cell)?;
        Ok(self.cells[self.index(cell)])
    }

    /// State lookup that treats out-of-bounds cells as static obstacles.
    pub fn state_or_wall(&self, cell: Cell) -> CellState {
        if self.in_bounds(cell) {
            self.cells[self.index(cell)]
        } else {
            CellState::StaticObstacle
        }
    }

    pub fn set_state(&mut self, cell: Cell, state: CellState) -> Result<()> {
        self.check(cell)?;
        let i = self.index(cell);
        self.cells[i] = state;
        Ok(())
    }

    pub fn is_traversable(&self, cell: Cell) -> bool {
        self.state_or_wall(cell).is_traversable()
    }

    pub fn goal_eligible(&self, cell: Cell) -> bool {
        self.in_bounds(cell) && self.cells[self.index(cell)].is_goal_eligible()
    }

    /// In-bounds orthogonal neighbors in N, E, S, W order.
    pub fn neighbors4(&self, cell: Cell) -> Vec<Cell> {
        Heading::ALL
            .into_iter()
            .filter_map(|h| cell.step(h))
            .filter(|c| self.in_bounds(*c))
            .collect()
    }

    /// In-bounds cells within Chebyshev distance `radius` of `cell`,
    /// including `cell` itself.
    pub fn chebyshev_ball(&self, cell: Cell, radius: usize) -> impl Iterator<Item = Cell> + '_ {
        let r0 = cell.row.saturating_sub(radius);
        let r1 = (cell.row + radius).min(self.rows - 1);
        let c0 = cell.col.saturating_sub(radius);
        let c1 = (cell.col + radius).min(self.cols - 1);
        (r0..=r1).flat_map(move |r| (c0..=c1).map(move |c| Cell::new(r, c)))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Cell, CellState)> + '_ {
        self.cells.iter().enumerate().map(|(i, s)| (self.cell_at(i), *s))
    }

    /// Breadth-first move count between two cells over traversable cells.
    /// Runtime reachability check for generation and failure attribution;
    /// the planner itself never calls this.
    pub fn bfs_distance(&self, from: Cell, to: Cell) -> Option<usize> {
        if !self.is_traversable(from) || !self.is_traversable(to) {
            return None;
        }
        let mut dist = vec![usize::MAX; self.cells.len()];
        let mut queue = VecDeque::new();
        dist[self.index(from)] = 0;
        queue.push_back(from);
        while let Some(c) = queue.pop_front() {
            let d = dist[self.index(c)];
            if c == to {
                return Some(d);
            }
            for n in self.neighbors4(c) {
                let i = self.index(n);
                if dist[i] == usize::MAX && self.is_traversable(n) {
                    dist[i] = d + 1;
                    queue.push_back(n);
                }
            }
        }
        None
    }
}

fn cells_covering(extent_m: f64, resolution: f64) -> usize {
    // Absorb representation error so 4.0 / 0.4 stays 10 cells.
    let ratio = extent_m / resolution;
    let rounded = ratio.round();
    if (ratio - rounded).abs() < 1e-9 {
        rounded as usize
    } else {
        ratio.ceil() as usize
    }
}
