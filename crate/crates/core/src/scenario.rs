//! Scenario model, the versioned JSON fixture format, the mutable ground
//! truth a trial runs against, and seeded generators for the three suites.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridworld::{Cell, CellState, GridMap, Heading, Pose};
use crate::perception::{in_field_of_view, SensorConfig};
use crate::social::{ActivityClass, GroupId, HumanGroup, SocialConfig};

pub const FORMAT_VERSION: u32 = 1;
pub const MAX_GROUPS: usize = 2;
pub const MAX_PEOPLE: usize = 13;
const GENERATION_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub width_m: f64,
    pub length_m: f64,
    pub resolution_m: f64,
}

impl MapSpec {
    /// The 3 m x 5 m test room at the default 0.40 m resolution.
    pub fn field_room() -> Self {
        Self {
            width_m: 3.0,
            length_m: 5.0,
            resolution_m: crate::gridworld::DEFAULT_RESOLUTION_M,
        }
    }

    pub fn grid(&self) -> Result<GridMap> {
        GridMap::from_dimensions(self.width_m, self.length_m, self.resolution_m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seat {
    pub cell: Cell,
    pub occupied: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Trigger {
    /// Simulated seconds since the trial started.
    TimeS(f64),
    /// Number of completed user steps.
    Step(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", deny_unknown_fields)]
pub enum EventAction {
    SeatBecomesOccupied {
        seat: usize,
    },
    GroupVacates {
        group: GroupId,
    },
    /// Shifts every member by `[d_row, d_col]`; members pushed off the map
    /// leave the room.
    GroupMoves {
        group: GroupId,
        displacement: [i32; 2],
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimedEvent {
    pub trigger: Trigger,
    pub action: EventAction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteTemplate {
    StaticOnly,
    TargetChange,
    Social(ActivityClass),
}

impl SuiteTemplate {
    pub fn name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for SuiteTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SuiteTemplate::StaticOnly => f.write_str("static"),
            SuiteTemplate::TargetChange => f.write_str("target-change"),
            SuiteTemplate::Social(a) => write!(f, "social-{a}"),
        }
    }
}

impl FromStr for SuiteTemplate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase().replace('_', "-");
        match s.as_str() {
            "static" | "static-only" => Ok(SuiteTemplate::StaticOnly),
            "target-change" => Ok(SuiteTemplate::TargetChange),
            other => match other.strip_prefix("social-") {
                Some(a) => Ok(SuiteTemplate::Social(a.parse()?)),
                None => Err(Error::InvalidArgument(format!(
                    "unknown suite `{other}` (expected static, target-change or social-<activity>)"
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template: Option<SuiteTemplate>,
    pub map: MapSpec,
    pub static_obstacles: Vec<Cell>,
    pub seats: Vec<Seat>,
    #[serde(default)]
    pub groups: Vec<HumanGroup>,
    #[serde(default)]
    pub events: Vec<TimedEvent>,
    pub start: Pose,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<GridMap> {
        let v = |msg: String| Err(Error::Validation(msg));
        if self.format_version != FORMAT_VERSION {
            return v(format!(
                "format_version: unsupported version {} (expected {FORMAT_VERSION})",
                self.format_version
            ));
        }
        let map = self.map.grid().map_err(|e| Error::Validation(format!("map: {e}")))?;
        let check = |what: &str, c: Cell| -> Result<()> {
            if map.in_bounds(c) {
                Ok(())
            } else {
                Err(Error::Validation(format!(
                    "{what}: cell {c} outside the {}x{} grid",
                    map.rows(),
                    map.cols()
                )))
            }
        };

        let mut taken: BTreeSet<Cell> = BTreeSet::new();
        let mut claim = |what: &str, c: Cell| -> Result<()> {
            check(what, c)?;
            if !taken.insert(c) {
                return Err(Error::Validation(format!(
                    "{what}: cell {c} is already occupied by another entity"
                )));
            }
            Ok(())
        };
        for c in &self.static_obstacles {
            claim("static_obstacles", *c)?;
        }
        if self.seats.is_empty() {
            return v("seats: at least one seat is required".into());
        }
        for s in &self.seats {
            claim("seats", s.cell)?;
        }
        if self.groups.len() > MAX_GROUPS {
            return v(format!(
                "groups: at most {MAX_GROUPS} human groups per scenario (found {})",
                self.groups.len()
            ));
        }
        let people: usize = self.groups.iter().map(|g| g.members.len()).sum();
        if people > MAX_PEOPLE {
            return v(format!(
                "groups: at most {MAX_PEOPLE} people across all groups (found {people})"
            ));
        }
        let mut ids = BTreeSet::new();
        for g in &self.groups {
            if g.members.is_empty() {
                return v(format!("groups: group {} has no members", g.id));
            }
            if !ids.insert(g.id) {
                return v(format!("groups: duplicate group id {}", g.id));
            }
            for m in &g.members {
                claim("groups.members", *m)?;
            }
        }
        check("start", self.start.cell)?;
        if taken.contains(&self.start.cell) {
            return v(format!("start: cell {} must be free", self.start.cell));
        }

        let (mut last_t, mut last_s) = (f64::NEG_INFINITY, 0u32);
        for (i, e) in self.events.iter().enumerate() {
            match e.trigger {
                Trigger::TimeS(t) => {
                    if !(t.is_finite() && t >= 0.0) {
                        return v(format!("events[{i}]: trigger time must be a non-negative number"));
                    }
                    if t < last_t {
                        return v(format!("events[{i}]: events must be sorted by trigger time"));
                    }
                    last_t = t;
                }
                Trigger::Step(s) => {
                    if s < last_s {
                        return v(format!("events[{i}]: events must be sorted by trigger step"));
                    }
                    last_s = s;
                }
            }
            match e.action {
                EventAction::SeatBecomesOccupied { seat } if seat >= self.seats.len() => {
                    return v(format!("events[{i}]: seat index {seat} does not exist"));
                }
                EventAction::GroupVacates { group } | EventAction::GroupMoves { group, .. }
                    if !ids.contains(&group) =>
                {
                    return v(format!("events[{i}]: group {group} does not exist"));
                }
                _ => {}
            }
        }
        Ok(map)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json();
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Static layout known to the navigator before it senses anything:
    /// walls and furniture only.
    pub fn reference_map(&self) -> Result<GridMap> {
        let mut map = self.map.grid()?;
        for c in &self.static_obstacles {
            map.set_state(*c, CellState::StaticObstacle)?;
        }
        Ok(map)
    }

    pub fn world(&self) -> Result<WorldState> {
        WorldState::new(self)
    }
}

/// Identity of a sensed object, stable across frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectId {
    Seat(usize),
    Person { group: GroupId, member: usize },
    Obstacle(Cell),
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjectId::Seat(i) => write!(f, "seat-{i}"),
            ObjectId::Person { group, member } => write!(f, "{group}-p{member}"),
            ObjectId::Obstacle(c) => write!(f, "obstacle-{}-{}", c.row, c.col),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectClass {
    Seat,
    Table,
    Person,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorldObject {
    pub id: ObjectId,
    pub class: ObjectClass,
    pub cell: Cell,
    pub occupied: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupState {
    pub id: GroupId,
    pub activity: ActivityClass,
    /// `(member index, cell)` for members still in the room.
    pub members: Vec<(usize, Cell)>,
}

impl GroupState {
    pub fn is_present(&self) -> bool {
        !self.members.is_empty()
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.members.iter().map(|(_, c)| *c)
    }
}

/// Something the world did on its own during a trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AppliedEvent {
    pub index: usize,
    pub action: EventAction,
}

/// Mutable ground truth for one trial.
#[derive(Debug, Clone)]
pub struct WorldState {
    base: GridMap,
    seats: Vec<Seat>,
    groups: Vec<GroupState>,
    events: Vec<TimedEvent>,
    applied: Vec<bool>,
    truth: GridMap,
}

impl WorldState {
    pub fn new(s: &Scenario) -> Result<Self> {
        s.validate()?;
        let base = s.reference_map()?;
        let groups = s
            .groups
            .iter()
            .map(|g| GroupState {
                id: g.id,
                activity: g.activity,
                members: g.members.iter().copied().enumerate().collect(),
            })
            .collect();
        let mut w = Self {
            truth: base.clone(),
            base,
            seats: s.seats.clone(),
            groups,
            events: s.events.clone(),
            applied: vec![false; s.events.len()],
        };
        w.rebuild();
        Ok(w)
    }

    fn rebuild(&mut self) {
        let mut m = self.base.clone();
        for s in &self.seats {
            let st = if s.occupied {
                CellState::SeatOccupied
            } else {
                CellState::SeatVacant
            };
            m.set_state(s.cell, st).expect("validated seat cell");
        }
        for g in &self.groups {
            for c in g.cells() {
                m.set_state(c, CellState::Human).expect("member cell in bounds");
            }
        }
        self.truth = m;
    }

    /// Ground-truth occupancy including seats and people.
    pub fn truth(&self) -> &GridMap {
        &self.truth
    }

    pub fn seats(&self) -> &[Seat] {
        &self.seats
    }

    pub fn groups(&self) -> &[GroupState] {
        &self.groups
    }

    pub fn group(&self, id: GroupId) -> Option<&GroupState> {
        self.groups.iter().find(|g| g.id == id)
    }

    pub fn seat_index(&self, cell: Cell) -> Option<usize> {
        self.seats.iter().position(|s| s.cell == cell)
    }

    pub fn objects(&self) -> Vec<WorldObject> {
        let mut out = Vec::new();
        for (i, s) in self.seats.iter().enumerate() {
            out.push(WorldObject {
                id: ObjectId::Seat(i),
                class: ObjectClass::Seat,
                cell: s.cell,
                occupied: Some(s.occupied),
            });
        }
        for g in &self.groups {
            for (m, c) in &g.members {
                out.push(WorldObject {
                    id: ObjectId::Person {
                        group: g.id,
                        member: *m,
                    },
                    class: ObjectClass::Person,
                    cell: *c,
                    occupied: None,
                });
            }
        }
        for (c, st) in self.base.iter() {
            if st == CellState::StaticObstacle {
                out.push(WorldObject {
                    id: ObjectId::Obstacle(c),
                    class: ObjectClass::Other,
                    cell: c,
                    occupied: None,
                });
            }
        }
        out
    }

    /// Applies every pending event whose trigger has been reached, in file
    /// order.
    pub fn advance(&mut self, time_s: f64, steps: u32) -> Vec<AppliedEvent> {
        let mut fired = Vec::new();
        for i in 0..self.events.len() {
            if self.applied[i] {
                continue;
            }
            let due = match self.events[i].trigger {
                Trigger::TimeS(t) => time_s + 1e-9 >= t,
                Trigger::Step(s) => steps >= s,
            };
            if !due {
                continue;
            }
            self.applied[i] = true;
            let action = self.events[i].action;
            self.apply(action);
            fired.push(AppliedEvent { index: i, action });
        }
        if !fired.is_empty() {
            self.rebuild();
        }
        fired
    }

    fn apply(&mut self, action: EventAction) {
        let (rows, cols) = (self.base.rows() as i64, self.base.cols() as i64);
        match action {
            EventAction::SeatBecomesOccupied { seat } => self.seats[seat].occupied = true,
            EventAction::GroupVacates { group } => {
                if let Some(g) = self.groups.iter_mut().find(|g| g.id == group) {
                    g.members.clear();
                }
            }
            EventAction::GroupMoves { group, displacement } => {
                if let Some(g) = self.groups.iter_mut().find(|g| g.id == group) {
                    g.members = g
                        .members
                        .iter()
                        .filter_map(|(m, c)| {
                            let r = c.row as i64 + displacement[0] as i64;
                            let k = c.col as i64 + displacement[1] as i64;
                            ((0..rows).contains(&r) && (0..cols).contains(&k))
                                .then(|| (*m, Cell::new(r as usize, k as usize)))
                        })
                        .collect();
                }
            }
        }
    }
}

/// Knobs for the randomized suite generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub map: MapSpec,
    /// Used to keep every seat visible from the start pose.
    pub sensor: SensorConfig,
    pub social: SocialConfig,
    /// Simulated time at which movement can begin; walking groups start
    /// moving one second after it.
    pub movement_start_s: f64,
    pub step_time_s: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            map: MapSpec::field_room(),
            sensor: SensorConfig::default(),
            social: SocialConfig::default(),
            movement_start_s: 10.0,
            step_time_s: 1.0,
        }
    }
}

/// Nearest vacant seat to `from` by Euclidean distance between cell
/// centers, ties broken by (row, col).
pub fn nearest_vacant_seat(seats: &[Seat], from: Cell, resolution: f64) -> Option<usize> {
    seats
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.occupied)
        .min_by(|(_, a), (_, b)| {
            a.cell
                .euclidean_m(from, resolution)
                .total_cmp(&b.cell.euclidean_m(from, resolution))
                .then(a.cell.cmp(&b.cell))
        })
        .map(|(i, _)| i)
}

pub fn generate(template: SuiteTemplate, seed: u64) -> Result<Scenario> {
    generate_with(template, seed, &GeneratorConfig::default())
}

pub fn generate_with(template: SuiteTemplate, seed: u64, config: &GeneratorConfig) -> Result<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last_reason = String::new();
    for _ in 0..GENERATION_ATTEMPTS {
        match try_generate(template, seed, config, &mut rng) {
            Ok(s) => return Ok(s),
            Err(reason) => last_reason = reason,
        }
    }
    Err(Error::Unsatisfiable {
        attempts: GENERATION_ATTEMPTS,
        reason: last_reason,
    })
}

fn try_generate(
    template: SuiteTemplate,
    seed: u64,
    config: &GeneratorConfig,
    rng: &mut ChaCha8Rng,
) -> std::result::Result<Scenario, String> {
    let grid = config.map.grid().map_err(|e| e.to_string())?;
    let (rows, cols) = (grid.rows(), grid.cols());
    if rows < 8 || cols < 4 {
        return Err(format!("room {rows}x{cols} too small for generation"));
    }
    let res = grid.resolution();
    let mut taken: BTreeSet<Cell> = BTreeSet::new();

    let start = Pose::new(
        Cell::new(rows - 1, rng.random_range(cols / 4..=(cols - 1) - cols / 4)),
        Heading::North,
    );
    taken.insert(start.cell);

    // seats along the far wall region, all inside the initial view
    let seat_rows = 0..=2.min(rows - 1);
    let (min_seats, max_seats, min_vacant) = match template {
        SuiteTemplate::TargetChange => (2, 4, 2),
        _ => (1, 3, 1),
    };
    let n_seats = rng.random_range(min_seats..=max_seats);
    let mut seats = Vec::new();
    while seats.len() < n_seats {
        let c = Cell::new(rng.random_range(seat_rows.clone()), rng.random_range(0..cols));
        if taken.contains(&c) || !in_field_of_view(start, c, &config.sensor, res) {
            continue;
        }
        taken.insert(c);
        seats.push(Seat {
            cell: c,
            occupied: false,
        });
    }
    for s in seats.iter_mut().skip(min_vacant) {
        s.occupied = rng.random_bool(0.3);
    }
    // shuffle occupancy position so seat index 0 is not always vacant
    let flags: Vec<bool> = {
        let mut f: Vec<bool> = seats.iter().map(|s| s.occupied).collect();
        for i in (1..f.len()).rev() {
            f.swap(i, rng.random_range(0..=i));
        }
        f
    };
    for (s, f) in seats.iter_mut().zip(flags) {
        s.occupied = f;
    }

    let mut groups = Vec::new();
    let mut events = Vec::new();
    if let SuiteTemplate::Social(activity) = template {
        let group = place_group(activity, start, &grid, &taken, config, rng)?;
        taken.extend(group.members.iter().copied());
        if activity == ActivityClass::Walking {
            events = walking_script(&group, &grid, config, rng);
        }
        groups.push(group);
    }

    let (lo, hi) = match template {
        SuiteTemplate::Social(_) => (4, 7),
        _ => (4, 8),
    };
    let n_obstacles = rng.random_range(lo..=hi);
    let mut obstacles = Vec::new();
    let mut guard = 0;
    while obstacles.len() < n_obstacles && guard < 1000 {
        guard += 1;
        let c = Cell::new(rng.random_range(3..rows - 2), rng.random_range(0..cols));
        if taken.contains(&c) || c.manhattan(start.cell) <= 1 {
            continue;
        }
        taken.insert(c);
        obstacles.push(c);
    }
    obstacles.sort();

    let mut scenario = Scenario {
        format_version: FORMAT_VERSION,
        template: Some(template),
        map: config.map,
        static_obstacles: obstacles,
        seats,
        groups,
        events,
        start,
        seed,
    };

    let truth = scenario.world().map_err(|e| e.to_string())?.truth().clone();
    for s in scenario.seats.iter().filter(|s| !s.occupied) {
        if truth.bfs_distance(start.cell, s.cell).is_none() {
            return Err(format!("seat {} unreachable from start", s.cell));
        }
    }

    if template == SuiteTemplate::TargetChange {
        let target = nearest_vacant_seat(&scenario.seats, start.cell, res).ok_or("no vacant seat")?;
        let len = truth
            .bfs_distance(start.cell, scenario.seats[target].cell)
            .ok_or("target unreachable")?;
        scenario.events.push(TimedEvent {
            trigger: Trigger::Step((len / 2) as u32),
            action: EventAction::SeatBecomesOccupied { seat: target },
        });
    }
    scenario.validate().map_err(|e| e.to_string())?;
    Ok(scenario)
}

fn place_group(
    activity: ActivityClass,
    start_pose: Pose,
    grid: &GridMap,
    taken: &BTreeSet<Cell>,
    config: &GeneratorConfig,
    rng: &mut ChaCha8Rng,
) -> std::result::Result<HumanGroup, String> {
    let start = start_pose.cell;
    let size = rng.random_range(3..=6usize);
    let (rows, cols) = (grid.rows(), grid.cols());
    // group sits between the start row and the seat rows
    let anchor = Cell::new(
        rng.random_range(4..=rows.saturating_sub(5).max(4)),
        rng.random_range(0..cols),
    );
    let mut members = vec![anchor];
    if activity == ActivityClass::Queuing {
        // a queue is a north-south line
        let top = anchor.row.saturating_sub(size / 2);
        members = (top..top + size).map(|r| Cell::new(r, anchor.col)).collect();
    } else {
        let mut guard = 0;
        while members.len() < size && guard < 200 {
            guard += 1;
            let from = *members.choose(rng).expect("nonempty");
            let next = grid.neighbors4(from);
            let c = *next.choose(rng).expect("grid larger than one cell");
            if !members.contains(&c) {
                members.push(c);
            }
        }
    }
    let clearance = config.social.talking_radius + 1;
    for m in &members {
        if !grid.in_bounds(*m) || m.row < 3 || m.row > rows - 3 {
            return Err("group outside the middle band".into());
        }
        if taken.contains(m) {
            return Err("group overlaps another entity".into());
        }
        if m.chebyshev(start) < clearance {
            return Err("group too close to the start".into());
        }
        // classification happens once, from the start pose
        if !in_field_of_view(start_pose, *m, &config.sensor, grid.resolution()) {
            return Err("group member outside the initial view".into());
        }
    }
    members.sort();
    Ok(HumanGroup {
        id: GroupId(1),
        members,
        activity,
    })
}

/// Walking groups cross the room sideways at one cell per step time,
/// beginning one step after movement can start, and leave through the
/// nearer side wall.
fn walking_script(
    group: &HumanGroup,
    grid: &GridMap,
    config: &GeneratorConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<TimedEvent> {
    let min_c = group.members.iter().map(|c| c.col).min().unwrap_or(0);
    let max_c = group.members.iter().map(|c| c.col).max().unwrap_or(0);
    let west_exit = min_c + 1;
    let east_exit = grid.cols() - max_c;
    let dir: i32 = match west_exit.cmp(&east_exit) {
        std::cmp::Ordering::Less => -1,
        std::cmp::Ordering::Greater => 1,
        std::cmp::Ordering::Equal => {
            if rng.random_bool(0.5) {
                -1
            } else {
                1
            }
        }
    };
    // steps until the trailing member has left the map
    let moves = if dir < 0 { max_c + 1 } else { grid.cols() - min_c };
    let mut events: Vec<TimedEvent> = (1..=moves)
        .map(|k| TimedEvent {
            trigger: Trigger::TimeS(config.movement_start_s + k as f64 * config.step_time_s),
            action: EventAction::GroupMoves {
                group: group.id,
                displacement: [0, dir],
            },
        })
        .collect();
    events.push(TimedEvent {
        trigger: Trigger::TimeS(config.movement_start_s + moves as f64 * config.step_time_s),
        action: EventAction::GroupVacates { group: group.id },
    });
    events
}
