//! The guidance loop: initial delay, sensing, one-shot activity
//! recognition, social adaptation, target fixing, then plan, cue, verify and
//! correct until the user reaches a seat or the trial fails.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gridworld::{relative_direction, Cell, CellState, GridMap, Heading, Pose, RelativeMove};
use crate::perception::{
    filter_outliers, in_field_of_view, measure_displacement, observe_burst, select_target, DisplacementEstimate,
    ObjectObservation, OutlierFilterConfig, SensorConfig,
};
use crate::planner::{CostChange, DStarLite};
use crate::scenario::{EventAction, ObjectClass, ObjectId, Scenario, WorldState};
use crate::social::{
    classify, compile_constraints, expand_group, ActivityClass, ActivityReport, ConfusionMatrix, GroupId, HumanGroup,
    SocialConfig,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecutorConfig {
    pub init_delay_s: f64,
    pub frames_per_observation: usize,
    pub verify_threshold: f64,
    pub drift_check_interval: u32,
    pub step_time_s: f64,
    pub cell_step_m: f64,
    pub max_steps: u32,
    pub max_verify_retries: u32,
    /// Extra bursts taken when filtering erases an object that the raw
    /// frames did contain.
    pub max_reacquire: u32,
    /// Relative noise of the displacement measurement.
    pub odometry_sigma: f64,
    /// Chance the simulated user sidesteps instead of following a cue.
    pub p_err: f64,
    pub filter: OutlierFilterConfig,
    pub social: SocialConfig,
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        Self {
            init_delay_s: 10.0,
            frames_per_observation: crate::perception::FRAMES_PER_BURST,
            verify_threshold: 0.10,
            drift_check_interval: 3,
            step_time_s: 1.0,
            cell_step_m: crate::gridworld::DEFAULT_RESOLUTION_M,
            max_steps: 200,
            max_verify_retries: 3,
            max_reacquire: 5,
            odometry_sigma: 0.02,
            p_err: 0.0,
            filter: OutlierFilterConfig::default(),
            social: SocialConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Motor {
    Left,
    Right,
    Forward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HapticCommand {
    pub motor: Motor,
    pub pulses: u32,
    pub pulse_duration_s: f64,
}

impl HapticCommand {
    pub fn single(motor: Motor) -> Self {
        Self {
            motor,
            pulses: 1,
            pulse_duration_s: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutorPhase {
    InitDelay,
    Acquire,
    Classify,
    Adapt,
    WaitForGroup,
    Plan,
    RecheckTarget,
    Guide,
    VerifyMove,
    DriftCorrect,
    Reached,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    NoTarget,
    NoPath,
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaitOutcome {
    Cleared,
    Persisted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyOutcome {
    Advance,
    Retry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", content = "payload", rename_all = "snake_case")]
pub enum TrialEvent {
    Phase(ExecutorPhase),
    FramesAcquired {
        frames: usize,
        objects: usize,
    },
    Classified {
        group: GroupId,
        truth: ActivityClass,
        predicted: ActivityClass,
    },
    Misclassified {
        group: GroupId,
        truth: ActivityClass,
        predicted: ActivityClass,
    },
    ConstraintCompiled {
        blocked_cells: usize,
        wait: bool,
        degenerate: bool,
    },
    WaitResolved {
        group: GroupId,
        outcome: WaitOutcome,
    },
    TargetFixed {
        seat: usize,
        cell: Cell,
    },
    TargetOccupied {
        seat: usize,
    },
    Retargeted {
        from: usize,
        to: usize,
    },
    SeatEnteredView {
        seat: usize,
        cell: Cell,
    },
    SeatLeftView {
        seat: usize,
        cell: Cell,
    },
    PlanComputed {
        cost: Option<u32>,
        expansions: u64,
    },
    Replanned {
        changes: usize,
    },
    Haptic(HapticCommand),
    DoubleTurn,
    Moved {
        from: Cell,
        to: Cell,
    },
    VerifyFailed {
        deviation: f64,
        attempt: u32,
    },
    DriftCorrected {
        believed: Pose,
        actual: Pose,
    },
    World(EventAction),
    Collision {
        cell: Cell,
    },
    EtiquetteViolation {
        cell: Cell,
    },
    Unreachable {
        target: Cell,
        oracle_verified: bool,
    },
    Reached {
        cell: Cell,
    },
    Failed {
        reason: FailureReason,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub time_s: f64,
    pub phase: ExecutorPhase,
    #[serde(flatten)]
    pub event: TrialEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub reached: bool,
    pub failure: Option<FailureReason>,
    pub collisions: u32,
    pub etiquette_violations: u32,
    pub steps_taken: u32,
    pub replans: u32,
    pub simulated_time_s: f64,
    pub classify_calls: u32,
    pub degenerate: bool,
    #[serde(skip)]
    pub wall_time: Duration,
    pub event_log: Vec<LogEntry>,
}

impl TrialResult {
    /// Reached the seat with no collision and no etiquette breach.
    pub fn success(&self) -> bool {
        self.reached && self.collisions == 0 && self.etiquette_violations == 0
    }

    pub fn misclassified(&self) -> bool {
        self.event_log
            .iter()
            .any(|e| matches!(e.event, TrialEvent::Misclassified { .. }))
    }

    pub fn oracle_verified_unreachable(&self) -> bool {
        self.failure == Some(FailureReason::NoPath)
            && self.event_log.iter().any(|e| {
                matches!(
                    e.event,
                    TrialEvent::Unreachable {
                        oracle_verified: true,
                        ..
                    }
                )
            })
    }

    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for e in &self.event_log {
            out.push_str(&serde_json::to_string(e).expect("log entry serializes"));
            out.push('\n');
        }
        out
    }
}

/// Cue for the first move of `path`. A cell behind the user gets a left turn
/// without translation.
pub fn guide_step(pose: Pose, path: &[Cell]) -> (HapticCommand, RelativeMove) {
    let mv = match path.get(1) {
        Some(next) => relative_direction(pose, *next),
        None => RelativeMove::Forward,
    };
    let motor = match mv {
        RelativeMove::Forward => Motor::Forward,
        RelativeMove::Right => Motor::Right,
        RelativeMove::Left | RelativeMove::NotReachableInOneMove => Motor::Left,
    };
    (HapticCommand::single(motor), mv)
}

pub fn verify_and_advance(estimate: &DisplacementEstimate, config: &ExecutorConfig) -> VerifyOutcome {
    if estimate.passes(config.verify_threshold) {
        VerifyOutcome::Advance
    } else {
        VerifyOutcome::Retry
    }
}

/// The corrected pose if a check is due at `step_count` and the belief is at
/// least one cell (or a heading) off.
pub fn drift_correct(believed: Pose, actual: Pose, step_count: u32, config: &ExecutorConfig) -> Option<Pose> {
    let due = step_count > 0 && step_count.is_multiple_of(config.drift_check_interval.max(1));
    (due && believed != actual).then_some(actual)
}

pub fn run_trial(
    scenario: &Scenario,
    config: &ExecutorConfig,
    sensor: &SensorConfig,
    matrix: &ConfusionMatrix,
    seed: u64,
) -> Result<TrialResult> {
    sensor.validate()?;
    let started = Instant::now();
    let mut trial = Trial::new(scenario, config, sensor, matrix, seed)?;
    trial.run()?;
    Ok(trial.finish(started.elapsed()))
}

struct Trial<'a> {
    cfg: &'a ExecutorConfig,
    sensor: &'a SensorConfig,
    matrix: &'a ConfusionMatrix,
    rng: ChaCha8Rng,
    world: WorldState,
    belief: GridMap,
    reference: GridMap,
    blocked: BTreeSet<Cell>,
    etiquette_reference: BTreeSet<Cell>,
    known_seats: BTreeMap<Cell, bool>,
    humans: BTreeMap<Cell, GroupId>,
    unclassified_ring: BTreeSet<Cell>,
    classified: BTreeSet<GroupId>,
    seats_in_view: BTreeSet<usize>,
    last_obs: Vec<ObjectObservation>,
    actual: Pose,
    believed: Pose,
    target: Option<(usize, Cell)>,
    planner: Option<DStarLite>,
    time_s: f64,
    steps: u32,
    phase: ExecutorPhase,
    log: Vec<LogEntry>,
    reached: bool,
    failure: Option<FailureReason>,
    collisions: u32,
    etiquette_violations: u32,
    replans: u32,
    classify_calls: u32,
    degenerate: bool,
}

impl<'a> Trial<'a> {
    fn new(
        scenario: &Scenario,
        cfg: &'a ExecutorConfig,
        sensor: &'a SensorConfig,
        matrix: &'a ConfusionMatrix,
        seed: u64,
    ) -> Result<Self> {
        let reference = scenario.reference_map()?;
        Ok(Self {
            cfg,
            sensor,
            matrix,
            rng: ChaCha8Rng::seed_from_u64(seed),
            world: scenario.world()?,
            belief: reference.clone(),
            reference,
            blocked: BTreeSet::new(),
            etiquette_reference: BTreeSet::new(),
            known_seats: BTreeMap::new(),
            humans: BTreeMap::new(),
            unclassified_ring: BTreeSet::new(),
            classified: BTreeSet::new(),
            seats_in_view: BTreeSet::new(),
            last_obs: Vec::new(),
            actual: scenario.start,
            believed: scenario.start,
            target: None,
            planner: None,
            time_s: 0.0,
            steps: 0,
            phase: ExecutorPhase::InitDelay,
            log: Vec::new(),
            reached: false,
            failure: None,
            collisions: 0,
            etiquette_violations: 0,
            replans: 0,
            classify_calls: 0,
            degenerate: false,
        })
    }

    fn finish(self, wall_time: Duration) -> TrialResult {
        TrialResult {
            reached: self.reached,
            failure: self.failure,
            collisions: self.collisions,
            etiquette_violations: self.etiquette_violations,
            steps_taken: self.steps,
            replans: self.replans,
            simulated_time_s: self.time_s,
            classify_calls: self.classify_calls,
            degenerate: self.degenerate,
            wall_time,
            event_log: self.log,
        }
    }

    fn emit(&mut self, event: TrialEvent) {
        self.log.push(LogEntry {
            time_s: self.time_s,
            phase: self.phase,
            event,
        });
    }

    fn enter(&mut self, phase: ExecutorPhase) {
        if self.phase != phase || self.log.is_empty() {
            self.phase = phase;
            self.emit(TrialEvent::Phase(phase));
        }
    }

    fn fail(&mut self, reason: FailureReason) {
        self.enter(ExecutorPhase::Failed);
        self.failure = Some(reason);
        self.emit(TrialEvent::Failed { reason });
    }

    fn advance_world(&mut self) {
        for e in self.world.advance(self.time_s, self.steps) {
            self.emit(TrialEvent::World(e.action));
        }
    }

    fn resolution(&self) -> f64 {
        self.belief.resolution()
    }

    fn belief_state(&self, cell: Cell) -> CellState {
        if self.reference.state_or_wall(cell) == CellState::StaticObstacle {
            CellState::StaticObstacle
        } else if cell == self.believed.cell {
            // never plan from a blocked cell
            match self.known_seats.get(&cell) {
                Some(false) => CellState::SeatVacant,
                _ => CellState::Free,
            }
        } else if self.blocked.contains(&cell) || self.unclassified_ring.contains(&cell) {
            CellState::SocialBlocked
        } else if self.humans.contains_key(&cell) {
            CellState::Human
        } else {
            match self.known_seats.get(&cell) {
                Some(true) => CellState::SeatOccupied,
                Some(false) => CellState::SeatVacant,
                None => CellState::Free,
            }
        }
    }

    /// Re-derives belief for `cells` and returns the traversability changes.
    fn refresh(&mut self, cells: impl IntoIterator<Item = Cell>) -> Vec<CostChange> {
        let mut changes = Vec::new();
        for cell in cells {
            if !self.belief.in_bounds(cell) {
                continue;
            }
            let now = self.belief_state(cell);
            let before = self.belief.state_or_wall(cell);
            if now != before {
                self.belief.set_state(cell, now).expect("in bounds");
                if now.is_traversable() != before.is_traversable() {
                    changes.push(CostChange {
                        cell,
                        new_traversable: now.is_traversable(),
                    });
                }
            }
        }
        changes
    }

    fn ring_of(&self, cells: impl Iterator<Item = Cell>) -> BTreeSet<Cell> {
        cells
            .flat_map(|c| self.belief.chebyshev_ball(c, 1).collect::<Vec<_>>())
            .collect()
    }

    /// One burst from the user's true cell facing `heading`, folded into the
    /// belief map.
    fn sense(&mut self, heading: Heading) -> Result<Vec<CostChange>> {
        let pose = Pose::new(self.actual.cell, heading);
        let mut obs = Vec::new();
        for _ in 0..=self.cfg.max_reacquire {
            let frames = observe_burst(&self.world, pose, self.sensor, &mut self.rng);
            obs = filter_outliers(&frames, &self.cfg.filter)?;
            let raw: BTreeSet<ObjectId> = frames
                .iter()
                .flat_map(|f| f.observations.iter().map(|o| o.object_id))
                .collect();
            self.emit(TrialEvent::FramesAcquired {
                frames: frames.len(),
                objects: obs.len(),
            });
            if raw.len() == obs.len() {
                break;
            }
        }
        let mut touched: BTreeSet<Cell> = BTreeSet::new();
        let mut seen_people = BTreeSet::new();
        for o in &obs {
            match (o.object_class, o.object_id) {
                (ObjectClass::Seat, ObjectId::Seat(_)) => {
                    self.known_seats.insert(o.cell, o.occupied.unwrap_or(false));
                    touched.insert(o.cell);
                }
                (ObjectClass::Person, ObjectId::Person { group, .. }) => {
                    seen_people.insert(o.cell);
                    if o.cell != self.actual.cell {
                        self.humans.insert(o.cell, group);
                    }
                    touched.insert(o.cell);
                }
                _ => {}
            }
        }
        let res = self.resolution();
        let stale: Vec<Cell> = self
            .humans
            .keys()
            .filter(|c| in_field_of_view(pose, **c, self.sensor, res) && !seen_people.contains(*c))
            .copied()
            .collect();
        for c in stale {
            self.humans.remove(&c);
            touched.insert(c);
        }

        let ring = self.ring_of(
            self.humans
                .iter()
                .filter(|(_, g)| !self.classified.contains(*g))
                .map(|(c, _)| *c),
        );
        touched.extend(self.unclassified_ring.iter().copied());
        touched.extend(ring.iter().copied());
        self.unclassified_ring = ring;

        let in_view: BTreeSet<usize> = self
            .world
            .seats()
            .iter()
            .enumerate()
            .filter(|(_, s)| in_field_of_view(pose, s.cell, self.sensor, res))
            .map(|(i, _)| i)
            .collect();
        for i in in_view
            .difference(&self.seats_in_view.clone())
            .copied()
            .collect::<Vec<_>>()
        {
            let cell = self.world.seats()[i].cell;
            self.emit(TrialEvent::SeatEnteredView { seat: i, cell });
        }
        for i in self.seats_in_view.difference(&in_view).copied().collect::<Vec<_>>() {
            let cell = self.world.seats()[i].cell;
            self.emit(TrialEvent::SeatLeftView { seat: i, cell });
        }
        self.seats_in_view = in_view;
        self.last_obs = obs;
        Ok(self.refresh(touched))
    }

    fn run(&mut self) -> Result<()> {
        self.enter(ExecutorPhase::InitDelay);
        self.time_s += self.cfg.init_delay_s;
        self.advance_world();

        self.enter(ExecutorPhase::Acquire);
        self.sense(self.actual.heading)?;

        self.enter(ExecutorPhase::Classify);
        let detected: Vec<HumanGroup> = self
            .world
            .groups()
            .iter()
            .filter_map(|g| {
                let seen: Vec<Cell> = g
                    .cells()
                    .filter(|c| self.humans.get(c) == Some(&g.id) || *c == self.actual.cell)
                    .collect();
                (!seen.is_empty()).then(|| HumanGroup {
                    id: g.id,
                    members: g.cells().collect(),
                    activity: g.activity,
                })
            })
            .collect();
        let mut reports = Vec::new();
        for g in &detected {
            let report = classify(g, self.matrix, &mut self.rng);
            self.classify_calls += 1;
            self.classified.insert(g.id);
            self.emit(TrialEvent::Classified {
                group: g.id,
                truth: g.activity,
                predicted: report.predicted,
            });
            if report.predicted != g.activity {
                self.emit(TrialEvent::Misclassified {
                    group: g.id,
                    truth: g.activity,
                    predicted: report.predicted,
                });
            }
            reports.push(report);
        }

        self.enter(ExecutorPhase::Adapt);
        let user = self.actual.cell;
        let constraint = compile_constraints(&detected, &reports, &self.belief, user, &self.cfg.social)?;
        let truth_reports: Vec<ActivityReport> = detected
            .iter()
            .map(|g| ActivityReport {
                group_id: g.id,
                predicted: g.activity,
                ranked_alternatives: Vec::new(),
            })
            .collect();
        let reference = compile_constraints(&detected, &truth_reports, &self.belief, user, &self.cfg.social)?;
        self.etiquette_reference = reference.blocked_cells;
        self.degenerate = constraint.degenerate;
        self.blocked = constraint.blocked_cells.clone();
        self.emit(TrialEvent::ConstraintCompiled {
            blocked_cells: self.blocked.len(),
            wait: constraint.wait_directive.is_some(),
            degenerate: constraint.degenerate,
        });
        // the unclassified ring no longer applies to classified groups
        let mut touched: Vec<Cell> = self.blocked.iter().copied().collect();
        touched.extend(self.unclassified_ring.iter().copied());
        self.unclassified_ring = self.ring_of(
            self.humans
                .iter()
                .filter(|(_, g)| !self.classified.contains(*g))
                .map(|(c, _)| *c),
        );
        self.refresh(touched);

        if let Some(wait) = constraint.wait_directive {
            self.enter(ExecutorPhase::WaitForGroup);
            self.emit(TrialEvent::Haptic(HapticCommand {
                motor: Motor::Forward,
                pulses: wait.forward_pulses,
                pulse_duration_s: 1.0,
            }));
            self.time_s += wait.duration_s;
            self.advance_world();
            self.sense(self.actual.heading)?;
            for gid in &constraint.walking_groups {
                let Some(original) = detected.iter().find(|g| g.id == *gid) else {
                    continue;
                };
                let footprint = expand_group(original, &self.belief);
                let still: Vec<Cell> = self
                    .last_obs
                    .iter()
                    .filter(|o| matches!(o.object_id, ObjectId::Person { group, .. } if group == *gid))
                    .map(|o| o.cell)
                    .collect();
                let persisted = still.iter().any(|c| footprint.contains(c));
                let outcome = if persisted {
                    let now = HumanGroup {
                        members: still,
                        ..original.clone()
                    };
                    let cells = expand_group(&now, &self.belief);
                    if original.activity == ActivityClass::Walking {
                        self.etiquette_reference.extend(cells.iter().copied());
                    }
                    self.blocked.extend(cells.iter().copied());
                    self.blocked.remove(&self.actual.cell);
                    self.refresh(cells);
                    WaitOutcome::Persisted
                } else {
                    WaitOutcome::Cleared
                };
                self.emit(TrialEvent::WaitResolved { group: *gid, outcome });
            }
        }

        let Ok(first) = select_target(&self.last_obs, self.actual.cell, self.resolution()) else {
            self.fail(FailureReason::NoTarget);
            return Ok(());
        };
        let ObjectId::Seat(seat) = first.object_id else {
            unreachable!("select_target only returns seats")
        };
        self.target = Some((seat, first.cell));
        self.emit(TrialEvent::TargetFixed { seat, cell: first.cell });

        self.enter(ExecutorPhase::Plan);
        if !self.start_planner()? {
            return Ok(());
        }
        self.guide_loop()
    }

    /// Fresh planner to the current target; false once the trial has failed.
    fn start_planner(&mut self) -> Result<bool> {
        let (_, goal) = self.target.expect("target fixed");
        let Ok(mut p) = DStarLite::new(&self.belief, self.believed.cell, goal) else {
            self.unreachable(goal);
            return Ok(false);
        };
        p.compute_shortest_path(&self.belief);
        self.emit(TrialEvent::PlanComputed {
            cost: p.start_cost().value(),
            expansions: p.stats().expansions,
        });
        let ok = p.start_cost().is_finite();
        self.planner = Some(p);
        if !ok {
            self.unreachable(goal);
        }
        Ok(ok)
    }

    fn unreachable(&mut self, target: Cell) {
        let oracle_verified = self.belief.bfs_distance(self.believed.cell, target).is_none();
        self.emit(TrialEvent::Unreachable {
            target,
            oracle_verified,
        });
        self.fail(FailureReason::NoPath);
    }

    /// Folds belief changes and a new start into the planner.
    fn update_planner(&mut self, changes: &[CostChange]) -> Result<()> {
        let p = self.planner.as_mut().expect("planner exists");
        p.apply_changes(&self.belief, changes, self.believed.cell)?;
        p.compute_shortest_path(&self.belief);
        if !changes.is_empty() {
            self.replans += 1;
            self.emit(TrialEvent::Replanned { changes: changes.len() });
        }
        Ok(())
    }

    /// True while guidance should continue.
    fn recheck_target(&mut self) -> Result<bool> {
        let (seat, cell) = self.target.expect("target fixed");
        if self.known_seats.get(&cell) != Some(&true) {
            return Ok(true);
        }
        self.emit(TrialEvent::TargetOccupied { seat });
        let candidates: Vec<ObjectObservation> = self.last_obs.iter().filter(|o| o.cell != cell).copied().collect();
        let Ok(next) = select_target(&candidates, self.actual.cell, self.resolution()) else {
            self.fail(FailureReason::NoTarget);
            return Ok(false);
        };
        let ObjectId::Seat(to) = next.object_id else {
            unreachable!("select_target only returns seats")
        };
        self.emit(TrialEvent::Retargeted { from: seat, to });
        self.target = Some((to, next.cell));
        self.replans += 1;
        self.start_planner()
    }

    fn current_path(&mut self) -> Option<Vec<Cell>> {
        let p = self.planner.as_ref().expect("planner exists");
        match p.extract_path(&self.belief) {
            Ok(path) => Some(path),
            Err(_) => {
                let goal = p.goal();
                self.unreachable(goal);
                None
            }
        }
    }

    fn guide_loop(&mut self) -> Result<()> {
        loop {
            let (_, goal) = self.target.expect("target fixed");
            if self.actual.cell == goal {
                self.enter(ExecutorPhase::Reached);
                self.reached = true;
                self.emit(TrialEvent::Reached { cell: goal });
                return Ok(());
            }
            if self.steps >= self.cfg.max_steps {
                self.fail(FailureReason::Timeout);
                return Ok(());
            }

            self.enter(ExecutorPhase::RecheckTarget);
            let mut path = None;
            let mut facing = None;
            // look where the next move goes; a replan may change that
            for _ in 0..4 {
                let Some(p) = self.current_path() else {
                    return Ok(());
                };
                if p.len() < 2 {
                    path = Some(p);
                    break;
                }
                let h = Heading::between(p[0], p[1]).expect("path steps are adjacent");
                if facing == Some(h) {
                    path = Some(p);
                    break;
                }
                facing = Some(h);
                let changes = self.sense(h)?;
                self.update_planner(&changes)?;
                if !self.recheck_target()? {
                    return Ok(());
                }
                if self.planner.as_ref().is_some_and(|p| !p.start_cost().is_finite()) {
                    let goal = self.planner.as_ref().map(|p| p.goal()).expect("planner exists");
                    self.unreachable(goal);
                    return Ok(());
                }
            }
            let path = match path {
                Some(p) => p,
                None => match self.current_path() {
                    Some(p) => p,
                    None => return Ok(()),
                },
            };

            if path.len() < 2 {
                // belief says arrived but the user is elsewhere
                self.force_drift_correction()?;
                continue;
            }

            self.enter(ExecutorPhase::Guide);
            let (cmd, mv) = guide_step(self.believed, &path);
            self.emit(TrialEvent::Haptic(cmd));
            self.steps += 1;
            self.time_s += self.cfg.step_time_s;
            let pre = self.actual;
            let predicted = if mv == RelativeMove::NotReachableInOneMove {
                self.emit(TrialEvent::DoubleTurn);
                0
            } else {
                1
            };
            self.user_executes(mv);

            self.enter(ExecutorPhase::VerifyMove);
            let mut verified = false;
            for attempt in 0..=self.cfg.max_verify_retries {
                let est = measure_displacement(pre, self.actual, predicted, self.cfg.odometry_sigma, &mut self.rng);
                if verify_and_advance(&est, self.cfg) == VerifyOutcome::Advance {
                    verified = true;
                    break;
                }
                self.emit(TrialEvent::VerifyFailed {
                    deviation: est.relative_deviation,
                    attempt,
                });
                if attempt < self.cfg.max_verify_retries {
                    self.emit(TrialEvent::Haptic(cmd));
                    if predicted == 1 && self.actual.cell == pre.cell {
                        self.user_retries();
                    }
                }
            }
            if verified {
                let heading = match mv {
                    RelativeMove::NotReachableInOneMove => self.believed.heading.turn_left(),
                    m => m.apply(self.believed.heading),
                };
                let cell = if predicted == 1 { path[1] } else { self.believed.cell };
                self.believed = Pose::new(cell, heading);
            }

            self.advance_world();
            if !self.world.truth().is_traversable(self.actual.cell) {
                self.collisions += 1;
                self.emit(TrialEvent::Collision { cell: self.actual.cell });
            }
            let changes = self.refresh([pre.cell, self.actual.cell, self.believed.cell]);
            self.update_planner(&changes)?;

            if verified {
                if let Some(fixed) = drift_correct(self.believed, self.actual, self.steps, self.cfg) {
                    self.enter(ExecutorPhase::DriftCorrect);
                    self.apply_drift_correction(fixed)?;
                }
            } else {
                self.force_drift_correction()?;
            }
        }
    }

    fn force_drift_correction(&mut self) -> Result<()> {
        self.enter(ExecutorPhase::DriftCorrect);
        let actual = self.actual;
        self.apply_drift_correction(actual)
    }

    fn apply_drift_correction(&mut self, fixed: Pose) -> Result<()> {
        let old = self.believed;
        self.emit(TrialEvent::DriftCorrected {
            believed: old,
            actual: fixed,
        });
        self.believed = fixed;
        let changes = self.refresh([old.cell, fixed.cell]);
        let p = self.planner.as_mut().expect("planner exists");
        p.apply_changes(&self.belief, &changes, fixed.cell)?;
        p.compute_shortest_path(&self.belief);
        self.replans += 1;
        Ok(())
    }

    /// The simulated user follows `mv`, or with probability `p_err` steps to
    /// a random side instead.
    fn user_executes(&mut self, mv: RelativeMove) {
        let slip = self.rng.random::<f64>() < self.cfg.p_err;
        let side_left = self.rng.random_bool(0.5);
        if mv == RelativeMove::NotReachableInOneMove {
            self.actual.heading = self.actual.heading.turn_left();
            return;
        }
        let mut heading = mv.apply(self.actual.heading);
        if slip {
            heading = if side_left {
                heading.turn_left()
            } else {
                heading.turn_right()
            };
        }
        self.actual.heading = heading;
        self.try_step();
    }

    fn user_retries(&mut self) {
        self.try_step();
    }

    fn try_step(&mut self) {
        let from = self.actual.cell;
        let next = from
            .step(self.actual.heading)
            .filter(|c| self.world.truth().in_bounds(*c));
        match next {
            Some(c) if self.world.truth().is_traversable(c) => {
                self.actual.cell = c;
                self.emit(TrialEvent::Moved { from, to: c });
                if self.etiquette_reference.contains(&c) {
                    self.etiquette_violations += 1;
                    self.emit(TrialEvent::EtiquetteViolation { cell: c });
                }
            }
            Some(c) => {
                self.collisions += 1;
                self.emit(TrialEvent::Collision { cell: c });
            }
            None => {
                self.collisions += 1;
                self.emit(TrialEvent::Collision { cell: from });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cues() {
        let pose = Pose::new(Cell::new(5, 5), Heading::North);
        assert_eq!(guide_step(pose, &[pose.cell, Cell::new(4, 5)]).0.motor, Motor::Forward);
        assert_eq!(guide_step(pose, &[pose.cell, Cell::new(5, 6)]).0.motor, Motor::Right);
        assert_eq!(guide_step(pose, &[pose.cell, Cell::new(5, 4)]).0.motor, Motor::Left);
        let (cmd, mv) = guide_step(pose, &[pose.cell, Cell::new(6, 5)]);
        assert_eq!(cmd.motor, Motor::Left);
        assert_eq!(mv, RelativeMove::NotReachableInOneMove);
        assert_eq!(cmd.pulses, 1);
    }

    #[test]
    fn verification_threshold_is_strict() {
        let cfg = ExecutorConfig::default();
        let at = |d: f64| verify_and_advance(&DisplacementEstimate::new(1, 1.0 + d), &cfg);
        assert_eq!(at(0.0), VerifyOutcome::Advance);
        assert_eq!(at(0.42), VerifyOutcome::Retry);
        let exact = DisplacementEstimate {
            predicted_cells: 1,
            measured_cells: 1.1,
            relative_deviation: 0.10,
        };
        assert_eq!(verify_and_advance(&exact, &cfg), VerifyOutcome::Retry);
    }

    #[test]
    fn drift_interval() {
        let cfg = ExecutorConfig::default();
        let a = Pose::new(Cell::new(3, 3), Heading::North);
        let b = Pose::new(Cell::new(3, 4), Heading::North);
        assert_eq!(drift_correct(a, a, 3, &cfg), None);
        assert_eq!(drift_correct(b, a, 3, &cfg), Some(a));
        assert_eq!(drift_correct(b, a, 2, &cfg), None);
        assert_eq!(drift_correct(b, a, 0, &cfg), None);
    }
}
