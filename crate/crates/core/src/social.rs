//! Group activity classification stub and the activity-conditioned
//! constraint compiler.
//!
//! Classification samples from a row-stochastic confusion matrix keyed by
//! the group's ground-truth activity. Constraints then mark cells around
//! each group as non-navigable according to the predicted activity:
//!
//! | predicted        | blocked cells                                   | wait |
//! |------------------|-------------------------------------------------|------|
//! | walking          | none until the wait elapses                     | 10 s |
//! | talking          | Chebyshev radius 2 around members               | -    |
//! | queuing, waiting | radius 1 plus the adjacent band facing the user | -    |

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridworld::{Cell, GridMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivityClass {
    Walking,
    Talking,
    Queuing,
    Waiting,
}

impl ActivityClass {
    /// Row/column order of confusion matrices.
    pub const ALL: [ActivityClass; 4] = [
        ActivityClass::Walking,
        ActivityClass::Talking,
        ActivityClass::Queuing,
        ActivityClass::Waiting,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ActivityClass::Walking => "walking",
            ActivityClass::Talking => "talking",
            ActivityClass::Queuing => "queuing",
            ActivityClass::Waiting => "waiting",
        }
    }
}

impl fmt::Display for ActivityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActivityClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "walking" | "crossing" => Ok(ActivityClass::Walking),
            "talking" => Ok(ActivityClass::Talking),
            "queuing" | "queueing" => Ok(ActivityClass::Queuing),
            "waiting" => Ok(ActivityClass::Waiting),
            other => Err(Error::InvalidArgument(format!("unknown activity `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupId(pub u32);

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "g{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HumanGroup {
    pub id: GroupId,
    pub members: Vec<Cell>,
    pub activity: ActivityClass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    rows: [[f64; 4]; 4],
}

const ROW_TOLERANCE: f64 = 1e-9;

/// Shipped calibration: talking 1.00 and queuing 0.93 on the diagonal, walking
/// and waiting confused with each other so the balanced top-1 accuracy is
/// 0.957.
pub const CALIBRATED_MATRIX: &str = include_str!("../../../configs/confusion_calibrated.txt");

impl ConfusionMatrix {
    pub fn new(rows: [[f64; 4]; 4]) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            if row.iter().any(|p| !(0.0..=1.0).contains(p) || p.is_nan()) {
                return Err(Error::InvalidArgument(format!("row {i} has an entry outside [0, 1]")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_TOLERANCE {
                return Err(Error::InvalidArgument(format!("row {i} sums to {sum}, not 1")));
            }
        }
        Ok(Self { rows })
    }

    pub fn identity() -> Self {
        let mut rows = [[0.0; 4]; 4];
        for (i, row) in rows.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Self { rows }
    }

    pub fn uniform() -> Self {
        Self { rows: [[0.25; 4]; 4] }
    }

    pub fn calibrated() -> Self {
        Self::parse(CALIBRATED_MATRIX).expect("shipped calibration file is valid")
    }

    pub fn rows(&self) -> &[[f64; 4]; 4] {
        &self.rows
    }

    pub fn probability(&self, truth: ActivityClass, predicted: ActivityClass) -> f64 {
        self.rows[truth.index()][predicted.index()]
    }

    /// Mean diagonal, i.e. top-1 accuracy on a class-balanced set.
    pub fn balanced_accuracy(&self) -> f64 {
        (0..4).map(|i| self.rows[i][i]).sum::<f64>() / 4.0
    }

    /// Plain-text table: four rows of four decimals in the order walking,
    /// talking, queuing, waiting. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let vals = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse::<f64>().map_err(|e| Error::Parse {
                        line: n + 1,
                        column: line.find(t).unwrap_or(0) + 1,
                        message: format!("`{t}`: {e}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if vals.len() != 4 {
                return Err(Error::Parse {
                    line: n + 1,
                    column: 1,
                    message: format!("expected 4 columns, found {}", vals.len()),
                });
            }
            rows.push([vals[0], vals[1], vals[2], vals[3]]);
        }
        if rows.len() != 4 {
            return Err(Error::Parse {
                line: text.lines().count(),
                column: 1,
                message: format!("expected 4 rows, found {}", rows.len()),
            });
        }
        Self::new([rows[0], rows[1], rows[2], rows[3]])
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# walking talking queuing waiting\n");
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|p| format!("{p}")).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        out
    }

    /// Draws a predicted class from the row of `truth`.
    pub fn sample(&self, truth: ActivityClass, rng: &mut impl Rng) -> ActivityClass {
        let row = &self.rows[truth.index()];
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in row.iter().enumerate() {
            acc += p;
            if u < acc && *p > 0.0 {
                return ActivityClass::ALL[i];
            }
        }
        // rounding left u above the running sum; take the last nonzero entry
        let last = row.iter().rposition(|p| *p > 0.0).unwrap_or(truth.index());
        ActivityClass::ALL[last]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityReport {
    pub group_id: GroupId,
    pub predicted: ActivityClass,
    pub ranked_alternatives: Vec<ActivityClass>,
}

pub fn classify(group: &HumanGroup, matrix: &ConfusionMatrix, rng: &mut impl Rng) -> ActivityReport {
    let predicted = matrix.sample(group.activity, rng);
    let row = &matrix.rows[group.activity.index()];
    let mut ranked_alternatives: Vec<ActivityClass> =
        ActivityClass::ALL.into_iter().filter(|c| *c != predicted).collect();
    // stable sort keeps enumeration order among equal probabilities
    ranked_alternatives.sort_by(|a, b| row[b.index()].total_cmp(&row[a.index()]));
    ActivityReport {
        group_id: group.id,
        predicted,
        ranked_alternatives,
    }
}

/// Monte Carlo estimate of `classify`'s confusion behavior.
pub fn empirical_confusion(
    matrix: &ConfusionMatrix,
    samples_per_class: usize,
    rng: &mut impl Rng,
) -> Result<ConfusionMatrix> {
    if samples_per_class == 0 {
        return Err(Error::InvalidArgument("samples_per_class must be at least 1".into()));
    }
    let mut counts = [[0usize; 4]; 4];
    for truth in ActivityClass::ALL {
        for _ in 0..samples_per_class {
            counts[truth.index()][matrix.sample(truth, rng).index()] += 1;
        }
    }
    let mut rows = [[0.0; 4]; 4];
    for (i, row) in counts.iter().enumerate() {
        for (j, n) in row.iter().enumerate() {
            rows[i][j] = *n as f64 / samples_per_class as f64;
        }
    }
    // empirical rows sum to 1 up to float rounding
    for row in &mut rows {
        let sum: f64 = row.iter().sum();
        for p in row.iter_mut() {
            *p /= sum;
        }
    }
    ConfusionMatrix::new(rows)
}

/// Members plus their in-bounds 8-neighborhood.
pub fn expand_group(group: &HumanGroup, map: &GridMap) -> BTreeSet<Cell> {
    dilate(&group.members, map, 1)
}

fn dilate(cells: &[Cell], map: &GridMap, radius: usize) -> BTreeSet<Cell> {
    cells
        .iter()
        .filter(|c| map.in_bounds(**c))
        .flat_map(|c| map.chebyshev_ball(*c, radius))
        .collect()
}

/// Signal and duration used while waiting for a walking group to pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaitDirective {
    pub duration_s: f64,
    pub forward_pulses: u32,
}

impl Default for WaitDirective {
    fn default() -> Self {
        Self {
            duration_s: 10.0,
            forward_pulses: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocialConfig {
    /// Chebyshev buffer around talking groups.
    pub talking_radius: usize,
    pub wait: WaitDirective,
}

impl Default for SocialConfig {
    fn default() -> Self {
        Self {
            talking_radius: 2,
            wait: WaitDirective::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SocialConstraint {
    pub blocked_cells: BTreeSet<Cell>,
    pub wait_directive: Option<WaitDirective>,
    /// Groups predicted to be walking, awaiting the persistence check.
    pub walking_groups: Vec<GroupId>,
    /// Set when the raw geometry covered the user's own cell; that cell is
    /// left out of `blocked_cells`.
    pub degenerate: bool,
}

impl SocialConstraint {
    pub fn is_empty(&self) -> bool {
        self.blocked_cells.is_empty() && self.wait_directive.is_none()
    }
}

/// The band of cells just outside `footprint` on the side facing `user`,
/// spanning the footprint's extent plus one on either end.
fn near_side_band(footprint: &BTreeSet<Cell>, user: Cell, map: &GridMap) -> BTreeSet<Cell> {
    let Some(min_r) = footprint.iter().map(|c| c.row).min() else {
        return BTreeSet::new();
    };
    let max_r = footprint.iter().map(|c| c.row).max().unwrap_or(min_r);
    let min_c = footprint.iter().map(|c| c.col).min().unwrap_or(0);
    let max_c = footprint.iter().map(|c| c.col).max().unwrap_or(min_c);

    let col_span = min_c.saturating_sub(1)..=(max_c + 1).min(map.cols() - 1);
    let row_span = min_r.saturating_sub(1)..=(max_r + 1).min(map.rows() - 1);
    let mut band = BTreeSet::new();
    if user.row > max_r {
        if max_r + 1 < map.rows() {
            band.extend(col_span.map(|c| Cell::new(max_r + 1, c)));
        }
    } else if user.row < min_r {
        if min_r > 0 {
            band.extend(col_span.map(|c| Cell::new(min_r - 1, c)));
        }
    } else if user.col > max_c {
        if max_c + 1 < map.cols() {
            band.extend(row_span.map(|r| Cell::new(r, max_c + 1)));
        }
    } else if user.col < min_c && min_c > 0 {
        band.extend(row_span.map(|r| Cell::new(r, min_c - 1)));
    }
    band
}

/// Blocked cells for one group under a predicted activity. Walking yields
/// nothing; its cells are added only if the group persists after the wait.
pub fn group_blocked_cells(
    group: &HumanGroup,
    predicted: ActivityClass,
    map: &GridMap,
    user: Cell,
    config: &SocialConfig,
) -> BTreeSet<Cell> {
    match predicted {
        ActivityClass::Walking => BTreeSet::new(),
        ActivityClass::Talking => dilate(&group.members, map, config.talking_radius),
        ActivityClass::Queuing | ActivityClass::Waiting => {
            let footprint = expand_group(group, map);
            let band = near_side_band(&footprint, user, map);
            footprint.into_iter().chain(band).collect()
        }
    }
}

/// Compiles one constraint from per-group predictions. `reports` must pair
/// one-to-one with `groups` by id.
pub fn compile_constraints(
    groups: &[HumanGroup],
    reports: &[ActivityReport],
    map: &GridMap,
    user: Cell,
    config: &SocialConfig,
) -> Result<SocialConstraint> {
    if groups.len() != reports.len() {
        return Err(Error::InvalidArgument(format!(
            "{} groups but {} activity reports",
            groups.len(),
            reports.len()
        )));
    }
    let mut out = SocialConstraint::default();
    for group in groups {
        let report = reports
            .iter()
            .find(|r| r.group_id == group.id)
            .ok_or_else(|| Error::InvalidArgument(format!("no activity report for group {}", group.id)))?;
        if report.predicted == ActivityClass::Walking {
            out.wait_directive = Some(config.wait);
            out.walking_groups.push(group.id);
        }
        out.blocked_cells
            .extend(group_blocked_cells(group, report.predicted, map, user, config));
    }
    if out.blocked_cells.remove(&user) {
        out.degenerate = true;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn group(members: &[(usize, usize)], activity: ActivityClass) -> HumanGroup {
        HumanGroup {
            id: GroupId(1),
            members: members.iter().map(|(r, c)| Cell::new(*r, *c)).collect(),
            activity,
        }
    }

    fn report(g: &HumanGroup, predicted: ActivityClass) -> ActivityReport {
        ActivityReport {
            group_id: g.id,
            predicted,
            ranked_alternatives: vec![],
        }
    }

    fn map10() -> GridMap {
        GridMap::new(10, 10, 0.4).unwrap()
    }

    #[test]
    fn expansion_sizes() {
        let m = map10();
        assert_eq!(expand_group(&group(&[(5, 5)], ActivityClass::Talking), &m).len(), 9);
        assert_eq!(expand_group(&group(&[(0, 0)], ActivityClass::Talking), &m).len(), 4);
        assert_eq!(
            expand_group(&group(&[(5, 5), (5, 6)], ActivityClass::Talking), &m).len(),
            12
        );
    }

    #[test]
    fn no_groups_no_constraint() {
        let c = compile_constraints(&[], &[], &map10(), Cell::new(9, 0), &SocialConfig::default()).unwrap();
        assert!(c.is_empty());
        assert!(!c.degenerate);
    }

    #[test]
    fn talking_blocks_radius_two() {
        let g = group(&[(5, 5)], ActivityClass::Talking);
        let c = compile_constraints(
            std::slice::from_ref(&g),
            &[report(&g, ActivityClass::Talking)],
            &map10(),
            Cell::new(9, 0),
            &SocialConfig::default(),
        )
        .unwrap();
        assert_eq!(c.blocked_cells.len(), 25);
        assert!(c.blocked_cells.iter().all(|x| x.chebyshev(Cell::new(5, 5)) <= 2));
        assert!(c.wait_directive.is_none());
    }

    #[test]
    fn waiting_blocks_near_side_row() {
        let g = group(&[(4, 2), (4, 3), (4, 4)], ActivityClass::Waiting);
        let c = compile_constraints(
            std::slice::from_ref(&g),
            &[report(&g, ActivityClass::Waiting)],
            &map10(),
            Cell::new(9, 3),
            &SocialConfig::default(),
        )
        .unwrap();
        // footprint rows 3..=5, cols 1..=5; band row 6, cols 0..=6
        let mut expected = BTreeSet::new();
        for r in 3..=5 {
            for col in 1..=5 {
                expected.insert(Cell::new(r, col));
            }
        }
        for col in 0..=6 {
            expected.insert(Cell::new(6, col));
        }
        assert_eq!(c.blocked_cells, expected);
        assert_eq!(c.blocked_cells.len(), 22);
    }

    #[test]
    fn walking_sets_wait_only() {
        let g = group(&[(4, 4), (4, 5)], ActivityClass::Walking);
        let c = compile_constraints(
            std::slice::from_ref(&g),
            &[report(&g, ActivityClass::Walking)],
            &map10(),
            Cell::new(9, 3),
            &SocialConfig::default(),
        )
        .unwrap();
        assert!(c.blocked_cells.is_empty());
        let w = c.wait_directive.unwrap();
        assert_eq!((w.duration_s, w.forward_pulses), (10.0, 3));
        assert_eq!(c.walking_groups, vec![GroupId(1)]);
    }

    #[test]
    fn mismatched_reports_rejected() {
        let g = group(&[(4, 4)], ActivityClass::Talking);
        let mut r = report(&g, ActivityClass::Talking);
        r.group_id = GroupId(9);
        let err = compile_constraints(&[g], &[r], &map10(), Cell::new(9, 3), &SocialConfig::default());
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn user_cell_never_blocked() {
        let g = group(&[(5, 5)], ActivityClass::Talking);
        let c = compile_constraints(
            std::slice::from_ref(&g),
            &[report(&g, ActivityClass::Talking)],
            &map10(),
            Cell::new(6, 6),
            &SocialConfig::default(),
        )
        .unwrap();
        assert!(c.degenerate);
        assert!(!c.blocked_cells.contains(&Cell::new(6, 6)));
    }

    #[test]
    fn identity_matrix_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = ConfusionMatrix::identity();
        for a in ActivityClass::ALL {
            let g = group(&[(1, 1)], a);
            for _ in 0..50 {
                assert_eq!(classify(&g, &m, &mut rng).predicted, a);
            }
        }
        assert_eq!(empirical_confusion(&m, 100, &mut rng).unwrap(), m);
    }

    #[test]
    fn ranked_alternatives_exclude_prediction() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = ConfusionMatrix::calibrated();
        let g = group(&[(1, 1)], ActivityClass::Queuing);
        for _ in 0..200 {
            let r = classify(&g, &m, &mut rng);
            assert_eq!(r.ranked_alternatives.len(), 3);
            assert!(!r.ranked_alternatives.contains(&r.predicted));
        }
        // queuing row: waiting 0.07 first, then the zero-probability classes
        // in enumeration order
        let r = (0..)
            .map(|_| classify(&g, &m, &mut rng))
            .find(|r| r.predicted == ActivityClass::Queuing)
            .unwrap();
        assert_eq!(
            r.ranked_alternatives,
            vec![ActivityClass::Waiting, ActivityClass::Walking, ActivityClass::Talking]
        );
    }

    #[test]
    fn calibration_file_values() {
        let m = ConfusionMatrix::calibrated();
        assert_eq!(m.probability(ActivityClass::Talking, ActivityClass::Talking), 1.0);
        assert_eq!(m.probability(ActivityClass::Queuing, ActivityClass::Queuing), 0.93);
        assert!((m.balanced_accuracy() - 0.957).abs() < 1e-12);
    }

    #[test]
    fn matrix_parse_errors() {
        assert!(ConfusionMatrix::parse("1 0 0 0\n0 1 0 0\n0 0 1 0\n").is_err());
        assert!(ConfusionMatrix::parse("1 0 0\n0 1 0 0\n0 0 1 0\n0 0 0 1").is_err());
        assert!(ConfusionMatrix::parse("0.5 0 0 0\n0 1 0 0\n0 0 1 0\n0 0 0 1").is_err());
        let err = ConfusionMatrix::parse("1 0 0 0\n0 x 0 0\n0 0 1 0\n0 0 0 1").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let m = ConfusionMatrix::calibrated();
        assert_eq!(ConfusionMatrix::parse(&m.to_text()).unwrap(), m);
    }
}
