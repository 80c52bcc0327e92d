//! Simulated depth-camera sensing over a [`WorldState`].

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridworld::{Cell, Pose};
use crate::scenario::{ObjectClass, ObjectId, WorldState};

pub const FRAMES_PER_BURST: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorConfig {
    pub horizontal_fov_deg: f64,
    pub max_range_m: f64,
    /// Relative standard deviation of each distance reading.
    pub distance_noise_sigma: f64,
    pub outlier_injection_prob: f64,
    pub miss_prob: f64,
    /// Ignore the cone and range entirely. Used for the "object never leaves
    /// view" control condition.
    pub omnidirectional: bool,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            horizontal_fov_deg: 70.0,
            max_range_m: 5.0,
            distance_noise_sigma: 0.02,
            outlier_injection_prob: 0.05,
            miss_prob: 0.0,
            omnidirectional: false,
        }
    }
}

impl SensorConfig {
    pub fn noiseless() -> Self {
        Self {
            distance_noise_sigma: 0.0,
            outlier_injection_prob: 0.0,
            miss_prob: 0.0,
            ..Self::default()
        }
    }

    pub fn full_view(self) -> Self {
        Self {
            omnidirectional: true,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be in [0, 1], got {p}")))
            }
        };
        prob("outlier_injection_prob", self.outlier_injection_prob)?;
        prob("miss_prob", self.miss_prob)?;
        if !(self.horizontal_fov_deg > 0.0 && self.horizontal_fov_deg < 180.0) {
            return Err(Error::InvalidArgument(format!(
                "horizontal_fov_deg must be in (0, 180), got {}",
                self.horizontal_fov_deg
            )));
        }
        if self.max_range_m.is_nan() || self.max_range_m <= 0.0 {
            return Err(Error::InvalidArgument("max_range_m must be positive".into()));
        }
        if !(self.distance_noise_sigma >= 0.0 && self.distance_noise_sigma.is_finite()) {
            return Err(Error::InvalidArgument(
                "distance_noise_sigma must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Bearing of `target` relative to the pose heading, in degrees within
/// (-180, 180], positive clockwise.
pub fn relative_bearing_deg(pose: Pose, target: Cell, resolution: f64) -> f64 {
    let (px, py) = pose.cell.center_m(resolution);
    let (tx, ty) = target.center_m(resolution);
    // y grows southward, so north is -y
    let compass = (tx - px).atan2(py - ty).to_degrees();
    let mut rel = compass - pose.heading.bearing_deg();
    while rel <= -180.0 {
        rel += 360.0;
    }
    while rel > 180.0 {
        rel -= 360.0;
    }
    rel
}

pub fn in_field_of_view(pose: Pose, target: Cell, config: &SensorConfig, resolution: f64) -> bool {
    if config.omnidirectional || target == pose.cell {
        return true;
    }
    let dist = pose.cell.euclidean_m(target, resolution);
    dist <= config.max_range_m + 1e-9
        && relative_bearing_deg(pose, target, resolution).abs() <= config.horizontal_fov_deg / 2.0 + 1e-9
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectObservation {
    pub object_id: ObjectId,
    pub object_class: ObjectClass,
    /// Only set for seats.
    pub occupied: Option<bool>,
    pub distance_m: f64,
    pub cell: Cell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionFrame {
    pub frame_index: usize,
    pub observations: Vec<ObjectObservation>,
}

pub fn observe(
    world: &WorldState,
    pose: Pose,
    config: &SensorConfig,
    frame_index: usize,
    rng: &mut impl Rng,
) -> DetectionFrame {
    let res = world.truth().resolution();
    let mut observations = Vec::new();
    for obj in world.objects() {
        if !in_field_of_view(pose, obj.cell, config, res) {
            continue;
        }
        let truth = pose.cell.euclidean_m(obj.cell, res);
        // draw in a fixed order so the stream does not depend on outcomes
        let noise: f64 = rng.sample(StandardNormal);
        let outlier = rng.random::<f64>() < config.outlier_injection_prob;
        let scale = rng.random_range(1.3..=2.0);
        let missed = rng.random::<f64>() < config.miss_prob;
        if missed {
            continue;
        }
        let mut d = truth * (1.0 + config.distance_noise_sigma * noise);
        if outlier {
            d *= scale;
        }
        observations.push(ObjectObservation {
            object_id: obj.id,
            object_class: obj.class,
            occupied: obj.occupied,
            distance_m: d.max(0.0),
            cell: obj.cell,
        });
    }
    DetectionFrame {
        frame_index,
        observations,
    }
}

pub fn observe_burst(world: &WorldState, pose: Pose, config: &SensorConfig, rng: &mut impl Rng) -> Vec<DetectionFrame> {
    (0..FRAMES_PER_BURST)
        .map(|i| observe(world, pose, config, i, rng))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlierMean {
    /// Mean over every reading, the suspect included.
    #[default]
    IncludeCandidate,
    LeaveOneOut,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutlierFilterConfig {
    pub threshold: f64,
    pub mean: OutlierMean,
}

impl Default for OutlierFilterConfig {
    fn default() -> Self {
        Self {
            threshold: 0.10,
            mean: OutlierMean::IncludeCandidate,
        }
    }
}

/// Indices of the readings that survive the relative-deviation test.
pub fn surviving_readings(readings: &[f64], config: &OutlierFilterConfig) -> Vec<usize> {
    let n = readings.len();
    let total: f64 = readings.iter().sum();
    (0..n)
        .filter(|&i| {
            let d = readings[i];
            let mean = match config.mean {
                OutlierMean::IncludeCandidate => total / n as f64,
                OutlierMean::LeaveOneOut if n > 1 => (total - d) / (n - 1) as f64,
                OutlierMean::LeaveOneOut => d,
            };
            if mean == 0.0 {
                d == 0.0
            } else {
                (d - mean).abs() / mean <= config.threshold
            }
        })
        .collect()
}

/// Fuses a burst of frames into one observation per object, discarding
/// readings that stray too far from the object's mean.
pub fn filter_outliers(frames: &[DetectionFrame], config: &OutlierFilterConfig) -> Result<Vec<ObjectObservation>> {
    if frames.len() != FRAMES_PER_BURST {
        return Err(Error::InvalidArgument(format!(
            "outlier filter needs exactly {FRAMES_PER_BURST} frames, got {}",
            frames.len()
        )));
    }
    let mut per_object: BTreeMap<ObjectId, (ObjectObservation, Vec<f64>)> = BTreeMap::new();
    for f in frames {
        for o in &f.observations {
            let entry = per_object.entry(o.object_id).or_insert((*o, Vec::new()));
            entry.0 = *o;
            entry.1.push(o.distance_m);
        }
    }
    Ok(per_object
        .into_values()
        .filter_map(|(mut obs, readings)| {
            let keep = surviving_readings(&readings, config);
            if keep.is_empty() {
                return None;
            }
            obs.distance_m = keep.iter().map(|&i| readings[i]).sum::<f64>() / keep.len() as f64;
            Some(obs)
        })
        .collect())
}

/// The vacant seat closest to `user`, measured between cell centers.
pub fn select_target(observations: &[ObjectObservation], user: Cell, resolution: f64) -> Result<ObjectObservation> {
    observations
        .iter()
        .filter(|o| o.object_class == ObjectClass::Seat && o.occupied == Some(false))
        .min_by(|a, b| {
            a.cell
                .euclidean_m(user, resolution)
                .total_cmp(&b.cell.euclidean_m(user, resolution))
                .then(a.cell.cmp(&b.cell))
        })
        .copied()
        .ok_or(Error::NoVacantSeat)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisplacementEstimate {
    pub predicted_cells: u32,
    pub measured_cells: f64,
    pub relative_deviation: f64,
}

impl DisplacementEstimate {
    pub fn new(predicted_cells: u32, measured_cells: f64) -> Self {
        let denom = f64::from(predicted_cells.max(1));
        Self {
            predicted_cells,
            measured_cells,
            relative_deviation: (measured_cells - f64::from(predicted_cells)).abs() / denom,
        }
    }

    /// Strictly below `threshold`; a deviation of exactly 10% fails.
    pub fn passes(&self, threshold: f64) -> bool {
        self.relative_deviation < threshold
    }
}

/// Odometry stand-in for the frame-to-frame displacement check.
pub fn measure_displacement(
    pre: Pose,
    post: Pose,
    predicted_cells: u32,
    odometry_sigma: f64,
    rng: &mut impl Rng,
) -> DisplacementEstimate {
    let moved = pre.cell.manhattan(post.cell) as f64;
    let z: f64 = StandardNormal.sample(rng);
    DisplacementEstimate::new(predicted_cells, moved * (1.0 + odometry_sigma * z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::Heading;

    fn obs(id: usize, d: f64) -> ObjectObservation {
        ObjectObservation {
            object_id: ObjectId::Seat(id),
            object_class: ObjectClass::Seat,
            occupied: Some(false),
            distance_m: d,
            cell: Cell::new(0, id),
        }
    }

    fn burst(readings: &[f64]) -> Vec<DetectionFrame> {
        readings
            .iter()
            .enumerate()
            .map(|(i, d)| DetectionFrame {
                frame_index: i,
                observations: vec![obs(0, *d)],
            })
            .collect()
    }

    fn fused(readings: &[f64]) -> f64 {
        let out = filter_outliers(&burst(readings), &OutlierFilterConfig::default()).unwrap();
        assert_eq!(out.len(), 1);
        out[0].distance_m
    }

    #[test]
    fn filter_fixtures() {
        let mut r = vec![2.0; 9];
        r.push(3.0);
        assert!((fused(&r) - 2.0).abs() < 1e-12);
        assert!((fused(&[1.5; 10]) - 1.5).abs() < 1e-12);
        let mut r = vec![1.0; 5];
        r.extend([1.09; 5]);
        assert!((fused(&r) - 1.045).abs() < 1e-12);
    }

    #[test]
    fn filter_needs_ten_frames() {
        assert!(filter_outliers(&burst(&[1.0; 9]), &OutlierFilterConfig::default()).is_err());
    }

    #[test]
    fn leave_one_out_is_stricter_on_the_suspect() {
        let mut r = vec![1.0; 9];
        r.push(1.105);
        let inc = surviving_readings(&r, &OutlierFilterConfig::default());
        let loo = surviving_readings(
            &r,
            &OutlierFilterConfig {
                mean: OutlierMean::LeaveOneOut,
                ..Default::default()
            },
        );
        assert_eq!(inc.len(), 10);
        assert_eq!(loo.len(), 9);
    }

    #[test]
    fn bearing_and_cone() {
        let pose = Pose::new(Cell::new(5, 5), Heading::North);
        assert!(relative_bearing_deg(pose, Cell::new(0, 5), 0.4).abs() < 1e-9);
        assert!((relative_bearing_deg(pose, Cell::new(5, 9), 0.4) - 90.0).abs() < 1e-9);
        assert!((relative_bearing_deg(pose, Cell::new(5, 1), 0.4) + 90.0).abs() < 1e-9);
        let cfg = SensorConfig::default();
        assert!(in_field_of_view(pose, Cell::new(1, 5), &cfg, 0.4));
        assert!(!in_field_of_view(pose, Cell::new(5, 9), &cfg, 0.4));
        assert!(in_field_of_view(pose, Cell::new(5, 9), &cfg.full_view(), 0.4));
    }

    #[test]
    fn target_tie_breaks_lexicographically() {
        let a = ObjectObservation {
            cell: Cell::new(2, 5),
            ..obs(1, 1.0)
        };
        let b = ObjectObservation {
            cell: Cell::new(2, 3),
            ..obs(2, 1.0)
        };
        let user = Cell::new(6, 4);
        assert_eq!(select_target(&[a, b], user, 0.4).unwrap().cell, Cell::new(2, 3));
        assert_eq!(select_target(&[b, a], user, 0.4).unwrap().cell, Cell::new(2, 3));
        let taken = ObjectObservation {
            occupied: Some(true),
            ..a
        };
        assert!(matches!(select_target(&[taken], user, 0.4), Err(Error::NoVacantSeat)));
    }

    #[test]
    fn displacement_deviation() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let pre = Pose::new(Cell::new(3, 3), Heading::North);
        let post = Pose::new(Cell::new(2, 3), Heading::North);
        let exact = measure_displacement(pre, post, 1, 0.0, &mut rng);
        assert_eq!(exact.relative_deviation, 0.0);
        let froze = measure_displacement(pre, pre, 1, 0.0, &mut rng);
        assert_eq!(froze.relative_deviation, 1.0);
        assert!(!froze.passes(0.10));
        assert_eq!(DisplacementEstimate::new(0, 0.0).relative_deviation, 0.0);
    }

    #[test]
    fn config_bounds() {
        assert!(SensorConfig::default().validate().is_ok());
        assert!(SensorConfig {
            horizontal_fov_deg: 180.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SensorConfig {
            miss_prob: 1.5,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
