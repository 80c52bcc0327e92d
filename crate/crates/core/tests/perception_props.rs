use canesim_core::gridworld::{Cell, Heading, Pose};
use canesim_core::perception::{
    filter_outliers, measure_displacement, observe, select_target, surviving_readings, DetectionFrame,
    ObjectObservation, OutlierFilterConfig, SensorConfig,
};
use canesim_core::scenario::{generate, ObjectClass, ObjectId, Scenario, SuiteTemplate};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn noise_tail_within_ten_percent() {
    // 10% at sigma 0.02 is a 5 sigma bound
    let s = generate(SuiteTemplate::StaticOnly, 3).unwrap();
    let world = s.world().unwrap();
    let cfg = SensorConfig {
        outlier_injection_prob: 0.0,
        ..SensorConfig::default()
    }
    .full_view();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut total, mut inside) = (0usize, 0usize);
    while total < 100_000 {
        let frame = observe(&world, s.start, &cfg, 0, &mut rng);
        for o in frame.observations {
            let truth = s.start.cell.euclidean_m(o.cell, 0.4);
            total += 1;
            if (o.distance_m - truth).abs() <= 0.10 * truth {
                inside += 1;
            }
        }
    }
    assert!(inside as f64 / total as f64 > 0.999, "{inside}/{total}");
}

#[test]
fn noiseless_observation_is_pure_and_exact() {
    let s = generate(SuiteTemplate::TargetChange, 8).unwrap();
    let world = s.world().unwrap();
    let cfg = SensorConfig::noiseless();
    let a = observe(&world, s.start, &cfg, 0, &mut ChaCha8Rng::seed_from_u64(1));
    let b = observe(&world, s.start, &cfg, 0, &mut ChaCha8Rng::seed_from_u64(2));
    assert_eq!(a, b);
    for o in &a.observations {
        assert_eq!(o.distance_m, s.start.cell.euclidean_m(o.cell, 0.4));
    }
    // every seat is generated inside the initial view
    let seats = a
        .observations
        .iter()
        .filter(|o| o.object_class == ObjectClass::Seat)
        .count();
    assert_eq!(seats, s.seats.len());
}

#[test]
fn object_straight_ahead_reads_exactly() {
    let s = generate(SuiteTemplate::StaticOnly, 0).unwrap();
    let world = s.world().unwrap();
    let seat = s.seats[0].cell;
    // stand five cells south of the seat facing it: 2.0 m
    let pose = Pose::new(Cell::new(seat.row + 5, seat.col), Heading::North);
    let f = observe(
        &world,
        pose,
        &SensorConfig::noiseless(),
        0,
        &mut ChaCha8Rng::seed_from_u64(0),
    );
    let o = f
        .observations
        .iter()
        .find(|o| o.object_id == ObjectId::Seat(0))
        .unwrap();
    assert!((o.distance_m - 2.0).abs() < 1e-12);
    // a pose level with the seat, facing north, has it at 90 degrees
    let col = if seat.col >= 3 { seat.col - 3 } else { seat.col + 3 };
    let side = Pose::new(Cell::new(seat.row, col), Heading::North);
    let f = observe(
        &world,
        side,
        &SensorConfig::noiseless(),
        0,
        &mut ChaCha8Rng::seed_from_u64(0),
    );
    assert!(f.observations.iter().all(|o| o.object_id != ObjectId::Seat(0)));
}

#[test]
fn odometry_failure_rate_below_one_percent() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pre = Pose::new(Cell::new(5, 5), Heading::North);
    let post = Pose::new(Cell::new(4, 5), Heading::North);
    let fails = (0..10_000)
        .filter(|_| !measure_displacement(pre, post, 1, 0.03, &mut rng).passes(0.10))
        .count();
    assert!(fails < 100, "{fails}");
}

#[test]
fn scenario_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    let s = generate(SuiteTemplate::Social(canesim_core::social::ActivityClass::Walking), 21).unwrap();
    s.save(&path).unwrap();
    assert_eq!(Scenario::load(&path).unwrap(), s);
    let broken = std::fs::read_to_string(&path)
        .unwrap()
        .replacen("\"seats\"", "\"chairs\"", 1);
    assert!(Scenario::from_json(&broken).is_err());
}

fn seat(id: usize, cell: Cell, occupied: bool) -> ObjectObservation {
    ObjectObservation {
        object_id: ObjectId::Seat(id),
        object_class: ObjectClass::Seat,
        occupied: Some(occupied),
        distance_m: 1.0,
        cell,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn single_outlier_always_removed(
        truth in 0.1f64..10.0,
        scale in 1.3f64..100.0,
        slot in 0usize..10,
    ) {
        let mut r = vec![truth; 10];
        r[slot] = truth * scale;
        let keep = surviving_readings(&r, &OutlierFilterConfig::default());
        prop_assert!(!keep.contains(&slot));
    }
}

proptest! {
    #[test]
    fn filter_never_invents(readings in proptest::collection::vec(proptest::collection::vec(0.0f64..5.0, 0..3), 10)) {
        let frames: Vec<DetectionFrame> = readings.iter().enumerate().map(|(i, ds)| DetectionFrame {
            frame_index: i,
            observations: ds.iter().enumerate().map(|(k, d)| ObjectObservation { distance_m: *d, ..seat(k, Cell::new(0, k), false) }).collect(),
        }).collect();
        let out = filter_outliers(&frames, &OutlierFilterConfig::default()).unwrap();
        for o in &out {
            prop_assert!(frames.iter().any(|f| f.observations.iter().any(|x| x.object_id == o.object_id)));
        }
        let ids: std::collections::BTreeSet<_> = out.iter().map(|o| o.object_id).collect();
        prop_assert_eq!(ids.len(), out.len());
    }

    #[test]
    fn noiseless_filter_is_identity(ds in proptest::collection::vec(0.1f64..5.0, 1..5)) {
        let frames: Vec<DetectionFrame> = (0..10).map(|i| DetectionFrame {
            frame_index: i,
            observations: ds.iter().enumerate().map(|(k, d)| ObjectObservation { distance_m: *d, ..seat(k, Cell::new(0, k), false) }).collect(),
        }).collect();
        let out = filter_outliers(&frames, &OutlierFilterConfig::default()).unwrap();
        prop_assert_eq!(out.len(), ds.len());
        for (o, d) in out.iter().zip(&ds) {
            prop_assert!((o.distance_m - d).abs() < 1e-12);
        }
    }

    #[test]
    fn target_permutation_invariant(cells in proptest::collection::vec((0usize..6, 0usize..6, any::<bool>()), 1..8), user in (0usize..12, 0usize..8), rot in 0usize..8) {
        let obs: Vec<_> = cells.iter().enumerate().map(|(i, (r, c, occ))| seat(i, Cell::new(*r, *c), *occ)).collect();
        let mut shuffled = obs.clone();
        let k = rot % shuffled.len();
        shuffled.rotate_left(k);
        shuffled.reverse();
        let u = Cell::new(user.0, user.1);
        let a = select_target(&obs, u, 0.4).map(|o| o.cell).ok();
        let b = select_target(&shuffled, u, 0.4).map(|o| o.cell).ok();
        prop_assert_eq!(a, b);
    }
}
