use std::sync::Arc;

use proptest::prelude::*;

use thermnet_core::building::{load_building, BuildingModel, PlacementStrategy, SensorPlacement};
use thermnet_core::concentrator::RoomReading;
use thermnet_core::field::SensorSample;
use thermnet_core::supervisor::{plan_playback, FrameStore, Supervisor, ThermalFrame};

fn model() -> Arc<BuildingModel> {
    Arc::new(
        load_building(
            r#"{"building":{"id":"blk","levels":[
                {"index":0,"rooms":[
                    {"id":"a","min":[0,0,0],"max":[4,4,3]},
                    {"id":"b","min":[4,0,0],"max":[8,4,3]}]},
                {"index":1,"rooms":[{"id":"c","min":[0,0,3],"max":[8,4,6]}]}]}}"#,
        )
        .unwrap(),
    )
}

fn reading(placements: &[SensorPlacement], room: &str, t: f64) -> RoomReading {
    let samples = placements
        .iter()
        .filter(|p| p.room_id == room)
        .map(|p| SensorSample {
            sensor_id: p.sensor_id.clone(),
            t,
            temp: 20.0 + t / 100.0 + p.address as f64 / 10.0,
            rh: 40.0,
            seq: Some(t as u16),
        })
        .collect();
    RoomReading {
        room_id: room.into(),
        t,
        samples,
        missing: Vec::new(),
    }
}

fn supervisor(store: FrameStore) -> (Supervisor, Vec<SensorPlacement>) {
    let m = model();
    let placements = m.place_all(PlacementStrategy::Corners8);
    let mut sup = Supervisor::new();
    sup.register_building(m, placements.clone(), 2.0, store)
        .unwrap();
    (sup, placements)
}

/// Feeds `(room, t)` readings in the given order, then flushes.
fn assemble(order: &[(usize, u32)]) -> Vec<ThermalFrame> {
    let (mut sup, placements) = supervisor(FrameStore::in_memory("blk"));
    for &(room, t) in order {
        let _ = sup.ingest(reading(&placements, ["a", "b", "c"][room], t as f64));
    }
    sup.flush().unwrap();
    sup.query_range("blk", f64::MIN, f64::MAX)
        .unwrap()
        .iter()
        .map(|f| (**f).clone())
        .collect()
}

proptest! {
    #[test]
    fn frame_contents_ignore_arrival_order_within_a_cycle(
        cycles in 1u32..8,
        perm in Just(()).prop_perturb(|_, mut rng| {
            let mut v = vec![0usize, 1, 2];
            for i in (1..3).rev() {
                v.swap(i, rng.random_range(0..=i));
            }
            v
        }),
    ) {
        let ordered: Vec<(usize, u32)> = (0..cycles).flat_map(|t| (0..3).map(move |r| (r, t))).collect();
        let shuffled: Vec<(usize, u32)> = (0..cycles).flat_map(|t| perm.iter().map(move |&r| (r, t))).collect();
        let a = assemble(&ordered);
        prop_assert_eq!(a.len(), cycles as usize);
        prop_assert!(a.iter().all(|f| f.completeness == 1.0 && f.samples.len() == 24));
        prop_assert_eq!(a, assemble(&shuffled));
    }

    #[test]
    fn earlier_queries_are_stable_under_appends(
        gaps in prop::collection::vec(0.5..100.0f64, 1..40),
        split in 0usize..40,
        q in (0.0..2000.0f64, 0.0..2000.0f64),
    ) {
        let mut store = FrameStore::in_memory("x");
        let mut t = 0.0;
        let times: Vec<f64> = gaps.iter().map(|g| { t += g; t }).collect();
        let split = split.min(times.len());
        let frame = |t| ThermalFrame {
            building_id: "x".into(),
            t,
            samples: Default::default(),
            completeness: 1.0,
        };
        for &t in &times[..split] {
            store.append(frame(t)).unwrap();
        }
        let (t0, t1) = (q.0.min(q.1), q.0.max(q.1).min(times[..split].last().copied().unwrap_or(0.0)));
        let before: Vec<f64> = store.query_range(t0, t1).iter().map(|f| f.t).collect();
        for &t in &times[split..] {
            store.append(frame(t)).unwrap();
        }
        let after: Vec<f64> = store.query_range(t0, t1).iter().map(|f| f.t).collect();
        prop_assert_eq!(before, after);
        // a non-increasing timestamp is refused
        prop_assert!(store.append(frame(times[times.len() - 1])).is_err());
    }

    #[test]
    fn playback_is_affine_in_stored_time(
        times in prop::collection::btree_set(0u32..1_000_000, 2..50),
        speed in 0.01..1000.0f64,
    ) {
        let times: Vec<f64> = times.into_iter().map(|t| t as f64 / 10.0).collect();
        let t0 = times[0] - 1.0;
        let plan = plan_playback("b", t0, *times.last().unwrap(), speed, times.iter().copied());
        for (p, t) in plan.presentation_times.iter().zip(&times) {
            let expected = (t - t0) / speed;
            prop_assert!((p - expected).abs() <= 1e-12 * expected.abs().max(1.0));
        }
        let stored: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
        for (g, s) in plan.presentation_gaps().iter().zip(&stored) {
            prop_assert!((g - s / speed).abs() <= 1e-9 * (s / speed).max(1.0));
        }
    }
}

#[test]
fn grace_window_seals_incomplete_frames() {
    let (mut sup, placements) = supervisor(FrameStore::in_memory("blk"));
    sup.ingest(reading(&placements, "a", 0.0)).unwrap();
    sup.ingest(reading(&placements, "b", 0.0)).unwrap();
    assert_eq!(sup.advance_clock(1.9).unwrap(), 0);
    assert_eq!(sup.advance_clock(2.0).unwrap(), 1);
    let f = sup.live_frame("blk").unwrap();
    assert_eq!(f.samples.len(), 16);
    assert!((f.completeness - 16.0 / 24.0).abs() < 1e-12);
    // the straggler arrives after sealing and is refused
    assert!(sup.ingest(reading(&placements, "c", 0.0)).is_err());
}

#[test]
fn stored_frames_survive_reopen() {
    let dir = tempfile::tempdir().unwrap();
    {
        let (mut sup, placements) = supervisor(FrameStore::open(dir.path(), "blk").unwrap());
        for t in 0..5 {
            for room in ["a", "b", "c"] {
                sup.ingest(reading(&placements, room, t as f64)).unwrap();
            }
        }
        sup.flush().unwrap();
    }
    let reopened = FrameStore::open(dir.path(), "blk").unwrap();
    assert_eq!(reopened.len(), 5);
    let on_disk = FrameStore::read_file(&FrameStore::file_path(dir.path(), "blk")).unwrap();
    let t: Vec<f64> = on_disk.iter().map(|f| f.t).collect();
    assert_eq!(t, [0.0, 1.0, 2.0, 3.0, 4.0]);
    assert_eq!(on_disk[2].samples["b.s3"].temp, 20.0 + 0.02 + 0.3);
}
