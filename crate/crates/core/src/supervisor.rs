//! Tier-3 building supervisor: frame assembly, storage, range queries and playback.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::building::{BuildingModel, SensorPlacement};
use crate::concentrator::RoomReading;
use crate::geometry::Point3;

#[derive(Debug, Error)]
pub enum SupervisorError {
    #[error("unknown building `{0}`")]
    UnknownBuilding(String),
    #[error("room `{0}` is not registered with any building")]
    UnregisteredRoom(String),
    #[error("room `{0}` is registered by more than one building")]
    AmbiguousRoom(String),
    #[error("duplicate reading for room `{room}` at t = {t}")]
    Duplicate { room: String, t: f64 },
    #[error("reading for room `{room}` at t = {t} arrived after its frame was sealed")]
    Late { room: String, t: f64 },
    #[error("invalid range: from {t0} is after to {t1}")]
    InvalidRange { t0: f64, t1: f64 },
    #[error("playback speed must be positive, got {0}")]
    InvalidSpeed(f64),
    #[error("no frames in [{t0}, {t1}]")]
    EmptyRange { t0: f64, t1: f64 },
    #[error("no frames sealed yet for building `{0}`")]
    NoFrames(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("frame at t = {t} does not follow the last stored frame at t = {last}")]
    NotIncreasing { t: f64, last: f64 },
    #[error("frame belongs to building `{got}`, store holds `{expected}`")]
    WrongBuilding { expected: String, got: String },
    #[error("corrupt frame record at byte {offset}: {reason}")]
    Corrupt { offset: u64, reason: String },
    #[error("store i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSample {
    pub room_id: String,
    pub position: Point3,
    pub temp: f64,
    pub rh: f64,
}

/// Building-wide snapshot of all sensor samples at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalFrame {
    pub building_id: String,
    pub t: f64,
    pub samples: BTreeMap<String, FrameSample>,
    /// Fraction of the building's sensors present in this frame.
    pub completeness: f64,
}

impl ThermalFrame {
    /// Samples of one room, in sensor id order.
    pub fn room_samples<'a>(
        &'a self,
        room_id: &'a str,
    ) -> impl Iterator<Item = (&'a String, &'a FrameSample)> {
        self.samples
            .iter()
            .filter(move |(_, s)| s.room_id == room_id)
    }
}

/// Append-only log of frames for one building, optionally backed by a file of
/// length-prefixed JSON records (`[u32 BE length][frame JSON]`).
#[derive(Debug)]
pub struct FrameStore {
    building_id: String,
    frames: Vec<Arc<ThermalFrame>>,
    writer: Option<BufWriter<File>>,
    path: Option<PathBuf>,
}

impl FrameStore {
    pub fn in_memory(building_id: impl Into<String>) -> Self {
        Self {
            building_id: building_id.into(),
            frames: Vec::new(),
            writer: None,
            path: None,
        }
    }

    pub fn file_path(dir: &Path, building_id: &str) -> PathBuf {
        dir.join(format!("{building_id}.frames"))
    }

    /// Opens (or creates) the store file in `dir` and rebuilds the in-memory index.
    pub fn open(dir: &Path, building_id: &str) -> Result<Self, StoreError> {
        std::fs::create_dir_all(dir)?;
        let path = Self::file_path(dir, building_id);
        let mut frames = Vec::new();
        if path.exists() {
            let mut bytes = Vec::new();
            File::open(&path)?.read_to_end(&mut bytes)?;
            frames = Self::decode_all(&bytes)?;
        }
        let writer = OpenOptions::new().create(true).append(true).open(&path)?;
        let mut store = Self {
            building_id: building_id.to_string(),
            frames: Vec::with_capacity(frames.len()),
            writer: None,
            path: Some(path),
        };
        for f in frames {
            store.push_checked(f)?;
        }
        store.writer = Some(BufWriter::new(writer));
        Ok(store)
    }

    /// Reads a store file without opening it for writing.
    pub fn read_file(path: &Path) -> Result<Vec<ThermalFrame>, StoreError> {
        let mut bytes = Vec::new();
        File::open(path)?.read_to_end(&mut bytes)?;
        Self::decode_all(&bytes)
    }

    fn decode_all(bytes: &[u8]) -> Result<Vec<ThermalFrame>, StoreError> {
        let mut out = Vec::new();
        let mut off = 0usize;
        while off < bytes.len() {
            let corrupt = |reason: String| StoreError::Corrupt {
                offset: off as u64,
                reason,
            };
            let len_bytes: [u8; 4] = bytes
                .get(off..off + 4)
                .ok_or_else(|| corrupt("truncated length prefix".into()))?
                .try_into()
                .expect("four bytes");
            let len = u32::from_be_bytes(len_bytes) as usize;
            let body = bytes
                .get(off + 4..off + 4 + len)
                .ok_or_else(|| corrupt(format!("record of {len} bytes is truncated")))?;
            out.push(serde_json::from_slice(body).map_err(|e| corrupt(e.to_string()))?);
            off += 4 + len;
        }
        Ok(out)
    }

    pub fn encode_record(frame: &ThermalFrame) -> Vec<u8> {
        let json = serde_json::to_vec(frame).expect("frames serialize");
        let mut out = Vec::with_capacity(json.len() + 4);
        out.extend_from_slice(&(json.len() as u32).to_be_bytes());
        out.extend_from_slice(&json);
        out
    }

    fn push_checked(&mut self, frame: ThermalFrame) -> Result<Arc<ThermalFrame>, StoreError> {
        if frame.building_id != self.building_id {
            return Err(StoreError::WrongBuilding {
                expected: self.building_id.clone(),
                got: frame.building_id,
            });
        }
        if let Some(last) = self.frames.last() {
            if frame.t.partial_cmp(&last.t) != Some(Ordering::Greater) {
                return Err(StoreError::NotIncreasing {
                    t: frame.t,
                    last: last.t,
                });
            }
        }
        let frame = Arc::new(frame);
        self.frames.push(Arc::clone(&frame));
        Ok(frame)
    }

    pub fn append(&mut self, frame: ThermalFrame) -> Result<Arc<ThermalFrame>, StoreError> {
        let record = self.writer.is_some().then(|| Self::encode_record(&frame));
        let frame = self.push_checked(frame)?;
        if let (Some(w), Some(rec)) = (self.writer.as_mut(), record) {
            w.write_all(&rec)?;
        }
        Ok(frame)
    }

    pub fn flush(&mut self) -> Result<(), StoreError> {
        if let Some(w) = self.writer.as_mut() {
            w.flush()?;
        }
        Ok(())
    }

    pub fn building_id(&self) -> &str {
        &self.building_id
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[Arc<ThermalFrame>] {
        &self.frames
    }

    pub fn latest(&self) -> Option<&Arc<ThermalFrame>> {
        self.frames.last()
    }

    /// Frames with `t0 <= t <= t1`, in time order.
    pub fn query_range(&self, t0: f64, t1: f64) -> &[Arc<ThermalFrame>] {
        let lo = self.frames.partition_point(|f| f.t < t0);
        let hi = self.frames.partition_point(|f| f.t <= t1);
        &self.frames[lo..hi.max(lo)]
    }

    /// Latest frame at or before `t`.
    pub fn at_or_before(&self, t: f64) -> Option<&Arc<ThermalFrame>> {
        let i = self.frames.partition_point(|f| f.t <= t);
        i.checked_sub(1).map(|i| &self.frames[i])
    }
}

impl Drop for FrameStore {
    fn drop(&mut self) {
        let _ = self.flush();
    }
}

/// Presentation schedule for replaying stored frames at speed `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaybackPlan {
    pub building_id: String,
    pub t0: f64,
    pub t1: f64,
    pub speed: f64,
    /// Stored frame timestamps, in order.
    pub frames: Vec<f64>,
    /// Seconds after playback start at which each frame is shown.
    pub presentation_times: Vec<f64>,
}

impl PlaybackPlan {
    pub fn presentation_gaps(&self) -> Vec<f64> {
        self.presentation_times
            .windows(2)
            .map(|w| w[1] - w[0])
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct TimeKey(f64);

impl Eq for TimeKey {}

impl PartialOrd for TimeKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for TimeKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Debug, Default)]
struct PendingFrame {
    readings: BTreeMap<String, RoomReading>,
}

#[derive(Debug)]
struct BuildingEntry {
    model: Arc<BuildingModel>,
    placements: HashMap<String, SensorPlacement>,
    rooms: Vec<String>,
    grace: f64,
    pending: BTreeMap<TimeKey, PendingFrame>,
    store: FrameStore,
}

impl BuildingEntry {
    fn total_sensors(&self) -> usize {
        self.placements.len()
    }

    fn seal(&mut self, key: TimeKey) -> Result<Arc<ThermalFrame>, StoreError> {
        let pending = self.pending.remove(&key).unwrap_or_default();
        let mut samples = BTreeMap::new();
        for reading in pending.readings.values() {
            for s in &reading.samples {
                match self.placements.get(&s.sensor_id) {
                    Some(p) if p.room_id == reading.room_id => {
                        samples.insert(
                            s.sensor_id.clone(),
                            FrameSample {
                                room_id: p.room_id.clone(),
                                position: p.position,
                                temp: s.temp,
                                rh: s.rh,
                            },
                        );
                    }
                    _ => log::warn!(
                        "dropping sample from unplaced sensor `{}` in room `{}`",
                        s.sensor_id,
                        reading.room_id
                    ),
                }
            }
        }
        let total = self.total_sensors();
        let completeness = if total == 0 {
            0.0
        } else {
            samples.len() as f64 / total as f64
        };
        self.store.append(ThermalFrame {
            building_id: self.model.id.clone(),
            t: key.0,
            samples,
            completeness,
        })
    }

    /// Seals every pending frame up to and including `key`.
    fn seal_through(&mut self, key: TimeKey) -> Result<usize, StoreError> {
        let keys: Vec<TimeKey> = self.pending.range(..=key).map(|(k, _)| *k).collect();
        for k in &keys {
            self.seal(*k)?;
        }
        Ok(keys.len())
    }

    fn seal_expired(&mut self, now: f64) -> Result<usize, StoreError> {
        let expired: Vec<TimeKey> = self
            .pending
            .keys()
            .filter(|k| now - k.0 >= self.grace)
            .copied()
            .collect();
        match expired.last() {
            Some(&last) => self.seal_through(last),
            None => Ok(0),
        }
    }
}

/// What happened to an ingested reading.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestOutcome {
    /// Frames sealed as a consequence of this reading.
    pub sealed: usize,
}

/// Collects room readings from all concentrators and keeps per-building frame stores.
#[derive(Debug, Default)]
pub struct Supervisor {
    buildings: BTreeMap<String, BuildingEntry>,
    room_index: HashMap<String, String>,
}

impl Supervisor {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a building; frames for it are sealed once every room reports or
    /// `grace` seconds of virtual time pass.
    pub fn register_building(
        &mut self,
        model: Arc<BuildingModel>,
        placements: Vec<SensorPlacement>,
        grace: f64,
        store: FrameStore,
    ) -> Result<(), SupervisorError> {
        for room in model.rooms() {
            if let Some(other) = self.room_index.get(&room.id) {
                if other != &model.id {
                    return Err(SupervisorError::AmbiguousRoom(room.id.clone()));
                }
            }
        }
        for room in model.rooms() {
            self.room_index.insert(room.id.clone(), model.id.clone());
        }
        let entry = BuildingEntry {
            rooms: model.rooms().map(|r| r.id.clone()).collect(),
            placements: placements
                .into_iter()
                .map(|p| (p.sensor_id.clone(), p))
                .collect(),
            model: Arc::clone(&model),
            grace,
            pending: BTreeMap::new(),
            store,
        };
        self.buildings.insert(model.id.clone(), entry);
        Ok(())
    }

    pub fn building_ids(&self) -> Vec<String> {
        self.buildings.keys().cloned().collect()
    }

    pub fn model(&self, building: &str) -> Result<&Arc<BuildingModel>, SupervisorError> {
        Ok(&self.entry(building)?.model)
    }

    pub fn store(&self, building: &str) -> Result<&FrameStore, SupervisorError> {
        Ok(&self.entry(building)?.store)
    }

    fn entry(&self, building: &str) -> Result<&BuildingEntry, SupervisorError> {
        self.buildings
            .get(building)
            .ok_or_else(|| SupervisorError::UnknownBuilding(building.to_string()))
    }

    pub fn ingest(&mut self, reading: RoomReading) -> Result<IngestOutcome, SupervisorError> {
        let Some(building) = self.room_index.get(&reading.room_id).cloned() else {
            log::warn!(
                "rejected reading from unregistered room `{}`",
                reading.room_id
            );
            return Err(SupervisorError::UnregisteredRoom(reading.room_id));
        };
        let entry = self.buildings.get_mut(&building).expect("indexed building");
        let key = TimeKey(reading.t);
        if let Some(last) = entry.store.latest() {
            if reading.t <= last.t {
                let err = if reading.t == last.t {
                    SupervisorError::Duplicate {
                        room: reading.room_id,
                        t: reading.t,
                    }
                } else {
                    SupervisorError::Late {
                        room: reading.room_id,
                        t: reading.t,
                    }
                };
                log::warn!("{err}");
                return Err(err);
            }
        }
        let pending = entry.pending.entry(key).or_default();
        if pending.readings.contains_key(&reading.room_id) {
            let err = SupervisorError::Duplicate {
                room: reading.room_id,
                t: reading.t,
            };
            log::warn!("{err}");
            return Err(err);
        }
        let now = reading.t;
        pending.readings.insert(reading.room_id.clone(), reading);
        let complete = entry.rooms.iter().all(|r| pending.readings.contains_key(r));
        let mut sealed = 0;
        if complete {
            sealed += entry.seal_through(key)?;
        }
        sealed += entry.seal_expired(now)?;
        Ok(IngestOutcome { sealed })
    }

    /// Advances the supervisor's view of time, sealing frames whose grace window lapsed.
    pub fn advance_clock(&mut self, now: f64) -> Result<usize, SupervisorError> {
        let mut sealed = 0;
        for entry in self.buildings.values_mut() {
            sealed += entry.seal_expired(now)?;
        }
        Ok(sealed)
    }

    /// Seals everything still pending.
    pub fn flush(&mut self) -> Result<usize, SupervisorError> {
        let mut sealed = 0;
        for entry in self.buildings.values_mut() {
            if let Some((&last, _)) = entry.pending.iter().next_back() {
                sealed += entry.seal_through(last)?;
            }
            entry.store.flush()?;
        }
        Ok(sealed)
    }

    pub fn query_range(
        &self,
        building: &str,
        t0: f64,
        t1: f64,
    ) -> Result<Vec<Arc<ThermalFrame>>, SupervisorError> {
        let entry = self.entry(building)?;
        if t0 > t1 {
            return Err(SupervisorError::InvalidRange { t0, t1 });
        }
        Ok(entry.store.query_range(t0, t1).to_vec())
    }

    pub fn playback(
        &self,
        building: &str,
        t0: f64,
        t1: f64,
        speed: f64,
    ) -> Result<PlaybackPlan, SupervisorError> {
        if !(speed > 0.0) || !speed.is_finite() {
            return Err(SupervisorError::InvalidSpeed(speed));
        }
        let frames = self.query_range(building, t0, t1)?;
        if frames.is_empty() {
            return Err(SupervisorError::EmptyRange { t0, t1 });
        }
        Ok(plan_playback(
            building,
            t0,
            t1,
            speed,
            frames.iter().map(|f| f.t),
        ))
    }

    pub fn live_frame(&self, building: &str) -> Result<Arc<ThermalFrame>, SupervisorError> {
        self.entry(building)?
            .store
            .latest()
            .cloned()
            .ok_or_else(|| SupervisorError::NoFrames(building.to_string()))
    }
}

/// Affine time map: frame `i` is shown at `(t_i - t0) / speed`.
pub fn plan_playback(
    building: &str,
    t0: f64,
    t1: f64,
    speed: f64,
    times: impl Iterator<Item = f64>,
) -> PlaybackPlan {
    let frames: Vec<f64> = times.collect();
    let presentation_times = frames.iter().map(|t| (t - t0) / speed).collect();
    PlaybackPlan {
        building_id: building.to_string(),
        t0,
        t1,
        speed,
        frames,
        presentation_times,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::building::{load_building, PlacementStrategy};
    use crate::field::SensorSample;

    const TWO_ROOMS: &str = r#"{"building":{"id":"b","levels":[{"index":0,"rooms":[
        {"id":"a","min":[0,0,0],"max":[2,2,2]},{"id":"c","min":[2,0,0],"max":[4,2,2]}]}]}}"#;

    fn supervisor() -> (Supervisor, Vec<SensorPlacement>) {
        let model = Arc::new(load_building(TWO_ROOMS).unwrap());
        let placements = model.place_all(PlacementStrategy::Corners8);
        let mut s = Supervisor::new();
        s.register_building(model, placements.clone(), 2.0, FrameStore::in_memory("b"))
            .unwrap();
        (s, placements)
    }

    fn reading(room: &str, t: f64, placements: &[SensorPlacement]) -> RoomReading {
        RoomReading {
            room_id: room.into(),
            t,
            samples: placements
                .iter()
                .filter(|p| p.room_id == room)
                .map(|p| SensorSample {
                    sensor_id: p.sensor_id.clone(),
                    t,
                    temp: 20.0 + t,
                    rh: 50.0,
                    seq: None,
                })
                .collect(),
            missing: vec![],
        }
    }

    #[test]
    fn complete_frame_seals_immediately() {
        let (mut s, p) = supervisor();
        assert_eq!(s.ingest(reading("a", 0.0, &p)).unwrap().sealed, 0);
        assert!(s.live_frame("b").is_err());
        assert_eq!(s.ingest(reading("c", 0.0, &p)).unwrap().sealed, 1);
        let f = s.live_frame("b").unwrap();
        assert_eq!(f.completeness, 1.0);
        assert_eq!(f.samples.len(), 16);
        assert_eq!(f.samples["a.s7"].position, Point3::new(2.0, 2.0, 2.0));
    }

    #[test]
    fn silent_room_sealed_after_grace() {
        let (mut s, p) = supervisor();
        s.ingest(reading("a", 0.0, &p)).unwrap();
        s.ingest(reading("a", 1.0, &p)).unwrap();
        assert!(s.live_frame("b").is_err());
        // grace is 2 s
        assert_eq!(s.ingest(reading("a", 2.0, &p)).unwrap().sealed, 1);
        let f = s.live_frame("b").unwrap();
        assert_eq!(f.t, 0.0);
        assert_eq!(f.completeness, 0.5);
        assert_eq!(s.advance_clock(10.0).unwrap(), 2);
    }

    #[test]
    fn duplicates_rejected_and_store_unchanged() {
        let (mut s, p) = supervisor();
        s.ingest(reading("a", 0.0, &p)).unwrap();
        assert!(matches!(
            s.ingest(reading("a", 0.0, &p)),
            Err(SupervisorError::Duplicate { .. })
        ));
        s.ingest(reading("c", 0.0, &p)).unwrap();
        let before = s.query_range("b", 0.0, 10.0).unwrap();
        assert!(matches!(
            s.ingest(reading("c", 0.0, &p)),
            Err(SupervisorError::Duplicate { .. })
        ));
        assert_eq!(s.query_range("b", 0.0, 10.0).unwrap(), before);
    }

    #[test]
    fn unregistered_room() {
        let (mut s, p) = supervisor();
        assert!(matches!(
            s.ingest(reading("zzz", 0.0, &p)),
            Err(SupervisorError::UnregisteredRoom(_))
        ));
    }

    #[test]
    fn query_boundaries() {
        let (mut s, p) = supervisor();
        assert!(s.query_range("b", 0.0, 100.0).unwrap().is_empty());
        for k in 0..10 {
            let t = 60.0 * k as f64;
            s.ingest(reading("a", t, &p)).unwrap();
            s.ingest(reading("c", t, &p)).unwrap();
        }
        // minutes 2..=7 inclusive on both ends
        let mid = s.query_range("b", 120.0, 420.0).unwrap();
        let ts: Vec<f64> = mid.iter().map(|f| f.t).collect();
        assert_eq!(ts, vec![120.0, 180.0, 240.0, 300.0, 360.0, 420.0]);
        // a five-minute window not aligned to the cadence holds five frames
        assert_eq!(s.query_range("b", 150.0, 450.0).unwrap().len(), 5);
        assert_eq!(s.query_range("b", 121.0, 419.0).unwrap().len(), 4);
        assert!(matches!(
            s.query_range("b", 5.0, 1.0),
            Err(SupervisorError::InvalidRange { .. })
        ));
        assert!(matches!(
            s.query_range("nope", 0.0, 1.0),
            Err(SupervisorError::UnknownBuilding(_))
        ));
    }

    #[test]
    fn playback_scaling() {
        let (mut s, p) = supervisor();
        for t in [0.0, 60.0] {
            s.ingest(reading("a", t, &p)).unwrap();
            s.ingest(reading("c", t, &p)).unwrap();
        }
        assert_eq!(
            s.playback("b", 0.0, 60.0, 60.0)
                .unwrap()
                .presentation_gaps(),
            vec![1.0]
        );
        assert_eq!(
            s.playback("b", 0.0, 60.0, 1.0).unwrap().presentation_gaps(),
            vec![60.0]
        );
        assert_eq!(
            s.playback("b", 0.0, 60.0, 0.5).unwrap().presentation_gaps(),
            vec![120.0]
        );
        assert!(matches!(
            s.playback("b", 0.0, 60.0, 0.0),
            Err(SupervisorError::InvalidSpeed(_))
        ));
        assert!(matches!(
            s.playback("b", 100.0, 200.0, 1.0),
            Err(SupervisorError::EmptyRange { .. })
        ));
    }

    #[test]
    fn live_frame_tracks_latest_sealed() {
        let (mut s, p) = supervisor();
        assert!(matches!(
            s.live_frame("b"),
            Err(SupervisorError::NoFrames(_))
        ));
        for k in 0..5 {
            let t = k as f64;
            s.ingest(reading("a", t, &p)).unwrap();
            s.ingest(reading("c", t, &p)).unwrap();
        }
        assert_eq!(s.live_frame("b").unwrap().t, 4.0);
        // open window at t = 5
        s.ingest(reading("a", 5.0, &p)).unwrap();
        assert_eq!(s.live_frame("b").unwrap().t, 4.0);
    }

    #[test]
    fn store_persists_and_reopens() {
        let dir = tempfile::tempdir().unwrap();
        let frame = |t: f64| ThermalFrame {
            building_id: "b".into(),
            t,
            samples: BTreeMap::new(),
            completeness: 1.0,
        };
        {
            let mut store = FrameStore::open(dir.path(), "b").unwrap();
            store.append(frame(0.0)).unwrap();
            store.append(frame(60.0)).unwrap();
            assert!(matches!(
                store.append(frame(60.0)),
                Err(StoreError::NotIncreasing { .. })
            ));
        }
        let mut store = FrameStore::open(dir.path(), "b").unwrap();
        assert_eq!(store.len(), 2);
        store.append(frame(120.0)).unwrap();
        store.flush().unwrap();
        let frames = FrameStore::read_file(&FrameStore::file_path(dir.path(), "b")).unwrap();
        assert_eq!(
            frames.iter().map(|f| f.t).collect::<Vec<_>>(),
            vec![0.0, 60.0, 120.0]
        );
    }

    #[test]
    fn truncated_store_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = FrameStore::file_path(dir.path(), "b");
        std::fs::write(&path, [0, 0, 0, 50, b'{']).unwrap();
        assert!(matches!(
            FrameStore::open(dir.path(), "b"),
            Err(StoreError::Corrupt { offset: 0, .. })
        ));
    }
}
