//! End-to-end run: end-points, concentrators, level buses and the supervisor on
//! one virtual clock, plus the output directory layout.
//!
//! Output files:
//! - `building.json`: normalized building config
//! - `<id>.frames`: frame store
//! - `run.json`: [`RunSummary`]
//! - `scene.x3d`, `legend.json`: scene of the last frame
//! - `manifest.json`: sha256 and size of every file above

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::building::{
    load_building, parse_json, BuildingError, BuildingModel, PlacementStrategy, SensorPlacement,
};
use crate::concentrator::{
    Concentrator, ConcentratorError, ConcentratorHandle, LevelBus, PropertyRequest,
    PropertyResponse, RoomReading, RosterEntry,
};
use crate::endpoint::{Endpoint, EndpointConfig, LinkParams, NoiseModel, RoomLink};
use crate::field::{DisplayConfig, FieldError, FieldScenario, ScenarioSpec};
use crate::scenegen::{self, SceneError, SceneOptions};
use crate::supervisor::{FrameStore, StoreError, Supervisor, SupervisorError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("config: {0}")]
    Config(#[from] BuildingError),
    #[error("scenario: {0}")]
    Scenario(#[from] FieldError),
    #[error("invalid run options: {0}")]
    Options(String),
    #[error(transparent)]
    Concentrator(#[from] ConcentratorError),
    #[error(transparent)]
    Supervisor(#[from] SupervisorError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("uplink: {0}")]
    Uplink(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl SimError {
    /// Bad input versus failure while running.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            SimError::Config(_) | SimError::Scenario(_) | SimError::Options(_)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorsSection {
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub link: LinkParams,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExtrasDoc {
    #[allow(dead_code)]
    building: serde::de::IgnoredAny,
    #[serde(default)]
    scenario: Option<ScenarioSpec>,
    #[serde(default)]
    display: Option<DisplayConfig>,
    #[serde(default)]
    sensors: Option<SensorsSection>,
}

/// Everything read from a config document.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub model: Arc<BuildingModel>,
    pub scenario: FieldScenario,
    pub display: DisplayConfig,
    pub sensors: SensorsSection,
}

/// Parses a config document. Without a `scenario` section the smooth preset is used.
pub fn load_config(text: &str) -> Result<SimConfig, SimError> {
    let model = load_building(text)?;
    let extras: ExtrasDoc = parse_json(text)?;
    let scenario = match extras.scenario {
        Some(spec) => spec.resolve(&model)?,
        None => FieldScenario::smooth_default(&model),
    };
    Ok(SimConfig {
        model: Arc::new(model),
        scenario,
        display: extras.display.unwrap_or_default(),
        sensors: extras.sensors.unwrap_or_default(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Virtual seconds to simulate.
    pub duration: f64,
    /// Sampling and polling period, seconds.
    pub cadence: f64,
    pub seed: u64,
    pub strategy: PlacementStrategy,
    /// Grace window in poll periods.
    pub grace_periods: f64,
    /// Per-sensor link overrides, keyed by building-wide sensor id.
    pub faults: BTreeMap<String, LinkParams>,
    pub scene: SceneOptions,
    /// Writes outputs here when set; otherwise frames stay in memory.
    pub out_dir: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            duration: 60.0,
            cadence: 1.0,
            seed: 0,
            strategy: PlacementStrategy::Corners8,
            grace_periods: 2.0,
            faults: BTreeMap::new(),
            scene: SceneOptions::default(),
            out_dir: None,
        }
    }
}

impl RunOptions {
    fn validate(&self) -> Result<(), SimError> {
        if !(self.cadence > 0.0) || !self.cadence.is_finite() {
            return Err(SimError::Options(format!(
                "cadence {} must be positive",
                self.cadence
            )));
        }
        if !(self.duration >= self.cadence) || !self.duration.is_finite() {
            return Err(SimError::Options(format!(
                "duration {} must be at least one cadence ({})",
                self.duration, self.cadence
            )));
        }
        if !(self.grace_periods >= 0.0) {
            return Err(SimError::Options("grace must be non-negative".into()));
        }
        Ok(())
    }

    /// Poll instants `k * cadence` with `k * cadence < duration`.
    pub fn poll_count(&self) -> usize {
        let n = self.duration / self.cadence;
        let whole = n.round();
        if (n - whole).abs() < 1e-9 {
            whole as usize
        } else {
            n.ceil() as usize
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomLinkSummary {
    pub room_id: String,
    pub sensors: usize,
    pub transactions: u64,
    pub timeouts: u64,
    pub bytes: u64,
    pub mean_bps: f64,
    pub within_budget: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub building_id: String,
    pub seed: u64,
    pub duration: f64,
    pub cadence: f64,
    pub strategy: PlacementStrategy,
    pub sensors: usize,
    pub polls: usize,
    pub frames: usize,
    pub first_t: Option<f64>,
    pub last_t: Option<f64>,
    /// Sensor readings absent from sealed frames.
    pub missing_samples: usize,
    pub uplink_frames: u64,
    pub rooms: Vec<RoomLinkSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
}

pub struct SimulationResult {
    pub summary: RunSummary,
    pub supervisor: Supervisor,
    pub placements: Vec<SensorPlacement>,
}

/// Independent per-component seeds drawn from the run seed.
fn seed_stream(seed: u64) -> impl FnMut() -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    move || rng.random()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SimError + '_ {
    move |source| SimError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Builds the topology, runs every poll cycle and seals all frames.
pub fn run_simulation(cfg: &SimConfig, opts: &RunOptions) -> Result<SimulationResult, SimError> {
    opts.validate()?;
    let model = &cfg.model;
    let env: Arc<FieldScenario> = Arc::new(cfg.scenario.clone());
    let placements = model.place_all(opts.strategy);
    for id in opts.faults.keys() {
        if !placements.iter().any(|p| &p.sensor_id == id) {
            return Err(SimError::Options(format!(
                "fault names unknown sensor `{id}`"
            )));
        }
    }
    let mut next_seed = seed_stream(opts.seed);
    let ep_config = EndpointConfig {
        sample_period: opts.cadence,
        noise: cfg.sensors.noise,
        ..Default::default()
    };

    let mut dcs = Vec::with_capacity(model.room_count());
    for room in model.rooms() {
        let mine: Vec<&SensorPlacement> =
            placements.iter().filter(|p| p.room_id == room.id).collect();
        let endpoints = mine
            .iter()
            .map(|p| Endpoint::new(p.address, p.position, env.clone(), ep_config, next_seed()))
            .collect();
        let mut link = RoomLink::new(endpoints, next_seed());
        for p in &mine {
            let params = opts
                .faults
                .get(&p.sensor_id)
                .copied()
                .unwrap_or(cfg.sensors.link);
            link.set_params(p.address, params)
                .expect("end-point created from this placement");
        }
        let roster = mine
            .iter()
            .map(|p| RosterEntry {
                sensor_id: p.sensor_id.clone(),
                address: p.address,
                position: p.position,
            })
            .collect();
        dcs.push(Concentrator::new(
            room.id.clone(),
            room.level,
            roster,
            link,
            opts.cadence,
        )?);
    }
    let handles: Vec<ConcentratorHandle> = dcs.iter().map(|d| d.handle()).collect();
    let mut buses: Vec<LevelBus> = model
        .levels
        .iter()
        .map(|l| LevelBus::new(l.index))
        .collect();

    let store = match &opts.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
            let path = FrameStore::file_path(dir, &model.id);
            if path.exists() {
                log::info!("replacing existing frame store {}", path.display());
                fs::remove_file(&path).map_err(io_err(&path))?;
            }
            FrameStore::open(dir, &model.id)?
        }
        None => FrameStore::in_memory(model.id.clone()),
    };
    let mut supervisor = Supervisor::new();
    supervisor.register_building(
        Arc::clone(model),
        placements.clone(),
        opts.grace_periods * opts.cadence,
        store,
    )?;

    let polls = opts.poll_count();
    for k in 0..polls {
        let t = k as f64 * opts.cadence;
        for dc in &mut dcs {
            dc.poll_cycle(t)?;
        }
        for dc in &dcs {
            let bus = buses
                .iter_mut()
                .find(|b| b.level() == dc.level())
                .expect("one bus per level");
            let req = PropertyRequest::new(dc.room_id(), "latest_cycle");
            let reply = bus
                .exchange(&req, &handles)
                .map_err(|e| SimError::Uplink(e.to_string()))?;
            let reading: RoomReading = match reply {
                PropertyResponse::Value { payload, .. } => {
                    serde_json::from_value(payload).map_err(|e| SimError::Uplink(e.to_string()))?
                }
                PropertyResponse::Error { code, .. } => {
                    return Err(SimError::Uplink(format!(
                        "room {} answered {code:?}",
                        dc.room_id()
                    )))
                }
            };
            supervisor.ingest(reading)?;
        }
        supervisor.advance_clock(t)?;
    }
    supervisor.flush()?;

    let store = supervisor.store(&model.id)?;
    let frames = store.frames();
    let missing_samples = frames
        .iter()
        .map(|f| placements.len() - f.samples.len())
        .sum();
    let duration_for_rate = if opts.duration > 0.0 {
        opts.duration
    } else {
        opts.cadence
    };
    let rooms = dcs
        .iter()
        .map(|d| {
            let s = d.link().stats();
            RoomLinkSummary {
                room_id: d.room_id().to_string(),
                sensors: d.roster().len(),
                transactions: s.transactions,
                timeouts: s.timeouts,
                bytes: s.bytes,
                mean_bps: d.link().mean_bps(duration_for_rate),
                within_budget: d.link().within_budget(duration_for_rate),
            }
        })
        .collect();
    let summary = RunSummary {
        building_id: model.id.clone(),
        seed: opts.seed,
        duration: opts.duration,
        cadence: opts.cadence,
        strategy: opts.strategy,
        sensors: placements.len(),
        polls,
        frames: frames.len(),
        first_t: frames.first().map(|f| f.t),
        last_t: frames.last().map(|f| f.t),
        missing_samples,
        uplink_frames: buses.iter().map(|b| b.frames()).sum(),
        rooms,
    };
    log::info!(
        "{}: {} frames over {} s from {} sensors",
        summary.building_id,
        summary.frames,
        summary.duration,
        summary.sensors
    );

    if let Some(dir) = &opts.out_dir {
        write_outputs(dir, cfg, opts, &summary, &supervisor)?;
    }
    Ok(SimulationResult {
        summary,
        supervisor,
        placements,
    })
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), SimError> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(io_err(&path))
}

fn write_outputs(
    dir: &Path,
    cfg: &SimConfig,
    opts: &RunOptions,
    summary: &RunSummary,
    supervisor: &Supervisor,
) -> Result<(), SimError> {
    let model = &cfg.model;
    let mut names = vec![
        "building.json".to_string(),
        format!("{}.frames", model.id),
        "run.json".to_string(),
    ];
    write_file(dir, "building.json", &stored_config(cfg))?;
    let run = serde_json::to_vec_pretty(summary).expect("summary serializes");
    write_file(dir, "run.json", &run)?;
    if let Ok(last) = supervisor.live_frame(&model.id) {
        let mut scene_opts = opts.scene.clone();
        if scene_opts.color_map.is_none() {
            scene_opts.color_map = Some(cfg.display.map_for(scene_opts.layer));
        }
        let doc = scenegen::generate_scene(&last, model, &scene_opts)?;
        write_file(dir, "scene.x3d", scenegen::serialize_x3d(&doc).as_bytes())?;
        let legend =
            serde_json::to_vec_pretty(&scenegen::legend(&scene_opts)).expect("legend serializes");
        write_file(dir, "legend.json", &legend)?;
        names.push("scene.x3d".into());
        names.push("legend.json".into());
    }
    let manifest = build_manifest(dir, &names)?;
    let bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    write_file(dir, "manifest.json", &bytes)
}

/// Building config plus display ramps, loadable with [`load_config`].
pub fn stored_config(cfg: &SimConfig) -> Vec<u8> {
    let mut doc: serde_json::Value =
        serde_json::from_str(&cfg.model.to_config_json()).expect("model config is JSON");
    doc["display"] = serde_json::to_value(cfg.display).expect("display serializes");
    serde_json::to_vec_pretty(&doc).expect("config serializes")
}

/// Hashes the named files under `dir`.
pub fn build_manifest(dir: &Path, names: &[String]) -> Result<Manifest, SimError> {
    let mut files = Vec::with_capacity(names.len());
    for name in names {
        let path = dir.join(name);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        files.push(ManifestEntry {
            path: name.clone(),
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
    }
    Ok(Manifest { files })
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONFIG: &str = r#"{
        "building": {"id": "flat", "levels": [
            {"index": 0, "rooms": [
                {"id": "a", "min": [0, 0, 0], "max": [4, 4, 3]},
                {"id": "b", "min": [4, 0, 0], "max": [8, 4, 3]}
            ]},
            {"index": 1, "rooms": [
                {"id": "c", "min": [0, 0, 3], "max": [8, 4, 6]}
            ]}
        ]},
        "scenario": {"preset": "overheated_corner"},
        "sensors": {"noise": {"sigma_temp": 0.0, "sigma_rh": 0.0}}
    }"#;

    #[test]
    fn config_sections() {
        let cfg = load_config(CONFIG).unwrap();
        assert_eq!(cfg.model.room_count(), 3);
        assert_eq!(cfg.sensors.noise, NoiseModel::NONE);
        assert_eq!(cfg.scenario.hotspots.len(), 1);
        let bad = CONFIG.replace("\"sensors\"", "\"sensorz\"");
        assert!(matches!(load_config(&bad), Err(SimError::Config(_))));
        let stored = load_config(std::str::from_utf8(&stored_config(&cfg)).unwrap()).unwrap();
        assert_eq!(stored.model, cfg.model);
        assert_eq!(stored.display, cfg.display);
    }

    #[test]
    fn duration_shorter_than_cadence_rejected() {
        let cfg = load_config(CONFIG).unwrap();
        let opts = RunOptions {
            duration: 0.5,
            ..Default::default()
        };
        let err = run_simulation(&cfg, &opts).err().unwrap();
        assert!(err.is_config_error());
    }

    #[test]
    fn poll_count_boundaries() {
        let o = |duration, cadence| RunOptions {
            duration,
            cadence,
            ..Default::default()
        };
        assert_eq!(o(60.0, 1.0).poll_count(), 60);
        assert_eq!(o(86_400.0, 60.0).poll_count(), 1440);
        assert_eq!(o(0.0, 1.0).poll_count(), 0);
        assert_eq!(o(2.5, 1.0).poll_count(), 3);
    }

    #[test]
    fn healthy_run_fills_every_frame() {
        let cfg = load_config(CONFIG).unwrap();
        let r = run_simulation(
            &cfg,
            &RunOptions {
                duration: 10.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(r.summary.frames, 10);
        assert_eq!(r.summary.missing_samples, 0);
        assert_eq!(r.summary.sensors, 24);
        // one request and one reply per room per cycle
        assert_eq!(r.summary.uplink_frames, 10 * 3 * 2);
        assert!(r
            .summary
            .rooms
            .iter()
            .all(|room| room.transactions == 80 && room.within_budget));
    }

    #[test]
    fn dead_sensor_is_missing_not_fatal() {
        let cfg = load_config(CONFIG).unwrap();
        let mut faults = BTreeMap::new();
        faults.insert(
            "a.s0".to_string(),
            LinkParams {
                latency: 0.0,
                loss_probability: 1.0,
            },
        );
        let r = run_simulation(
            &cfg,
            &RunOptions {
                duration: 5.0,
                faults,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(r.summary.frames, 5);
        assert_eq!(r.summary.missing_samples, 5);
        let frames = r.supervisor.store("flat").unwrap().frames();
        assert!(frames.iter().all(|f| !f.samples.contains_key("a.s0")));
    }

    #[test]
    fn same_seed_same_frames() {
        let mut cfg = load_config(CONFIG).unwrap();
        cfg.sensors.noise = NoiseModel::default();
        let opts = RunOptions {
            duration: 5.0,
            seed: 7,
            ..Default::default()
        };
        let a = run_simulation(&cfg, &opts).unwrap();
        let b = run_simulation(&cfg, &opts).unwrap();
        let fa = a.supervisor.store("flat").unwrap().frames().to_vec();
        let fb = b.supervisor.store("flat").unwrap().frames().to_vec();
        assert_eq!(fa, fb);
        let c = run_simulation(&cfg, &RunOptions { seed: 8, ..opts }).unwrap();
        assert_ne!(fa, c.supervisor.store("flat").unwrap().frames().to_vec());
    }

    #[test]
    fn outputs_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = load_config(CONFIG).unwrap();
        let opts = RunOptions {
            duration: 3.0,
            out_dir: Some(dir.path().to_path_buf()),
            ..Default::default()
        };
        run_simulation(&cfg, &opts).unwrap();
        let manifest: Manifest =
            serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
        let names: Vec<&str> = manifest.files.iter().map(|f| f.path.as_str()).collect();
        assert_eq!(
            names,
            [
                "building.json",
                "flat.frames",
                "run.json",
                "scene.x3d",
                "legend.json"
            ]
        );
        for f in &manifest.files {
            let bytes = fs::read(dir.path().join(&f.path)).unwrap();
            assert_eq!(hex::encode(Sha256::digest(&bytes)), f.sha256);
        }
        // a second run into the same directory replaces the store
        run_simulation(&cfg, &opts).unwrap();
        let frames = FrameStore::read_file(&dir.path().join("flat.frames")).unwrap();
        assert_eq!(frames.len(), 3);
    }
}
