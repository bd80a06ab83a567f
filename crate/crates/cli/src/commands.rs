//! Subcommand definitions and their implementations.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use thermnet_core::building::PlacementStrategy;
use thermnet_core::field::{ColorMap, Layer};
use thermnet_core::geometry::Point3;
use thermnet_core::scenegen::{
    generate_scene, legend, serialize_x3d, view_dependent_scene, PrimitiveKind, SceneOptions,
    WallMode,
};
use thermnet_core::sim::{load_config, run_simulation, RunOptions, SimConfig};
use thermnet_core::validation::{truth_frame, validate_frame, Plane, Resolution, ValidationSpec};

use crate::service::{self, AppState, LiveClock};

#[derive(Debug, Parser)]
#[command(
    name = "thermnet",
    version,
    about = "Building thermal sensor network simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the sensor network on a virtual clock and store every frame.
    Simulate(SimulateArgs),
    /// Serve stored frames and scenes over HTTP.
    Serve(ServeArgs),
    /// Write the X3D scene of one stored frame.
    ExportScene(ExportArgs),
    /// Compare a reconstructed cross-section against ground truth.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct SceneArgs {
    #[arg(long, default_value = "temperature")]
    pub layer: Layer,
    #[arg(long, default_value = "flat")]
    pub walls: WallMode,
    #[arg(long, default_value = "sphere")]
    pub primitive: PrimitiveKind,
    /// Cell pitch in meters.
    #[arg(long, default_value_t = 1.0)]
    pub cell_spacing: f64,
}

impl SceneArgs {
    fn options(&self, color_map: ColorMap) -> SceneOptions {
        SceneOptions {
            layer: self.layer,
            walls: self.walls,
            primitive: self.primitive,
            cell_spacing: self.cell_spacing,
            color_map: Some(color_map),
            ..Default::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Virtual seconds.
    #[arg(long, default_value_t = 60.0)]
    pub duration: f64,
    /// Sample and poll period, seconds.
    #[arg(long, default_value_t = 1.0)]
    pub cadence: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "corners8")]
    pub strategy: PlacementStrategy,
    #[command(flatten)]
    pub scene: SceneArgs,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Output directory of `simulate`, or a directory holding several of them.
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Virtual seconds replayed per wall second on the live endpoint.
    #[arg(long, default_value_t = 1.0)]
    pub speed: f64,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Output directory of `simulate`.
    #[arg(long, default_value = ".")]
    pub store: PathBuf,
    /// Frame time; the last frame at or before it is used.
    #[arg(long)]
    pub t: f64,
    /// Building coordinates `x,y,z`; enables view-dependent detail.
    #[arg(long, value_parser = parse_point)]
    pub viewpoint: Option<Point3>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub scene: SceneArgs,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = "z=1.5")]
    pub plane: Plane,
    #[arg(long, default_value = "256x256")]
    pub res: Resolution,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "corners8")]
    pub strategy: PlacementStrategy,
    /// Virtual time at which truth is sampled.
    #[arg(long, default_value_t = 0.0)]
    pub t: f64,
    #[arg(long, default_value = "temperature")]
    pub layer: Layer,
}

pub fn parse_point(s: &str) -> Result<Point3, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z, got `{s}`"));
    }
    let mut v = [0.0; 3];
    for (slot, part) in v.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|_| format!("`{part}` is not a number"))?;
    }
    let p = Point3::new(v[0], v[1], v[2]);
    if p.is_finite() {
        Ok(p)
    } else {
        Err(format!("viewpoint `{s}` is not finite"))
    }
}

/// Failure split along the exit-status contract.
#[derive(Debug)]
pub enum CliError {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(2),
            CliError::Runtime(_) => ExitCode::from(3),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "config error: {e:#}"),
            CliError::Runtime(e) => write!(f, "error: {e:#}"),
        }
    }
}

fn config_err(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Config(e.into())
}

fn runtime_err(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Runtime(e.into())
}

fn read_config(path: &Path) -> Result<SimConfig, CliError> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(config_err)?;
    load_config(&text)
        .with_context(|| path.display().to_string())
        .map_err(config_err)
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))
            .map_err(runtime_err)?;
    }
    fs::write(path, bytes)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(runtime_err)
}

/// `<stem><suffix>` next to `path`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Serve(a) => serve(a),
        Command::ExportScene(a) => export_scene(a),
        Command::Validate(a) => validate(a),
    }
}

pub fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    let cfg = read_config(&a.config)?;
    let opts = RunOptions {
        duration: a.duration,
        cadence: a.cadence,
        seed: a.seed,
        strategy: a.strategy,
        scene: a.scene.options(cfg.display.map_for(a.scene.layer)),
        out_dir: Some(a.out.clone()),
        ..Default::default()
    };
    let result = run_simulation(&cfg, &opts).map_err(|e| {
        if e.is_config_error() {
            config_err(e)
        } else {
            runtime_err(e)
        }
    })?;
    let s = &result.summary;
    println!(
        "{}: {} frames, {} sensors, {} missing samples -> {}",
        s.building_id,
        s.frames,
        s.sensors,
        s.missing_samples,
        a.out.display()
    );
    Ok(())
}

pub fn serve(a: ServeArgs) -> Result<(), CliError> {
    if !(a.speed.is_finite() && a.speed > 0.0) {
        return Err(config_err(anyhow!("speed must be positive")));
    }
    let (supervisor, displays) = service::load_store(&a.store).map_err(config_err)?;
    let state = Arc::new(AppState::new(supervisor, displays, LiveClock::new(a.speed)));
    let rt = tokio::runtime::Runtime::new().map_err(runtime_err)?;
    rt.block_on(service::serve(state, a.port))
        .map_err(runtime_err)
}

pub fn export_scene(a: ExportArgs) -> Result<(), CliError> {
    let (supervisor, displays) = service::load_store(&a.store).map_err(config_err)?;
    let ids = supervisor.building_ids();
    let [id] = ids.as_slice() else {
        return Err(config_err(anyhow!(
            "{} holds {} buildings; point --store at a single run",
            a.store.display(),
            ids.len()
        )));
    };
    let store = supervisor.store(id).map_err(runtime_err)?;
    let frame = store
        .at_or_before(a.t)
        .ok_or_else(|| runtime_err(anyhow!("no frame at or before t = {}", a.t)))?;
    let model = supervisor.model(id).map_err(runtime_err)?;
    let mut opts = a.scene.options(displays[id].map_for(a.scene.layer));
    opts.viewpoint = a.viewpoint;
    let doc = match a.viewpoint {
        Some(_) => view_dependent_scene(frame, model, &opts),
        None => generate_scene(frame, model, &opts),
    }
    .map_err(runtime_err)?;
    write(&a.out, serialize_x3d(&doc).as_bytes())?;
    let legend = serde_json::to_vec_pretty(&legend(&opts)).map_err(runtime_err)?;
    write(&sibling(&a.out, ".legend.json"), &legend)?;
    println!(
        "frame t = {}: {} cells, {} nominal polygons -> {}",
        frame.t,
        doc.cell_count(),
        doc.nominal_polygons(),
        a.out.display()
    );
    Ok(())
}

pub fn validate(a: ValidateArgs) -> Result<(), CliError> {
    let cfg = read_config(&a.config)?;
    let placements = cfg.model.place_all(a.strategy);
    let frame = truth_frame(&cfg.model, &cfg.scenario, &placements, a.t);
    let spec = ValidationSpec {
        layer: a.layer,
        ..ValidationSpec::new(a.plane, a.res)
    };
    let (report, truth, recon) =
        validate_frame(&cfg.model, &cfg.scenario, &frame, &spec).map_err(config_err)?;
    write(
        &a.out,
        &serde_json::to_vec_pretty(&report).map_err(runtime_err)?,
    )?;
    let map = cfg.display.map_for(a.layer);
    write(
        &sibling(&a.out, ".truth.pgm"),
        &truth.to_pgm(map.lo, map.hi),
    )?;
    write(
        &sibling(&a.out, ".recon.pgm"),
        &recon.to_pgm(map.lo, map.hi),
    )?;
    let meta = serde_json::json!({
        "plane": truth.plane,
        "extent": truth.extent,
        "resolution": truth.resolution,
        "lo": map.lo,
        "hi": map.hi,
        "units": a.layer.units(),
        "rows": "top row is the largest v coordinate",
    });
    write(
        &sibling(&a.out, ".pgm.json"),
        &serde_json::to_vec_pretty(&meta).map_err(runtime_err)?,
    )?;
    println!(
        "rms {:.4}, max {:.4}, hotspot offset {:.3} m: {}",
        report.rms,
        report.max_abs,
        report.hotspot_offset,
        if report.pass { "pass" } else { "fail" }
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_parsing() {
        assert_eq!(
            parse_point("1,-2.5, 3").unwrap(),
            Point3::new(1.0, -2.5, 3.0)
        );
        assert!(parse_point("1,2").is_err());
        assert!(parse_point("a,b,c").is_err());
        assert!(parse_point("inf,0,0").is_err());
    }

    #[test]
    fn sibling_paths() {
        assert_eq!(
            sibling(Path::new("out/report.json"), ".truth.pgm"),
            PathBuf::from("out/report.truth.pgm")
        );
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
