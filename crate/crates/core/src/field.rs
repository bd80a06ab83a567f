//! Synthetic ground-truth fields, reconstruction from sensor samples, and
//! value-to-color mapping.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::building::BuildingModel;
use crate::geometry::{Axis, Point3};

/// Measurable range of the simulated sensor, °C.
pub const TEMP_MIN: f64 = -40.0;
pub const TEMP_MAX: f64 = 123.8;

#[derive(Debug, Error, PartialEq)]
pub enum FieldError {
    #[error("reconstruction needs at least one sample")]
    NoSamples,
    #[error("samples do not form a complete rectangular grid: {0}")]
    IncompleteGrid(String),
    #[error("point {0} lies outside the sensor grid; extrapolation is not supported")]
    Extrapolation(Point3),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid color map: lo {lo} must be below hi {hi}")]
    InvalidColorMap { lo: f64, hi: f64 },
    #[error("kernel sigma must be positive, got {0}")]
    InvalidSigma(f64),
}

/// A localized warm/cold and wet/dry anomaly with a Gaussian footprint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hotspot {
    pub center: Point3,
    #[serde(default)]
    pub amplitude_temp: f64,
    #[serde(default)]
    pub amplitude_rh: f64,
    pub sigma: f64,
    /// Linear ramp-up time from t = 0; zero means fully developed from the start.
    #[serde(default)]
    pub onset: f64,
    /// Exponential decay time constant after onset; zero means persistent.
    #[serde(default)]
    pub decay: f64,
}

impl Hotspot {
    /// Time envelope in [0, 1].
    pub fn envelope(&self, t: f64) -> f64 {
        let rise = if self.onset > 0.0 {
            (t / self.onset).clamp(0.0, 1.0)
        } else {
            1.0
        };
        let fall = if self.decay > 0.0 {
            (-(t - self.onset).max(0.0) / self.decay).exp()
        } else {
            1.0
        };
        rise * fall
    }

    fn kernel(&self, p: &Point3) -> f64 {
        (-p.distance_squared(&self.center) / (2.0 * self.sigma * self.sigma)).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diurnal {
    pub amplitude: f64,
    pub period: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldScenario {
    pub baseline_temp: f64,
    pub baseline_rh: f64,
    #[serde(default)]
    pub hotspots: Vec<Hotspot>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diurnal: Option<Diurnal>,
}

impl Default for FieldScenario {
    fn default() -> Self {
        Self::uniform(20.0, 50.0)
    }
}

/// Anything that can report the true temperature and humidity at a point and time.
pub trait Environment: Send + Sync {
    fn truth(&self, p: &Point3, t: f64) -> (f64, f64);
}

impl FieldScenario {
    pub fn uniform(temp: f64, rh: f64) -> Self {
        Self {
            baseline_temp: temp,
            baseline_rh: rh,
            hotspots: Vec::new(),
            diurnal: None,
        }
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        for (i, h) in self.hotspots.iter().enumerate() {
            if !(h.sigma > 0.0) {
                return Err(FieldError::InvalidScenario(format!(
                    "hotspot {i}: sigma must be positive"
                )));
            }
            if h.onset < 0.0 || h.decay < 0.0 {
                return Err(FieldError::InvalidScenario(format!(
                    "hotspot {i}: onset and decay must be non-negative"
                )));
            }
        }
        if let Some(d) = &self.diurnal {
            if !(d.period > 0.0) {
                return Err(FieldError::InvalidScenario(
                    "diurnal period must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    /// True temperature (°C) and relative humidity (%) at `p` and time `t`.
    pub fn ground_truth(&self, p: &Point3, t: f64) -> (f64, f64) {
        let mut temp = self.baseline_temp;
        let mut rh = self.baseline_rh;
        if let Some(d) = &self.diurnal {
            temp += d.amplitude * (2.0 * PI * t / d.period).sin();
        }
        for h in &self.hotspots {
            let w = h.kernel(p) * h.envelope(t);
            temp += h.amplitude_temp * w;
            rh += h.amplitude_rh * w;
        }
        (temp, rh.clamp(0.0, 100.0))
    }

    /// Warm attic corner: hotspot at the top of the building's min-x/min-y corner.
    pub fn overheated_corner(model: &BuildingModel) -> Self {
        let env = model.envelope;
        let e = env.extent();
        Self {
            baseline_temp: 21.0,
            baseline_rh: 45.0,
            hotspots: vec![Hotspot {
                center: Point3::new(env.min.x, env.min.y, env.max.z),
                amplitude_temp: 9.0,
                amplitude_rh: -12.0,
                sigma: 0.3 * e.x.max(e.y).min(12.0),
                onset: 0.0,
                decay: 0.0,
            }],
            diurnal: None,
        }
    }

    /// Cold, damp floor-level corner (leak-damage pattern).
    pub fn cold_wet_corner(model: &BuildingModel) -> Self {
        let env = model.envelope;
        let e = env.extent();
        Self {
            baseline_temp: 21.0,
            baseline_rh: 45.0,
            hotspots: vec![Hotspot {
                center: Point3::new(env.max.x, env.min.y, env.min.z),
                amplitude_temp: -5.0,
                amplitude_rh: 35.0,
                sigma: 0.3 * e.x.max(e.y).min(12.0),
                onset: 0.0,
                decay: 0.0,
            }],
            diurnal: None,
        }
    }

    /// Gentle single-bump field, smooth at room scale.
    pub fn smooth_default(model: &BuildingModel) -> Self {
        let env = model.envelope;
        let e = env.extent();
        Self {
            baseline_temp: 21.0,
            baseline_rh: 45.0,
            hotspots: vec![Hotspot {
                center: env.min + Point3::new(0.3 * e.x, 0.4 * e.y, 0.5 * e.z),
                amplitude_temp: 4.0,
                amplitude_rh: -10.0,
                sigma: 0.25 * e.x.max(e.y),
                onset: 0.0,
                decay: 0.0,
            }],
            diurnal: Some(Diurnal {
                amplitude: 1.5,
                period: 86_400.0,
            }),
        }
    }

    pub fn preset(name: &str, model: &BuildingModel) -> Result<Self, FieldError> {
        match name {
            "uniform" => Ok(Self::default()),
            "smooth" => Ok(Self::smooth_default(model)),
            "overheated_corner" => Ok(Self::overheated_corner(model)),
            "cold_wet_corner" => Ok(Self::cold_wet_corner(model)),
            other => Err(FieldError::InvalidScenario(format!(
                "unknown preset `{other}`"
            ))),
        }
    }
}

impl Environment for FieldScenario {
    fn truth(&self, p: &Point3, t: f64) -> (f64, f64) {
        self.ground_truth(p, t)
    }
}

/// Scenario section of the config: either a named preset or explicit parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioSpec {
    Preset { preset: String },
    Explicit(FieldScenario),
}

impl ScenarioSpec {
    pub fn resolve(&self, model: &BuildingModel) -> Result<FieldScenario, FieldError> {
        let s = match self {
            ScenarioSpec::Preset { preset } => FieldScenario::preset(preset, model)?,
            ScenarioSpec::Explicit(s) => s.clone(),
        };
        s.validate()?;
        Ok(s)
    }
}

/// One decoded sensor reading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSample {
    pub sensor_id: String,
    pub t: f64,
    pub temp: f64,
    pub rh: f64,
    /// Low 16 bits of the endpoint sequence number, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seq: Option<u16>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReconstructionMethod {
    #[default]
    LinearGrid,
    BellKernel,
}

/// Default distance under which the bell kernel returns a sample's own values.
pub const DEFAULT_SNAP_EPSILON: f64 = 0.01;

// Tolerance for matching coordinates to grid lines.
const GRID_EPS: f64 = 1e-9;

#[derive(Debug, Clone)]
struct Lattice {
    axes: [Vec<f64>; 3],
    temp: Vec<f64>,
    rh: Vec<f64>,
}

impl Lattice {
    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.axes[1].len() + j) * self.axes[0].len() + i
    }
}

/// Continuous field rebuilt from discrete samples.
#[derive(Debug, Clone)]
pub struct ReconstructionField {
    method: ReconstructionMethod,
    samples: Vec<(Point3, SensorSample)>,
    kernel_sigma: f64,
    snap_epsilon: f64,
    lattice: Option<Lattice>,
    temp_range: (f64, f64),
    rh_range: (f64, f64),
}

fn value_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

fn distinct_coords(points: &[Point3], axis: Axis) -> Vec<f64> {
    let mut v: Vec<f64> = points.iter().map(|p| p.axis(axis)).collect();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= GRID_EPS);
    v
}

fn locate(coords: &[f64], v: f64) -> Option<usize> {
    let i = coords.partition_point(|&c| c < v - GRID_EPS);
    (i < coords.len() && (coords[i] - v).abs() <= GRID_EPS).then_some(i)
}

/// Half the mean nearest-neighbour distance between sample positions.
pub fn default_kernel_sigma(positions: &[Point3]) -> f64 {
    if positions.len() < 2 {
        return 1.0;
    }
    let total: f64 = positions
        .iter()
        .enumerate()
        .map(|(i, p)| {
            positions
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, q)| p.distance(q))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    let mean = total / positions.len() as f64;
    if mean > 0.0 {
        mean / 2.0
    } else {
        1.0
    }
}

impl ReconstructionField {
    /// Trilinear interpolation over samples that sit on a complete rectangular lattice.
    pub fn linear_grid(samples: Vec<(Point3, SensorSample)>) -> Result<Self, FieldError> {
        if samples.is_empty() {
            return Err(FieldError::NoSamples);
        }
        let positions: Vec<Point3> = samples.iter().map(|(p, _)| *p).collect();
        let axes = [
            distinct_coords(&positions, Axis::X),
            distinct_coords(&positions, Axis::Y),
            distinct_coords(&positions, Axis::Z),
        ];
        let nodes = axes[0].len() * axes[1].len() * axes[2].len();
        if nodes != samples.len() {
            return Err(FieldError::IncompleteGrid(format!(
                "{} samples for a {}x{}x{} lattice",
                samples.len(),
                axes[0].len(),
                axes[1].len(),
                axes[2].len()
            )));
        }
        let mut lattice = Lattice {
            axes,
            temp: vec![f64::NAN; nodes],
            rh: vec![f64::NAN; nodes],
        };
        for (p, s) in &samples {
            let i = locate(&lattice.axes[0], p.x).expect("coordinate taken from samples");
            let j = locate(&lattice.axes[1], p.y).expect("coordinate taken from samples");
            let k = locate(&lattice.axes[2], p.z).expect("coordinate taken from samples");
            let idx = lattice.index(i, j, k);
            if !lattice.temp[idx].is_nan() {
                return Err(FieldError::IncompleteGrid(format!(
                    "two samples share lattice node {p}"
                )));
            }
            lattice.temp[idx] = s.temp;
            lattice.rh[idx] = s.rh;
        }
        Ok(Self::assemble(
            ReconstructionMethod::LinearGrid,
            samples,
            0.0,
            0.0,
            Some(lattice),
        ))
    }

    /// Normalized Gaussian weighting; `kernel_sigma` defaults to half the mean
    /// nearest-neighbour spacing.
    pub fn bell_kernel(
        samples: Vec<(Point3, SensorSample)>,
        kernel_sigma: Option<f64>,
    ) -> Result<Self, FieldError> {
        if samples.is_empty() {
            return Err(FieldError::NoSamples);
        }
        let sigma = match kernel_sigma {
            Some(s) => s,
            None => {
                let positions: Vec<Point3> = samples.iter().map(|(p, _)| *p).collect();
                default_kernel_sigma(&positions)
            }
        };
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(FieldError::InvalidSigma(sigma));
        }
        Ok(Self::assemble(
            ReconstructionMethod::BellKernel,
            samples,
            sigma,
            DEFAULT_SNAP_EPSILON,
            None,
        ))
    }

    /// Linear grid when the samples allow it, bell kernel otherwise.
    pub fn auto(
        preferred: ReconstructionMethod,
        samples: Vec<(Point3, SensorSample)>,
    ) -> Result<Self, FieldError> {
        match preferred {
            ReconstructionMethod::BellKernel => Self::bell_kernel(samples, None),
            ReconstructionMethod::LinearGrid => match Self::linear_grid(samples.clone()) {
                Ok(f) => Ok(f),
                Err(FieldError::IncompleteGrid(_)) => Self::bell_kernel(samples, None),
                Err(e) => Err(e),
            },
        }
    }

    fn assemble(
        method: ReconstructionMethod,
        samples: Vec<(Point3, SensorSample)>,
        kernel_sigma: f64,
        snap_epsilon: f64,
        lattice: Option<Lattice>,
    ) -> Self {
        let temp_range = value_range(samples.iter().map(|(_, s)| s.temp));
        let rh_range = value_range(samples.iter().map(|(_, s)| s.rh));
        Self {
            method,
            samples,
            kernel_sigma,
            snap_epsilon,
            lattice,
            temp_range,
            rh_range,
        }
    }

    pub fn with_snap_epsilon(mut self, eps: f64) -> Self {
        self.snap_epsilon = eps;
        self
    }

    pub fn method(&self) -> ReconstructionMethod {
        self.method
    }

    pub fn kernel_sigma(&self) -> f64 {
        self.kernel_sigma
    }

    pub fn samples(&self) -> &[(Point3, SensorSample)] {
        &self.samples
    }

    /// Temperature (°C) and relative humidity (%) at `p`.
    pub fn reconstruct(&self, p: &Point3) -> Result<(f64, f64), FieldError> {
        match self.method {
            ReconstructionMethod::LinearGrid => self.trilinear(p),
            ReconstructionMethod::BellKernel => Ok(self.bell(p)),
        }
    }

    fn trilinear(&self, p: &Point3) -> Result<(f64, f64), FieldError> {
        let lat = self
            .lattice
            .as_ref()
            .expect("linear grid carries a lattice");
        // (lower index, upper index, weight of upper) per axis
        let mut spans = [(0usize, 0usize, 0.0f64); 3];
        for (a, axis) in Axis::ALL.into_iter().enumerate() {
            let c = &lat.axes[a];
            let v = p.axis(axis);
            let (first, last) = (c[0], c[c.len() - 1]);
            if !(v >= first - GRID_EPS && v <= last + GRID_EPS) {
                return Err(FieldError::Extrapolation(*p));
            }
            if c.len() == 1 {
                spans[a] = (0, 0, 0.0);
                continue;
            }
            let v = v.clamp(first, last);
            let i = c
                .partition_point(|&x| x <= v)
                .saturating_sub(1)
                .min(c.len() - 2);
            let w = (v - c[i]) / (c[i + 1] - c[i]);
            spans[a] = (i, i + 1, w);
        }
        let (mut temp, mut rh) = (0.0, 0.0);
        for corner in 0..8 {
            let mut weight = 1.0;
            let mut idx = [0usize; 3];
            for a in 0..3 {
                let (lo, hi, w) = spans[a];
                if corner >> a & 1 == 1 {
                    idx[a] = hi;
                    weight *= w;
                } else {
                    idx[a] = lo;
                    weight *= 1.0 - w;
                }
            }
            if weight == 0.0 {
                continue;
            }
            let n = lat.index(idx[0], idx[1], idx[2]);
            temp += weight * lat.temp[n];
            rh += weight * lat.rh[n];
        }
        Ok((
            temp.clamp(self.temp_range.0, self.temp_range.1),
            rh.clamp(self.rh_range.0, self.rh_range.1),
        ))
    }

    fn bell(&self, p: &Point3) -> (f64, f64) {
        let d2: Vec<f64> = self
            .samples
            .iter()
            .map(|(q, _)| p.distance_squared(q))
            .collect();
        let (nearest, d2_min) = d2
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("at least one sample");
        if d2_min.sqrt() < self.snap_epsilon {
            let s = &self.samples[nearest].1;
            return (s.temp, s.rh);
        }
        // shifting by the nearest distance keeps the weights from underflowing far from the data
        let denom = 2.0 * self.kernel_sigma * self.kernel_sigma;
        let (mut wsum, mut temp, mut rh) = (0.0, 0.0, 0.0);
        for (d2, (_, s)) in d2.iter().zip(&self.samples) {
            let w = (-(d2 - d2_min) / denom).exp();
            wsum += w;
            temp += w * s.temp;
            rh += w * s.rh;
        }
        (
            (temp / wsum).clamp(self.temp_range.0, self.temp_range.1),
            (rh / wsum).clamp(self.rh_range.0, self.rh_range.1),
        )
    }
}

/// Which quantity a thermal map shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    #[default]
    Temperature,
    Humidity,
}

impl Layer {
    pub fn units(self) -> &'static str {
        match self {
            Layer::Temperature => "degC",
            Layer::Humidity => "%RH",
        }
    }

    pub fn select(self, (temp, rh): (f64, f64)) -> f64 {
        match self {
            Layer::Temperature => temp,
            Layer::Humidity => rh,
        }
    }
}

impl FromStr for Layer {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "temperature" => Ok(Layer::Temperature),
            "humidity" => Ok(Layer::Humidity),
            other => Err(format!("unknown layer `{other}`")),
        }
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layer::Temperature => "temperature",
            Layer::Humidity => "humidity",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rgb {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl Rgb {
    pub const fn new(r: f64, g: f64, b: f64) -> Self {
        Self { r, g, b }
    }
}

/// Blue (cold/dry) to red (warm/wet) linear ramp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorMap {
    pub lo: f64,
    pub hi: f64,
}

impl ColorMap {
    pub fn new(lo: f64, hi: f64) -> Result<Self, FieldError> {
        if lo < hi && lo.is_finite() && hi.is_finite() {
            Ok(Self { lo, hi })
        } else {
            Err(FieldError::InvalidColorMap { lo, hi })
        }
    }

    pub fn default_for(layer: Layer) -> Self {
        match layer {
            Layer::Temperature => Self { lo: 15.0, hi: 35.0 },
            Layer::Humidity => Self { lo: 20.0, hi: 80.0 },
        }
    }

    pub fn color_for(&self, value: f64) -> Rgb {
        let u = ((value - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0);
        let u = if u.is_nan() { 0.0 } else { u };
        Rgb::new(u, 0.0, 1.0 - u)
    }
}

/// Per-layer color ramps, configurable per building.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisplayConfig {
    #[serde(default = "default_temp_map")]
    pub temperature: ColorMap,
    #[serde(default = "default_rh_map")]
    pub humidity: ColorMap,
}

fn default_temp_map() -> ColorMap {
    ColorMap::default_for(Layer::Temperature)
}

fn default_rh_map() -> ColorMap {
    ColorMap::default_for(Layer::Humidity)
}

impl Default for DisplayConfig {
    fn default() -> Self {
        Self {
            temperature: default_temp_map(),
            humidity: default_rh_map(),
        }
    }
}

impl DisplayConfig {
    pub fn map_for(&self, layer: Layer) -> ColorMap {
        match layer {
            Layer::Temperature => self.temperature,
            Layer::Humidity => self.humidity,
        }
    }
}

/// Distance-dependent transparency ramp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaOptions {
    pub t_near: f64,
    pub t_far: f64,
    pub d_ref: f64,
}

impl Default for AlphaOptions {
    fn default() -> Self {
        Self {
            t_near: 0.4,
            t_far: 0.85,
            d_ref: 50.0,
        }
    }
}

/// Transparency for a primitive seen from distance `d` meters.
pub fn alpha_for_distance(d: f64, opts: &AlphaOptions) -> f64 {
    let frac = if opts.d_ref > 0.0 {
        (d.max(0.0) / opts.d_ref).min(1.0)
    } else {
        1.0
    };
    (opts.t_near + (opts.t_far - opts.t_near) * frac).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(id: &str, temp: f64, rh: f64) -> SensorSample {
        SensorSample {
            sensor_id: id.into(),
            t: 0.0,
            temp,
            rh,
            seq: None,
        }
    }

    fn one_hotspot(amp: f64, sigma: f64) -> FieldScenario {
        FieldScenario {
            baseline_temp: 20.0,
            baseline_rh: 50.0,
            hotspots: vec![Hotspot {
                center: Point3::new(1.0, 2.0, 1.5),
                amplitude_temp: amp,
                amplitude_rh: 0.0,
                sigma,
                onset: 0.0,
                decay: 0.0,
            }],
            diurnal: None,
        }
    }

    #[test]
    fn constant_field() {
        let s = FieldScenario::uniform(20.0, 50.0);
        for (p, t) in [
            (Point3::new(0.0, 0.0, 0.0), 0.0),
            (Point3::new(9.0, -3.0, 2.0), 1e5),
        ] {
            assert_eq!(s.ground_truth(&p, t), (20.0, 50.0));
        }
    }

    #[test]
    fn hotspot_peak_and_one_sigma() {
        let s = one_hotspot(10.0, 0.8);
        let c = s.hotspots[0].center;
        assert_eq!(s.ground_truth(&c, 0.0).0, 30.0);
        let p = c + Point3::new(0.0, 0.8, 0.0);
        let expected = 20.0 + 10.0 * (-0.5f64).exp();
        assert!((s.ground_truth(&p, 0.0).0 - expected).abs() < 1e-12);
        assert!((expected - 26.065).abs() < 1e-3);
    }

    #[test]
    fn rh_is_clamped() {
        let mut s = one_hotspot(0.0, 1.0);
        s.hotspots[0].amplitude_rh = 200.0;
        let c = s.hotspots[0].center;
        assert_eq!(s.ground_truth(&c, 0.0).1, 100.0);
        s.hotspots[0].amplitude_rh = -200.0;
        assert_eq!(s.ground_truth(&c, 0.0).1, 0.0);
    }

    #[test]
    fn diurnal_sine() {
        let mut s = FieldScenario::uniform(20.0, 50.0);
        s.diurnal = Some(Diurnal {
            amplitude: 2.0,
            period: 100.0,
        });
        let p = Point3::default();
        assert!((s.ground_truth(&p, 25.0).0 - 22.0).abs() < 1e-12);
        assert!((s.ground_truth(&p, 75.0).0 - 18.0).abs() < 1e-12);
    }

    #[test]
    fn hotspot_envelope() {
        let mut h = one_hotspot(1.0, 1.0).hotspots.remove(0);
        assert_eq!(h.envelope(123.0), 1.0);
        h.onset = 10.0;
        assert_eq!(h.envelope(5.0), 0.5);
        assert_eq!(h.envelope(-1.0), 0.0);
        h.decay = 10.0;
        assert!((h.envelope(20.0) - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn invalid_scenarios() {
        let mut s = one_hotspot(1.0, 0.0);
        assert!(s.validate().is_err());
        s.hotspots[0].sigma = 1.0;
        s.diurnal = Some(Diurnal {
            amplitude: 1.0,
            period: 0.0,
        });
        assert!(s.validate().is_err());
    }

    #[test]
    fn linear_midpoint() {
        let f = ReconstructionField::linear_grid(vec![
            (Point3::new(0.0, 0.0, 0.0), sample("a", 20.0, 40.0)),
            (Point3::new(1.0, 0.0, 0.0), sample("b", 30.0, 60.0)),
        ])
        .unwrap();
        assert_eq!(
            f.reconstruct(&Point3::new(0.5, 0.0, 0.0)).unwrap(),
            (25.0, 50.0)
        );
        assert_eq!(
            f.reconstruct(&Point3::new(1.0, 0.0, 0.0)).unwrap(),
            (30.0, 60.0)
        );
        assert!(matches!(
            f.reconstruct(&Point3::new(1.5, 0.0, 0.0)),
            Err(FieldError::Extrapolation(_))
        ));
        assert!(f.reconstruct(&Point3::new(0.5, 0.1, 0.0)).is_err());
    }

    #[test]
    fn linear_rejects_incomplete_lattice() {
        let r = ReconstructionField::linear_grid(vec![
            (Point3::new(0.0, 0.0, 0.0), sample("a", 20.0, 40.0)),
            (Point3::new(1.0, 0.0, 0.0), sample("b", 30.0, 60.0)),
            (Point3::new(0.0, 1.0, 0.0), sample("c", 30.0, 60.0)),
        ]);
        assert!(matches!(r, Err(FieldError::IncompleteGrid(_))));
        assert_eq!(
            ReconstructionField::linear_grid(vec![]).unwrap_err(),
            FieldError::NoSamples
        );
    }

    #[test]
    fn auto_falls_back_to_bell() {
        let f = ReconstructionField::auto(
            ReconstructionMethod::LinearGrid,
            vec![
                (Point3::new(0.0, 0.0, 0.0), sample("a", 20.0, 40.0)),
                (Point3::new(1.0, 0.0, 0.0), sample("b", 30.0, 60.0)),
                (Point3::new(0.0, 1.0, 0.0), sample("c", 30.0, 60.0)),
            ],
        )
        .unwrap();
        assert_eq!(f.method(), ReconstructionMethod::BellKernel);
    }

    #[test]
    fn bell_snaps_and_weights() {
        let f = ReconstructionField::bell_kernel(
            vec![
                (Point3::new(0.0, 0.0, 0.0), sample("a", 20.0, 40.0)),
                (Point3::new(2.0, 0.0, 0.0), sample("b", 30.0, 60.0)),
            ],
            Some(1.0),
        )
        .unwrap();
        assert_eq!(
            f.reconstruct(&Point3::new(0.005, 0.0, 0.0)).unwrap(),
            (20.0, 40.0)
        );
        assert_eq!(
            f.reconstruct(&Point3::new(1.0, 0.0, 0.0)).unwrap(),
            (25.0, 50.0)
        );
        // point at 0.5: weights exp(-0.125) and exp(-1.125)
        let (wa, wb) = ((-0.125f64).exp(), (-1.125f64).exp());
        let expected = (20.0 * wa + 30.0 * wb) / (wa + wb);
        let got = f.reconstruct(&Point3::new(0.5, 0.0, 0.0)).unwrap().0;
        assert!((got - expected).abs() < 1e-12);
        // far away: no underflow, nearest sample dominates
        let far = f.reconstruct(&Point3::new(-1000.0, 0.0, 0.0)).unwrap().0;
        assert!((far - 20.0).abs() < 1e-9);
    }

    #[test]
    fn default_sigma_is_half_mean_nn_spacing() {
        let pts = [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(2.0, 0.0, 0.0),
            Point3::new(6.0, 0.0, 0.0),
        ];
        // nearest neighbours: 2, 2, 4 -> mean 8/3
        assert!((default_kernel_sigma(&pts) - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn color_ramp() {
        let m = ColorMap::new(15.0, 35.0).unwrap();
        assert_eq!(m.color_for(15.0), Rgb::new(0.0, 0.0, 1.0));
        assert_eq!(m.color_for(25.0), Rgb::new(0.5, 0.0, 0.5));
        assert_eq!(m.color_for(40.0), Rgb::new(1.0, 0.0, 0.0));
        assert_eq!(m.color_for(20.0), Rgb::new(0.25, 0.0, 0.75));
        assert!(ColorMap::new(35.0, 15.0).is_err());
    }

    #[test]
    fn alpha_ramp() {
        let o = AlphaOptions::default();
        assert_eq!(alpha_for_distance(0.0, &o), 0.4);
        assert_eq!(alpha_for_distance(50.0, &o), 0.85);
        assert_eq!(alpha_for_distance(500.0, &o), 0.85);
        assert!((alpha_for_distance(25.0, &o) - 0.625).abs() < 1e-12);
    }

    #[test]
    fn scenario_spec_parses_preset_or_explicit() {
        let p: ScenarioSpec = serde_json::from_str(r#"{"preset":"overheated_corner"}"#).unwrap();
        assert!(matches!(p, ScenarioSpec::Preset { .. }));
        let e: ScenarioSpec =
            serde_json::from_str(r#"{"baseline_temp":20,"baseline_rh":50}"#).unwrap();
        assert!(matches!(e, ScenarioSpec::Explicit(_)));
    }
}
