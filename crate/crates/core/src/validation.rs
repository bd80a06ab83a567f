//! Planar cross-sections of ground truth and reconstruction, and their comparison.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::building::{BuildingModel, Room, SensorPlacement};
use crate::field::{
    Environment, FieldError, Layer, ReconstructionField, ReconstructionMethod, SensorSample,
};
use crate::geometry::{Aabb, Axis, Point3};
use crate::supervisor::{FrameSample, ThermalFrame};

#[derive(Debug, Error, PartialEq)]
pub enum ValidationError {
    #[error("bad plane `{0}` (expected e.g. z=1.5)")]
    BadPlane(String),
    #[error("bad resolution `{0}` (expected e.g. 256x256)")]
    BadResolution(String),
    #[error("resolution must be at least 2x2")]
    TooSmall,
    #[error("extent is empty or not finite")]
    BadExtent,
    #[error("cross-sections differ in shape")]
    ShapeMismatch,
    #[error("no room has samples in this frame")]
    NoData,
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Axis-aligned plane `axis = offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub axis: Axis,
    pub offset: f64,
}

impl Plane {
    /// In-plane axes (u, v).
    pub fn in_plane_axes(&self) -> (Axis, Axis) {
        match self.axis {
            Axis::X => (Axis::Y, Axis::Z),
            Axis::Y => (Axis::X, Axis::Z),
            Axis::Z => (Axis::X, Axis::Y),
        }
    }

    pub fn point(&self, u: f64, v: f64) -> Point3 {
        let (ua, va) = self.in_plane_axes();
        let mut p = Point3::default();
        p.set_axis(self.axis, self.offset);
        p.set_axis(ua, u);
        p.set_axis(va, v);
        p
    }

    /// Rectangle of `bounds` projected onto this plane.
    pub fn extent_of(&self, bounds: &Aabb) -> Extent {
        let (ua, va) = self.in_plane_axes();
        Extent {
            u_min: bounds.min.axis(ua),
            u_max: bounds.max.axis(ua),
            v_min: bounds.min.axis(va),
            v_max: bounds.max.axis(va),
        }
    }
}

impl FromStr for Plane {
    type Err = ValidationError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ValidationError::BadPlane(s.to_string());
        let (a, o) = s.split_once('=').ok_or_else(bad)?;
        let axis = match a.trim() {
            "x" => Axis::X,
            "y" => Axis::Y,
            "z" => Axis::Z,
            _ => return Err(bad()),
        };
        let offset: f64 = o.trim().parse().map_err(|_| bad())?;
        if !offset.is_finite() {
            return Err(bad());
        }
        Ok(Plane { axis, offset })
    }
}

impl fmt::Display for Plane {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.axis, self.offset)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub width: usize,
    pub height: usize,
}

impl FromStr for Resolution {
    type Err = ValidationError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ValidationError::BadResolution(s.to_string());
        let (w, h) = s.split_once('x').ok_or_else(bad)?;
        Ok(Resolution {
            width: w.trim().parse().map_err(|_| bad())?,
            height: h.trim().parse().map_err(|_| bad())?,
        })
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub u_min: f64,
    pub u_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

/// Sampled plane; pixel (i, j) sits at `u_min + i * du`, `v_min + j * dv`, so the
/// outer pixels lie on the extent border. Values are row-major with j as the row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossSection {
    pub plane: Plane,
    pub extent: Extent,
    pub resolution: Resolution,
    pub values: Vec<f64>,
}

impl CrossSection {
    pub fn pixel_point(&self, i: usize, j: usize) -> Point3 {
        let e = &self.extent;
        let du = (e.u_max - e.u_min) / (self.resolution.width - 1) as f64;
        let dv = (e.v_max - e.v_min) / (self.resolution.height - 1) as f64;
        self.plane
            .point(e.u_min + i as f64 * du, e.v_min + j as f64 * dv)
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.resolution.width + i]
    }

    /// Location of the largest value (first one in row-major order on ties).
    pub fn argmax(&self) -> Point3 {
        let (idx, _) =
            self.values
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &v)| {
                    if v > best.1 {
                        (i, v)
                    } else {
                        best
                    }
                });
        let w = self.resolution.width;
        self.pixel_point(idx % w, idx / w)
    }

    /// 16-bit binary PGM; `lo..hi` maps to `0..65535`, top row is the largest v.
    pub fn to_pgm(&self, lo: f64, hi: f64) -> Vec<u8> {
        let Resolution { width, height } = self.resolution;
        let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
        out.reserve(width * height * 2);
        let span = if hi > lo { hi - lo } else { 1.0 };
        for j in (0..height).rev() {
            for i in 0..width {
                let u = ((self.value(i, j) - lo) / span).clamp(0.0, 1.0);
                let u = if u.is_nan() { 0.0 } else { u };
                out.extend_from_slice(&((u * 65535.0).round() as u16).to_be_bytes());
            }
        }
        out
    }
}

/// Samples `f` over `extent` of `plane`.
pub fn cross_section(
    f: impl Fn(&Point3) -> f64,
    plane: Plane,
    resolution: Resolution,
    extent: Extent,
) -> Result<CrossSection, ValidationError> {
    if resolution.width < 2 || resolution.height < 2 {
        return Err(ValidationError::TooSmall);
    }
    let ok = [extent.u_min, extent.u_max, extent.v_min, extent.v_max]
        .iter()
        .all(|v| v.is_finite());
    if !ok || extent.u_max < extent.u_min || extent.v_max < extent.v_min {
        return Err(ValidationError::BadExtent);
    }
    let mut cs = CrossSection {
        plane,
        extent,
        resolution,
        values: Vec::with_capacity(resolution.width * resolution.height),
    };
    for j in 0..resolution.height {
        for i in 0..resolution.width {
            let p = cs.pixel_point(i, j);
            cs.values.push(f(&p));
        }
    }
    Ok(cs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    /// Same units as the compared layer.
    pub rms: f64,
    /// Meters between the two maxima.
    pub hotspot_offset: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            rms: 0.5,
            hotspot_offset: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rms: f64,
    pub max_abs: f64,
    pub hotspot_offset: f64,
}

impl Comparison {
    pub fn passes(&self, tol: &Tolerance) -> bool {
        self.rms <= tol.rms && self.hotspot_offset <= tol.hotspot_offset
    }
}

pub fn compare(a: &CrossSection, b: &CrossSection) -> Result<Comparison, ValidationError> {
    if a.resolution != b.resolution || a.plane != b.plane || a.extent != b.extent {
        return Err(ValidationError::ShapeMismatch);
    }
    let n = a.values.len() as f64;
    let (mut sq, mut max_abs) = (0.0, 0.0f64);
    for (x, y) in a.values.iter().zip(&b.values) {
        let d = x - y;
        sq += d * d;
        max_abs = if d.abs() > max_abs || d.is_nan() {
            d.abs()
        } else {
            max_abs
        };
    }
    Ok(Comparison {
        rms: (sq / n).sqrt(),
        max_abs,
        hotspot_offset: a.argmax().distance(&b.argmax()),
    })
}

/// Regular sensor lattice with pitch close to `spacing`, boundaries included.
pub fn lattice_placements(room: &Room, spacing: f64) -> Vec<SensorPlacement> {
    let e = room.aabb.extent();
    let n: Vec<usize> = Axis::ALL
        .iter()
        .map(|&a| ((e.axis(a) / spacing).round() as usize).max(1) + 1)
        .collect();
    let coord = |a: usize, i: usize| {
        let axis = Axis::ALL[a];
        room.aabb.min.axis(axis) + e.axis(axis) * i as f64 / (n[a] - 1) as f64
    };
    let mut out = Vec::with_capacity(n[0] * n[1] * n[2]);
    for k in 0..n[2] {
        for j in 0..n[1] {
            for i in 0..n[0] {
                let idx = out.len();
                out.push(SensorPlacement {
                    sensor_id: format!("{}.s{}", room.id, idx),
                    room_id: room.id.clone(),
                    address: idx as u8,
                    position: Point3::new(coord(0, i), coord(1, j), coord(2, k)),
                });
            }
        }
    }
    out
}

/// Noise-free frame taken straight from the environment at the given sensors.
pub fn truth_frame(
    model: &BuildingModel,
    env: &dyn Environment,
    placements: &[SensorPlacement],
    t: f64,
) -> ThermalFrame {
    let samples = placements
        .iter()
        .map(|p| {
            let (temp, rh) = env.truth(&p.position, t);
            (
                p.sensor_id.clone(),
                FrameSample {
                    room_id: p.room_id.clone(),
                    position: p.position,
                    temp,
                    rh,
                },
            )
        })
        .collect();
    ThermalFrame {
        building_id: model.id.clone(),
        t,
        samples,
        completeness: 1.0,
    }
}

struct RoomField {
    aabb: Aabb,
    primary: ReconstructionField,
    fallback: ReconstructionField,
}

/// Building-wide evaluator over per-room reconstructions. Points outside every
/// room are clamped into the nearest room that has data.
pub struct BuildingField {
    rooms: Vec<RoomField>,
}

impl BuildingField {
    pub fn from_frame(
        frame: &ThermalFrame,
        model: &BuildingModel,
        method: ReconstructionMethod,
    ) -> Result<Self, ValidationError> {
        let mut rooms = Vec::new();
        for room in model.rooms() {
            let samples: Vec<(Point3, SensorSample)> = frame
                .room_samples(&room.id)
                .map(|(id, s)| {
                    (
                        s.position,
                        SensorSample {
                            sensor_id: id.clone(),
                            t: frame.t,
                            temp: s.temp,
                            rh: s.rh,
                            seq: None,
                        },
                    )
                })
                .collect();
            if samples.is_empty() {
                continue;
            }
            rooms.push(RoomField {
                aabb: room.aabb,
                primary: ReconstructionField::auto(method, samples.clone())?,
                fallback: ReconstructionField::bell_kernel(samples, None)?,
            });
        }
        if rooms.is_empty() {
            return Err(ValidationError::NoData);
        }
        Ok(Self { rooms })
    }

    pub fn evaluate(&self, p: &Point3) -> (f64, f64) {
        let room = self
            .rooms
            .iter()
            .find(|r| r.aabb.contains(p))
            .unwrap_or_else(|| {
                self.rooms
                    .iter()
                    .min_by(|a, b| a.aabb.distance_to(p).total_cmp(&b.aabb.distance_to(p)))
                    .expect("at least one room")
            });
        let q = room.aabb.clamp_point(p);
        room.primary
            .reconstruct(&q)
            .or_else(|_| room.fallback.reconstruct(&q))
            .expect("bell kernel is defined everywhere")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub building_id: String,
    pub t: f64,
    pub layer: Layer,
    pub plane: Plane,
    pub resolution: Resolution,
    pub sensors: usize,
    pub rms: f64,
    pub max_abs: f64,
    pub hotspot_offset: f64,
    pub tolerance: Tolerance,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationSpec {
    pub plane: Plane,
    pub resolution: Resolution,
    pub layer: Layer,
    pub method: ReconstructionMethod,
    pub tolerance: Tolerance,
}

impl ValidationSpec {
    pub fn new(plane: Plane, resolution: Resolution) -> Self {
        Self {
            plane,
            resolution,
            layer: Layer::Temperature,
            method: ReconstructionMethod::LinearGrid,
            tolerance: Tolerance::default(),
        }
    }
}

/// Ground truth and reconstruction sections over the envelope, plus their comparison.
pub fn validate_frame(
    model: &BuildingModel,
    env: &dyn Environment,
    frame: &ThermalFrame,
    spec: &ValidationSpec,
) -> Result<(ValidationReport, CrossSection, CrossSection), ValidationError> {
    let ValidationSpec {
        plane,
        resolution,
        layer,
        method,
        tolerance,
    } = *spec;
    let extent = plane.extent_of(&model.envelope);
    let truth = cross_section(
        |p| layer.select(env.truth(p, frame.t)),
        plane,
        resolution,
        extent,
    )?;
    let field = BuildingField::from_frame(frame, model, method)?;
    let recon = cross_section(
        |p| layer.select(field.evaluate(p)),
        plane,
        resolution,
        extent,
    )?;
    let c = compare(&truth, &recon)?;
    let report = ValidationReport {
        building_id: model.id.clone(),
        t: frame.t,
        layer,
        plane,
        resolution,
        sensors: frame.samples.len(),
        rms: c.rms,
        max_abs: c.max_abs,
        hotspot_offset: c.hotspot_offset,
        tolerance,
        pass: c.passes(&tolerance),
    };
    Ok((report, truth, recon))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::building::{load_building, PlacementStrategy};
    use crate::field::FieldScenario;

    fn room_model() -> BuildingModel {
        load_building(
            r#"{"building":{"id":"v","levels":[{"index":0,"rooms":[
                {"id":"r","min":[0,0,0],"max":[8,8,4]}]}]}}"#,
        )
        .unwrap()
    }

    #[test]
    fn parse_plane_and_resolution() {
        assert_eq!(
            "z=1.5".parse::<Plane>().unwrap(),
            Plane {
                axis: Axis::Z,
                offset: 1.5
            }
        );
        assert!("w=1".parse::<Plane>().is_err());
        assert!("z".parse::<Plane>().is_err());
        assert_eq!(
            "256x128".parse::<Resolution>().unwrap(),
            Resolution {
                width: 256,
                height: 128
            }
        );
        assert!("256".parse::<Resolution>().is_err());
    }

    #[test]
    fn corners_of_extent_are_sampled() {
        let plane = Plane {
            axis: Axis::Y,
            offset: 2.0,
        };
        let ext = Extent {
            u_min: 0.0,
            u_max: 4.0,
            v_min: 1.0,
            v_max: 3.0,
        };
        let cs = cross_section(
            |p| p.x + 10.0 * p.z,
            plane,
            Resolution {
                width: 5,
                height: 3,
            },
            ext,
        )
        .unwrap();
        assert_eq!(cs.pixel_point(0, 0), Point3::new(0.0, 2.0, 1.0));
        assert_eq!(cs.pixel_point(4, 2), Point3::new(4.0, 2.0, 3.0));
        assert_eq!(cs.value(4, 2), 34.0);
        assert_eq!(cs.argmax(), Point3::new(4.0, 2.0, 3.0));
    }

    #[test]
    fn identical_sections_compare_clean() {
        let plane = Plane {
            axis: Axis::Z,
            offset: 0.0,
        };
        let ext = plane.extent_of(&room_model().envelope);
        let res = Resolution {
            width: 8,
            height: 8,
        };
        let a = cross_section(|p| p.x * p.y, plane, res, ext).unwrap();
        let c = compare(&a, &a.clone()).unwrap();
        assert_eq!((c.rms, c.max_abs, c.hotspot_offset), (0.0, 0.0, 0.0));
        let b = cross_section(|p| p.x * p.y + 0.25, plane, res, ext).unwrap();
        let c = compare(&a, &b).unwrap();
        assert!((c.rms - 0.25).abs() < 1e-12);
    }

    #[test]
    fn pgm_layout() {
        let plane = Plane {
            axis: Axis::Z,
            offset: 0.0,
        };
        let ext = Extent {
            u_min: 0.0,
            u_max: 1.0,
            v_min: 0.0,
            v_max: 1.0,
        };
        let cs = cross_section(
            |p| p.y,
            plane,
            Resolution {
                width: 2,
                height: 2,
            },
            ext,
        )
        .unwrap();
        let pgm = cs.to_pgm(0.0, 1.0);
        let header = b"P5\n2 2\n65535\n";
        assert_eq!(&pgm[..header.len()], header);
        assert_eq!(&pgm[header.len()..], &[255, 255, 255, 255, 0, 0, 0, 0]);
    }

    #[test]
    fn lattice_includes_boundaries() {
        let m = room_model();
        let room = m.room("r").unwrap();
        let p = lattice_placements(room, 2.0);
        assert_eq!(p.len(), 5 * 5 * 3);
        assert_eq!(p[0].position, Point3::new(0.0, 0.0, 0.0));
        assert_eq!(p.last().unwrap().position, Point3::new(8.0, 8.0, 4.0));
    }

    #[test]
    fn uniform_field_validates_exactly() {
        let m = room_model();
        let env = FieldScenario::uniform(22.0, 40.0);
        let placements = m.place_all(PlacementStrategy::Corners8);
        let frame = truth_frame(&m, &env, &placements, 0.0);
        let (report, _, _) = validate_frame(
            &m,
            &env,
            &frame,
            &ValidationSpec::new(
                "z=1.5".parse().unwrap(),
                Resolution {
                    width: 16,
                    height: 16,
                },
            ),
        )
        .unwrap();
        assert!(report.rms < 1e-12);
        assert!(report.pass);
    }
}
