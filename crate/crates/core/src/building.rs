//! Building geometry, config loading and sensor placement.
//!
//! A building is a stack of levels, each holding axis-aligned rooms. The
//! config document is JSON with meters as the only length unit:
//!
//! ```json
//! {
//!   "building": {
//!     "id": "house",
//!     "levels": [
//!       { "index": 0, "rooms": [
//!         { "id": "living", "min": [0, 0, 0], "max": [6, 4, 3], "kind": "other" }
//!       ] }
//!     ]
//!   }
//! }
//! ```
//!
//! Other top-level keys (scenario, display) are ignored here.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Aabb, Axis, Point3};

#[derive(Debug, Error, PartialEq)]
pub enum BuildingError {
    #[error("parse error at `{path}` (line {line}, column {column}): {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invariant violation in room `{room}`: {reason}")]
    RoomInvariant { room: String, reason: String },
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error("cell spacing {spacing} m is invalid for room `{room}` (must be in (0, {limit}])")]
    Spacing {
        room: String,
        spacing: f64,
        limit: f64,
    },
}

/// Informational room category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoomKind {
    Bedroom,
    Bathroom,
    #[default]
    Other,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Room {
    pub id: String,
    pub level: usize,
    pub aabb: Aabb,
    pub kind: RoomKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub index: usize,
    pub rooms: Vec<Room>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildingModel {
    pub id: String,
    pub levels: Vec<Level>,
    pub envelope: Aabb,
}

impl BuildingModel {
    /// Validates and assembles a model. The envelope defaults to the union of room boxes.
    pub fn new(
        id: impl Into<String>,
        levels: Vec<Level>,
        envelope: Option<Aabb>,
    ) -> Result<Self, BuildingError> {
        let id = id.into();
        if !is_valid_id(&id) {
            return Err(BuildingError::Invariant(format!(
                "building id `{id}` must match [A-Za-z_][A-Za-z0-9_.-]*"
            )));
        }
        let mut levels = levels;
        levels.sort_by_key(|l| l.index);
        for (expected, level) in levels.iter().enumerate() {
            if level.index != expected {
                return Err(BuildingError::Invariant(format!(
                    "level indices must be contiguous from 0; found {} where {} expected",
                    level.index, expected
                )));
            }
        }

        let mut seen = HashSet::new();
        let mut union: Option<Aabb> = None;
        for level in &mut levels {
            for room in &mut level.rooms {
                room.level = level.index;
                if !is_valid_id(&room.id) {
                    return Err(BuildingError::RoomInvariant {
                        room: room.id.clone(),
                        reason: "room id must match [A-Za-z_][A-Za-z0-9_.-]*".into(),
                    });
                }
                if !seen.insert(room.id.clone()) {
                    return Err(BuildingError::RoomInvariant {
                        room: room.id.clone(),
                        reason: "duplicate room id".into(),
                    });
                }
                if !room.aabb.is_valid() {
                    return Err(BuildingError::RoomInvariant {
                        room: room.id.clone(),
                        reason: format!(
                            "min {} must be below max {} on every axis",
                            room.aabb.min, room.aabb.max
                        ),
                    });
                }
                union = Some(match union {
                    None => room.aabb,
                    Some(u) => u.union(&room.aabb),
                });
            }
            for (i, a) in level.rooms.iter().enumerate() {
                for b in &level.rooms[i + 1..] {
                    if a.aabb.overlaps_interior(&b.aabb) {
                        return Err(BuildingError::RoomInvariant {
                            room: a.id.clone(),
                            reason: format!("overlaps room `{}` on level {}", b.id, level.index),
                        });
                    }
                }
            }
        }

        let union =
            union.ok_or_else(|| BuildingError::Invariant("building has no rooms".into()))?;
        let envelope = match envelope {
            None => union,
            Some(env) => {
                for room in levels.iter().flat_map(|l| &l.rooms) {
                    if !env.contains_box(&room.aabb) {
                        return Err(BuildingError::RoomInvariant {
                            room: room.id.clone(),
                            reason: "room lies outside the building envelope".into(),
                        });
                    }
                }
                env
            }
        };

        Ok(Self {
            id,
            levels,
            envelope,
        })
    }

    pub fn rooms(&self) -> impl Iterator<Item = &Room> {
        self.levels.iter().flat_map(|l| l.rooms.iter())
    }

    pub fn room(&self, id: &str) -> Option<&Room> {
        self.rooms().find(|r| r.id == id)
    }

    pub fn room_count(&self) -> usize {
        self.levels.iter().map(|l| l.rooms.len()).sum()
    }

    /// Serializes back to the config document format.
    pub fn to_config_json(&self) -> String {
        let doc = ConfigDoc {
            building: BuildingDoc::from(self),
        };
        serde_json::to_string_pretty(&doc).expect("building model serializes")
    }

    /// Sensor placements for every room, ids unique building-wide.
    pub fn place_all(&self, strategy: PlacementStrategy) -> Vec<SensorPlacement> {
        self.rooms()
            .flat_map(|r| place_sensors(r, strategy))
            .collect()
    }
}

fn is_valid_id(id: &str) -> bool {
    let mut chars = id.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-'))
}

#[derive(Debug, Serialize, Deserialize)]
struct ConfigDoc {
    building: BuildingDoc,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BuildingDoc {
    id: String,
    levels: Vec<LevelDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    envelope: Option<Aabb>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LevelDoc {
    index: usize,
    rooms: Vec<RoomDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RoomDoc {
    id: String,
    min: Point3,
    max: Point3,
    #[serde(default)]
    kind: RoomKind,
}

impl From<&BuildingModel> for BuildingDoc {
    fn from(m: &BuildingModel) -> Self {
        BuildingDoc {
            id: m.id.clone(),
            envelope: Some(m.envelope),
            levels: m
                .levels
                .iter()
                .map(|l| LevelDoc {
                    index: l.index,
                    rooms: l
                        .rooms
                        .iter()
                        .map(|r| RoomDoc {
                            id: r.id.clone(),
                            min: r.aabb.min,
                            max: r.aabb.max,
                            kind: r.kind,
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

/// Deserializes JSON with a field path and line/column in the error.
pub(crate) fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, BuildingError> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        BuildingError::Parse {
            path,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })
}

/// Parses and validates a building config document.
pub fn load_building(config_text: &str) -> Result<BuildingModel, BuildingError> {
    let doc: ConfigDoc = parse_json(config_text)?;
    let levels = doc
        .building
        .levels
        .into_iter()
        .map(|l| Level {
            index: l.index,
            rooms: l
                .rooms
                .into_iter()
                .map(|r| Room {
                    id: r.id,
                    level: l.index,
                    aabb: Aabb::new(r.min, r.max),
                    kind: r.kind,
                })
                .collect(),
        })
        .collect();
    BuildingModel::new(doc.building.id, levels, doc.building.envelope)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PlacementStrategy {
    /// The eight room corners.
    #[default]
    #[serde(rename = "corners8")]
    Corners8,
    /// Corners plus the centers of the four walls, floor and ceiling.
    #[serde(rename = "faces14")]
    CornersPlusFaceCenters14,
    /// Corners plus the midpoints of the four floor edges and four ceiling edges.
    #[serde(rename = "dense16")]
    Dense16,
}

impl PlacementStrategy {
    pub fn sensor_count(self) -> usize {
        match self {
            PlacementStrategy::Corners8 => 8,
            PlacementStrategy::CornersPlusFaceCenters14 => 14,
            PlacementStrategy::Dense16 => 16,
        }
    }
}

impl FromStr for PlacementStrategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "corners8" => Ok(Self::Corners8),
            "faces14" | "corners_plus_face_centers14" => Ok(Self::CornersPlusFaceCenters14),
            "dense16" => Ok(Self::Dense16),
            other => Err(format!(
                "unknown placement strategy `{other}` (expected corners8, faces14 or dense16)"
            )),
        }
    }
}

impl fmt::Display for PlacementStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Corners8 => "corners8",
            Self::CornersPlusFaceCenters14 => "faces14",
            Self::Dense16 => "dense16",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorPlacement {
    /// Building-wide id, `<room>.s<address>`.
    pub sensor_id: String,
    pub room_id: String,
    /// Endpoint address on the room's star link.
    pub address: u8,
    pub position: Point3,
}

/// Sensor positions for one room, sorted by (z, y, x).
pub fn place_sensors(room: &Room, strategy: PlacementStrategy) -> Vec<SensorPlacement> {
    let b = room.aabb;
    let c = b.center();
    let mut points: Vec<Point3> = b.corners().to_vec();
    match strategy {
        PlacementStrategy::Corners8 => {}
        PlacementStrategy::CornersPlusFaceCenters14 => {
            for axis in Axis::ALL {
                for side in [b.min.axis(axis), b.max.axis(axis)] {
                    let mut p = c;
                    p.set_axis(axis, side);
                    points.push(p);
                }
            }
        }
        PlacementStrategy::Dense16 => {
            for z in [b.min.z, b.max.z] {
                points.push(Point3::new(c.x, b.min.y, z));
                points.push(Point3::new(c.x, b.max.y, z));
                points.push(Point3::new(b.min.x, c.y, z));
                points.push(Point3::new(b.max.x, c.y, z));
            }
        }
    }
    points.sort_by(|a, b| a.cmp_zyx(b));
    points
        .into_iter()
        .enumerate()
        .map(|(i, position)| SensorPlacement {
            sensor_id: format!("{}.s{}", room.id, i),
            room_id: room.id.clone(),
            address: i as u8,
            position,
        })
        .collect()
}

/// Regular grid of cell centers filling a room; neighbouring cells are tangent spheres.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGrid {
    pub spacing: f64,
    pub counts: [usize; 3],
    /// Centers in (z, y, x) order.
    pub centers: Vec<Point3>,
}

impl CellGrid {
    /// Sphere radius that makes adjacent cells touch.
    pub fn radius(&self) -> f64 {
        self.spacing / 2.0
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

// Absorbs representation error in extent/spacing ratios such as 3.0/0.1.
const COUNT_EPS: f64 = 1e-9;

pub fn room_cell_grid(room: &Room, spacing: f64) -> Result<CellGrid, BuildingError> {
    let limit = room.aabb.min_dimension();
    if !(spacing > 0.0) || spacing > limit * (1.0 + COUNT_EPS) || !spacing.is_finite() {
        return Err(BuildingError::Spacing {
            room: room.id.clone(),
            spacing,
            limit,
        });
    }
    let extent = room.aabb.extent();
    let mut counts = [0usize; 3];
    let mut starts = [0.0; 3];
    for (i, axis) in Axis::ALL.into_iter().enumerate() {
        let e = extent.axis(axis);
        let n = ((e / spacing) + COUNT_EPS).floor().max(1.0) as usize;
        counts[i] = n;
        starts[i] = room.aabb.min.axis(axis) + (e - n as f64 * spacing) / 2.0 + spacing / 2.0;
    }
    let mut centers = Vec::with_capacity(counts.iter().product());
    for k in 0..counts[2] {
        for j in 0..counts[1] {
            for i in 0..counts[0] {
                centers.push(Point3::new(
                    starts[0] + i as f64 * spacing,
                    starts[1] + j as f64 * spacing,
                    starts[2] + k as f64 * spacing,
                ));
            }
        }
    }
    Ok(CellGrid {
        spacing,
        counts,
        centers,
    })
}
