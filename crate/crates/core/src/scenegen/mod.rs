//! Thermal frame to X3D scene conversion.
//!
//! Scene coordinates stay in building meters (z up) under a root transform that
//! turns them into the y-up X3D world. Each room contributes a group of cell
//! primitives colored from the reconstructed field, followed by its walls; the
//! building envelope closes the group.

mod x3d;

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::building::{room_cell_grid, BuildingError, BuildingModel, Room};
use crate::field::{
    alpha_for_distance, AlphaOptions, ColorMap, FieldError, Layer, ReconstructionField,
    ReconstructionMethod, Rgb, SensorSample,
};
use crate::geometry::{Aabb, Point3};
use crate::supervisor::ThermalFrame;

pub use x3d::{
    parse_x3d, serialize_x3d, FogType, Geometry, Material, Node, ShapeClass, X3DDocument,
    X3dParseError, BOX_POLYGONS, NODE_SET, SPHERE_POLYGONS, X3D_VERSION,
};

pub const DEFAULT_MAX_POLYGONS: u64 = 150_000;
pub const DEFAULT_DETAIL_RADIUS: f64 = 20.0;
pub const DEFAULT_MID_RADIUS: f64 = 60.0;

const WALL_COLOR: Rgb = Rgb::new(0.8, 0.8, 0.8);
const WALL_TRANSPARENCY: f64 = 0.85;
const BEAM_COLOR: Rgb = Rgb::new(0.3, 0.3, 0.3);
const BEAM_THICKNESS: f64 = 0.02;
const ENVELOPE_COLOR: Rgb = Rgb::new(0.7, 0.7, 0.7);
const ENVELOPE_TRANSPARENCY: f64 = 0.95;

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("frame belongs to `{frame}`, model is `{model}`")]
    BuildingMismatch { frame: String, model: String },
    #[error("frame sample `{sensor}` names unknown room `{room}`")]
    UnknownRoom { sensor: String, room: String },
    #[error("view-dependent scene needs a viewpoint")]
    MissingViewpoint,
    #[error("invalid scene options: {0}")]
    InvalidOptions(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Building(#[from] BuildingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrimitiveKind {
    #[default]
    Sphere,
    Box,
    Tetrahedron,
    Billboard,
}

impl PrimitiveKind {
    /// Cheapest first after `self`.
    const LADDER: [PrimitiveKind; 4] = [
        PrimitiveKind::Sphere,
        PrimitiveKind::Box,
        PrimitiveKind::Tetrahedron,
        PrimitiveKind::Billboard,
    ];

    pub fn nominal_polygons(self) -> u64 {
        match self {
            PrimitiveKind::Sphere => SPHERE_POLYGONS,
            PrimitiveKind::Box => BOX_POLYGONS,
            PrimitiveKind::Tetrahedron => 4,
            PrimitiveKind::Billboard => 2,
        }
    }
}

impl FromStr for PrimitiveKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sphere" => Ok(PrimitiveKind::Sphere),
            "box" => Ok(PrimitiveKind::Box),
            "tetra" | "tetrahedron" => Ok(PrimitiveKind::Tetrahedron),
            "billboard" => Ok(PrimitiveKind::Billboard),
            other => Err(format!("unknown primitive `{other}`")),
        }
    }
}

impl fmt::Display for PrimitiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PrimitiveKind::Sphere => "sphere",
            PrimitiveKind::Box => "box",
            PrimitiveKind::Tetrahedron => "tetrahedron",
            PrimitiveKind::Billboard => "billboard",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WallMode {
    #[default]
    Flat,
    Wireframe,
}

impl FromStr for WallMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "flat" => Ok(WallMode::Flat),
            "wireframe" => Ok(WallMode::Wireframe),
            other => Err(format!("unknown wall mode `{other}`")),
        }
    }
}

impl fmt::Display for WallMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WallMode::Flat => "flat",
            WallMode::Wireframe => "wireframe",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FogOptions {
    pub fog_type: FogType,
    /// Meters; `None` uses 1.5 times the envelope diagonal.
    #[serde(default)]
    pub visibility_range: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneOptions {
    pub primitive: PrimitiveKind,
    pub layer: Layer,
    pub walls: WallMode,
    /// Cell pitch in meters.
    pub cell_spacing: f64,
    /// `None` uses the layer's default ramp.
    pub color_map: Option<ColorMap>,
    /// When set, the scene shows a fog volume instead of cell primitives.
    pub fog: Option<FogOptions>,
    /// Building coordinates.
    pub viewpoint: Option<Point3>,
    pub detail_radius: f64,
    pub mid_radius: f64,
    pub alpha: AlphaOptions,
    /// Polygon ceiling for the thermal layer; `None` disables downgrading.
    pub max_polygons: Option<u64>,
    pub reconstruction: ReconstructionMethod,
}

impl Default for SceneOptions {
    fn default() -> Self {
        Self {
            primitive: PrimitiveKind::Sphere,
            layer: Layer::Temperature,
            walls: WallMode::Flat,
            cell_spacing: 1.0,
            color_map: None,
            fog: None,
            viewpoint: None,
            detail_radius: DEFAULT_DETAIL_RADIUS,
            mid_radius: DEFAULT_MID_RADIUS,
            alpha: AlphaOptions::default(),
            max_polygons: Some(DEFAULT_MAX_POLYGONS),
            reconstruction: ReconstructionMethod::LinearGrid,
        }
    }
}

impl SceneOptions {
    pub fn color_map(&self) -> ColorMap {
        self.color_map
            .unwrap_or_else(|| ColorMap::default_for(self.layer))
    }

    fn validate(&self) -> Result<(), SceneError> {
        if !(self.cell_spacing > 0.0) || !self.cell_spacing.is_finite() {
            return Err(SceneError::InvalidOptions(format!(
                "cell spacing {} must be positive",
                self.cell_spacing
            )));
        }
        if self.detail_radius.is_nan() || self.mid_radius.is_nan() || self.detail_radius < 0.0 {
            return Err(SceneError::InvalidOptions(
                "radii must be non-negative".into(),
            ));
        }
        if self.mid_radius < self.detail_radius {
            return Err(SceneError::InvalidOptions(
                "mid radius must not be smaller than the detail radius".into(),
            ));
        }
        if let Some(v) = self.viewpoint {
            if !v.is_finite() {
                return Err(SceneError::InvalidOptions(
                    "viewpoint must be finite".into(),
                ));
            }
        }
        if let Some(m) = self.color_map {
            ColorMap::new(m.lo, m.hi)?;
        }
        Ok(())
    }
}

/// Sidecar describing the color ramp of an exported scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Legend {
    pub layer: Layer,
    pub lo: f64,
    pub hi: f64,
    pub units: String,
}

pub fn legend(opts: &SceneOptions) -> Legend {
    let m = opts.color_map();
    Legend {
        layer: opts.layer,
        lo: m.lo,
        hi: m.hi,
        units: opts.layer.units().to_string(),
    }
}

/// Reconstructed values at one cell center.
#[derive(Debug, Clone, PartialEq)]
pub struct CellValue {
    pub room_id: String,
    pub index: usize,
    pub center: Point3,
    pub temp: f64,
    pub rh: f64,
}

fn check_frame(frame: &ThermalFrame, model: &BuildingModel) -> Result<(), SceneError> {
    if frame.building_id != model.id {
        return Err(SceneError::BuildingMismatch {
            frame: frame.building_id.clone(),
            model: model.id.clone(),
        });
    }
    for (sensor, s) in &frame.samples {
        if model.room(&s.room_id).is_none() {
            return Err(SceneError::UnknownRoom {
                sensor: sensor.clone(),
                room: s.room_id.clone(),
            });
        }
    }
    Ok(())
}

/// Reconstructs one room at `points`; `None` when the frame has no samples for it.
/// A lattice that does not cover every point falls back to the bell kernel.
fn room_values(
    frame: &ThermalFrame,
    room: &Room,
    points: &[Point3],
    method: ReconstructionMethod,
) -> Result<Option<Vec<(f64, f64)>>, SceneError> {
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
        return Ok(None);
    }
    let field = ReconstructionField::auto(method, samples.clone())?;
    let values: Result<Vec<_>, _> = points.iter().map(|p| field.reconstruct(p)).collect();
    match values {
        Ok(v) => Ok(Some(v)),
        Err(FieldError::Extrapolation(_)) => {
            log::debug!(
                "room {}: samples do not span the cells, using bell kernel",
                room.id
            );
            let field = ReconstructionField::bell_kernel(samples, None)?;
            Ok(Some(
                points
                    .iter()
                    .map(|p| field.reconstruct(p))
                    .collect::<Result<_, _>>()?,
            ))
        }
        Err(e) => Err(e.into()),
    }
}

/// Reconstructed temperature and humidity at every cell center of every room.
pub fn cell_values(
    frame: &ThermalFrame,
    model: &BuildingModel,
    spacing: f64,
    method: ReconstructionMethod,
) -> Result<Vec<CellValue>, SceneError> {
    check_frame(frame, model)?;
    let mut out = Vec::new();
    for room in model.rooms() {
        let grid = room_cell_grid(room, spacing)?;
        if let Some(values) = room_values(frame, room, &grid.centers, method)? {
            for (index, (center, (temp, rh))) in grid.centers.iter().zip(values).enumerate() {
                out.push(CellValue {
                    room_id: room.id.clone(),
                    index,
                    center: *center,
                    temp,
                    rh,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Detail {
    Full,
    Aggregate,
    Hidden,
}

/// Full-detail scene of one frame.
pub fn generate_scene(
    frame: &ThermalFrame,
    model: &BuildingModel,
    opts: &SceneOptions,
) -> Result<X3DDocument, SceneError> {
    build(frame, model, opts, |_| Detail::Full)
}

/// Scene whose detail falls off with each room's distance from the viewpoint:
/// full cells within `detail_radius`, one aggregate primitive within
/// `mid_radius`, nothing beyond.
pub fn view_dependent_scene(
    frame: &ThermalFrame,
    model: &BuildingModel,
    opts: &SceneOptions,
) -> Result<X3DDocument, SceneError> {
    let vp = opts.viewpoint.ok_or(SceneError::MissingViewpoint)?;
    build(frame, model, opts, |room| {
        let d = room.aabb.distance_to(&vp);
        if d <= opts.detail_radius {
            Detail::Full
        } else if d <= opts.mid_radius {
            Detail::Aggregate
        } else {
            Detail::Hidden
        }
    })
}

fn build(
    frame: &ThermalFrame,
    model: &BuildingModel,
    opts: &SceneOptions,
    detail: impl Fn(&Room) -> Detail,
) -> Result<X3DDocument, SceneError> {
    opts.validate()?;
    check_frame(frame, model)?;
    let cmap = opts.color_map();
    let transparency = match opts.viewpoint {
        Some(vp) => alpha_for_distance(model.envelope.distance_to(&vp), &opts.alpha),
        None => opts.alpha.t_near,
    };

    let rooms: Vec<(&Room, Detail)> = model.rooms().map(|r| (r, detail(r))).collect();
    let fog = opts.fog;

    let mut grids = Vec::with_capacity(rooms.len());
    let (mut cells, mut aggregates) = (0u64, 0u64);
    for (room, d) in &rooms {
        let grid = room_cell_grid(room, opts.cell_spacing)?;
        match d {
            Detail::Full => cells += grid.len() as u64,
            Detail::Aggregate => aggregates += 1,
            Detail::Hidden => {}
        }
        grids.push(grid);
    }
    let primitive = if fog.is_some() {
        opts.primitive
    } else {
        choose_primitive(opts.primitive, cells, aggregates, opts.max_polygons)
    };

    let mut groups = Vec::with_capacity(rooms.len() + 1);
    let mut fog_values = Vec::new();
    for ((room, d), grid) in rooms.iter().zip(&grids) {
        if *d == Detail::Hidden {
            continue;
        }
        let mut children = Vec::new();
        if fog.is_some() {
            if let Some(v) = room_values(frame, room, &grid.centers, opts.reconstruction)? {
                fog_values.extend(v.into_iter().map(|tv| opts.layer.select(tv)));
            }
        } else if let Some(values) = room_values(frame, room, &grid.centers, opts.reconstruction)? {
            let values: Vec<f64> = values.into_iter().map(|tv| opts.layer.select(tv)).collect();
            if *d == Detail::Full {
                for (i, (center, v)) in grid.centers.iter().zip(&values).enumerate() {
                    children.push(Node::Transform {
                        def: Some(format!("cell.{}.{}", room.id, i)),
                        class: Some(ShapeClass::Cell),
                        translation: *center,
                        rotation: None,
                        children: vec![primitive_node(
                            primitive,
                            grid.radius(),
                            Material {
                                diffuse: cmap.color_for(*v),
                                transparency,
                            },
                        )],
                    });
                }
            } else {
                let mean = values.iter().sum::<f64>() / values.len() as f64;
                children.push(Node::Transform {
                    def: Some(format!("agg.{}", room.id)),
                    class: Some(ShapeClass::Aggregate),
                    translation: room.aabb.center(),
                    rotation: None,
                    children: vec![Node::Shape {
                        geometry: Geometry::Box {
                            size: room.aabb.extent(),
                        },
                        material: Material {
                            diffuse: cmap.color_for(mean),
                            transparency,
                        },
                    }],
                });
            }
        }
        children.push(wall_node(room, opts.walls));
        groups.push(Node::Transform {
            def: Some(format!("room.{}", room.id)),
            class: None,
            translation: Point3::default(),
            rotation: None,
            children,
        });
    }
    groups.push(Node::Transform {
        def: Some("envelope".into()),
        class: Some(ShapeClass::Envelope),
        translation: model.envelope.center(),
        rotation: None,
        children: vec![Node::Shape {
            geometry: Geometry::Box {
                size: model.envelope.extent(),
            },
            material: Material {
                diffuse: ENVELOPE_COLOR,
                transparency: ENVELOPE_TRANSPARENCY,
            },
        }],
    });

    let mut scene = vec![
        Node::NavigationInfo {
            types: vec!["FLY".into(), "ANY".into()],
        },
        viewpoint_node(&model.envelope, opts.viewpoint),
    ];
    if let Some(f) = fog {
        let mean = if fog_values.is_empty() {
            (cmap.lo + cmap.hi) / 2.0
        } else {
            fog_values.iter().sum::<f64>() / fog_values.len() as f64
        };
        let diag = model.envelope.min.distance(&model.envelope.max);
        scene.push(Node::Fog {
            fog_type: f.fog_type,
            color: cmap.color_for(mean),
            visibility_range: f.visibility_range.unwrap_or(1.5 * diag),
        });
    }
    scene.push(Node::Transform {
        def: Some(model.id.clone()),
        class: None,
        translation: Point3::default(),
        rotation: Some([1.0, 0.0, 0.0, -FRAC_PI_2]),
        children: groups,
    });
    Ok(X3DDocument { scene })
}

/// First primitive at or after `requested` on the sphere, box, tetrahedron,
/// billboard ladder whose thermal polygon count fits `budget`.
pub fn choose_primitive(
    requested: PrimitiveKind,
    cells: u64,
    aggregates: u64,
    budget: Option<u64>,
) -> PrimitiveKind {
    let Some(budget) = budget else {
        return requested;
    };
    let start = PrimitiveKind::LADDER
        .iter()
        .position(|&k| k == requested)
        .expect("ladder holds every kind");
    let fixed = aggregates * BOX_POLYGONS;
    for &kind in &PrimitiveKind::LADDER[start..] {
        if cells * kind.nominal_polygons() + fixed <= budget {
            if kind != requested {
                log::info!("{cells} cells exceed {budget} polygons as {requested}; using {kind}");
            }
            return kind;
        }
    }
    log::warn!("{cells} cells exceed {budget} polygons even as billboards");
    PrimitiveKind::Billboard
}

fn tetra_vertices(r: f64) -> Vec<Point3> {
    let a = r / 3f64.sqrt();
    vec![
        Point3::new(a, a, a),
        Point3::new(a, -a, -a),
        Point3::new(-a, a, -a),
        Point3::new(-a, -a, a),
    ]
}

fn primitive_node(kind: PrimitiveKind, radius: f64, material: Material) -> Node {
    let shape = |geometry| Node::Shape { geometry, material };
    match kind {
        PrimitiveKind::Sphere => shape(Geometry::Sphere { radius }),
        PrimitiveKind::Box => shape(Geometry::Box {
            size: Point3::new(2.0 * radius, 2.0 * radius, 2.0 * radius),
        }),
        PrimitiveKind::Tetrahedron => shape(Geometry::IndexedFaceSet {
            coord_index: vec![0, 1, 2, -1, 0, 3, 1, -1, 0, 2, 3, -1, 1, 3, 2, -1],
            points: tetra_vertices(radius),
        }),
        PrimitiveKind::Billboard => Node::Billboard {
            children: vec![shape(Geometry::IndexedFaceSet {
                coord_index: vec![0, 1, 2, -1, 0, 2, 3, -1],
                points: vec![
                    Point3::new(-radius, -radius, 0.0),
                    Point3::new(radius, -radius, 0.0),
                    Point3::new(radius, radius, 0.0),
                    Point3::new(-radius, radius, 0.0),
                ],
            })],
        },
    }
}

fn wall_node(room: &Room, mode: WallMode) -> Node {
    let e = room.aabb.extent();
    let children = match mode {
        WallMode::Flat => vec![Node::Shape {
            geometry: Geometry::Box { size: e },
            material: Material {
                diffuse: WALL_COLOR,
                transparency: WALL_TRANSPARENCY,
            },
        }],
        WallMode::Wireframe => {
            let (hx, hy, hz) = (e.x / 2.0, e.y / 2.0, e.z / 2.0);
            let t = BEAM_THICKNESS;
            let mut beams = Vec::with_capacity(12);
            for (s1, s2) in [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)] {
                beams.push((Point3::new(0.0, s1 * hy, s2 * hz), Point3::new(e.x, t, t)));
                beams.push((Point3::new(s1 * hx, 0.0, s2 * hz), Point3::new(t, e.y, t)));
                beams.push((Point3::new(s1 * hx, s2 * hy, 0.0), Point3::new(t, t, e.z)));
            }
            beams
                .into_iter()
                .map(|(offset, size)| Node::Transform {
                    def: None,
                    class: None,
                    translation: offset,
                    rotation: None,
                    children: vec![Node::Shape {
                        geometry: Geometry::Box { size },
                        material: Material {
                            diffuse: BEAM_COLOR,
                            transparency: 0.0,
                        },
                    }],
                })
                .collect()
        }
    };
    Node::Transform {
        def: Some(format!("wall.{}", room.id)),
        class: Some(ShapeClass::Wall),
        translation: room.aabb.center(),
        rotation: None,
        children,
    }
}

/// Building (z up) to X3D world (y up).
fn to_world(p: Point3) -> Point3 {
    Point3::new(p.x, p.z, -p.y)
}

/// Axis-angle orientation looking from `eye` toward `target`, both in world coordinates.
fn look_at(eye: Point3, target: Point3) -> [f64; 4] {
    let d = target - eye;
    let horizontal = d.x.hypot(d.z);
    if horizontal == 0.0 && d.y == 0.0 {
        return [0.0, 0.0, 1.0, 0.0];
    }
    let yaw = (-d.x).atan2(-d.z);
    let pitch = d.y.atan2(horizontal);
    let (sy, cy) = (yaw / 2.0).sin_cos();
    let (sx, cx) = (pitch / 2.0).sin_cos();
    let (w, x, y, z) = (cy * cx, cy * sx, sy * cx, -sy * sx);
    let s = (x * x + y * y + z * z).sqrt();
    if s < 1e-12 {
        return [0.0, 0.0, 1.0, 0.0];
    }
    [x / s, y / s, z / s, 2.0 * s.atan2(w)]
}

fn viewpoint_node(envelope: &Aabb, viewpoint: Option<Point3>) -> Node {
    let center = envelope.center();
    let (description, eye) = match viewpoint {
        Some(v) => ("user", v),
        None => {
            let e = envelope.extent();
            let back = 1.5 * e.x.max(e.z).max(1.0);
            (
                "overview",
                Point3::new(center.x, envelope.min.y - back, center.z + 0.5 * e.z),
            )
        }
    };
    let (eye, target) = (to_world(eye), to_world(center));
    Node::Viewpoint {
        description: description.into(),
        position: eye,
        orientation: look_at(eye, target),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::building::{load_building, PlacementStrategy};
    use crate::supervisor::FrameSample;
    use std::collections::BTreeMap;

    fn model(max: [f64; 3]) -> BuildingModel {
        load_building(&format!(
            r#"{{"building":{{"id":"b","levels":[{{"index":0,"rooms":[
                {{"id":"r","min":[0,0,0],"max":[{},{},{}]}}]}}]}}}}"#,
            max[0], max[1], max[2]
        ))
        .unwrap()
    }

    fn uniform_frame(m: &BuildingModel, temp: f64, rh: f64) -> ThermalFrame {
        let samples: BTreeMap<String, FrameSample> = m
            .place_all(PlacementStrategy::Corners8)
            .into_iter()
            .map(|p| {
                (
                    p.sensor_id,
                    FrameSample {
                        room_id: p.room_id,
                        position: p.position,
                        temp,
                        rh,
                    },
                )
            })
            .collect();
        ThermalFrame {
            building_id: m.id.clone(),
            t: 0.0,
            samples,
            completeness: 1.0,
        }
    }

    fn count(doc: &X3DDocument, name: &str) -> usize {
        doc.element_names().iter().filter(|n| **n == name).count()
    }

    #[test]
    fn forty_eight_spheres() {
        let m = model([4.0, 4.0, 3.0]);
        let doc =
            generate_scene(&uniform_frame(&m, 20.0, 50.0), &m, &SceneOptions::default()).unwrap();
        assert_eq!(doc.cell_count(), 48);
        assert_eq!(count(&doc, "Sphere"), 48);
        assert_eq!(doc.nominal_polygons(), 14_400);
    }

    #[test]
    fn tetrahedra_polycount() {
        let m = model([4.0, 4.0, 3.0]);
        let opts = SceneOptions {
            primitive: PrimitiveKind::Tetrahedron,
            ..Default::default()
        };
        let doc = generate_scene(&uniform_frame(&m, 20.0, 50.0), &m, &opts).unwrap();
        assert_eq!(doc.nominal_polygons(), 192);
        assert_eq!(count(&doc, "IndexedFaceSet"), 48);
    }

    #[test]
    fn uniform_color() {
        let m = model([4.0, 4.0, 3.0]);
        let doc =
            generate_scene(&uniform_frame(&m, 20.0, 50.0), &m, &SceneOptions::default()).unwrap();
        doc.walk(|n, class| {
            if let (Node::Shape { material, .. }, Some(ShapeClass::Cell)) = (n, class) {
                assert_eq!(material.diffuse, Rgb::new(0.25, 0.0, 0.75));
            }
        });
    }

    #[test]
    fn single_cell_sphere_radius() {
        let m = model([1.0, 1.0, 1.0]);
        let doc =
            generate_scene(&uniform_frame(&m, 20.0, 50.0), &m, &SceneOptions::default()).unwrap();
        let mut radii = Vec::new();
        doc.walk(|n, _| {
            if let Node::Shape {
                geometry: Geometry::Sphere { radius },
                ..
            } = n
            {
                radii.push(*radius);
            }
        });
        assert_eq!(radii, vec![0.5]);
    }

    #[test]
    fn empty_frame_keeps_walls_only() {
        let m = model([4.0, 4.0, 3.0]);
        let mut f = uniform_frame(&m, 20.0, 50.0);
        f.samples.clear();
        let doc = generate_scene(&f, &m, &SceneOptions::default()).unwrap();
        assert_eq!(doc.cell_count(), 0);
        assert_eq!(doc.transforms_of(ShapeClass::Wall).len(), 1);
        assert_eq!(doc.transforms_of(ShapeClass::Envelope).len(), 1);
    }

    #[test]
    fn budget_downgrades_ladder() {
        assert_eq!(
            choose_primitive(PrimitiveKind::Sphere, 48, 0, Some(150_000)),
            PrimitiveKind::Sphere
        );
        assert_eq!(
            choose_primitive(PrimitiveKind::Sphere, 1_000, 0, Some(150_000)),
            PrimitiveKind::Box
        );
        assert_eq!(
            choose_primitive(PrimitiveKind::Sphere, 20_000, 0, Some(150_000)),
            PrimitiveKind::Tetrahedron
        );
        assert_eq!(
            choose_primitive(PrimitiveKind::Box, 70_000, 0, Some(150_000)),
            PrimitiveKind::Billboard
        );
        assert_eq!(
            choose_primitive(PrimitiveKind::Sphere, 10_000_000, 0, None),
            PrimitiveKind::Sphere
        );
    }

    #[test]
    fn wireframe_walls_have_twelve_beams() {
        let m = model([4.0, 4.0, 3.0]);
        let opts = SceneOptions {
            walls: WallMode::Wireframe,
            ..Default::default()
        };
        let doc = generate_scene(&uniform_frame(&m, 20.0, 50.0), &m, &opts).unwrap();
        let walls = doc.transforms_of(ShapeClass::Wall);
        assert_eq!(walls[0].children().len(), 12);
    }

    #[test]
    fn fog_variant_has_no_cells() {
        let m = model([4.0, 4.0, 3.0]);
        let opts = SceneOptions {
            fog: Some(FogOptions {
                fog_type: FogType::Linear,
                visibility_range: None,
            }),
            ..Default::default()
        };
        let doc = generate_scene(&uniform_frame(&m, 25.0, 50.0), &m, &opts).unwrap();
        assert_eq!(doc.cell_count(), 0);
        assert_eq!(count(&doc, "Fog"), 1);
        let fog = doc
            .scene
            .iter()
            .find(|n| matches!(n, Node::Fog { .. }))
            .unwrap();
        if let Node::Fog { color, .. } = fog {
            assert_eq!(*color, Rgb::new(0.5, 0.0, 0.5));
        }
    }

    #[test]
    fn round_trip_and_node_set() {
        let m = model([4.0, 4.0, 3.0]);
        let opts = SceneOptions {
            viewpoint: Some(Point3::new(-3.0, -2.0, 1.7)),
            ..Default::default()
        };
        let doc = generate_scene(&uniform_frame(&m, 20.0, 50.0), &m, &opts).unwrap();
        let text = serialize_x3d(&doc);
        assert_eq!(parse_x3d(&text).unwrap(), doc);
        assert!(doc.element_names().iter().all(|n| NODE_SET.contains(n)));
        assert_eq!(text, serialize_x3d(&doc));
    }

    #[test]
    fn frame_from_other_building_rejected() {
        let m = model([4.0, 4.0, 3.0]);
        let mut f = uniform_frame(&m, 20.0, 50.0);
        f.building_id = "other".into();
        assert!(matches!(
            generate_scene(&f, &m, &SceneOptions::default()),
            Err(SceneError::BuildingMismatch { .. })
        ));
    }

    #[test]
    fn view_dependent_needs_viewpoint() {
        let m = model([4.0, 4.0, 3.0]);
        assert_eq!(
            view_dependent_scene(&uniform_frame(&m, 20.0, 50.0), &m, &SceneOptions::default()),
            Err(SceneError::MissingViewpoint)
        );
    }

    #[test]
    fn look_at_points_forward() {
        // default view direction is -z; rotate it by the returned orientation and compare
        let eye = Point3::new(1.0, 2.0, 3.0);
        let target = Point3::new(4.0, -1.0, -2.0);
        let [ax, ay, az, angle] = look_at(eye, target);
        let v = Point3::new(0.0, 0.0, -1.0);
        let k = Point3::new(ax, ay, az);
        let dot = k.z * v.z;
        let cross = Point3::new(
            k.y * v.z - k.z * v.y,
            k.z * v.x - k.x * v.z,
            k.x * v.y - k.y * v.x,
        );
        let r = v * angle.cos() + cross * angle.sin() + k * (dot * (1.0 - angle.cos()));
        let d = target - eye;
        let n = d.distance(&Point3::default());
        assert!((r.x - d.x / n).abs() < 1e-12);
        assert!((r.y - d.y / n).abs() < 1e-12);
        assert!((r.z - d.z / n).abs() < 1e-12);
    }
}
