//! Minimal X3D scene graph with a deterministic XML writer and a parser for the
//! same node subset.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::Rgb;
use crate::geometry::Point3;

/// Every element name a document may contain.
pub const NODE_SET: [&str; 14] = [
    "X3D",
    "Scene",
    "Viewpoint",
    "Transform",
    "Shape",
    "Appearance",
    "Material",
    "Sphere",
    "Box",
    "IndexedFaceSet",
    "Coordinate",
    "Billboard",
    "Fog",
    "NavigationInfo",
];

pub const X3D_VERSION: &str = "3.3";

/// Nominal polygons per primitive, as tessellated by typical X3D players.
pub const SPHERE_POLYGONS: u64 = 300;
pub const BOX_POLYGONS: u64 = 12;

/// Role of a Transform subtree, written as the X3D `class` attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeClass {
    /// One thermal cell primitive.
    Cell,
    /// One primitive standing for a whole room at mid range.
    Aggregate,
    Wall,
    Envelope,
}

impl ShapeClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ShapeClass::Cell => "cell",
            ShapeClass::Aggregate => "aggregate",
            ShapeClass::Wall => "wall",
            ShapeClass::Envelope => "envelope",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "cell" => ShapeClass::Cell,
            "aggregate" => ShapeClass::Aggregate,
            "wall" => ShapeClass::Wall,
            "envelope" => ShapeClass::Envelope,
            _ => return None,
        })
    }

    pub fn is_thermal(self) -> bool {
        matches!(self, ShapeClass::Cell | ShapeClass::Aggregate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FogType {
    Linear,
    Exponential,
}

impl FogType {
    fn as_str(self) -> &'static str {
        match self {
            FogType::Linear => "LINEAR",
            FogType::Exponential => "EXPONENTIAL",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub diffuse: Rgb,
    pub transparency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Sphere {
        radius: f64,
    },
    Box {
        size: Point3,
    },
    IndexedFaceSet {
        /// Vertex indices, faces separated by -1.
        coord_index: Vec<i32>,
        points: Vec<Point3>,
    },
}

impl Geometry {
    pub fn nominal_polygons(&self) -> u64 {
        match self {
            Geometry::Sphere { .. } => SPHERE_POLYGONS,
            Geometry::Box { .. } => BOX_POLYGONS,
            Geometry::IndexedFaceSet { coord_index, .. } => {
                let separators = coord_index.iter().filter(|&&i| i == -1).count() as u64;
                let open_tail = coord_index.last().is_some_and(|&i| i != -1) as u64;
                separators + open_tail
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    NavigationInfo {
        types: Vec<String>,
    },
    Viewpoint {
        description: String,
        position: Point3,
        /// Axis-angle rotation `[x, y, z, radians]`.
        orientation: [f64; 4],
    },
    Fog {
        fog_type: FogType,
        color: Rgb,
        visibility_range: f64,
    },
    Transform {
        def: Option<String>,
        class: Option<ShapeClass>,
        translation: Point3,
        rotation: Option<[f64; 4]>,
        children: Vec<Node>,
    },
    /// Screen-aligned group (`axisOfRotation 0 0 0`).
    Billboard {
        children: Vec<Node>,
    },
    Shape {
        geometry: Geometry,
        material: Material,
    },
}

impl Node {
    pub fn children(&self) -> &[Node] {
        match self {
            Node::Transform { children, .. } | Node::Billboard { children } => children,
            _ => &[],
        }
    }

    fn visit<'a>(
        &'a self,
        f: &mut impl FnMut(&'a Node, Option<ShapeClass>),
        class: Option<ShapeClass>,
    ) {
        let class = match self {
            Node::Transform { class: Some(c), .. } => Some(*c),
            _ => class,
        };
        f(self, class);
        for c in self.children() {
            c.visit(f, class);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct X3DDocument {
    pub scene: Vec<Node>,
}

impl X3DDocument {
    /// Calls `f` for every node with the class inherited from the nearest classed Transform.
    pub fn walk<'a>(&'a self, mut f: impl FnMut(&'a Node, Option<ShapeClass>)) {
        for n in &self.scene {
            n.visit(&mut f, None);
        }
    }

    /// Polygon accounting of the thermal layer (cells and room aggregates).
    pub fn nominal_polygons(&self) -> u64 {
        let mut total = 0;
        self.walk(|n, class| {
            if let (Node::Shape { geometry, .. }, Some(c)) = (n, class) {
                if c.is_thermal() {
                    total += geometry.nominal_polygons();
                }
            }
        });
        total
    }

    /// Transforms carrying the given class.
    pub fn transforms_of(&self, wanted: ShapeClass) -> Vec<&Node> {
        let mut out = Vec::new();
        self.walk(|n, _| {
            if let Node::Transform { class: Some(c), .. } = n {
                if *c == wanted {
                    out.push(n);
                }
            }
        });
        out
    }

    pub fn cell_count(&self) -> usize {
        self.transforms_of(ShapeClass::Cell).len()
    }

    pub fn thermal_primitive_count(&self) -> usize {
        self.cell_count() + self.transforms_of(ShapeClass::Aggregate).len()
    }

    /// Element names in document order (including X3D and Scene).
    pub fn element_names(&self) -> Vec<&'static str> {
        let mut out = vec!["X3D", "Scene"];
        self.walk(|n, _| match n {
            Node::NavigationInfo { .. } => out.push("NavigationInfo"),
            Node::Viewpoint { .. } => out.push("Viewpoint"),
            Node::Fog { .. } => out.push("Fog"),
            Node::Transform { .. } => out.push("Transform"),
            Node::Billboard { .. } => out.push("Billboard"),
            Node::Shape { geometry, .. } => {
                out.extend(["Shape", "Appearance", "Material"]);
                match geometry {
                    Geometry::Sphere { .. } => out.push("Sphere"),
                    Geometry::Box { .. } => out.push("Box"),
                    Geometry::IndexedFaceSet { .. } => out.extend(["IndexedFaceSet", "Coordinate"]),
                }
            }
        });
        out
    }

    pub fn to_xml(&self) -> String {
        serialize_x3d(self)
    }
}

struct Num(f64);

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // shortest representation that parses back to the same f64
        write!(f, "{}", self.0)
    }
}

fn vec3(p: &Point3) -> String {
    format!("{} {} {}", Num(p.x), Num(p.y), Num(p.z))
}

fn rgb(c: &Rgb) -> String {
    format!("{} {} {}", Num(c.r), Num(c.g), Num(c.b))
}

fn rot(r: &[f64; 4]) -> String {
    format!("{} {} {} {}", Num(r[0]), Num(r[1]), Num(r[2]), Num(r[3]))
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '\'' => out.push_str("&apos;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

fn write_node(out: &mut String, node: &Node, depth: usize) {
    let pad = "  ".repeat(depth);
    match node {
        Node::NavigationInfo { types } => {
            let list: Vec<String> = types.iter().map(|t| format!("\"{t}\"")).collect();
            let _ = writeln!(
                out,
                "{pad}<NavigationInfo type='{}'/>",
                escape(&list.join(" "))
            );
        }
        Node::Viewpoint {
            description,
            position,
            orientation,
        } => {
            let _ = writeln!(
                out,
                "{pad}<Viewpoint description='{}' position='{}' orientation='{}'/>",
                escape(description),
                vec3(position),
                rot(orientation)
            );
        }
        Node::Fog {
            fog_type,
            color,
            visibility_range,
        } => {
            let _ = writeln!(
                out,
                "{pad}<Fog fogType='{}' color='{}' visibilityRange='{}'/>",
                fog_type.as_str(),
                rgb(color),
                Num(*visibility_range)
            );
        }
        Node::Transform {
            def,
            class,
            translation,
            rotation,
            children,
        } => {
            let _ = write!(out, "{pad}<Transform");
            if let Some(d) = def {
                let _ = write!(out, " DEF='{}'", escape(d));
            }
            if let Some(c) = class {
                let _ = write!(out, " class='{}'", c.as_str());
            }
            let _ = write!(out, " translation='{}'", vec3(translation));
            if let Some(r) = rotation {
                let _ = write!(out, " rotation='{}'", rot(r));
            }
            write_children(out, "Transform", children, depth);
        }
        Node::Billboard { children } => {
            let _ = write!(out, "{pad}<Billboard axisOfRotation='0 0 0'");
            write_children(out, "Billboard", children, depth);
        }
        Node::Shape { geometry, material } => {
            let inner = "  ".repeat(depth + 1);
            let _ = writeln!(out, "{pad}<Shape>");
            let _ = writeln!(out, "{inner}<Appearance>");
            let _ = writeln!(
                out,
                "{inner}  <Material diffuseColor='{}' transparency='{}'/>",
                rgb(&material.diffuse),
                Num(material.transparency)
            );
            let _ = writeln!(out, "{inner}</Appearance>");
            match geometry {
                Geometry::Sphere { radius } => {
                    let _ = writeln!(out, "{inner}<Sphere radius='{}'/>", Num(*radius));
                }
                Geometry::Box { size } => {
                    let _ = writeln!(out, "{inner}<Box size='{}'/>", vec3(size));
                }
                Geometry::IndexedFaceSet {
                    coord_index,
                    points,
                } => {
                    let idx: Vec<String> = coord_index.iter().map(|i| i.to_string()).collect();
                    let pts: Vec<String> = points.iter().map(vec3).collect();
                    let _ = writeln!(
                        out,
                        "{inner}<IndexedFaceSet solid='false' coordIndex='{}'>",
                        idx.join(" ")
                    );
                    let _ = writeln!(out, "{inner}  <Coordinate point='{}'/>", pts.join(", "));
                    let _ = writeln!(out, "{inner}</IndexedFaceSet>");
                }
            }
            let _ = writeln!(out, "{pad}</Shape>");
        }
    }
}

fn write_children(out: &mut String, tag: &str, children: &[Node], depth: usize) {
    if children.is_empty() {
        out.push_str("/>\n");
        return;
    }
    out.push_str(">\n");
    for c in children {
        write_node(out, c, depth + 1);
    }
    let _ = writeln!(out, "{}</{tag}>", "  ".repeat(depth));
}

/// Serializes to UTF-8 X3D XML. Identical documents give identical bytes.
pub fn serialize_x3d(doc: &X3DDocument) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str(
        "<!DOCTYPE X3D PUBLIC \"ISO//Web3D//DTD X3D 3.3//EN\" \"http://www.web3d.org/specifications/x3d-3.3.dtd\">\n",
    );
    let _ = writeln!(out, "<X3D profile='Immersive' version='{X3D_VERSION}'>");
    if doc.scene.is_empty() {
        out.push_str("  <Scene/>\n");
    } else {
        out.push_str("  <Scene>\n");
        for n in &doc.scene {
            write_node(&mut out, n, 2);
        }
        out.push_str("  </Scene>\n");
    }
    out.push_str("</X3D>\n");
    out
}

#[derive(Debug, Error, PartialEq)]
pub enum X3dParseError {
    #[error("xml: {0}")]
    Xml(String),
    #[error("element <{0}> is outside the supported node set")]
    UnsupportedNode(String),
    #[error("<{element}> is missing attribute `{attr}`")]
    MissingAttribute { element: String, attr: String },
    #[error("<{element}> attribute `{attr}` is malformed: `{value}`")]
    BadAttribute {
        element: String,
        attr: String,
        value: String,
    },
    #[error("unexpected structure: {0}")]
    Structure(String),
}

type Elem<'a, 'i> = roxmltree::Node<'a, 'i>;

fn attr<'a>(e: &Elem<'a, '_>, name: &str) -> Result<&'a str, X3dParseError> {
    e.attribute(name)
        .ok_or_else(|| X3dParseError::MissingAttribute {
            element: e.tag_name().name().into(),
            attr: name.into(),
        })
}

fn floats(e: &Elem, name: &str, n: Option<usize>) -> Result<Vec<f64>, X3dParseError> {
    let raw = attr(e, name)?;
    let bad = || X3dParseError::BadAttribute {
        element: e.tag_name().name().into(),
        attr: name.into(),
        value: raw.into(),
    };
    let v: Vec<f64> = raw
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    match n {
        Some(n) if v.len() != n => Err(bad()),
        _ => Ok(v),
    }
}

fn point(e: &Elem, name: &str) -> Result<Point3, X3dParseError> {
    let v = floats(e, name, Some(3))?;
    Ok(Point3::new(v[0], v[1], v[2]))
}

fn color(e: &Elem, name: &str) -> Result<Rgb, X3dParseError> {
    let v = floats(e, name, Some(3))?;
    Ok(Rgb::new(v[0], v[1], v[2]))
}

fn rotation(e: &Elem, name: &str) -> Result<[f64; 4], X3dParseError> {
    let v = floats(e, name, Some(4))?;
    Ok([v[0], v[1], v[2], v[3]])
}

fn elements<'a, 'i>(e: &Elem<'a, 'i>) -> impl Iterator<Item = Elem<'a, 'i>> {
    e.children().filter(|c| c.is_element())
}

fn check_name(e: &Elem) -> Result<(), X3dParseError> {
    let name = e.tag_name().name();
    if NODE_SET.contains(&name) {
        Ok(())
    } else {
        Err(X3dParseError::UnsupportedNode(name.into()))
    }
}

fn parse_shape(e: &Elem) -> Result<Node, X3dParseError> {
    let mut material = None;
    let mut geometry = None;
    for c in elements(e) {
        check_name(&c)?;
        match c.tag_name().name() {
            "Appearance" => {
                let m = elements(&c).next().ok_or_else(|| {
                    X3dParseError::Structure("Appearance without Material".into())
                })?;
                check_name(&m)?;
                if m.tag_name().name() != "Material" {
                    return Err(X3dParseError::Structure(
                        "Appearance must hold a Material".into(),
                    ));
                }
                let transparency = floats(&m, "transparency", Some(1))?[0];
                material = Some(Material {
                    diffuse: color(&m, "diffuseColor")?,
                    transparency,
                });
            }
            "Sphere" => {
                geometry = Some(Geometry::Sphere {
                    radius: floats(&c, "radius", Some(1))?[0],
                })
            }
            "Box" => {
                geometry = Some(Geometry::Box {
                    size: point(&c, "size")?,
                })
            }
            "IndexedFaceSet" => {
                let raw = attr(&c, "coordIndex")?;
                let coord_index = raw
                    .split_whitespace()
                    .map(str::parse::<i32>)
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| X3dParseError::BadAttribute {
                        element: "IndexedFaceSet".into(),
                        attr: "coordIndex".into(),
                        value: raw.into(),
                    })?;
                let coord = elements(&c).next().ok_or_else(|| {
                    X3dParseError::Structure("IndexedFaceSet without Coordinate".into())
                })?;
                check_name(&coord)?;
                let flat = floats(&coord, "point", None)?;
                if flat.len() % 3 != 0 {
                    return Err(X3dParseError::Structure(
                        "Coordinate point count not a multiple of 3".into(),
                    ));
                }
                let points = flat
                    .chunks(3)
                    .map(|c| Point3::new(c[0], c[1], c[2]))
                    .collect();
                geometry = Some(Geometry::IndexedFaceSet {
                    coord_index,
                    points,
                });
            }
            other => {
                return Err(X3dParseError::Structure(format!("<{other}> inside Shape")));
            }
        }
    }
    match (geometry, material) {
        (Some(geometry), Some(material)) => Ok(Node::Shape { geometry, material }),
        _ => Err(X3dParseError::Structure(
            "Shape needs geometry and a Material".into(),
        )),
    }
}

fn parse_node(e: &Elem) -> Result<Node, X3dParseError> {
    check_name(e)?;
    let children = || {
        elements(e)
            .map(|c| parse_node(&c))
            .collect::<Result<Vec<_>, _>>()
    };
    Ok(match e.tag_name().name() {
        "NavigationInfo" => Node::NavigationInfo {
            types: attr(e, "type")?
                .split_whitespace()
                .map(|t| t.trim_matches('"').to_string())
                .collect(),
        },
        "Viewpoint" => Node::Viewpoint {
            description: attr(e, "description")?.to_string(),
            position: point(e, "position")?,
            orientation: rotation(e, "orientation")?,
        },
        "Fog" => Node::Fog {
            fog_type: match attr(e, "fogType")? {
                "LINEAR" => FogType::Linear,
                "EXPONENTIAL" => FogType::Exponential,
                other => {
                    return Err(X3dParseError::BadAttribute {
                        element: "Fog".into(),
                        attr: "fogType".into(),
                        value: other.into(),
                    })
                }
            },
            color: color(e, "color")?,
            visibility_range: floats(e, "visibilityRange", Some(1))?[0],
        },
        "Transform" => Node::Transform {
            def: e.attribute("DEF").map(str::to_string),
            class: match e.attribute("class") {
                None => None,
                Some(c) => {
                    Some(
                        ShapeClass::parse(c).ok_or_else(|| X3dParseError::BadAttribute {
                            element: "Transform".into(),
                            attr: "class".into(),
                            value: c.into(),
                        })?,
                    )
                }
            },
            translation: point(e, "translation")?,
            rotation: match e.attribute("rotation") {
                None => None,
                Some(_) => Some(rotation(e, "rotation")?),
            },
            children: children()?,
        },
        "Billboard" => Node::Billboard {
            children: children()?,
        },
        "Shape" => parse_shape(e)?,
        other => {
            return Err(X3dParseError::Structure(format!(
                "<{other}> cannot appear here"
            )))
        }
    })
}

/// Parses X3D XML produced by [`serialize_x3d`] (or any document within the same node set).
pub fn parse_x3d(text: &str) -> Result<X3DDocument, X3dParseError> {
    let opts = roxmltree::ParsingOptions {
        allow_dtd: true,
        ..Default::default()
    };
    let xml = roxmltree::Document::parse_with_options(text, opts)
        .map_err(|e| X3dParseError::Xml(e.to_string()))?;
    let root = xml.root_element();
    check_name(&root)?;
    if root.tag_name().name() != "X3D" {
        return Err(X3dParseError::Structure("root element must be X3D".into()));
    }
    if root.attribute("version") != Some(X3D_VERSION) {
        return Err(X3dParseError::Structure(format!(
            "expected X3D version {X3D_VERSION}"
        )));
    }
    let mut scenes = elements(&root);
    let scene = scenes
        .next()
        .ok_or_else(|| X3dParseError::Structure("missing Scene".into()))?;
    check_name(&scene)?;
    if scene.tag_name().name() != "Scene" || scenes.next().is_some() {
        return Err(X3dParseError::Structure(
            "X3D must contain exactly one Scene".into(),
        ));
    }
    let nodes = elements(&scene)
        .map(|c| parse_node(&c))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(X3DDocument { scene: nodes })
}
