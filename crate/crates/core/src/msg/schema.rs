//! Static descriptions of the supported message types, their definition
//! text and md5 checksums.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::OnceLock;

use md5::{Digest, Md5};

use super::MsgError;

/// Builtin field types of the ROS1 message language used by the supported set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Primitive {
    Bool,
    /// Deprecated ROS alias, carried as one unsigned byte.
    Byte,
    Int8,
    UInt8,
    Int16,
    UInt16,
    Int32,
    UInt32,
    Int64,
    UInt64,
    Float32,
    Float64,
    String,
    Time,
}

impl Primitive {
    pub fn token(self) -> &'static str {
        match self {
            Primitive::Bool => "bool",
            Primitive::Byte => "byte",
            Primitive::Int8 => "int8",
            Primitive::UInt8 => "uint8",
            Primitive::Int16 => "int16",
            Primitive::UInt16 => "uint16",
            Primitive::Int32 => "int32",
            Primitive::UInt32 => "uint32",
            Primitive::Int64 => "int64",
            Primitive::UInt64 => "uint64",
            Primitive::Float32 => "float32",
            Primitive::Float64 => "float64",
            Primitive::String => "string",
            Primitive::Time => "time",
        }
    }

    /// True for the one-byte integer types whose arrays travel as packed octets.
    pub fn is_octet(self) -> bool {
        matches!(self, Primitive::Byte | Primitive::Int8 | Primitive::UInt8)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldType {
    Primitive(Primitive),
    /// Embedded message, by fully qualified type name.
    Message(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arity {
    Scalar,
    Fixed(usize),
    Variable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldSpec {
    pub name: &'static str,
    pub ty: FieldType,
    pub arity: Arity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstSpec {
    pub ty: Primitive,
    pub name: &'static str,
    pub value: &'static str,
}

/// Field layout of one message type.
#[derive(Debug)]
pub struct MsgSpec {
    pub type_name: &'static str,
    pub constants: &'static [ConstSpec],
    pub fields: &'static [FieldSpec],
}

const fn prim(name: &'static str, p: Primitive) -> FieldSpec {
    FieldSpec { name, ty: FieldType::Primitive(p), arity: Arity::Scalar }
}

const fn prim_array(name: &'static str, p: Primitive, arity: Arity) -> FieldSpec {
    FieldSpec { name, ty: FieldType::Primitive(p), arity }
}

const fn msg(name: &'static str, ty: &'static str) -> FieldSpec {
    FieldSpec { name, ty: FieldType::Message(ty), arity: Arity::Scalar }
}

use Primitive as P;

static SPECS: &[MsgSpec] = &[
    MsgSpec {
        type_name: "std_msgs/Header",
        constants: &[],
        fields: &[prim("seq", P::UInt32), prim("stamp", P::Time), prim("frame_id", P::String)],
    },
    MsgSpec {
        type_name: "geometry_msgs/Vector3",
        constants: &[],
        fields: &[prim("x", P::Float64), prim("y", P::Float64), prim("z", P::Float64)],
    },
    MsgSpec {
        type_name: "geometry_msgs/Point",
        constants: &[],
        fields: &[prim("x", P::Float64), prim("y", P::Float64), prim("z", P::Float64)],
    },
    MsgSpec {
        type_name: "geometry_msgs/Quaternion",
        constants: &[],
        fields: &[
            prim("x", P::Float64),
            prim("y", P::Float64),
            prim("z", P::Float64),
            prim("w", P::Float64),
        ],
    },
    MsgSpec {
        type_name: "geometry_msgs/Pose",
        constants: &[],
        fields: &[
            msg("position", "geometry_msgs/Point"),
            msg("orientation", "geometry_msgs/Quaternion"),
        ],
    },
    MsgSpec {
        type_name: "geometry_msgs/PoseWithCovariance",
        constants: &[],
        fields: &[
            msg("pose", "geometry_msgs/Pose"),
            prim_array("covariance", P::Float64, Arity::Fixed(36)),
        ],
    },
    MsgSpec {
        type_name: "geometry_msgs/Twist",
        constants: &[],
        fields: &[msg("linear", "geometry_msgs/Vector3"), msg("angular", "geometry_msgs/Vector3")],
    },
    MsgSpec {
        type_name: "geometry_msgs/TwistWithCovariance",
        constants: &[],
        fields: &[
            msg("twist", "geometry_msgs/Twist"),
            prim_array("covariance", P::Float64, Arity::Fixed(36)),
        ],
    },
    MsgSpec {
        type_name: "nav_msgs/MapMetaData",
        constants: &[],
        fields: &[
            prim("map_load_time", P::Time),
            prim("resolution", P::Float32),
            prim("width", P::UInt32),
            prim("height", P::UInt32),
            msg("origin", "geometry_msgs/Pose"),
        ],
    },
    MsgSpec {
        type_name: "nav_msgs/OccupancyGrid",
        constants: &[],
        fields: &[
            msg("header", "std_msgs/Header"),
            msg("info", "nav_msgs/MapMetaData"),
            prim_array("data", P::Int8, Arity::Variable),
        ],
    },
    MsgSpec {
        type_name: "nav_msgs/Odometry",
        constants: &[],
        fields: &[
            msg("header", "std_msgs/Header"),
            prim("child_frame_id", P::String),
            msg("pose", "geometry_msgs/PoseWithCovariance"),
            msg("twist", "geometry_msgs/TwistWithCovariance"),
        ],
    },
    MsgSpec {
        type_name: "rosgraph_msgs/Log",
        constants: &[
            ConstSpec { ty: P::Byte, name: "DEBUG", value: "1" },
            ConstSpec { ty: P::Byte, name: "INFO", value: "2" },
            ConstSpec { ty: P::Byte, name: "WARN", value: "4" },
            ConstSpec { ty: P::Byte, name: "ERROR", value: "8" },
            ConstSpec { ty: P::Byte, name: "FATAL", value: "16" },
        ],
        fields: &[
            msg("header", "std_msgs/Header"),
            prim("level", P::Byte),
            prim("name", P::String),
            prim("msg", P::String),
            prim("file", P::String),
            prim("function", P::String),
            prim("line", P::UInt32),
            prim_array("topics", P::String, Arity::Variable),
        ],
    },
];

/// Names of every supported message type.
pub fn supported_types() -> impl Iterator<Item = &'static str> {
    SPECS.iter().map(|s| s.type_name)
}

pub fn spec(type_name: &str) -> Result<&'static MsgSpec, MsgError> {
    SPECS
        .iter()
        .find(|s| s.type_name == type_name)
        .ok_or_else(|| MsgError::UnknownType(type_name.to_string()))
}

/// Checksummed, self-describing schema of a supported message type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageSchema {
    pub type_name: &'static str,
    /// Full recursive definition, as sent in the `message_definition` header field.
    pub definition_text: String,
    pub md5: String,
    pub spec: &'static MsgSpec,
}

impl PartialEq for MsgSpec {
    fn eq(&self, other: &Self) -> bool {
        self.type_name == other.type_name
    }
}

impl Eq for MsgSpec {}

fn registry() -> &'static HashMap<&'static str, MessageSchema> {
    static REGISTRY: OnceLock<HashMap<&'static str, MessageSchema>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        SPECS
            .iter()
            .map(|s| {
                let schema = MessageSchema {
                    type_name: s.type_name,
                    definition_text: build_definition_text(s),
                    md5: build_md5(s),
                    spec: s,
                };
                (s.type_name, schema)
            })
            .collect()
    })
}

/// Looks up the schema of a supported type.
pub fn schema(type_name: &str) -> Result<&'static MessageSchema, MsgError> {
    registry()
        .get(type_name)
        .ok_or_else(|| MsgError::UnknownType(type_name.to_string()))
}

pub fn compute_md5(type_name: &str) -> Result<String, MsgError> {
    schema(type_name).map(|s| s.md5.clone())
}

pub fn canonical_definition_text(type_name: &str) -> Result<String, MsgError> {
    schema(type_name).map(|s| s.definition_text.clone())
}

fn array_suffix(arity: Arity) -> String {
    match arity {
        Arity::Scalar => String::new(),
        Arity::Fixed(n) => format!("[{n}]"),
        Arity::Variable => "[]".to_string(),
    }
}

fn own_definition(s: &MsgSpec) -> String {
    let mut out = String::new();
    for c in s.constants {
        let _ = writeln!(out, "{} {}={}", c.ty.token(), c.name, c.value);
    }
    for f in s.fields {
        let ty = match f.ty {
            FieldType::Primitive(p) => p.token(),
            FieldType::Message(m) => m,
        };
        let _ = writeln!(out, "{}{} {}", ty, array_suffix(f.arity), f.name);
    }
    out
}

fn collect_deps(s: &MsgSpec, seen: &mut Vec<&'static str>) {
    for f in s.fields {
        if let FieldType::Message(m) = f.ty {
            if !seen.contains(&m) {
                seen.push(m);
                // Closure of the table is covered by tests.
                collect_deps(spec(m).expect("embedded type is in the supported set"), seen);
            }
        }
    }
}

fn build_definition_text(s: &MsgSpec) -> String {
    let mut out = own_definition(s);
    let mut deps = Vec::new();
    collect_deps(s, &mut deps);
    for dep in deps {
        out.push_str(&"=".repeat(80));
        out.push('\n');
        let _ = writeln!(out, "MSG: {dep}");
        out.push_str(&own_definition(spec(dep).expect("closed set")));
    }
    out
}

/// The text the md5 sum is taken over.
pub fn md5_text(s: &MsgSpec) -> String {
    let mut lines = Vec::with_capacity(s.constants.len() + s.fields.len());
    for c in s.constants {
        lines.push(format!("{} {}={}", c.ty.token(), c.name, c.value));
    }
    for f in s.fields {
        match f.ty {
            FieldType::Primitive(p) => {
                lines.push(format!("{}{} {}", p.token(), array_suffix(f.arity), f.name))
            }
            FieldType::Message(m) => {
                let dep = build_md5(spec(m).expect("closed set"));
                lines.push(format!("{} {}", dep, f.name));
            }
        }
    }
    lines.join("\n")
}

fn build_md5(s: &MsgSpec) -> String {
    let digest = Md5::digest(md5_text(s).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
