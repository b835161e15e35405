//! The supported ROS1 message set: schemas, md5 checksums, canonical
//! definition text and binary serialization.
//!
//! The set is closed: `std_msgs/Header`, the `geometry_msgs` pose and twist
//! family, `nav_msgs/{MapMetaData,OccupancyGrid,Odometry}` and
//! `rosgraph_msgs/Log`.

mod codec;
mod schema;
mod types;
mod value;

pub use codec::{check_finite, deserialize_message, serialize_message};
pub use schema::{
    canonical_definition_text, compute_md5, md5_text, schema, spec, supported_types, Arity,
    ConstSpec, FieldSpec, FieldType, MessageSchema, MsgSpec, Primitive,
};
pub use types::{
    Header, Log, LogLevel, MapMetaData, OccupancyGrid, Odometry, Point, Pose, PoseWithCovariance,
    Quaternion, RosMessage, Twist, TwistWithCovariance, Vector3,
};
pub use value::{RosTime, Value};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MsgError {
    #[error("unknown message type `{0}`")]
    UnknownType(String),
    #[error("schema mismatch at {path}: expected {expected}, found {found}")]
    SchemaMismatch { path: String, expected: String, found: String },
    #[error("truncated buffer: needed {needed} bytes, {remaining} remaining")]
    Truncated { needed: usize, remaining: usize },
    #[error("declared length {declared} exceeds the {remaining} remaining bytes")]
    LengthOverrun { declared: usize, remaining: usize },
    #[error("{0} trailing bytes after message body")]
    TrailingBytes(usize),
    #[error("string field is not valid UTF-8")]
    InvalidUtf8,
    #[error("non-finite float at field path {0}")]
    NonFinite(String),
    #[error("invalid message: {0}")]
    Invalid(String),
}
