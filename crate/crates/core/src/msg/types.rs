//! Typed views of the supported messages.

use super::value::{RosTime, Value};
use super::{schema, MessageSchema, MsgError};

/// A statically typed message that maps onto its dynamic [`Value`] layout.
pub trait RosMessage: Sized + Clone + Send + 'static {
    const TYPE_NAME: &'static str;

    fn to_value(&self) -> Value;
    fn from_value(value: &Value) -> Result<Self, MsgError>;

    fn schema() -> &'static MessageSchema {
        schema(Self::TYPE_NAME).expect("typed messages are registered")
    }

    fn encode(&self) -> Result<Vec<u8>, MsgError> {
        super::serialize_message(&self.to_value(), Self::schema())
    }

    fn decode(bytes: &[u8]) -> Result<Self, MsgError> {
        Self::from_value(&super::deserialize_message(bytes, Self::schema())?)
    }
}

fn fields<'a>(v: &'a Value, type_name: &str, n: usize) -> Result<&'a [Value], MsgError> {
    match v {
        Value::Message(f) if f.len() == n => Ok(f),
        other => Err(MsgError::SchemaMismatch {
            path: "<root>".into(),
            expected: format!("{n} fields of {type_name}"),
            found: match other {
                Value::Message(f) => format!("{} fields", f.len()),
                v => v.kind().to_string(),
            },
        }),
    }
}

fn wrong(expected: &str, found: &Value) -> MsgError {
    MsgError::SchemaMismatch {
        path: "<field>".into(),
        expected: expected.to_string(),
        found: found.kind().to_string(),
    }
}

fn f64_of(v: &Value) -> Result<f64, MsgError> {
    match v {
        Value::Float64(x) => Ok(*x),
        v => Err(wrong("float64", v)),
    }
}

fn f32_of(v: &Value) -> Result<f32, MsgError> {
    match v {
        Value::Float32(x) => Ok(*x),
        v => Err(wrong("float32", v)),
    }
}

fn u32_of(v: &Value) -> Result<u32, MsgError> {
    match v {
        Value::UInt32(x) => Ok(*x),
        v => Err(wrong("uint32", v)),
    }
}

fn u8_of(v: &Value) -> Result<u8, MsgError> {
    match v {
        Value::UInt8(x) => Ok(*x),
        v => Err(wrong("uint8", v)),
    }
}

fn string_of(v: &Value) -> Result<String, MsgError> {
    match v {
        Value::String(s) => Ok(s.clone()),
        v => Err(wrong("string", v)),
    }
}

fn time_of(v: &Value) -> Result<RosTime, MsgError> {
    match v {
        Value::Time(t) => Ok(*t),
        v => Err(wrong("time", v)),
    }
}

fn covariance_of(v: &Value) -> Result<[f64; 36], MsgError> {
    match v {
        Value::Array(items) if items.len() == 36 => {
            let mut out = [0.0; 36];
            for (o, i) in out.iter_mut().zip(items) {
                *o = f64_of(i)?;
            }
            Ok(out)
        }
        v => Err(wrong("float64[36]", v)),
    }
}

fn covariance_value(c: &[f64; 36]) -> Value {
    Value::Array(c.iter().map(|x| Value::Float64(*x)).collect())
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Header {
    pub seq: u32,
    pub stamp: RosTime,
    pub frame_id: String,
}

impl RosMessage for Header {
    const TYPE_NAME: &'static str = "std_msgs/Header";

    fn to_value(&self) -> Value {
        Value::Message(vec![
            Value::UInt32(self.seq),
            Value::Time(self.stamp),
            Value::String(self.frame_id.clone()),
        ])
    }

    fn from_value(v: &Value) -> Result<Self, MsgError> {
        let f = fields(v, Self::TYPE_NAME, 3)?;
        Ok(Header { seq: u32_of(&f[0])?, stamp: time_of(&f[1])?, frame_id: string_of(&f[2])? })
    }
}

macro_rules! xyz_message {
    ($name:ident, $type_name:literal) => {
        #[derive(Debug, Clone, Copy, PartialEq, Default)]
        pub struct $name {
            pub x: f64,
            pub y: f64,
            pub z: f64,
        }

        impl $name {
            pub const fn new(x: f64, y: f64, z: f64) -> Self {
                Self { x, y, z }
            }
        }

        impl RosMessage for $name {
            const TYPE_NAME: &'static str = $type_name;

            fn to_value(&self) -> Value {
                Value::Message(vec![
                    Value::Float64(self.x),
                    Value::Float64(self.y),
                    Value::Float64(self.z),
                ])
            }

            fn from_value(v: &Value) -> Result<Self, MsgError> {
                let f = fields(v, Self::TYPE_NAME, 3)?;
                Ok(Self { x: f64_of(&f[0])?, y: f64_of(&f[1])?, z: f64_of(&f[2])? })
            }
        }
    };
}

xyz_message!(Vector3, "geometry_msgs/Vector3");
xyz_message!(Point, "geometry_msgs/Point");

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
}

impl Default for Quaternion {
    fn default() -> Self {
        Quaternion::IDENTITY
    }
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion { x: 0.0, y: 0.0, z: 0.0, w: 1.0 };

    /// Rotation about +z by `yaw` radians.
    pub fn from_yaw(yaw: f64) -> Self {
        let (s, c) = (yaw / 2.0).sin_cos();
        Quaternion { x: 0.0, y: 0.0, z: s, w: c }
    }

    pub fn yaw(&self) -> f64 {
        let siny = 2.0 * (self.w * self.z + self.x * self.y);
        let cosy = 1.0 - 2.0 * (self.y * self.y + self.z * self.z);
        siny.atan2(cosy)
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z + self.w * self.w).sqrt()
    }
}

impl RosMessage for Quaternion {
    const TYPE_NAME: &'static str = "geometry_msgs/Quaternion";

    fn to_value(&self) -> Value {
        Value::Message(vec![
            Value::Float64(self.x),
            Value::Float64(self.y),
            Value::Float64(self.z),
            Value::Float64(self.w),
        ])
    }

    fn from_value(v: &Value) -> Result<Self, MsgError> {
        let f = fields(v, Self::TYPE_NAME, 4)?;
        Ok(Quaternion {
            x: f64_of(&f[0])?,
            y: f64_of(&f[1])?,
            z: f64_of(&f[2])?,
            w: f64_of(&f[3])?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub position: Point,
    pub orientation: Quaternion,
}

impl RosMessage for Pose {
    const TYPE_NAME: &'static str = "geometry_msgs/Pose";

    fn to_value(&self) -> Value {
        Value::Message(vec![self.position.to_value(), self.orientation.to_value()])
    }

    fn from_value(v: &Value) -> Result<Self, MsgError> {
        let f = fields(v, Self::TYPE_NAME, 2)?;
        Ok(Pose { position: Point::from_value(&f[0])?, orientation: Quaternion::from_value(&f[1])? })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseWithCovariance {
    pub pose: Pose,
    pub covariance: [f64; 36],
}

impl Default for PoseWithCovariance {
    fn default() -> Self {
        PoseWithCovariance { pose: Pose::default(), covariance: [0.0; 36] }
    }
}

impl RosMessage for PoseWithCovariance {
    const TYPE_NAME: &'static str = "geometry_msgs/PoseWithCovariance";

    fn to_value(&self) -> Value {
        Value::Message(vec![self.pose.to_value(), covariance_value(&self.covariance)])
    }

    fn from_value(v: &Value) -> Result<Self, MsgError> {
        let f = fields(v, Self::TYPE_NAME, 2)?;
        Ok(PoseWithCovariance { pose: Pose::from_value(&f[0])?, covariance: covariance_of(&f[1])? })
    }
}

/// Velocity command: `linear` in m/s, `angular` in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Twist {
    pub linear: Vector3,
    pub angular: Vector3,
}

impl Twist {
    pub const ZERO: Twist = Twist { linear: Vector3::new(0.0, 0.0, 0.0), angular: Vector3::new(0.0, 0.0, 0.0) };

    /// Planar command: forward speed and yaw rate.
    pub fn planar(v: f64, omega: f64) -> Self {
        Twist { linear: Vector3::new(v, 0.0, 0.0), angular: Vector3::new(0.0, 0.0, omega) }
    }

    pub fn is_zero(&self) -> bool {
        *self == Twist::ZERO
    }
}

impl RosMessage for Twist {
    const TYPE_NAME: &'static str = "geometry_msgs/Twist";

    fn to_value(&self) -> Value {
        Value::Message(vec![self.linear.to_value(), self.angular.to_value()])
    }

    fn from_value(v: &Value) -> Result<Self, MsgError> {
        let f = fields(v, Self::TYPE_NAME, 2)?;
        Ok(Twist { linear: Vector3::from_value(&f[0])?, angular: Vector3::from_value(&f[1])? })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwistWithCovariance {
    pub twist: Twist,
    pub covariance: [f64; 36],
}

impl Default for TwistWithCovariance {
    fn default() -> Self {
        TwistWithCovariance { twist: Twist::ZERO, covariance: [0.0; 36] }
    }
}

impl RosMessage for TwistWithCovariance {
    const TYPE_NAME: &'static str = "geometry_msgs/TwistWithCovariance";

    fn to_value(&self) -> Value {
        Value::Message(vec![self.twist.to_value(), covariance_value(&self.covariance)])
    }

    fn from_value(v: &Value) -> Result<Self, MsgError> {
        let f = fields(v, Self::TYPE_NAME, 2)?;
        Ok(TwistWithCovariance {
            twist: Twist::from_value(&f[0])?,
            covariance: covariance_of(&f[1])?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MapMetaData {
    pub map_load_time: RosTime,
    /// Meters per cell.
    pub resolution: f32,
    pub width: u32,
    pub height: u32,
    pub origin: Pose,
}

impl RosMessage for MapMetaData {
    const TYPE_NAME: &'static str = "nav_msgs/MapMetaData";

    fn to_value(&self) -> Value {
        Value::Message(vec![
            Value::Time(self.map_load_time),
            Value::Float32(self.resolution),
            Value::UInt32(self.width),
            Value::UInt32(self.height),
            self.origin.to_value(),
        ])
    }

    fn from_value(v: &Value) -> Result<Self, MsgError> {
        let f = fields(v, Self::TYPE_NAME, 5)?;
        Ok(MapMetaData {
            map_load_time: time_of(&f[0])?,
            resolution: f32_of(&f[1])?,
            width: u32_of(&f[2])?,
            height: u32_of(&f[3])?,
            origin: Pose::from_value(&f[4])?,
        })
    }
}

/// Row-major occupancy grid, row 0 at the origin. Cells are -1 (unknown)
/// or 0..=100.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OccupancyGrid {
    pub header: Header,
    pub info: MapMetaData,
    pub data: Vec<i8>,
}

impl OccupancyGrid {
    pub const UNKNOWN: i8 = -1;
    pub const FREE: i8 = 0;
    pub const OCCUPIED: i8 = 100;

    /// Checks `data.len() == width * height` and the cell value range.
    pub fn validate(&self) -> Result<(), MsgError> {
        let expected = self.info.width as usize * self.info.height as usize;
        if self.data.len() != expected {
            return Err(MsgError::Invalid(format!(
                "grid data length {} != width*height {}",
                self.data.len(),
                expected
            )));
        }
        if let Some((i, v)) = self
            .data
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v == -1 || (0..=100).contains(*v)))
        {
            return Err(MsgError::Invalid(format!("cell {i} has out-of-range value {v}")));
        }
        Ok(())
    }
}

impl RosMessage for OccupancyGrid {
    const TYPE_NAME: &'static str = "nav_msgs/OccupancyGrid";

    fn to_value(&self) -> Value {
        Value::Message(vec![
            self.header.to_value(),
            self.info.to_value(),
            Value::Bytes(self.data.iter().map(|v| *v as u8).collect()),
        ])
    }

    fn from_value(v: &Value) -> Result<Self, MsgError> {
        let f = fields(v, Self::TYPE_NAME, 3)?;
        let data = match &f[2] {
            Value::Bytes(b) => b.iter().map(|v| *v as i8).collect(),
            v => return Err(wrong("int8[]", v)),
        };
        Ok(OccupancyGrid {
            header: Header::from_value(&f[0])?,
            info: MapMetaData::from_value(&f[1])?,
            data,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Odometry {
    pub header: Header,
    pub child_frame_id: String,
    pub pose: PoseWithCovariance,
    pub twist: TwistWithCovariance,
}

impl RosMessage for Odometry {
    const TYPE_NAME: &'static str = "nav_msgs/Odometry";

    fn to_value(&self) -> Value {
        Value::Message(vec![
            self.header.to_value(),
            Value::String(self.child_frame_id.clone()),
            self.pose.to_value(),
            self.twist.to_value(),
        ])
    }

    fn from_value(v: &Value) -> Result<Self, MsgError> {
        let f = fields(v, Self::TYPE_NAME, 4)?;
        Ok(Odometry {
            header: Header::from_value(&f[0])?,
            child_frame_id: string_of(&f[1])?,
            pose: PoseWithCovariance::from_value(&f[2])?,
            twist: TwistWithCovariance::from_value(&f[3])?,
        })
    }
}

/// `rosgraph_msgs/Log` severity levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum LogLevel {
    Debug = 1,
    Info = 2,
    Warn = 4,
    Error = 8,
    Fatal = 16,
}

impl TryFrom<u8> for LogLevel {
    type Error = MsgError;

    fn try_from(v: u8) -> Result<Self, MsgError> {
        Ok(match v {
            1 => LogLevel::Debug,
            2 => LogLevel::Info,
            4 => LogLevel::Warn,
            8 => LogLevel::Error,
            16 => LogLevel::Fatal,
            other => return Err(MsgError::Invalid(format!("log level {other} not in {{1,2,4,8,16}}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Log {
    pub header: Header,
    /// One of the [`LogLevel`] values.
    pub level: u8,
    pub name: String,
    pub msg: String,
    pub file: String,
    pub function: String,
    pub line: u32,
    pub topics: Vec<String>,
}

impl RosMessage for Log {
    const TYPE_NAME: &'static str = "rosgraph_msgs/Log";

    fn to_value(&self) -> Value {
        Value::Message(vec![
            self.header.to_value(),
            Value::UInt8(self.level),
            Value::String(self.name.clone()),
            Value::String(self.msg.clone()),
            Value::String(self.file.clone()),
            Value::String(self.function.clone()),
            Value::UInt32(self.line),
            Value::Array(self.topics.iter().cloned().map(Value::String).collect()),
        ])
    }

    fn from_value(v: &Value) -> Result<Self, MsgError> {
        let f = fields(v, Self::TYPE_NAME, 8)?;
        let topics = match &f[7] {
            Value::Array(items) => items.iter().map(string_of).collect::<Result<_, _>>()?,
            v => return Err(wrong("string[]", v)),
        };
        Ok(Log {
            header: Header::from_value(&f[0])?,
            level: u8_of(&f[1])?,
            name: string_of(&f[2])?,
            msg: string_of(&f[3])?,
            file: string_of(&f[4])?,
            function: string_of(&f[5])?,
            line: u32_of(&f[6])?,
            topics,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn yaw_quaternion_has_unit_norm() {
        for i in -20..=20 {
            let yaw = i as f64 * 0.3;
            let q = Quaternion::from_yaw(yaw);
            assert!((q.norm() - 1.0).abs() < 1e-9);
            let back = q.yaw();
            assert!((back - crate::kinematics::wrap_angle(yaw)).abs() < 1e-9);
        }
    }

    #[test]
    fn grid_validation() {
        let mut g = OccupancyGrid::default();
        g.info.width = 2;
        g.info.height = 2;
        g.data = vec![-1, 0, 100, 50];
        assert!(g.validate().is_ok());
        g.data.push(0);
        assert!(g.validate().is_err());
        g.data = vec![-1, 0, 101, 50];
        assert!(g.validate().is_err());
    }

    #[test]
    fn log_levels() {
        assert_eq!(LogLevel::try_from(4).unwrap(), LogLevel::Warn);
        assert!(LogLevel::try_from(3).is_err());
    }

    #[test]
    fn typed_twist_encodes_like_dynamic() {
        let t = Twist::planar(1.5, 0.0);
        let bytes = t.encode().unwrap();
        assert_eq!(&bytes[..8], &1.5f64.to_le_bytes());
        assert_eq!(Twist::decode(&bytes).unwrap(), t);
    }
}
