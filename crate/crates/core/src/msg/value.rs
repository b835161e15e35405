use std::fmt;

/// ROS `time`: seconds and nanoseconds since the epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct RosTime {
    pub secs: u32,
    pub nsecs: u32,
}

impl RosTime {
    pub const NSECS_PER_SEC: u32 = 1_000_000_000;

    /// Builds a time, carrying excess nanoseconds into seconds.
    pub fn new(secs: u32, nsecs: u32) -> Self {
        RosTime {
            secs: secs + nsecs / Self::NSECS_PER_SEC,
            nsecs: nsecs % Self::NSECS_PER_SEC,
        }
    }

    pub fn now() -> Self {
        let d = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .unwrap_or_default();
        RosTime { secs: d.as_secs() as u32, nsecs: d.subsec_nanos() }
    }

    pub fn as_secs_f64(&self) -> f64 {
        self.secs as f64 + self.nsecs as f64 * 1e-9
    }
}

impl fmt::Display for RosTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:09}", self.secs, self.nsecs)
    }
}

/// Dynamically typed message value, laid out positionally by its schema.
///
/// Arrays of one-byte integers (`int8[]`, `uint8[]`, `byte[]`) are carried as
/// [`Value::Bytes`]; every other array is a [`Value::Array`].
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Bool(bool),
    Int8(i8),
    UInt8(u8),
    Int16(i16),
    UInt16(u16),
    Int32(i32),
    UInt32(u32),
    Int64(i64),
    UInt64(u64),
    Float32(f32),
    Float64(f64),
    String(String),
    Time(RosTime),
    Bytes(Vec<u8>),
    Array(Vec<Value>),
    /// Field values in schema order.
    Message(Vec<Value>),
}

impl Value {
    pub fn kind(&self) -> &'static str {
        match self {
            Value::Bool(_) => "bool",
            Value::Int8(_) => "int8",
            Value::UInt8(_) => "uint8",
            Value::Int16(_) => "int16",
            Value::UInt16(_) => "uint16",
            Value::Int32(_) => "int32",
            Value::UInt32(_) => "uint32",
            Value::Int64(_) => "int64",
            Value::UInt64(_) => "uint64",
            Value::Float32(_) => "float32",
            Value::Float64(_) => "float64",
            Value::String(_) => "string",
            Value::Time(_) => "time",
            Value::Bytes(_) => "bytes",
            Value::Array(_) => "array",
            Value::Message(_) => "message",
        }
    }
}
