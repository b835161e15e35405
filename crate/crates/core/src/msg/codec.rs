//! ROS1 binary serialization: little-endian primitives, u32 length prefixes
//! for strings and variable arrays, fixed arrays unprefixed, nested messages
//! inlined.

use std::fmt;

use super::schema::{Arity, FieldType, MessageSchema, MsgSpec, Primitive};
use super::value::{RosTime, Value};
use super::{schema, MsgError};

#[derive(Clone, Copy)]
struct Path<'a> {
    parent: Option<&'a Path<'a>>,
    name: &'a str,
}

impl<'a> Path<'a> {
    const ROOT: Path<'static> = Path { parent: None, name: "" };

    fn child(&'a self, name: &'a str) -> Path<'a> {
        Path { parent: Some(self), name }
    }
}

impl fmt::Display for Path<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.parent {
            Some(p) if !p.name.is_empty() || p.parent.is_some() => {
                write!(f, "{p}")?;
                if self.name.starts_with('[') {
                    write!(f, "{}", self.name)
                } else {
                    write!(f, ".{}", self.name)
                }
            }
            _ => write!(f, "{}", self.name),
        }
    }
}

fn mismatch(path: &Path<'_>, expected: impl Into<String>, found: &Value) -> MsgError {
    let path = path.to_string();
    MsgError::SchemaMismatch {
        path: if path.is_empty() { "<root>".to_string() } else { path },
        expected: expected.into(),
        found: found.kind().to_string(),
    }
}

/// Serializes `value` as the body of a `schema` message (no outer frame length).
pub fn serialize_message(value: &Value, schema: &MessageSchema) -> Result<Vec<u8>, MsgError> {
    let mut out = Vec::with_capacity(64);
    write_message(&mut out, value, schema.spec, &Path::ROOT)?;
    Ok(out)
}

fn write_message(
    out: &mut Vec<u8>,
    value: &Value,
    spec: &MsgSpec,
    path: &Path<'_>,
) -> Result<(), MsgError> {
    let Value::Message(fields) = value else {
        return Err(mismatch(path, spec.type_name, value));
    };
    if fields.len() != spec.fields.len() {
        return Err(MsgError::SchemaMismatch {
            path: if path.name.is_empty() { "<root>".into() } else { path.to_string() },
            expected: format!("{} fields of {}", spec.fields.len(), spec.type_name),
            found: format!("{} fields", fields.len()),
        });
    }
    for (f, v) in spec.fields.iter().zip(fields) {
        let p = path.child(f.name);
        match f.arity {
            Arity::Scalar => write_single(out, v, f.ty, &p)?,
            Arity::Fixed(n) => write_array(out, v, f.ty, Some(n), &p)?,
            Arity::Variable => write_array(out, v, f.ty, None, &p)?,
        }
    }
    Ok(())
}

fn write_len(out: &mut Vec<u8>, len: usize, path: &Path<'_>) -> Result<(), MsgError> {
    let len = u32::try_from(len).map_err(|_| MsgError::SchemaMismatch {
        path: path.to_string(),
        expected: "length fitting in u32".into(),
        found: len.to_string(),
    })?;
    out.extend_from_slice(&len.to_le_bytes());
    Ok(())
}

fn write_array(
    out: &mut Vec<u8>,
    value: &Value,
    ty: FieldType,
    fixed: Option<usize>,
    path: &Path<'_>,
) -> Result<(), MsgError> {
    let check_len = |n: usize| -> Result<(), MsgError> {
        match fixed {
            Some(expected) if expected != n => Err(MsgError::SchemaMismatch {
                path: path.to_string(),
                expected: format!("array of {expected}"),
                found: format!("array of {n}"),
            }),
            _ => Ok(()),
        }
    };
    match (ty, value) {
        (FieldType::Primitive(p), Value::Bytes(bytes)) if p.is_octet() => {
            check_len(bytes.len())?;
            if fixed.is_none() {
                write_len(out, bytes.len(), path)?;
            }
            out.extend_from_slice(bytes);
            Ok(())
        }
        (FieldType::Primitive(p), v) if p.is_octet() => Err(mismatch(path, "bytes", v)),
        (_, Value::Array(items)) => {
            check_len(items.len())?;
            if fixed.is_none() {
                write_len(out, items.len(), path)?;
            }
            for (i, item) in items.iter().enumerate() {
                let idx = format!("[{i}]");
                write_single(out, item, ty, &path.child(&idx))?;
            }
            Ok(())
        }
        (_, v) => Err(mismatch(path, "array", v)),
    }
}

fn write_single(
    out: &mut Vec<u8>,
    value: &Value,
    ty: FieldType,
    path: &Path<'_>,
) -> Result<(), MsgError> {
    match ty {
        FieldType::Message(name) => write_message(out, value, schema::spec(name)?, path),
        FieldType::Primitive(p) => {
            match (p, value) {
                (Primitive::Bool, Value::Bool(b)) => out.push(u8::from(*b)),
                (Primitive::Byte | Primitive::UInt8, Value::UInt8(v)) => out.push(*v),
                (Primitive::Int8, Value::Int8(v)) => out.extend_from_slice(&v.to_le_bytes()),
                (Primitive::Int16, Value::Int16(v)) => out.extend_from_slice(&v.to_le_bytes()),
                (Primitive::UInt16, Value::UInt16(v)) => out.extend_from_slice(&v.to_le_bytes()),
                (Primitive::Int32, Value::Int32(v)) => out.extend_from_slice(&v.to_le_bytes()),
                (Primitive::UInt32, Value::UInt32(v)) => out.extend_from_slice(&v.to_le_bytes()),
                (Primitive::Int64, Value::Int64(v)) => out.extend_from_slice(&v.to_le_bytes()),
                (Primitive::UInt64, Value::UInt64(v)) => out.extend_from_slice(&v.to_le_bytes()),
                (Primitive::Float32, Value::Float32(v)) => out.extend_from_slice(&v.to_le_bytes()),
                (Primitive::Float64, Value::Float64(v)) => out.extend_from_slice(&v.to_le_bytes()),
                (Primitive::String, Value::String(s)) => {
                    write_len(out, s.len(), path)?;
                    out.extend_from_slice(s.as_bytes());
                }
                (Primitive::Time, Value::Time(t)) => {
                    out.extend_from_slice(&t.secs.to_le_bytes());
                    out.extend_from_slice(&t.nsecs.to_le_bytes());
                }
                (p, v) => return Err(mismatch(path, p.token(), v)),
            }
            Ok(())
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    non_finite: bool,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], MsgError> {
        let remaining = self.buf.len() - self.pos;
        if n > remaining {
            return Err(MsgError::Truncated { needed: n, remaining });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], MsgError> {
        let mut a = [0u8; N];
        a.copy_from_slice(self.take(N)?);
        Ok(a)
    }

    fn len_prefix(&mut self, elem_min: usize) -> Result<usize, MsgError> {
        let len = u32::from_le_bytes(self.array()?) as usize;
        let remaining = self.buf.len() - self.pos;
        if len.saturating_mul(elem_min) > remaining {
            return Err(MsgError::LengthOverrun { declared: len, remaining });
        }
        Ok(len)
    }
}

/// Parses a complete message body. Trailing bytes are an error.
///
/// Non-finite floats are accepted (and logged).
pub fn deserialize_message(bytes: &[u8], schema: &MessageSchema) -> Result<Value, MsgError> {
    let mut r = Reader { buf: bytes, pos: 0, non_finite: false };
    let v = read_message(&mut r, schema.spec)?;
    if r.pos != bytes.len() {
        return Err(MsgError::TrailingBytes(bytes.len() - r.pos));
    }
    if r.non_finite {
        tracing::warn!(type_name = schema.type_name, "received message with non-finite floats");
    }
    Ok(v)
}

fn read_message(r: &mut Reader<'_>, spec: &MsgSpec) -> Result<Value, MsgError> {
    let mut fields = Vec::with_capacity(spec.fields.len());
    for f in spec.fields {
        let v = match f.arity {
            Arity::Scalar => read_single(r, f.ty)?,
            Arity::Fixed(n) => read_array(r, f.ty, n)?,
            Arity::Variable => {
                let min = min_wire_size(f.ty);
                let n = r.len_prefix(min)?;
                read_array(r, f.ty, n)?
            }
        };
        fields.push(v);
    }
    Ok(Value::Message(fields))
}

/// Lower bound on the encoded size of one element, used to reject absurd
/// array lengths before allocating.
fn min_wire_size(ty: FieldType) -> usize {
    match ty {
        FieldType::Primitive(p) => match p {
            Primitive::Bool | Primitive::Byte | Primitive::Int8 | Primitive::UInt8 => 1,
            Primitive::Int16 | Primitive::UInt16 => 2,
            Primitive::Int32 | Primitive::UInt32 | Primitive::Float32 | Primitive::String => 4,
            Primitive::Int64 | Primitive::UInt64 | Primitive::Float64 | Primitive::Time => 8,
        },
        // Every supported message has at least one field of four bytes or more.
        FieldType::Message(_) => 1,
    }
}

fn read_array(r: &mut Reader<'_>, ty: FieldType, n: usize) -> Result<Value, MsgError> {
    if let FieldType::Primitive(p) = ty {
        if p.is_octet() {
            return Ok(Value::Bytes(r.take(n)?.to_vec()));
        }
    }
    let mut items = Vec::with_capacity(n.min(r.buf.len() - r.pos));
    for _ in 0..n {
        items.push(read_single(r, ty)?);
    }
    Ok(Value::Array(items))
}

fn read_single(r: &mut Reader<'_>, ty: FieldType) -> Result<Value, MsgError> {
    let p = match ty {
        FieldType::Message(name) => return read_message(r, schema::spec(name)?),
        FieldType::Primitive(p) => p,
    };
    Ok(match p {
        Primitive::Bool => Value::Bool(r.take(1)?[0] != 0),
        Primitive::Byte | Primitive::UInt8 => Value::UInt8(r.take(1)?[0]),
        Primitive::Int8 => Value::Int8(i8::from_le_bytes(r.array()?)),
        Primitive::Int16 => Value::Int16(i16::from_le_bytes(r.array()?)),
        Primitive::UInt16 => Value::UInt16(u16::from_le_bytes(r.array()?)),
        Primitive::Int32 => Value::Int32(i32::from_le_bytes(r.array()?)),
        Primitive::UInt32 => Value::UInt32(u32::from_le_bytes(r.array()?)),
        Primitive::Int64 => Value::Int64(i64::from_le_bytes(r.array()?)),
        Primitive::UInt64 => Value::UInt64(u64::from_le_bytes(r.array()?)),
        Primitive::Float32 => {
            let v = f32::from_le_bytes(r.array()?);
            r.non_finite |= !v.is_finite();
            Value::Float32(v)
        }
        Primitive::Float64 => {
            let v = f64::from_le_bytes(r.array()?);
            r.non_finite |= !v.is_finite();
            Value::Float64(v)
        }
        Primitive::String => {
            let n = r.len_prefix(1)?;
            let bytes = r.take(n)?;
            Value::String(String::from_utf8(bytes.to_vec()).map_err(|_| MsgError::InvalidUtf8)?)
        }
        Primitive::Time => {
            let secs = u32::from_le_bytes(r.array()?);
            let nsecs = u32::from_le_bytes(r.array()?);
            Value::Time(RosTime { secs, nsecs })
        }
    })
}

/// Rejects NaN and infinities anywhere in `value`. Applied before publishing.
pub fn check_finite(value: &Value) -> Result<(), MsgError> {
    fn walk(v: &Value, path: &mut Vec<usize>) -> Result<(), MsgError> {
        let bad = match v {
            Value::Float32(f) => !f.is_finite(),
            Value::Float64(f) => !f.is_finite(),
            Value::Array(items) | Value::Message(items) => {
                for (i, item) in items.iter().enumerate() {
                    path.push(i);
                    walk(item, path)?;
                    path.pop();
                }
                false
            }
            _ => false,
        };
        if bad {
            let p: Vec<String> = path.iter().map(|i| i.to_string()).collect();
            return Err(MsgError::NonFinite(p.join(".")));
        }
        Ok(())
    }
    walk(value, &mut Vec::new())
}
