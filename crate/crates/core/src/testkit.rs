//! Random message values for property tests (feature `testkit`).

use rand::distributions::{Alphanumeric, DistString};
use rand::Rng;

use crate::msg::{schema, Arity, FieldSpec, FieldType, MsgSpec, Primitive, RosTime, Value};

fn random_primitive(p: Primitive, rng: &mut impl Rng) -> Value {
    match p {
        Primitive::Bool => Value::Bool(rng.gen()),
        Primitive::Byte | Primitive::UInt8 => Value::UInt8(rng.gen()),
        Primitive::Int8 => Value::Int8(rng.gen()),
        Primitive::Int16 => Value::Int16(rng.gen()),
        Primitive::UInt16 => Value::UInt16(rng.gen()),
        Primitive::Int32 => Value::Int32(rng.gen()),
        Primitive::UInt32 => Value::UInt32(rng.gen()),
        Primitive::Int64 => Value::Int64(rng.gen()),
        Primitive::UInt64 => Value::UInt64(rng.gen()),
        Primitive::Float32 => Value::Float32(rng.gen_range(-1e6f32..1e6)),
        Primitive::Float64 => Value::Float64(rng.gen_range(-1e9..1e9)),
        Primitive::String => {
            let n = rng.gen_range(0..24);
            Value::String(Alphanumeric.sample_string(rng, n))
        }
        Primitive::Time => Value::Time(RosTime { secs: rng.gen(), nsecs: rng.gen_range(0..RosTime::NSECS_PER_SEC) }),
    }
}

fn random_element(ty: FieldType, rng: &mut impl Rng) -> Value {
    match ty {
        FieldType::Primitive(p) => random_primitive(p, rng),
        FieldType::Message(name) => random_message(schema(name).expect("closed type set").spec, rng),
    }
}

fn random_field(f: &FieldSpec, rng: &mut impl Rng) -> Value {
    let n = match f.arity {
        Arity::Scalar => return random_element(f.ty, rng),
        Arity::Fixed(n) => n,
        Arity::Variable => rng.gen_range(0..32),
    };
    match f.ty {
        FieldType::Primitive(p) if p.is_octet() => Value::Bytes((0..n).map(|_| rng.gen()).collect()),
        ty => Value::Array((0..n).map(|_| random_element(ty, rng)).collect()),
    }
}

/// A finite random value conforming to `spec`.
pub fn random_message(spec: &MsgSpec, rng: &mut impl Rng) -> Value {
    Value::Message(spec.fields.iter().map(|f| random_field(f, rng)).collect())
}
