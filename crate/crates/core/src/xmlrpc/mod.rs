//! Minimal XML-RPC: the value kinds the ROS master and slave APIs use
//! (int, boolean, string, double, array), method calls, responses and
//! faults, plus a blocking HTTP client and server.

mod client;
mod codec;
mod server;

pub use client::XmlRpcClient;
pub use codec::{
    decode_call, decode_response, encode_call, encode_fault, encode_response, MethodCall,
};
pub use server::{RpcHandler, RpcServer};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i32),
    Bool(bool),
    String(String),
    Double(f64),
    Array(Vec<Value>),
}

impl Value {
    pub fn as_int(&self) -> Option<i32> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::String(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_array(&self) -> Option<&[Value]> {
        match self {
            Value::Array(a) => Some(a),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::String(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::String(s)
    }
}

impl From<i32> for Value {
    fn from(i: i32) -> Self {
        Value::Int(i)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl<T: Into<Value>> From<Vec<T>> for Value {
    fn from(v: Vec<T>) -> Self {
        Value::Array(v.into_iter().map(Into::into).collect())
    }
}

/// XML-RPC fault: `faultCode` and `faultString`.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("XML-RPC fault {code}: {message}")]
pub struct Fault {
    pub code: i32,
    pub message: String,
}

impl Fault {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Fault { code, message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum XmlRpcError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP status {0}")]
    Http(u16),
    #[error("malformed XML-RPC document: {0}")]
    Parse(String),
    #[error(transparent)]
    Fault(#[from] Fault),
}
