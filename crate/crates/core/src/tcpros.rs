//! TCPROS: connection-header handshake and length-prefixed message framing.

use std::io::{self, Read, Write};
use std::net::{Shutdown, TcpStream};
use std::time::Duration;

use thiserror::Error;

use crate::msg::MessageSchema;

pub const DEFAULT_MAX_FRAME: usize = 16 * 1024 * 1024;
pub const HEADER_TIMEOUT: Duration = Duration::from_secs(5);
/// Upper bound for a connection header; message definitions are a few KiB.
const MAX_HEADER: usize = 1024 * 1024;

#[derive(Debug, Error)]
pub enum TcprosError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("truncated: needed {needed} bytes, {remaining} available")]
    Truncated { needed: usize, remaining: usize },
    #[error("header field without '=': {0:?}")]
    MalformedField(String),
    #[error("frame of {len} bytes exceeds the {max} byte limit")]
    Oversize { len: usize, max: usize },
    #[error("connection closed mid-frame")]
    UnexpectedEof,
    #[error("peer reported error: {0}")]
    Remote(String),
    #[error("md5sum mismatch: expected {expected}, peer sent {got}")]
    Md5Mismatch { expected: String, got: String },
    #[error("type mismatch: expected {expected}, peer sent {got}")]
    TypeMismatch { expected: String, got: String },
    #[error("topic {0} not published")]
    TopicNotServed(String),
    #[error("header is missing `{0}`")]
    MissingField(&'static str),
    #[error("timed out waiting for the connection header")]
    Timeout,
}

/// Ordered `key=value` map exchanged at connection time.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConnectionHeader {
    fields: Vec<(String, String)>,
}

impl ConnectionHeader {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builder-style [`insert`](Self::insert).
    pub fn with(mut self, key: &str, value: impl Into<String>) -> Self {
        self.insert(key, value);
        self
    }

    /// Sets `key`, keeping its original position when already present.
    ///
    /// Panics if `key` is empty or contains '='.
    pub fn insert(&mut self, key: &str, value: impl Into<String>) {
        assert!(!key.is_empty() && !key.contains('='), "invalid header key {key:?}");
        let value = value.into();
        match self.fields.iter_mut().find(|(k, _)| k == key) {
            Some((_, v)) => *v = value,
            None => self.fields.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.fields.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    /// Total length, then per field a u32 length and `key=value`.
    pub fn encode(&self) -> Vec<u8> {
        let body_len: usize = self.fields.iter().map(|(k, v)| 4 + k.len() + 1 + v.len()).sum();
        let mut out = Vec::with_capacity(4 + body_len);
        out.extend_from_slice(&(body_len as u32).to_le_bytes());
        for (k, v) in &self.fields {
            out.extend_from_slice(&((k.len() + 1 + v.len()) as u32).to_le_bytes());
            out.extend_from_slice(k.as_bytes());
            out.push(b'=');
            out.extend_from_slice(v.as_bytes());
        }
        out
    }

    /// Inverse of [`encode`](Self::encode): expects the outer length prefix.
    pub fn decode(bytes: &[u8]) -> Result<Self, TcprosError> {
        let total = read_u32(bytes, 0)? as usize;
        let body = &bytes[4..];
        if total > body.len() {
            return Err(TcprosError::Truncated { needed: total, remaining: body.len() });
        }
        Self::decode_fields(&body[..total])
    }

    /// Parses the field list that follows the outer length.
    pub fn decode_fields(body: &[u8]) -> Result<Self, TcprosError> {
        let mut fields = Vec::new();
        let mut pos = 0;
        while pos < body.len() {
            let len = read_u32(body, pos)? as usize;
            pos += 4;
            let remaining = body.len() - pos;
            if len > remaining {
                return Err(TcprosError::Truncated { needed: len, remaining });
            }
            let field = String::from_utf8_lossy(&body[pos..pos + len]).into_owned();
            pos += len;
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| TcprosError::MalformedField(field.clone()))?;
            if k.is_empty() {
                return Err(TcprosError::MalformedField(field.clone()));
            }
            fields.push((k.to_string(), v.to_string()));
        }
        Ok(ConnectionHeader { fields })
    }
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32, TcprosError> {
    let remaining = bytes.len().saturating_sub(at);
    if remaining < 4 {
        return Err(TcprosError::Truncated { needed: 4, remaining });
    }
    Ok(u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")))
}

fn map_timeout(e: io::Error) -> TcprosError {
    match e.kind() {
        io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut => TcprosError::Timeout,
        io::ErrorKind::UnexpectedEof => TcprosError::UnexpectedEof,
        _ => TcprosError::Io(e),
    }
}

pub fn write_header(w: &mut impl Write, h: &ConnectionHeader) -> Result<(), TcprosError> {
    w.write_all(&h.encode())?;
    w.flush()?;
    Ok(())
}

pub fn read_header(r: &mut impl Read) -> Result<ConnectionHeader, TcprosError> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len).map_err(map_timeout)?;
    let len = u32::from_le_bytes(len) as usize;
    if len > MAX_HEADER {
        return Err(TcprosError::Oversize { len, max: MAX_HEADER });
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body).map_err(map_timeout)?;
    ConnectionHeader::decode_fields(&body)
}

/// Writes one frame (u32 length + body) with a single `write_all`.
pub fn write_frame(w: &mut impl Write, body: &[u8]) -> Result<(), TcprosError> {
    w.write_all(&encode_frame(body))?;
    Ok(())
}

pub fn encode_frame(body: &[u8]) -> Vec<u8> {
    let mut frame = Vec::with_capacity(4 + body.len());
    frame.extend_from_slice(&(body.len() as u32).to_le_bytes());
    frame.extend_from_slice(body);
    frame
}

/// Reads one frame. `Ok(None)` on a clean EOF at a frame boundary.
pub fn read_frame(r: &mut impl Read, max: usize) -> Result<Option<Vec<u8>>, TcprosError> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut len[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(TcprosError::UnexpectedEof),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let len = u32::from_le_bytes(len) as usize;
    if len > max {
        return Err(TcprosError::Oversize { len, max });
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => TcprosError::UnexpectedEof,
        _ => TcprosError::Io(e),
    })?;
    Ok(Some(body))
}

fn wildcard_eq(a: &str, b: &str) -> bool {
    a == "*" || b == "*" || a == b
}

/// Subscriber side: send our header, validate the publisher's reply.
///
/// On any rejection the socket is shut down before returning.
pub fn subscriber_handshake(
    stream: &mut TcpStream,
    topic: &str,
    schema: &MessageSchema,
    callerid: &str,
    timeout: Duration,
) -> Result<ConnectionHeader, TcprosError> {
    let result = (|| {
        stream.set_nodelay(true)?;
        let request = ConnectionHeader::new()
            .with("callerid", callerid)
            .with("topic", topic)
            .with("type", schema.type_name)
            .with("md5sum", schema.md5.as_str())
            .with("tcp_nodelay", "1");
        write_header(stream, &request)?;
        stream.set_read_timeout(Some(timeout))?;
        let reply = read_header(stream)?;
        stream.set_read_timeout(None)?;
        if let Some(err) = reply.get("error") {
            return Err(TcprosError::Remote(err.to_string()));
        }
        let md5 = reply.get("md5sum").ok_or(TcprosError::MissingField("md5sum"))?;
        if !wildcard_eq(md5, &schema.md5) {
            return Err(TcprosError::Md5Mismatch { expected: schema.md5.clone(), got: md5.into() });
        }
        if let Some(ty) = reply.get("type") {
            if !wildcard_eq(ty, schema.type_name) {
                return Err(TcprosError::TypeMismatch {
                    expected: schema.type_name.into(),
                    got: ty.into(),
                });
            }
        }
        Ok(reply)
    })();
    if result.is_err() {
        let _ = stream.shutdown(Shutdown::Both);
    }
    result
}

/// What a publisher serves on one topic.
#[derive(Debug, Clone, Copy)]
pub struct ServedTopic<'a> {
    pub schema: &'a MessageSchema,
    pub latched: bool,
}

/// Result of a successful publisher-side handshake.
#[derive(Debug, Clone)]
pub struct AcceptedSubscriber {
    pub topic: String,
    pub peer_callerid: String,
    pub request: ConnectionHeader,
}

/// Validates an already-read subscriber request against what we serve.
pub fn check_subscriber_request(
    request: &ConnectionHeader,
    served: Option<ServedTopic<'_>>,
) -> Result<(), TcprosError> {
    let topic = request.get("topic").ok_or(TcprosError::MissingField("topic"))?;
    let served = served.ok_or_else(|| TcprosError::TopicNotServed(topic.to_string()))?;
    let md5 = request.get("md5sum").ok_or(TcprosError::MissingField("md5sum"))?;
    if !wildcard_eq(md5, &served.schema.md5) {
        return Err(TcprosError::Md5Mismatch { expected: served.schema.md5.clone(), got: md5.into() });
    }
    if let Some(ty) = request.get("type") {
        if !wildcard_eq(ty, served.schema.type_name) {
            return Err(TcprosError::TypeMismatch {
                expected: served.schema.type_name.into(),
                got: ty.into(),
            });
        }
    }
    Ok(())
}

/// Error text sent back to a rejected subscriber.
fn rejection_text(e: &TcprosError) -> String {
    match e {
        TcprosError::TopicNotServed(t) => format!("topic {t} not published"),
        other => other.to_string(),
    }
}

/// Publisher side: read the subscriber's header (within [`HEADER_TIMEOUT`]),
/// resolve the topic, and either reply with our header or with an `error`
/// field followed by a close.
pub fn publisher_handshake<'a, F>(
    stream: &mut TcpStream,
    callerid: &str,
    resolve: F,
) -> Result<AcceptedSubscriber, TcprosError>
where
    F: FnOnce(&str) -> Option<ServedTopic<'a>>,
{
    stream.set_read_timeout(Some(HEADER_TIMEOUT))?;
    let request = match read_header(stream) {
        Ok(r) => r,
        Err(e) => {
            let _ = stream.shutdown(Shutdown::Both);
            return Err(e);
        }
    };
    stream.set_read_timeout(None)?;
    let served = request.get("topic").and_then(resolve);
    if let Err(e) = check_subscriber_request(&request, served) {
        let reply = ConnectionHeader::new().with("error", rejection_text(&e));
        let _ = write_header(stream, &reply);
        let _ = stream.shutdown(Shutdown::Both);
        return Err(e);
    }
    let served = served.expect("checked above");
    if request.get("tcp_nodelay") == Some("1") {
        stream.set_nodelay(true)?;
    }
    let reply = ConnectionHeader::new()
        .with("callerid", callerid)
        .with("type", served.schema.type_name)
        .with("md5sum", served.schema.md5.as_str())
        .with("message_definition", served.schema.definition_text.as_str())
        .with("latching", if served.latched { "1" } else { "0" });
    write_header(stream, &reply)?;
    Ok(AcceptedSubscriber {
        topic: request.get("topic").unwrap_or_default().to_string(),
        peer_callerid: request.get("callerid").unwrap_or_default().to_string(),
        request,
    })
}
