use std::time::Duration;

use super::{codec, Value, XmlRpcError};

/// Blocking XML-RPC client bound to one endpoint URI.
#[derive(Clone)]
pub struct XmlRpcClient {
    uri: String,
    agent: ureq::Agent,
}

impl std::fmt::Debug for XmlRpcClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("XmlRpcClient").field("uri", &self.uri).finish()
    }
}

impl XmlRpcClient {
    pub fn new(uri: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout_connect(timeout)
            .timeout(timeout)
            .max_idle_connections(0)
            .build();
        XmlRpcClient { uri: uri.into(), agent }
    }

    pub fn uri(&self) -> &str {
        &self.uri
    }

    pub fn call(&self, method: &str, params: &[Value]) -> Result<Value, XmlRpcError> {
        let body = codec::encode_call(method, params);
        let response = self
            .agent
            .post(&self.uri)
            .set("Content-Type", "text/xml")
            .send_string(&body)
            .map_err(|e| match e {
                ureq::Error::Status(code, _) => XmlRpcError::Http(code),
                ureq::Error::Transport(t) => XmlRpcError::Transport(t.to_string()),
            })?;
        let text = response
            .into_string()
            .map_err(|e| XmlRpcError::Transport(e.to_string()))?;
        codec::decode_response(&text)
    }
}
