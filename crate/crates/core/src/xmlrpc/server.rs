use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use tiny_http::{Header, Response, Server};

use super::{codec, Fault, Value};

/// Request handler: method name and params in, response value or fault out.
pub type RpcHandler = Arc<dyn Fn(&str, &[Value]) -> Result<Value, Fault> + Send + Sync>;

/// HTTP server answering XML-RPC POSTs. Each request runs on its own thread.
pub struct RpcServer {
    addr: SocketAddr,
    server: Arc<Server>,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl RpcServer {
    pub fn bind(addr: SocketAddr, handler: RpcHandler) -> std::io::Result<RpcServer> {
        let server = Server::http(addr).map_err(std::io::Error::other)?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| std::io::Error::other("server is not bound to an IP address"))?;
        let server = Arc::new(server);
        let stop = Arc::new(AtomicBool::new(false));
        let thread = {
            let server = server.clone();
            let stop = stop.clone();
            std::thread::Builder::new()
                .name(format!("xmlrpc-{}", addr.port()))
                .spawn(move || accept_loop(&server, &stop, handler))?
        };
        Ok(RpcServer { addr, server, stop, thread: Some(thread) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        self.server.unblock();
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for RpcServer {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn accept_loop(server: &Server, stop: &AtomicBool, handler: RpcHandler) {
    while !stop.load(Ordering::SeqCst) {
        let request = match server.recv_timeout(Duration::from_millis(200)) {
            Ok(Some(r)) => r,
            Ok(None) => continue,
            Err(e) => {
                tracing::warn!("xmlrpc accept failed: {e}");
                continue;
            }
        };
        let handler = handler.clone();
        let spawned = std::thread::Builder::new()
            .name("xmlrpc-request".into())
            .spawn(move || respond(request, &handler));
        if let Err(e) = spawned {
            tracing::error!("cannot spawn request thread: {e}");
        }
    }
}

fn respond(mut request: tiny_http::Request, handler: &RpcHandler) {
    let mut body = String::new();
    let reply = match request.as_reader().read_to_string(&mut body) {
        Err(e) => codec::encode_fault(&Fault::new(-32700, format!("unreadable body: {e}"))),
        Ok(_) => match codec::decode_call(&body) {
            Err(e) => codec::encode_fault(&Fault::new(-32700, e.to_string())),
            Ok(call) => match handler(&call.method, &call.params) {
                Ok(v) => codec::encode_response(&v),
                Err(f) => codec::encode_fault(&f),
            },
        },
    };
    let header = Header::from_bytes("Content-Type", "text/xml").expect("static header");
    if let Err(e) = request.respond(Response::from_string(reply).with_header(header)) {
        tracing::debug!("xmlrpc reply failed: {e}");
    }
}
