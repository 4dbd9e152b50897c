//! A tiny HTTP/1.1 stub server for tests.
//!
//! Binds an ephemeral localhost port, serves canned routes and records every
//! request line so tests can assert on exactly which requests were made
//! (and, just as importantly, which were not).

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

/// A canned response for one route.
#[derive(Clone)]
pub enum Route {
    /// Respond with the given status and body.
    Body { status: u16, body: Vec<u8> },
    /// Respond with a redirect to the given location.
    Redirect { status: u16, location: String },
    /// Sleep before answering, to trip client timeouts.
    Slow { delay: Duration },
}

struct Shared {
    routes: Mutex<HashMap<String, Route>>,
    log: Mutex<Vec<String>>,
    stop: AtomicBool,
}

/// Stub server handle. Dropping it shuts the listener thread down.
pub struct StubServer {
    addr: SocketAddr,
    shared: Arc<Shared>,
    handle: Option<JoinHandle<()>>,
}

impl StubServer {
    /// Start a stub on an ephemeral port with an empty routing table.
    pub fn start() -> StubServer {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind stub server");
        let addr = listener.local_addr().expect("stub local addr");
        listener
            .set_nonblocking(true)
            .expect("stub set_nonblocking");
        let shared = Arc::new(Shared {
            routes: Mutex::new(HashMap::new()),
            log: Mutex::new(Vec::new()),
            stop: AtomicBool::new(false),
        });
        let shared2 = Arc::clone(&shared);
        let handle = std::thread::spawn(move || serve(listener, shared2));
        StubServer {
            addr,
            shared,
            handle: Some(handle),
        }
    }

    /// Register a route for an exact request path (e.g. `/page`).
    pub fn route(&self, path: &str, route: Route) {
        self.shared
            .routes
            .lock()
            .unwrap()
            .insert(path.to_string(), route);
    }

    /// Convenience: a 200 response with the given body.
    pub fn route_ok(&self, path: &str, body: &[u8]) {
        self.route(
            path,
            Route::Body {
                status: 200,
                body: body.to_vec(),
            },
        );
    }

    /// Base URL of the stub, e.g. `http://127.0.0.1:37841`.
    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Full URL for a path on the stub.
    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }

    /// Request lines seen so far, in arrival order (e.g. `GET /page`).
    pub fn request_log(&self) -> Vec<String> {
        self.shared.log.lock().unwrap().clone()
    }

    /// Number of requests served so far.
    pub fn hits(&self) -> usize {
        self.shared.log.lock().unwrap().len()
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.shared.stop.store(true, Ordering::SeqCst);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn serve(listener: TcpListener, shared: Arc<Shared>) {
    while !shared.stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, _)) => {
                let shared = Arc::clone(&shared);
                // one thread per connection; tests are low-volume
                std::thread::spawn(move || handle_conn(stream, shared));
            }
            Err(ref e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                std::thread::sleep(Duration::from_millis(5));
            }
            Err(_) => break,
        }
    }
}

fn handle_conn(mut stream: TcpStream, shared: Arc<Shared>) {
    let _ = stream.set_read_timeout(Some(Duration::from_secs(10)));
    let mut reader = BufReader::new(match stream.try_clone() {
        Ok(s) => s,
        Err(_) => return,
    });
    loop {
        let mut line = String::new();
        match reader.read_line(&mut line) {
            Ok(0) | Err(_) => return,
            Ok(_) => {}
        }
        let mut parts = line.split_whitespace();
        let method = parts.next().unwrap_or("").to_string();
        let path = parts.next().unwrap_or("/").to_string();
        // drain headers
        loop {
            let mut h = String::new();
            match reader.read_line(&mut h) {
                Ok(0) | Err(_) => return,
                Ok(_) => {}
            }
            if h == "\r\n" || h == "\n" || h.is_empty() {
                break;
            }
        }
        shared
            .log
            .lock()
            .unwrap()
            .push(format!("{method} {path}"));

        let route = shared.routes.lock().unwrap().get(&path).cloned();
        let keep_alive = match route {
            Some(Route::Body { status, body }) => write_response(&mut stream, status, &body),
            Some(Route::Redirect { status, location }) => {
                let head = format!(
                    "HTTP/1.1 {status} Redirect\r\nlocation: {location}\r\ncontent-length: 0\r\nconnection: keep-alive\r\n\r\n"
                );
                stream.write_all(head.as_bytes()).is_ok()
            }
            Some(Route::Slow { delay }) => {
                std::thread::sleep(delay);
                write_response(&mut stream, 200, b"slow")
            }
            None => write_response(&mut stream, 404, b"not found"),
        };
        if !keep_alive {
            return;
        }
    }
}

fn write_response(stream: &mut TcpStream, status: u16, body: &[u8]) -> bool {
    let head = format!(
        "HTTP/1.1 {status} Stub\r\ncontent-length: {}\r\nconnection: keep-alive\r\n\r\n",
        body.len()
    );
    stream.write_all(head.as_bytes()).is_ok() && stream.write_all(body).is_ok()
}
