//! An in-process GraphQL target server for the wallet fixture, with
//! individually toggleable seeded vulnerabilities. Single-threaded request
//! handling over plain HTTP on localhost.

mod exec;
pub mod schema;

pub use exec::{handle_request, MockResponse, MockState, VulnToggles, DOS_SLEEP};
pub use schema::{fixture_schema, fixture_schema_document};

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

/// A running mock target. Dropping the handle stops the server.
pub struct MockHandle {
    port: u16,
    state: Arc<Mutex<MockState>>,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl MockHandle {
    pub fn url(&self) -> String {
        format!("http://127.0.0.1:{}/graphql", self.port)
    }

    pub fn port(&self) -> u16 {
        self.port
    }

    /// Clears the in-memory store and resets ID counters.
    pub fn reset_state(&self) {
        self.state.lock().unwrap().reset();
    }

    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for MockHandle {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// Starts the mock target on the given port (0 picks a free one).
pub fn serve(toggles: VulnToggles, port: u16) -> std::io::Result<MockHandle> {
    let listener = TcpListener::bind(("127.0.0.1", port))?;
    let port = listener.local_addr()?.port();
    listener.set_nonblocking(true)?;
    let state = Arc::new(Mutex::new(MockState::new()));
    let stop = Arc::new(AtomicBool::new(false));

    let thread_state = Arc::clone(&state);
    let thread_stop = Arc::clone(&stop);
    let thread = std::thread::spawn(move || {
        while !thread_stop.load(Ordering::SeqCst) {
            match listener.accept() {
                Ok((stream, _)) => {
                    let mut st = thread_state.lock().unwrap();
                    if let Err(e) = serve_connection(stream, &mut st, &toggles) {
                        log::debug!("mock connection error: {e}");
                    }
                }
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                    std::thread::sleep(Duration::from_millis(5));
                }
                Err(e) => {
                    log::debug!("mock accept error: {e}");
                    break;
                }
            }
        }
    });

    Ok(MockHandle { port, state, stop, thread: Some(thread) })
}

fn serve_connection(
    mut stream: TcpStream,
    state: &mut MockState,
    toggles: &VulnToggles,
) -> std::io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_read_timeout(Some(Duration::from_secs(30)))?;
    let mut reader = BufReader::new(stream.try_clone()?);

    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line)?;
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some(v) = line
            .to_ascii_lowercase()
            .strip_prefix("content-length:")
            .map(str::trim)
        {
            content_length = v.parse().unwrap_or(0);
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;
    let body = String::from_utf8_lossy(&body).to_string();

    let response = if request_line.starts_with("POST") {
        handle_request(state, toggles, &body)
    } else {
        MockResponse {
            status: 405,
            body: serde_json::json!({"error": "only POST is supported"}),
            delay: Duration::ZERO,
        }
    };

    if !response.delay.is_zero() {
        std::thread::sleep(response.delay);
    }

    let payload = response.body.to_string();
    let reason = match response.status {
        200 => "OK",
        400 => "Bad Request",
        403 => "Forbidden",
        405 => "Method Not Allowed",
        _ => "Error",
    };
    let head = format!(
        "HTTP/1.1 {} {}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        response.status,
        reason,
        payload.len()
    );
    stream.write_all(head.as_bytes())?;
    stream.write_all(payload.as_bytes())?;
    stream.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn post(url: &str, body: &serde_json::Value) -> (u16, serde_json::Value) {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(10))
            .build();
        match agent.post(url).send_json(body.clone()) {
            Ok(resp) => {
                let status = resp.status();
                (status, resp.into_json().unwrap())
            }
            Err(ureq::Error::Status(status, resp)) => (status, resp.into_json().unwrap()),
            Err(e) => panic!("transport failure: {e}"),
        }
    }

    #[test]
    fn http_round_trip() {
        let h = serve(VulnToggles::default(), 0).unwrap();
        let (status, body) = post(
            &h.url(),
            &json!({"query": "mutation c($a: String!, $s: String!) { createCurrency(abbreviation: $a, symbol: $s) { id } }",
                    "variables": {"a": "USD", "s": "$"}}),
        );
        assert_eq!(status, 200);
        assert_eq!(body.pointer("/data/createCurrency/id"), Some(&json!("c1")));
        h.stop();
    }

    #[test]
    fn reset_over_http_handle() {
        let h = serve(VulnToggles::default(), 0).unwrap();
        let q = json!({"query": "mutation c($a: String!, $s: String!) { createCurrency(abbreviation: $a, symbol: $s) { id } }",
                       "variables": {"a": "USD", "s": "$"}});
        post(&h.url(), &q);
        h.reset_state();
        let (_, body) = post(&h.url(), &q);
        assert_eq!(body.pointer("/data/createCurrency/id"), Some(&json!("c1")));
    }

    #[test]
    fn two_instances_have_disjoint_state() {
        let a = serve(VulnToggles::default(), 0).unwrap();
        let b = serve(VulnToggles::default(), 0).unwrap();
        assert_ne!(a.port(), b.port());
        let q = json!({"query": "mutation c($a: String!, $s: String!) { createCurrency(abbreviation: $a, symbol: $s) { id } }",
                       "variables": {"a": "USD", "s": "$"}});
        post(&a.url(), &q);
        let (_, body) = post(&b.url(), &q);
        // The second instance still starts at c1: no shared counters.
        assert_eq!(body.pointer("/data/createCurrency/id"), Some(&json!("c1")));
    }

    #[test]
    fn port_in_use_is_an_error() {
        let a = serve(VulnToggles::default(), 0).unwrap();
        assert!(serve(VulnToggles::default(), a.port()).is_err());
    }
}
