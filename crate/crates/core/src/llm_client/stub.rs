//! Record/replay stand-in for a chat-completions endpoint.
//!
//! The server replays canned responses in order and records every request
//! body it receives. Once the script is exhausted it answers HTTP 500.
//! Fixtures are JSON arrays of [`StubResponse`].

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StubResponse {
    #[serde(default = "ok_status")]
    pub status: u16,
    pub body: Value,
    #[serde(default)]
    pub delay_ms: u64,
}

fn ok_status() -> u16 {
    200
}

impl StubResponse {
    /// A 200 reply with the given content and usage counts.
    pub fn completion(content: &str, prompt_tokens: u64, completion_tokens: u64) -> Self {
        Self {
            status: 200,
            body: completion_body(content, Some((prompt_tokens, completion_tokens))),
            delay_ms: 0,
        }
    }

    pub fn delayed(mut self, delay_ms: u64) -> Self {
        self.delay_ms = delay_ms;
        self
    }
}

/// Response JSON in the chat-completions shape; `usage` is omitted when `None`.
pub fn completion_body(content: &str, usage: Option<(u64, u64)>) -> Value {
    let mut body = json!({
        "id": "stub",
        "object": "chat.completion",
        "choices": [{
            "index": 0,
            "message": {"role": "assistant", "content": content},
            "finish_reason": "stop"
        }]
    });
    if let Some((p, c)) = usage {
        body["usage"] = json!({
            "prompt_tokens": p,
            "completion_tokens": c,
            "total_tokens": p + c
        });
    }
    body
}

pub struct StubServer {
    addr: SocketAddr,
    requests: Arc<Mutex<Vec<Value>>>,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl StubServer {
    pub fn start(responses: Vec<StubResponse>) -> std::io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let requests = Arc::new(Mutex::new(Vec::new()));
        let stop = Arc::new(AtomicBool::new(false));
        let script = Arc::new(Mutex::new(responses.into_iter()));

        let handle = {
            let requests = Arc::clone(&requests);
            let stop = Arc::clone(&stop);
            thread::spawn(move || {
                for stream in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = stream else { continue };
                    let next = script.lock().unwrap().next();
                    let requests = Arc::clone(&requests);
                    thread::spawn(move || {
                        let _ = serve(stream, next, &requests);
                    });
                }
            })
        };
        Ok(Self {
            addr,
            requests,
            stop,
            handle: Some(handle),
        })
    }

    /// Loads a JSON array of responses.
    pub fn from_fixture(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let responses: Vec<StubResponse> =
            serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        Self::start(responses)
    }

    /// Base URL to put in a model config, e.g. `http://127.0.0.1:4000/v1`.
    pub fn base_url(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    /// Request bodies received so far, in arrival order.
    pub fn requests(&self) -> Vec<Value> {
        self.requests.lock().unwrap().clone()
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn serve(stream: TcpStream, response: Option<StubResponse>, requests: &Mutex<Vec<Value>>) -> std::io::Result<()> {
    stream.set_read_timeout(Some(Duration::from_secs(10)))?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut content_length = 0usize;
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Ok(());
        }
        let trimmed = line.trim_end();
        if trimmed.is_empty() {
            break;
        }
        if let Some((k, v)) = trimmed.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                content_length = v.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;
    let parsed = serde_json::from_slice(&body).unwrap_or(Value::Null);
    requests.lock().unwrap().push(parsed);

    let response = response.unwrap_or(StubResponse {
        status: 500,
        body: json!({"error": "stub script exhausted"}),
        delay_ms: 0,
    });
    if response.delay_ms > 0 {
        thread::sleep(Duration::from_millis(response.delay_ms));
    }
    let payload = response.body.to_string();
    let mut stream = stream;
    write!(
        stream,
        "HTTP/1.1 {} STUB\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
        response.status,
        payload.len(),
        payload
    )?;
    stream.flush()
}
