//! Minimal HTTP stub replaying canned chat-completion bodies. Test support
//! for the remote scorer path; not wired into the navigation loop.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

#[derive(Debug, Clone)]
pub enum StubBehavior {
    /// Reply with a well-formed completion whose content is `body`.
    ReplayContent(String),
    /// Reply 200 with unparseable JSON.
    Garbage,
    /// Reply with the given HTTP status and an empty body.
    Status(u16),
}

pub struct StubVlmServer {
    addr: std::net::SocketAddr,
    requests: Arc<AtomicUsize>,
    shutdown: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl StubVlmServer {
    pub fn spawn(behavior: StubBehavior) -> std::io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        listener.set_nonblocking(true)?;
        let requests = Arc::new(AtomicUsize::new(0));
        let shutdown = Arc::new(AtomicBool::new(false));
        let reqs = requests.clone();
        let stop = shutdown.clone();
        let handle = std::thread::spawn(move || {
            while !stop.load(Ordering::SeqCst) {
                match listener.accept() {
                    Ok((stream, _)) => {
                        reqs.fetch_add(1, Ordering::SeqCst);
                        let _ = handle_connection(stream, &behavior);
                    }
                    Err(ref e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                        std::thread::sleep(std::time::Duration::from_millis(2));
                    }
                    Err(_) => break,
                }
            }
        });
        Ok(Self {
            addr,
            requests,
            shutdown,
            handle: Some(handle),
        })
    }

    pub fn endpoint(&self) -> String {
        format!("http://{}/v1/chat/completions", self.addr)
    }

    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

impl Drop for StubVlmServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn handle_connection(mut stream: TcpStream, behavior: &StubBehavior) -> std::io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_read_timeout(Some(std::time::Duration::from_secs(5)))?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            return Ok(());
        }
        let trimmed = line.trim();
        if trimmed.is_empty() {
            break;
        }
        if let Some(v) = trimmed.to_ascii_lowercase().strip_prefix("content-length:") {
            content_length = v.trim().parse().unwrap_or(0);
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;

    let (status, payload) = match behavior {
        StubBehavior::ReplayContent(content) => {
            let completion = serde_json::json!({
                "id": "stub",
                "object": "chat.completion",
                "choices": [{
                    "index": 0,
                    "message": { "role": "assistant", "content": content },
                    "finish_reason": "stop",
                }],
            });
            ("200 OK", completion.to_string())
        }
        StubBehavior::Garbage => ("200 OK", "this is not json {{{".to_string()),
        StubBehavior::Status(code) => {
            let line: &'static str = match code {
                500 => "500 Internal Server Error",
                404 => "404 Not Found",
                _ => "400 Bad Request",
            };
            (line, String::new())
        }
    };
    write!(
        stream,
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    )?;
    stream.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::ImageRgb;
    use crate::scorer::{QueryContext, RemoteConfig, RemoteScorer, Scorer, ScorerError, ScorerRequest};
    use crate::occupancy::GridPose;
    use crate::prompts;
    use crate::history::AgentAction;
    use crate::value_map::ActionScores;

    fn request() -> ScorerRequest {
        ScorerRequest {
            egocentric_render: ImageRgb::filled(4, 4, [0, 0, 0]),
            topdown_render: ImageRgb::filled(4, 4, [0, 0, 0]),
            prompt: "where to?".to_string(),
            target_category: "tv".to_string(),
        }
    }

    fn ctx() -> QueryContext {
        QueryContext {
            pose: GridPose::new(0.0, 0.0, 0.0),
            sector_depths: [0.0; 4],
        }
    }

    fn remote(endpoint: String, timeout_secs: u64) -> RemoteScorer {
        RemoteScorer::new(RemoteConfig {
            endpoint,
            timeout_secs,
            ..RemoteConfig::default()
        })
    }

    #[test]
    fn stub_replay_parses_scores() {
        let body = prompts::render_response(
            &ActionScores::new(0.9, 0.1, 0.0, 0.0),
            "tv",
            false,
            "Corridor",
            AgentAction::Forward,
            "keep moving",
        );
        let server = StubVlmServer::spawn(StubBehavior::ReplayContent(body)).unwrap();
        let scorer = remote(server.endpoint(), 5);
        let r = scorer.score(&request(), &ctx()).unwrap();
        assert_eq!(r.scores, ActionScores::new(0.9, 0.1, 0.0, 0.0));
        assert!(!r.target_found);
        assert_eq!(server.request_count(), 1);
    }

    #[test]
    fn garbage_body_is_parse_error() {
        let server = StubVlmServer::spawn(StubBehavior::Garbage).unwrap();
        let scorer = remote(server.endpoint(), 5);
        match scorer.score(&request(), &ctx()) {
            Err(ScorerError::Parse(_)) => {}
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unreachable_endpoint_is_transport_error_within_timeout() {
        let scorer = remote("http://127.0.0.1:9/v1/chat/completions".to_string(), 2);
        let start = std::time::Instant::now();
        match scorer.score(&request(), &ctx()) {
            Err(ScorerError::Transport(_)) => {}
            other => panic!("expected transport error, got {other:?}"),
        }
        assert!(start.elapsed() < std::time::Duration::from_secs(5));
    }

    #[test]
    fn http_error_status_surfaces() {
        let server = StubVlmServer::spawn(StubBehavior::Status(500)).unwrap();
        let scorer = remote(server.endpoint(), 5);
        match scorer.score(&request(), &ctx()) {
            Err(ScorerError::Http(500)) => {}
            other => panic!("expected HTTP 500, got {other:?}"),
        }
    }
}
