#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

/// One request seen by the mock.
#[derive(Debug, Clone)]
pub struct Hit {
    pub arrived: Instant,
    pub model: String,
    pub system: String,
    pub prompt: String,
    pub temperature: f64,
}

type Answer = Arc<dyn Fn(&str) -> String + Send + Sync>;

/// Chat-completions endpoint on localhost that logs every request.
pub struct MockServer {
    pub url: String,
    server: Arc<tiny_http::Server>,
    log: Arc<Mutex<Vec<Hit>>>,
    peak: Arc<AtomicUsize>,
    workers: Vec<JoinHandle<()>>,
}

impl MockServer {
    /// `status` other than 200 is returned with an error body.
    pub fn start(threads: usize, delay: Duration, status: u16, answer: Answer) -> Self {
        let server = Arc::new(tiny_http::Server::http("127.0.0.1:0").expect("bind mock"));
        let port = server.server_addr().to_ip().expect("ip listener").port();
        let log = Arc::new(Mutex::new(Vec::new()));
        let current = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        let workers = (0..threads)
            .map(|_| {
                let (server, log, current, peak, answer) =
                    (server.clone(), log.clone(), current.clone(), peak.clone(), answer.clone());
                std::thread::spawn(move || {
                    while let Ok(mut rq) = server.recv() {
                        let arrived = Instant::now();
                        let now = current.fetch_add(1, Ordering::SeqCst) + 1;
                        peak.fetch_max(now, Ordering::SeqCst);
                        let mut body = String::new();
                        rq.as_reader().read_to_string(&mut body).expect("read body");
                        let v: serde_json::Value = serde_json::from_str(&body).expect("json body");
                        let prompt = v["messages"][1]["content"].as_str().unwrap_or_default().to_owned();
                        let hit = Hit {
                            arrived,
                            model: v["model"].as_str().unwrap_or_default().to_owned(),
                            system: v["messages"][0]["content"].as_str().unwrap_or_default().to_owned(),
                            temperature: v["temperature"].as_f64().unwrap_or(f64::NAN),
                            prompt: prompt.clone(),
                        };
                        std::thread::sleep(delay);
                        let (code, text) = if status == 200 {
                            let reply = serde_json::json!({
                                "choices": [{"message": {"role": "assistant", "content": answer(&prompt)}}]
                            });
                            (200, reply.to_string())
                        } else {
                            (status, r#"{"error":"rejected"}"#.to_owned())
                        };
                        log.lock().unwrap().push(hit);
                        current.fetch_sub(1, Ordering::SeqCst);
                        let _ = rq.respond(tiny_http::Response::from_string(text).with_status_code(code));
                    }
                })
            })
            .collect();
        Self {
            url: format!("http://127.0.0.1:{port}/v1/chat/completions"),
            server,
            log,
            peak,
            workers,
        }
    }

    pub fn hits(&self) -> Vec<Hit> {
        self.log.lock().unwrap().clone()
    }

    pub fn peak_in_flight(&self) -> usize {
        self.peak.load(Ordering::SeqCst)
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        for _ in 0..self.workers.len() {
            self.server.unblock();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

/// Largest number of arrivals within any half-open window of `window`.
pub fn max_in_window(hits: &[Hit], window: Duration) -> usize {
    let mut times: Vec<Instant> = hits.iter().map(|h| h.arrived).collect();
    times.sort();
    (0..times.len())
        .map(|i| times[i..].iter().take_while(|t| t.duration_since(times[i]) < window).count())
        .max()
        .unwrap_or(0)
}

pub fn cbli(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cbli"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn cbli")
}

/// Runs `cbli` and panics with its stderr unless it succeeds.
pub fn cbli_ok(dir: &Path, args: &[&str]) -> String {
    let out = cbli(dir, args);
    assert!(
        out.status.success(),
        "cbli {args:?} failed ({:?}): {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 stdout")
}

/// Every file under `dir`, relative path and bytes, sorted by path.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).expect("read dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                out.push((rel, std::fs::read(&path).expect("read file")));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}
