use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use cbli_core::oracle::{Choice, LlmClient, LlmConfig, OracleError, Parsed, PromptTemplate};

/// Serves scripted `(status, content)` replies in order, then 500s.
struct Scripted {
    url: String,
    server: Arc<tiny_http::Server>,
    bodies: Arc<Mutex<Vec<serde_json::Value>>>,
    worker: Option<JoinHandle<()>>,
}

impl Scripted {
    fn new(script: Vec<(u16, &str)>) -> Self {
        let server = Arc::new(tiny_http::Server::http("127.0.0.1:0").unwrap());
        let port = server.server_addr().to_ip().unwrap().port();
        let bodies = Arc::new(Mutex::new(Vec::new()));
        let mut script: VecDeque<(u16, String)> = script.into_iter().map(|(s, c)| (s, c.to_owned())).collect();
        let (srv, log) = (server.clone(), bodies.clone());
        let worker = std::thread::spawn(move || {
            while let Ok(mut rq) = srv.recv() {
                let mut body = String::new();
                rq.as_reader().read_to_string(&mut body).unwrap();
                log.lock().unwrap().push(serde_json::from_str(&body).unwrap());
                let (status, content) = script.pop_front().unwrap_or((500, String::new()));
                let reply = serde_json::json!({"choices": [{"message": {"content": content}}]}).to_string();
                let _ = rq.respond(tiny_http::Response::from_string(reply).with_status_code(status));
            }
        });
        Self {
            url: format!("http://127.0.0.1:{port}/v1/chat/completions"),
            server,
            bodies,
            worker: Some(worker),
        }
    }

    fn requests(&self) -> Vec<serde_json::Value> {
        self.bodies.lock().unwrap().clone()
    }
}

impl Drop for Scripted {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

fn config(url: &str, cache: Option<&std::path::Path>) -> LlmConfig {
    LlmConfig {
        endpoint: url.to_owned(),
        model: "m".into(),
        api_key_env: "CBLI_TEST_UNSET_KEY".into(),
        backoff_ms: 1,
        max_transport_retries: 2,
        requests_per_minute: None,
        cache_dir: cache.map(|p| p.to_path_buf()),
        ..LlmConfig::default()
    }
}

fn template() -> PromptTemplate {
    PromptTemplate::donation_pairwise()
}

#[test]
fn retries_transient_statuses_then_parses() {
    let mock = Scripted::new(vec![(429, ""), (503, ""), (200, "so... [Answer] 2")]);
    let client = LlmClient::new(config(&mock.url, None)).unwrap();
    let r = client.llm_prefer(&template(), "a donor", "x", "y", 0).unwrap();
    assert_eq!(r.parsed, Some(Parsed::Choice(Choice::B)));
    assert_eq!(r.attempts, 1);
    let sent = mock.requests();
    assert_eq!(sent.len(), 3);
    assert!(sent.windows(2).all(|w| w[0] == w[1]));
    assert_eq!(sent[0]["messages"][0]["role"], "system");
    assert_eq!(sent[0]["messages"][1]["role"], "user");
    assert_eq!(sent[0]["model"], "m");
}

#[test]
fn gives_up_after_retry_budget() {
    let mock = Scripted::new(vec![]);
    let client = LlmClient::new(config(&mock.url, None)).unwrap();
    let err = client.llm_prefer(&template(), "p", "x", "y", 0).unwrap_err();
    assert!(matches!(err, OracleError::QueryFailure(_)), "{err:?}");
    assert!(!err.is_fatal());
    assert_eq!(mock.requests().len(), 3);
}

#[test]
fn unparseable_answers_are_reasked() {
    let mock = Scripted::new(vec![(200, "I cannot decide."), (200, "[Answer] 1")]);
    let client = LlmClient::new(config(&mock.url, None)).unwrap();
    let r = client.llm_prefer(&template(), "p", "x", "y", 0).unwrap();
    assert_eq!(r.parsed, Some(Parsed::Choice(Choice::A)));
    assert_eq!(r.attempts, 2);

    let mock = Scripted::new(vec![(200, "no"), (200, "still no"), (200, "nope")]);
    let client = LlmClient::new(config(&mock.url, None)).unwrap();
    let err = client.llm_prefer(&template(), "p", "x", "y", 0).unwrap_err();
    assert!(matches!(err, OracleError::QueryFailure(_)));
}

#[test]
fn rejected_credentials_are_fatal() {
    for status in [401, 403] {
        let mock = Scripted::new(vec![(status, "")]);
        let client = LlmClient::new(config(&mock.url, None)).unwrap();
        let err = client.llm_prefer(&template(), "p", "x", "y", 0).unwrap_err();
        assert!(err.is_fatal(), "{status}: {err:?}");
        assert_eq!(mock.requests().len(), 1);
    }
    for bad in ["not a url", "ftp://host/x", "/v1/chat"] {
        let err = LlmClient::new(config(bad, None)).unwrap_err();
        assert!(matches!(err, OracleError::Fatal(_)), "{bad}: {err:?}");
    }
}

#[test]
fn cache_survives_a_new_client() {
    let dir = tempfile::tempdir().unwrap();
    let mock = Scripted::new(vec![(200, "[Answer] 1"), (200, "[Answer] 2")]);
    let first = LlmClient::new(config(&mock.url, Some(dir.path()))).unwrap();
    let a = first.llm_prefer(&template(), "p", "x", "y", 0).unwrap();
    let b = first.llm_prefer(&template(), "p", "x", "y", 1).unwrap();
    assert!(!a.cached && !b.cached);
    drop(first);
    let second = LlmClient::new(config(&mock.url, Some(dir.path()))).unwrap();
    let a2 = second.llm_prefer(&template(), "p", "x", "y", 0).unwrap();
    let b2 = second.llm_prefer(&template(), "p", "x", "y", 1).unwrap();
    assert!(a2.cached && b2.cached);
    assert_eq!((a2.raw, b2.raw), (a.raw, b.raw));
    assert_eq!(mock.requests().len(), 2);

    // A different temperature is a different question.
    let mut hot = config(&mock.url, Some(dir.path()));
    hot.temperature = 0.5;
    let r = LlmClient::new(hot).unwrap().llm_prefer(&template(), "p", "x", "y", 0);
    assert!(r.is_err());
    assert_eq!(mock.requests().len(), 5);
}
