use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use serann::annotate::{
    annotate_one, BackendConfig, BackendError, ChatRequest, HttpBackend, LlmBackend, PromptSpec, ResponseCache,
};
use serann::Error;

/// Serves the scripted `(status, body)` replies in order, one per connection,
/// and records each request body.
fn scripted_server(replies: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<String>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if line == "\r\n" || line.is_empty() {
                    break;
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push(String::from_utf8(buf).unwrap());
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (format!("http://{addr}/v1/chat/completions"), seen)
}

fn completion(text: &str) -> String {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string()
}

fn backend(endpoint: String, retries: u32) -> HttpBackend {
    let cfg = BackendConfig {
        endpoint,
        model: "test-model".into(),
        max_retries: retries,
        backoff_base_secs: 0.01,
        requests_per_minute: 60_000.0,
        timeout_secs: 5.0,
        ..BackendConfig::default()
    };
    HttpBackend::with_key(cfg, "secret".into()).unwrap()
}

fn request() -> ChatRequest {
    ChatRequest {
        utterance_id: "u1".into(),
        system: "sys".into(),
        user: "transcript: \"hi\"\nemotion:".into(),
    }
}

#[test]
fn rate_limited_then_success_retries_once() {
    let (url, seen) = scripted_server(vec![(429, "{}".into()), (200, completion("Neutral."))]);
    let b = backend(url, 3);
    assert_eq!(b.complete(&request()).unwrap(), "Neutral.");
    let bodies = seen.lock().unwrap();
    assert_eq!(bodies.len(), 2);
    let v: serde_json::Value = serde_json::from_str(&bodies[0]).unwrap();
    assert_eq!(v["model"], "test-model");
    assert_eq!(v["temperature"], 0.0);
    assert_eq!(v["messages"][0]["role"], "system");
    assert_eq!(v["messages"][1]["content"], "transcript: \"hi\"\nemotion:");
}

#[test]
fn unauthorized_is_an_auth_error() {
    let (url, _) = scripted_server(vec![(401, "{}".into())]);
    assert_eq!(backend(url, 3).complete(&request()).unwrap_err(), BackendError::Auth { status: 401 });
}

#[test]
fn persistent_server_errors_exhaust_retries() {
    let (url, seen) = scripted_server(vec![(503, "{}".into()); 3]);
    match backend(url, 2).complete(&request()).unwrap_err() {
        BackendError::RetriesExhausted { attempts, last } => {
            assert_eq!(attempts, 3);
            assert!(matches!(*last, BackendError::Transient { status: Some(503), .. }));
        }
        e => panic!("unexpected {e:?}"),
    }
    assert_eq!(seen.lock().unwrap().len(), 3);
}

#[test]
fn backend_errors_carry_the_utterance_id() {
    let (url, _) = scripted_server(vec![(401, "{}".into())]);
    let prompt: PromptSpec = serann::annotate::build_prompt(
        serann::annotate::PromptInput {
            utterance_id: "utt-9".into(),
            transcript: "hello".into(),
            features: None,
            codes: None,
        },
        serann::annotate::ContextVariant::TextOnly,
        vec![],
    )
    .unwrap();
    let cache = Mutex::new(ResponseCache::in_memory());
    match annotate_one(&prompt, &backend(url, 0), &cache).unwrap_err() {
        Error::Backend { utterance_id, source } => {
            assert_eq!(utterance_id, "utt-9");
            assert_eq!(source, BackendError::Auth { status: 401 });
        }
        e => panic!("unexpected {e}"),
    }
}
