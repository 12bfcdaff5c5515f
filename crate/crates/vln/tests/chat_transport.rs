//! Chat adapter transport behavior against a local scripted HTTP server:
//! success parsing, retry with backoff on transient failures, retry
//! exhaustion, and context-overflow mapping.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use vln::models::{
    ChatModel, ImageTransport, ModelBackend, ModelError, ModelRequest, ModelSettings,
};

struct ServerHandle {
    url: String,
    hits: Arc<AtomicUsize>,
    request_bodies: Arc<Mutex<Vec<String>>>,
}

/// Serves each (status, body) once, in order, then repeats the last.
/// Captures every request body for assertions.
fn scripted_server(responses: Vec<(u16, String)>) -> ServerHandle {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
    let addr = listener.local_addr().expect("addr");
    let hits = Arc::new(AtomicUsize::new(0));
    let request_bodies = Arc::new(Mutex::new(Vec::new()));
    let hits_thread = hits.clone();
    let bodies_thread = request_bodies.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { break };
            let index = hits_thread.fetch_add(1, Ordering::SeqCst);
            let (status, body) = responses
                .get(index)
                .or_else(|| responses.last())
                .cloned()
                .unwrap_or((500, String::new()));

            // Drain the request: headers, then content-length bytes.
            let mut reader = BufReader::new(stream.try_clone().expect("clone"));
            let mut line = String::new();
            let mut content_length = 0usize;
            loop {
                line.clear();
                if reader.read_line(&mut line).is_err() || line == "\r\n" || line.is_empty() {
                    break;
                }
                let lower = line.to_ascii_lowercase();
                if let Some(value) = lower.strip_prefix("content-length:") {
                    content_length = value.trim().parse().unwrap_or(0);
                }
            }
            let mut body_buf = vec![0u8; content_length];
            let _ = reader.read_exact(&mut body_buf);
            bodies_thread
                .lock()
                .expect("bodies")
                .push(String::from_utf8_lossy(&body_buf).to_string());

            let response = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            let _ = stream.write_all(response.as_bytes());
        }
    });
    ServerHandle {
        url: format!("http://{addr}"),
        hits,
        request_bodies,
    }
}

fn settings(base_url: &str) -> ModelSettings {
    ModelSettings {
        model: "test-model".to_string(),
        base_url: Some(base_url.to_string()),
        api_key_env: None,
        timeout_s: 5,
        transport_retries: 3,
        backoff_ms: 1,
        max_in_flight: 2,
        image_transport: ImageTransport::Url,
        image_url_prefix: Some("http://assets".to_string()),
    }
}

fn completion_body(text: &str) -> String {
    serde_json::json!({
        "choices": [{"message": {"content": text}}],
        "usage": {"prompt_tokens": 5, "completion_tokens": 2}
    })
    .to_string()
}

#[test]
fn successful_call_parses_text_and_usage() {
    let server = scripted_server(vec![(200, completion_body("Action: 2"))]);
    let model = ChatModel::new("chat", settings(&server.url), ".");
    let resp = model
        .generate(&ModelRequest::text_only("sys", "task"))
        .expect("success");
    assert_eq!(resp.text, "Action: 2");
    assert_eq!(resp.usage.prompt_tokens, 5);
    assert_eq!(server.hits.load(Ordering::SeqCst), 1);
    assert!(resp.latency_s >= 0.0);
    // The wire payload carries the system and user messages.
    let bodies = server.request_bodies.lock().unwrap();
    let payload: serde_json::Value = serde_json::from_str(&bodies[0]).unwrap();
    assert_eq!(payload["messages"][0]["role"], "system");
    assert_eq!(payload["messages"][0]["content"], "sys");
    assert_eq!(payload["messages"][1]["content"][0]["text"], "task");
}

#[test]
fn transient_failures_are_retried_with_backoff() {
    let server = scripted_server(vec![
        (
            500,
            "{\"error\": {\"message\": \"worker crashed\"}}".to_string(),
        ),
        (429, "slow down".to_string()),
        (200, completion_body("Action: Stop")),
    ]);
    let model = ChatModel::new("chat", settings(&server.url), ".");
    let resp = model
        .generate(&ModelRequest::text_only("sys", "task"))
        .expect("retried into success");
    assert_eq!(resp.text, "Action: Stop");
    assert_eq!(server.hits.load(Ordering::SeqCst), 3);
}

#[test]
fn retry_budget_exhaustion_is_a_transport_error() {
    let server = scripted_server(vec![(503, "unavailable".to_string())]);
    let model = ChatModel::new("chat", settings(&server.url), ".");
    let err = model
        .generate(&ModelRequest::text_only("sys", "task"))
        .expect_err("exhausted");
    match err {
        ModelError::Transport { attempts, .. } => assert_eq!(attempts, 4),
        other => panic!("expected Transport, got {other}"),
    }
    assert_eq!(
        server.hits.load(Ordering::SeqCst),
        4,
        "one initial try plus three retries"
    );
}

#[test]
fn backend_context_overflow_is_mapped() {
    let body = "{\"error\": {\"message\": \"context_length_exceeded: prompt too long\"}}";
    let server = scripted_server(vec![(200, body.to_string())]);
    let model = ChatModel::new("chat", settings(&server.url), ".");
    let err = model
        .generate(&ModelRequest::text_only("sys", "task"))
        .expect_err("overflow");
    assert!(matches!(err, ModelError::ContextOverflow(_)), "{err}");
}

#[test]
fn non_retryable_status_fails_fast() {
    let server = scripted_server(vec![(404, "no such route".to_string())]);
    let model = ChatModel::new("chat", settings(&server.url), ".");
    let err = model
        .generate(&ModelRequest::text_only("sys", "task"))
        .expect_err("fatal");
    assert!(
        matches!(err, ModelError::Transport { attempts: 1, .. }),
        "{err}"
    );
    assert_eq!(server.hits.load(Ordering::SeqCst), 1);
}

#[test]
fn url_image_transport_needs_no_local_files() {
    let server = scripted_server(vec![(200, completion_body("ok"))]);
    let model = ChatModel::new("chat", settings(&server.url), "/nonexistent-root");
    let request = ModelRequest {
        system_text: "sys".to_string(),
        task_text: "task".to_string(),
        images: vec!["images/vp_0001_90.jpg".to_string()],
        params: Default::default(),
    };
    // With URL transport the adapter never touches the asset root.
    assert!(model.generate(&request).is_ok());
    let bodies = server.request_bodies.lock().unwrap();
    assert!(bodies[0].contains("http://assets/images/vp_0001_90.jpg"));
}

#[test]
fn base64_image_transport_inlines_asset_bytes() {
    use base64::Engine;
    let dir = tempfile::tempdir().unwrap();
    let image_dir = dir.path().join("scan/images");
    std::fs::create_dir_all(&image_dir).unwrap();
    let bytes = b"tiny-jpeg-stand-in";
    std::fs::write(image_dir.join("vp_0001_0.jpg"), bytes).unwrap();

    let server = scripted_server(vec![(200, completion_body("ok"))]);
    let mut cfg = settings(&server.url);
    cfg.image_transport = ImageTransport::Base64;
    let model = ChatModel::new("chat", cfg, dir.path());
    let request = ModelRequest {
        system_text: "sys".to_string(),
        task_text: "task".to_string(),
        images: vec!["scan/images/vp_0001_0.jpg".to_string()],
        params: Default::default(),
    };
    model.generate(&request).expect("success");
    let encoded = base64::engine::general_purpose::STANDARD.encode(bytes);
    let bodies = server.request_bodies.lock().unwrap();
    assert!(
        bodies[0].contains(&format!("data:image/jpeg;base64,{encoded}")),
        "payload inlines the image bytes"
    );

    // A missing image is reported before any network traffic.
    let missing = ModelRequest {
        images: vec!["scan/images/nope.jpg".to_string()],
        ..request
    };
    let hit_count = server.hits.load(Ordering::SeqCst);
    let err = model.generate(&missing).expect_err("missing image");
    assert!(matches!(err, ModelError::Misconfigured(_)), "{err}");
    assert_eq!(server.hits.load(Ordering::SeqCst), hit_count);
}
