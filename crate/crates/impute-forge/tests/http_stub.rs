use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;

use impute_forge::http::HttpBackend;
use impute_forge_core::backend::{BackendError, BackendKind, MockContext};
use impute_forge_core::{BackendConfig, Completer, PromptRequest, RenderedPrompt};
use serde_json::Value;

struct Seen {
    auth: Option<String>,
    body: Value,
}

fn read_request(stream: &mut TcpStream) -> Seen {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut len = 0;
    let mut auth = None;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line).unwrap();
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        let lower = line.to_ascii_lowercase();
        if let Some(v) = lower.strip_prefix("content-length:") {
            len = v.trim().parse().unwrap();
        }
        if lower.starts_with("authorization:") {
            auth = Some(line["authorization:".len()..].trim().to_string());
        }
    }
    let mut body = vec![0; len];
    reader.read_exact(&mut body).unwrap();
    Seen {
        auth,
        body: serde_json::from_slice(&body).unwrap(),
    }
}

/// Serves one scripted (status, body) reply per connection and records
/// what it received.
fn serve(replies: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Seen>>>, thread::JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    let handle = thread::spawn(move || {
        for (status, body) in replies {
            let (mut stream, _) = listener.accept().unwrap();
            let req = read_request(&mut stream);
            log.lock().unwrap().push(req);
            let reply = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(reply.as_bytes()).unwrap();
        }
    });
    (url, seen, handle)
}

fn chat(content: &str) -> String {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string()
}

fn config(url: &str, key_env: &str) -> BackendConfig {
    BackendConfig {
        kind: BackendKind::Http,
        endpoint: url.to_string(),
        api_key_env: key_env.to_string(),
        max_retries: 2,
        backoff_base_ms: 1,
        timeout_secs: 10,
        ..BackendConfig::default()
    }
}

fn request(text: &str) -> PromptRequest {
    PromptRequest {
        id: "t".into(),
        prompt: RenderedPrompt {
            text: text.to_string(),
            manifest: vec![0, 1],
            estimated_tokens: 7,
            included_columns: vec![],
            group_counts: vec![],
            warnings: vec![],
        },
        mock: MockContext::default(),
    }
}

#[test]
fn sends_prompt_verbatim_and_returns_content_verbatim() {
    std::env::set_var("IMPUTE_FORGE_TEST_KEY_A", "sk-test");
    let (url, seen, h) = serve(vec![(200, chat("A.\nYes\n\nB.\nNo"))]);
    let backend = HttpBackend::new(&config(&url, "IMPUTE_FORGE_TEST_KEY_A")).unwrap();
    let prompt = "line one\n\nGiven the above data, fill in the missing values in the data sample below:\nA.\n";
    let ex = backend.complete(&request(prompt)).unwrap();
    h.join().unwrap();
    assert_eq!(ex.response_text, "A.\nYes\n\nB.\nNo");
    assert_eq!(ex.prompt_text, prompt);
    assert_eq!(ex.attempt_count, 1);
    let seen = seen.lock().unwrap();
    assert_eq!(seen[0].auth.as_deref(), Some("Bearer sk-test"));
    assert_eq!(seen[0].body["messages"][0]["content"], prompt);
    assert_eq!(seen[0].body["model"], "gpt-4.1");
    assert_eq!(seen[0].body["temperature"], 0.0);
}

#[test]
fn retries_rate_limits_and_server_errors() {
    std::env::set_var("IMPUTE_FORGE_TEST_KEY_B", "sk-test");
    let (url, seen, h) = serve(vec![
        (429, "{}".into()),
        (503, "{}".into()),
        (200, chat("No")),
    ]);
    let backend = HttpBackend::new(&config(&url, "IMPUTE_FORGE_TEST_KEY_B")).unwrap();
    let ex = backend.complete(&request("p")).unwrap();
    h.join().unwrap();
    assert_eq!(ex.attempt_count, 3);
    assert_eq!(ex.backoff_ms.len(), 2);
    assert_eq!(seen.lock().unwrap().len(), 3);
}

#[test]
fn gives_up_after_max_retries() {
    std::env::set_var("IMPUTE_FORGE_TEST_KEY_C", "sk-test");
    let (url, _, h) = serve(vec![(429, "{}".into()), (429, "{}".into()), (429, "{}".into())]);
    let backend = HttpBackend::new(&config(&url, "IMPUTE_FORGE_TEST_KEY_C")).unwrap();
    let err = backend.complete(&request("p")).unwrap_err();
    h.join().unwrap();
    assert_eq!(err, BackendError::RateLimited { attempts: 3 });
}

#[test]
fn unauthorized_is_fatal_without_retry() {
    std::env::set_var("IMPUTE_FORGE_TEST_KEY_D", "sk-wrong");
    let (url, seen, h) = serve(vec![(401, r#"{"error":"bad key"}"#.into())]);
    let backend = HttpBackend::new(&config(&url, "IMPUTE_FORGE_TEST_KEY_D")).unwrap();
    let err = backend.complete(&request("p")).unwrap_err();
    h.join().unwrap();
    assert!(matches!(err, BackendError::Http { status: 401, attempts: 1, .. }), "{err:?}");
    assert!(err.is_fatal());
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn malformed_provider_reply_is_reported() {
    std::env::set_var("IMPUTE_FORGE_TEST_KEY_E", "sk-test");
    let (url, _, h) = serve(vec![(200, r#"{"choices":[]}"#.into())]);
    let backend = HttpBackend::new(&config(&url, "IMPUTE_FORGE_TEST_KEY_E")).unwrap();
    let err = backend.complete(&request("p")).unwrap_err();
    h.join().unwrap();
    assert!(matches!(err, BackendError::MalformedProviderResponse(_)));
}

#[test]
fn missing_key_fails_before_any_request() {
    std::env::remove_var("IMPUTE_FORGE_TEST_KEY_UNSET");
    let cfg = config("http://127.0.0.1:9/never", "IMPUTE_FORGE_TEST_KEY_UNSET");
    match HttpBackend::new(&cfg) {
        Err(BackendError::AuthMissing(name)) => assert_eq!(name, "IMPUTE_FORGE_TEST_KEY_UNSET"),
        Err(e) => panic!("unexpected error {e:?}"),
        Ok(_) => panic!("backend built without a key"),
    }
}

#[test]
fn batch_keeps_request_order() {
    std::env::set_var("IMPUTE_FORGE_TEST_KEY_F", "sk-test");
    let replies = (0..4).map(|_| (200, chat("echo"))).collect();
    let (url, seen, h) = serve(replies);
    let mut cfg = config(&url, "IMPUTE_FORGE_TEST_KEY_F");
    cfg.max_in_flight = 1;
    let backend = HttpBackend::new(&cfg).unwrap();
    let reqs: Vec<PromptRequest> = (0..4).map(|i| request(&format!("prompt {i}"))).collect();
    let out = backend.complete_batch(&reqs);
    h.join().unwrap();
    for (i, r) in out.iter().enumerate() {
        assert_eq!(r.as_ref().unwrap().prompt_text, format!("prompt {i}"));
    }
    let sent: Vec<String> = seen
        .lock()
        .unwrap()
        .iter()
        .map(|s| s.body["messages"][0]["content"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(sent, ["prompt 0", "prompt 1", "prompt 2", "prompt 3"]);
}
