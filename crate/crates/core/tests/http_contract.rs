//! Contract tests for the http generation and embedding backends against a
//! local fake server: wire format, auth header, error mapping, timeout,
//! batch order, failure indexing, and the parallelism bound.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use statefulrec_core::{
    compose_prompt, embed, generate, generate_batch, Condition, EmbedderBackend, EmbedderConfig,
    Error, GenerationRequest, GeneratorBackend, GeneratorConfig, PromptTemplates,
};

/// One parsed request: the headers blob and the body.
struct ParsedRequest {
    headers: String,
    body: String,
}

fn read_request(stream: &mut TcpStream) -> ParsedRequest {
    let mut buf = Vec::new();
    let mut chunk = [0u8; 1024];
    let header_end = loop {
        let n = stream.read(&mut chunk).expect("read request");
        buf.extend_from_slice(&chunk[..n]);
        if let Some(pos) = buf.windows(4).position(|w| w == b"\r\n\r\n") {
            break pos + 4;
        }
        assert!(n > 0, "connection closed mid-headers");
    };
    let headers = String::from_utf8_lossy(&buf[..header_end]).to_string();
    let content_length: usize = headers
        .lines()
        .find_map(|l| {
            let (name, value) = l.split_once(':')?;
            name.eq_ignore_ascii_case("content-length")
                .then(|| value.trim().parse().ok())?
        })
        .unwrap_or(0);
    let mut body = buf[header_end..].to_vec();
    while body.len() < content_length {
        let n = stream.read(&mut chunk).expect("read body");
        assert!(n > 0, "connection closed mid-body");
        body.extend_from_slice(&chunk[..n]);
    }
    ParsedRequest {
        headers,
        body: String::from_utf8_lossy(&body).to_string(),
    }
}

fn write_response(stream: &mut TcpStream, status: &str, body: &str) {
    let response = format!(
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    stream.write_all(response.as_bytes()).expect("write response");
    stream.flush().ok();
}

/// Spawns a fake server handling each connection in its own thread with the
/// given handler. Returns the endpoint URL. The listener thread exits when
/// the test process does.
fn spawn_server(
    handler: impl Fn(ParsedRequest, &mut TcpStream) + Send + Sync + 'static,
) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind fake server");
    let addr = listener.local_addr().unwrap();
    let handler = Arc::new(handler);
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let handler = Arc::clone(&handler);
            std::thread::spawn(move || {
                let request = read_request(&mut stream);
                handler(request, &mut stream);
            });
        }
    });
    format!("http://{addr}/generate")
}

fn http_generator(endpoint: String) -> GeneratorConfig {
    GeneratorConfig {
        backend: GeneratorBackend::Http,
        endpoint: Some(endpoint),
        timeout_ms: 5_000,
        max_parallel: 2,
        seed: 0,
    }
}

fn contextual_request(question: &str, id: &str) -> GenerationRequest {
    GenerationRequest {
        prompt: compose_prompt(
            Condition::Contextual,
            question,
            None,
            None,
            &PromptTemplates::default(),
        )
        .unwrap(),
        question_id: id.to_string(),
        learner_id: None,
    }
}

#[test]
fn http_generation_round_trip() {
    let endpoint = spawn_server(|request, stream| {
        let parsed: serde_json::Value = serde_json::from_str(&request.body).unwrap();
        let prompt = parsed["prompt"].as_str().unwrap();
        assert!(prompt.contains("Student question"));
        let reply = serde_json::json!({ "text": format!("echo: {}", &prompt[..20]) });
        write_response(stream, "200 OK", &reply.to_string());
    });
    let rec = generate(
        &contextual_request("why is design valuable", "q1"),
        &http_generator(endpoint),
    )
    .unwrap();
    assert!(rec.text.starts_with("echo: "));
    assert_eq!(rec.backend_name, "http");
}

#[test]
fn http_non_success_status_maps_to_backend_error() {
    let endpoint = spawn_server(|_, stream| {
        write_response(stream, "503 Service Unavailable", "{}");
    });
    let err = generate(
        &contextual_request("why", "q1"),
        &http_generator(endpoint),
    )
    .unwrap_err();
    match err {
        Error::Backend { status, .. } => assert_eq!(status, Some(503)),
        other => panic!("expected backend error, got {other:?}"),
    }
}

#[test]
fn http_malformed_body_maps_to_backend_error() {
    let endpoint = spawn_server(|_, stream| {
        write_response(stream, "200 OK", "{\"not_text\": 1}");
    });
    let err = generate(
        &contextual_request("why", "q1"),
        &http_generator(endpoint),
    )
    .unwrap_err();
    assert!(matches!(err, Error::Backend { .. }));
}

#[test]
fn http_timeout_maps_to_backend_error() {
    let endpoint = spawn_server(|_, stream| {
        std::thread::sleep(Duration::from_millis(1_500));
        write_response(stream, "200 OK", "{\"text\": \"too late\"}");
    });
    let mut config = http_generator(endpoint);
    config.timeout_ms = 200;
    let err = generate(&contextual_request("why", "q1"), &config).unwrap_err();
    assert!(matches!(err, Error::Backend { status: None, .. }));
}

#[test]
fn http_bearer_token_is_sent_when_env_set() {
    let endpoint = spawn_server(|request, stream| {
        let authorized = request
            .headers
            .lines()
            .any(|l| l.eq_ignore_ascii_case("authorization: bearer contract-test-token"));
        if authorized {
            write_response(stream, "200 OK", "{\"text\": \"authorized\"}");
        } else {
            write_response(stream, "401 Unauthorized", "{}");
        }
    });
    std::env::set_var("STATEFULREC_API_TOKEN", "contract-test-token");
    let outcome = generate(
        &contextual_request("why", "q1"),
        &http_generator(endpoint),
    );
    std::env::remove_var("STATEFULREC_API_TOKEN");
    assert_eq!(outcome.unwrap().text, "authorized");
}

#[test]
fn batch_preserves_order_and_bounds_parallelism() {
    let in_flight = Arc::new(AtomicUsize::new(0));
    let observed_max = Arc::new(AtomicUsize::new(0));
    let (in_flight_h, observed_h) = (Arc::clone(&in_flight), Arc::clone(&observed_max));
    let endpoint = spawn_server(move |request, stream| {
        let now = in_flight_h.fetch_add(1, Ordering::SeqCst) + 1;
        observed_h.fetch_max(now, Ordering::SeqCst);
        std::thread::sleep(Duration::from_millis(60));
        in_flight_h.fetch_sub(1, Ordering::SeqCst);
        let parsed: serde_json::Value = serde_json::from_str(&request.body).unwrap();
        let prompt = parsed["prompt"].as_str().unwrap();
        // Echo the question marker back so order is observable.
        let marker = prompt
            .split("marker")
            .nth(1)
            .map(|s| s.chars().take_while(|c| c.is_ascii_digit()).collect::<String>())
            .unwrap_or_default();
        let reply = serde_json::json!({ "text": format!("reply-marker{marker}") });
        write_response(stream, "200 OK", &reply.to_string());
    });
    let requests: Vec<GenerationRequest> = (0..6)
        .map(|i| contextual_request(&format!("why marker{i} matters"), &format!("q{i}")))
        .collect();
    let recs = generate_batch(&requests, &http_generator(endpoint)).unwrap();
    for (i, rec) in recs.iter().enumerate() {
        assert_eq!(rec.text, format!("reply-marker{i}"));
        assert_eq!(rec.question_id, format!("q{i}"));
    }
    let max_seen = observed_max.load(Ordering::SeqCst);
    assert!(max_seen <= 2, "parallelism bound exceeded: {max_seen}");
    assert!(max_seen >= 1);
}

#[test]
fn batch_failure_reports_failing_indices_and_keeps_successes() {
    let endpoint = spawn_server(|request, stream| {
        if request.body.contains("poison") {
            write_response(stream, "500 Internal Server Error", "{}");
        } else {
            write_response(stream, "200 OK", "{\"text\": \"fine\"}");
        }
    });
    let requests = vec![
        contextual_request("healthy question one", "q0"),
        contextual_request("poison question", "q1"),
        contextual_request("healthy question two", "q2"),
        contextual_request("another poison question", "q3"),
    ];
    let err = generate_batch(&requests, &http_generator(endpoint)).unwrap_err();
    match err {
        Error::Batch(batch) => {
            let failing: Vec<usize> = batch.failures.iter().map(|(i, _)| *i).collect();
            assert_eq!(failing, vec![1, 3]);
            let succeeded: Vec<usize> = batch.completed.iter().map(|(i, _)| *i).collect();
            assert_eq!(succeeded, vec![0, 2]);
            assert!(batch.completed.iter().all(|(_, r)| r.text == "fine"));
        }
        other => panic!("expected batch error, got {other:?}"),
    }
}

#[test]
fn http_embedding_round_trip_and_dimension_check() {
    let endpoint = spawn_server(|request, stream| {
        let parsed: serde_json::Value = serde_json::from_str(&request.body).unwrap();
        let text = parsed["text"].as_str().unwrap();
        let dim = if text.contains("short") { 4 } else { 8 };
        let values: Vec<f64> = (0..dim).map(|i| i as f64 * 0.5).collect();
        let reply = serde_json::json!({ "values": values });
        write_response(stream, "200 OK", &reply.to_string());
    });
    let config = EmbedderConfig {
        backend: EmbedderBackend::Http,
        dimension: 8,
        endpoint: Some(endpoint),
    };
    let v = embed("a normal sentence", &config).unwrap();
    assert_eq!(v.dim(), 8);
    let err = embed("a short sentence", &config).unwrap_err();
    match err {
        Error::Backend { message, .. } => assert!(message.contains("dimension mismatch")),
        other => panic!("expected dimension mismatch, got {other:?}"),
    }
}
