use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use serde_json::Value;
use taxsim::llm::{
    suggest, AgentSnapshot, BackendSpec, DecisionBackend, DecisionContext, DecisionKind, LlmError, PolicySnapshot,
    RemoteBackend, RemoteConfig,
};
use taxsim::{run, CalibrationData, EnforcementPolicy, Money, PublicGoodsFunction, PublicGoodsMode, SimulationConfig};

struct Captured {
    authorization: Option<String>,
    path: String,
    body: Value,
}

/// Serves canned `(status, body)` replies in order, one per connection,
/// repeating the last one once the script runs out.
fn mock_server(script: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Captured>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let log = Arc::new(Mutex::new(Vec::new()));
    let seen = log.clone();
    thread::spawn(move || {
        for (i, stream) in listener.incoming().enumerate() {
            let Ok(mut stream) = stream else { break };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            let path = request_line.split_whitespace().nth(1).unwrap_or_default().to_string();
            let (mut length, mut authorization) = (0, None);
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                let (name, value) = line.split_once(':').unwrap();
                match name.to_ascii_lowercase().as_str() {
                    "content-length" => length = value.trim().parse().unwrap(),
                    "authorization" => authorization = Some(value.trim().to_string()),
                    _ => {}
                }
            }
            let mut body = vec![0; length];
            reader.read_exact(&mut body).unwrap();
            seen.lock().unwrap().push(Captured { authorization, path, body: serde_json::from_slice(&body).unwrap() });
            let (status, reply) = &script[i.min(script.len() - 1)];
            let response = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                reply.len()
            );
            stream.write_all(response.as_bytes()).unwrap();
        }
    });
    (url, log)
}

fn chat_reply(content: &str) -> String {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string()
}

fn config(endpoint: String) -> RemoteConfig {
    RemoteConfig {
        endpoint,
        model: "test-model".into(),
        api_key: Some("secret".into()),
        backoff_ms: 1,
        timeout_secs: 10.0,
        ..RemoteConfig::default()
    }
}

fn context(owed: f64) -> DecisionContext {
    let cal = CalibrationData::bundled();
    DecisionContext {
        step: 30,
        agent: AgentSnapshot {
            id: 0,
            balance: Money(5_000.0),
            salary: Money(4_000.0),
            salary_period: 30,
            annual_income: Money(48_000.0),
            decile: 4,
            risk: 0.2,
            horizon: 30,
            cognition: 0.9,
        },
        persona: Arc::from(vec!["I always pay what I owe.".to_string()]),
        policies: Arc::new(PolicySnapshot {
            sales_tax: cal.sales_rate,
            income_tax: cal.tax_schedule,
            public_goods: PublicGoodsFunction::linear(1.0, PublicGoodsMode::Pooled),
            enforcement: EnforcementPolicy::validation(0.1),
        }),
        history: vec!["Obtained an income 4000.00 at time 30".into()],
        outcomes: Vec::new(),
        owed: Money(owed),
        kind: DecisionKind::IncomeTax,
        cumulative_gap: Money::ZERO,
        steps_since_audit: 0,
    }
}

#[test]
fn round_trip_parses_and_clamps() {
    let (url, log) = mock_server(vec![(200, chat_reply("I will pay $1,234.50 this month."))]);
    let backend = RemoteBackend::new(config(url)).unwrap();
    let mut session = backend.open_session(0, 0);
    let s = suggest(session.as_mut(), &context(500.0)).unwrap();
    assert_eq!(s.amount, Money(500.0));
    assert!(s.raw_text.contains("1,234.50"));
    let s = suggest(session.as_mut(), &context(2_000.0)).unwrap();
    assert_eq!(s.amount, Money(1_234.5));

    let log = log.lock().unwrap();
    let first = &log[0];
    assert_eq!(first.path, "/chat/completions");
    assert_eq!(first.authorization.as_deref(), Some("Bearer secret"));
    assert_eq!(first.body["model"], "test-model");
    let messages = first.body["messages"].as_array().unwrap();
    assert_eq!(messages[0]["role"], "system");
    assert!(messages[1]["content"].as_str().unwrap().contains("500"));
}

#[test]
fn transient_failures_are_retried() {
    let (url, log) = mock_server(vec![
        (500, "{}".into()),
        (200, chat_reply("no idea")),
        (200, chat_reply("$42")),
    ]);
    let backend = RemoteBackend::new(config(url)).unwrap();
    let s = backend.complete(&context(100.0)).unwrap();
    assert_eq!(s.amount, Money(42.0));
    assert_eq!(log.lock().unwrap().len(), 3);
}

#[test]
fn persistent_failure_reports_attempts() {
    let (url, _) = mock_server(vec![(503, "{}".into())]);
    let backend = RemoteBackend::new(RemoteConfig { max_attempts: 2, ..config(url) }).unwrap();
    match backend.complete(&context(100.0)) {
        Err(LlmError::Backend { attempts, message }) => {
            assert_eq!(attempts, 2);
            assert!(message.contains("503"), "{message}");
        }
        other => panic!("expected backend error, got {other:?}"),
    }
}

#[test]
fn world_runs_against_remote_backend() {
    let (url, log) = mock_server(vec![(200, chat_reply("I'll pay 0 dollars."))]);
    let sim = SimulationConfig {
        population: 1,
        seed: 3,
        risk_range: (0.0, 0.0),
        decision_backend: BackendSpec::RemoteChat(config(url)),
        ..SimulationConfig::default()
    };
    let result = run(sim).unwrap();
    assert!(result.metrics.informal_share > 0.9);
    assert!(log.lock().unwrap().len() >= 12);
    assert!(result.snapshot.backend_id.starts_with("remote:"));
}
