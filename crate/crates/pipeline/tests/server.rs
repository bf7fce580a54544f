use std::io::{Read, Write};
use std::net::TcpStream;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use patdiag_core::corpus::{generate_synthetic, Corpus, SyntheticSpec};
use patdiag_core::pattern::Pattern;
use patdiag_core::refinement::{
    create_session, read_journal, read_verdicts, write_verdicts, AnnotationSession,
};
use patdiag_pipeline::server::{bind, router, serve_until_finalized, AppState, SessionFiles};
use patdiag_pipeline::PipelineError;
use serde_json::{json, Value};
use tower::ServiceExt;

struct Fixture {
    _dir: tempfile::TempDir,
    corpus: Corpus,
    session: AnnotationSession,
    files: SessionFiles,
}

fn fixture() -> Fixture {
    let spec = SyntheticSpec {
        n_instances: 300,
        vocab_size: 40,
        ..SyntheticSpec::default()
    };
    let corpus = generate_synthetic(&spec).unwrap();
    let patterns: Vec<Pattern> = spec
        .positive_templates
        .iter()
        .chain(&spec.distractor_templates)
        .map(|t| t.parse().unwrap())
        .collect();
    let session = create_session(&patterns, &corpus, 4, 7, 0.8, 0.1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = SessionFiles {
        session: dir.path().join("session.json"),
        journal: dir.path().join("journal.jsonl"),
        verdicts: dir.path().join("verdicts.json"),
    };
    session.save(&files.session).unwrap();
    std::fs::write(&files.journal, b"").unwrap();
    Fixture {
        _dir: dir,
        corpus,
        session,
        files,
    }
}

impl Fixture {
    fn state(&self) -> AppState {
        AppState::new(
            self.session.clone(),
            self.corpus.clone(),
            self.files.clone(),
        )
    }

    fn gold(&self, id: &str) -> i8 {
        self.corpus.get(id).unwrap().gold_label.unwrap().sign()
    }
}

async fn call(
    state: &AppState,
    method: &str,
    uri: &str,
    body: Option<&str>,
) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap())
}

async fn label(state: &AppState, id: &str, y: i8) -> (StatusCode, Value) {
    let body = json!({ "label": y }).to_string();
    call(state, "POST", &format!("/api/item/{id}/label"), Some(&body)).await
}

#[tokio::test]
async fn session_and_patterns_describe_progress() {
    let f = fixture();
    let st = f.state();
    let (status, v) = call(&st, "GET", "/api/session", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["revision"], 0);
    assert_eq!(v["finalized"], false);
    assert_eq!(v["progress"]["total"], f.session.items().len());
    assert_eq!(v["progress"]["labeled"], 0);
    assert_eq!(
        v["patterns"].as_array().unwrap().len(),
        f.session.patterns.len()
    );

    let (status, v) = call(&st, "GET", "/api/patterns", None).await;
    assert_eq!(status, StatusCode::OK);
    let first = &v["patterns"][0];
    assert_eq!(first["pattern"], f.session.patterns[0].pattern.to_string());
    assert_eq!(first["labeled"], 0);
    assert!(first["class"].is_null());
}

#[tokio::test]
async fn next_walks_the_pending_items() {
    let f = fixture();
    let st = f.state();
    let total = f.session.items().len();
    let mut seen = Vec::new();
    loop {
        let (status, v) = call(&st, "GET", "/api/session/next", None).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(v["progress"]["labeled"], seen.len());
        if v["item"].is_null() {
            break;
        }
        let item = &v["item"];
        let id = item["id"].as_str().unwrap().to_string();
        let inst = f.corpus.get(&id).unwrap();
        assert_eq!(item["tokens"], json!(inst.tokens));
        assert_eq!(item["head"]["start"], inst.head.start);
        assert_eq!(item["tail"]["end"], inst.tail.end);
        assert!(!item["patterns"].as_array().unwrap().is_empty());
        assert!(item["label"].is_null());
        assert!(!seen.contains(&id));
        let (status, v) = label(&st, &id, f.gold(&id)).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(v["revision"], seen.len() as u64 + 1);
        seen.push(id);
    }
    assert_eq!(seen.len(), total);
    let (_, v) = call(&st, "GET", &format!("/api/item/{}", seen[0]), None).await;
    assert_eq!(v["item"]["label"], f.gold(&seen[0]));
}

#[tokio::test]
async fn unknown_items_and_bad_bodies_are_rejected() {
    let f = fixture();
    let st = f.state();
    let (status, v) = call(&st, "GET", "/api/item/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["revision"], 0);
    let (status, _) = label(&st, "nope", 1).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let id = f.session.items()[0].to_string();
    let (status, v) = label(&st, &id, 2).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(v["error"].is_string());
    let uri = format!("/api/item/{id}/label");
    let (status, _) = call(&st, "POST", &uri, Some("{\"label\":")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&st, "POST", &uri, Some("{\"lbl\": 1}")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    // Nothing was recorded.
    let (_, v) = call(&st, "GET", "/api/session", None).await;
    assert_eq!(v["revision"], 0);
    assert!(read_journal(&f.files.journal).unwrap().is_empty());
}

#[tokio::test]
async fn finalize_requires_every_item() {
    let f = fixture();
    let st = f.state();
    let items: Vec<String> = f.session.items().iter().map(|s| s.to_string()).collect();
    for id in &items[..items.len() - 1] {
        label(&st, id, f.gold(id)).await;
    }
    let (status, v) = call(&st, "POST", "/api/session/finalize", None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let last = items.last().unwrap();
    let expected: Vec<String> = f
        .session
        .patterns
        .iter()
        .filter(|p| p.items.contains(last))
        .map(|p| p.pattern.to_string())
        .collect();
    assert_eq!(v["incomplete"], json!(expected));
    assert!(!f.files.verdicts.exists());
}

#[tokio::test]
async fn finalize_matches_the_direct_verdicts() {
    let f = fixture();
    let st = f.state();
    let mut direct = f.session.clone();
    direct.oracle_annotate(&f.corpus).unwrap();
    let expected = direct.finalize().unwrap();

    let items: Vec<String> = f.session.items().iter().map(|s| s.to_string()).collect();
    for id in &items {
        let (status, _) = label(&st, id, f.gold(id)).await;
        assert_eq!(status, StatusCode::OK);
    }
    let (status, v) = call(&st, "POST", "/api/session/finalize", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["verdicts"], serde_json::to_value(&expected).unwrap());
    assert_eq!(read_verdicts(&f.files.verdicts).unwrap(), expected);
    let reference = f.files.verdicts.with_extension("direct");
    write_verdicts(&reference, &expected).unwrap();
    assert_eq!(
        std::fs::read(&f.files.verdicts).unwrap(),
        std::fs::read(&reference).unwrap()
    );

    // Every label reached the journal and the snapshot.
    assert_eq!(read_journal(&f.files.journal).unwrap().len(), items.len());
    let saved = AnnotationSession::load(&f.files.session).unwrap();
    assert!(saved.finalized);
    assert_eq!(saved.annotations, direct.annotations);

    let (status, _) = label(&st, &items[0], 1).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[test]
fn busy_port_is_reported() {
    let held = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = held.local_addr().unwrap().port();
    match bind(port) {
        Err(PipelineError::PortBusy { port: p, .. }) => assert_eq!(p, port),
        other => panic!("expected PortBusy, got {other:?}"),
    }
}

fn http(port: u16, method: &str, path: &str, body: &str) -> String {
    let mut s = TcpStream::connect(("127.0.0.1", port)).unwrap();
    write!(
        s,
        "{method} {path} HTTP/1.1\r\nHost: localhost\r\nContent-Type: application/json\r\n\
         Content-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
    let mut out = String::new();
    s.read_to_string(&mut out).unwrap();
    out
}

#[test]
fn server_stops_after_finalize() {
    let f = fixture();
    let listener = bind(0).unwrap();
    let port = listener.local_addr().unwrap().port();
    let state = f.state();
    let handle = std::thread::spawn(move || serve_until_finalized(listener, state));
    let items: Vec<String> = f.session.items().iter().map(|s| s.to_string()).collect();
    for id in &items {
        let body = json!({ "label": f.gold(id) }).to_string();
        let resp = http(port, "POST", &format!("/api/item/{id}/label"), &body);
        assert!(resp.starts_with("HTTP/1.1 200"), "{resp}");
    }
    let resp = http(port, "POST", "/api/session/finalize", "");
    assert!(resp.starts_with("HTTP/1.1 200"), "{resp}");
    let session = handle.join().unwrap().unwrap();
    assert!(session.finalized);
    assert_eq!(session.annotations.len(), items.len());
}
