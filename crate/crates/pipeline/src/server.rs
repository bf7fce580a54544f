//! JSON-over-HTTP annotation service for one refinement session.
//!
//! Every label is appended to the journal and the session snapshot is
//! rewritten before the request is acknowledged. Every response body carries
//! the session revision.

use std::net::{Ipv4Addr, SocketAddr, TcpListener};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use log::info;
use patdiag_core::corpus::{Corpus, EntitySpan};
use patdiag_core::refinement::{
    append_journal, classify, parse_label, write_verdicts, AnnotationSession, JournalEntry,
    RefinementError, VerdictClass,
};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Notify;

use crate::store::ArtifactStore;
use crate::PipelineError;

#[derive(Clone, Debug)]
pub struct SessionFiles {
    pub session: PathBuf,
    pub journal: PathBuf,
    pub verdicts: PathBuf,
}

impl SessionFiles {
    pub fn from_store(store: &ArtifactStore) -> Self {
        SessionFiles {
            session: store.session(),
            journal: store.journal(),
            verdicts: store.verdicts(),
        }
    }
}

struct Inner {
    session: AnnotationSession,
    corpus: Corpus,
    files: SessionFiles,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Mutex<Inner>>,
    finalized: Arc<Notify>,
}

impl AppState {
    pub fn new(session: AnnotationSession, corpus: Corpus, files: SessionFiles) -> Self {
        AppState {
            inner: Arc::new(Mutex::new(Inner {
                session,
                corpus,
                files,
            })),
            finalized: Arc::new(Notify::new()),
        }
    }

    pub fn session(&self) -> AnnotationSession {
        self.inner.lock().expect("session lock").session.clone()
    }
}

#[derive(Debug, Serialize)]
struct ItemView {
    id: String,
    tokens: Vec<String>,
    head: EntitySpan,
    tail: EntitySpan,
    /// Patterns under which this item was sampled.
    patterns: Vec<String>,
    label: Option<i8>,
}

#[derive(Debug, Serialize)]
struct PatternView {
    pattern: String,
    items: usize,
    labeled: usize,
    positive: usize,
    accuracy: Option<f64>,
    /// Verdict once every item of the pattern is labelled.
    class: Option<VerdictClass>,
}

#[derive(Debug, Deserialize)]
struct LabelBody {
    label: i64,
}

fn error(status: StatusCode, revision: u64, message: String) -> Response {
    (
        status,
        Json(json!({ "revision": revision, "error": message })),
    )
        .into_response()
}

fn item_view(inner: &Inner, id: &str) -> Option<ItemView> {
    let inst = inner.corpus.get(id)?;
    let patterns = inner
        .session
        .patterns
        .iter()
        .filter(|p| p.items.iter().any(|i| i == id))
        .map(|p| p.pattern.to_string())
        .collect();
    Some(ItemView {
        id: id.to_string(),
        tokens: inst.tokens.clone(),
        head: inst.head.clone(),
        tail: inst.tail.clone(),
        patterns,
        label: inner.session.label(id).map(|l| l.sign()),
    })
}

fn progress(s: &AnnotationSession) -> serde_json::Value {
    let items = s.items();
    let labeled = items.iter().filter(|i| s.label(i).is_some()).count();
    json!({ "labeled": labeled, "total": items.len() })
}

fn pattern_views(s: &AnnotationSession) -> Vec<PatternView> {
    s.progress()
        .into_iter()
        .map(|p| PatternView {
            pattern: p.pattern.to_string(),
            class: (p.labeled == p.items)
                .then(|| classify(p.positive as f64 / p.items as f64, s.p_h, s.p_l)),
            items: p.items,
            labeled: p.labeled,
            positive: p.positive,
            accuracy: p.accuracy,
        })
        .collect()
}

async fn get_session(State(st): State<AppState>) -> Response {
    let inner = st.inner.lock().expect("session lock");
    let s = &inner.session;
    Json(json!({
        "revision": s.revision,
        "relation": s.relation,
        "p_h": s.p_h,
        "p_l": s.p_l,
        "finalized": s.finalized,
        "complete": s.is_complete(),
        "progress": progress(s),
        "patterns": pattern_views(s),
    }))
    .into_response()
}

async fn get_next(State(st): State<AppState>) -> Response {
    let inner = st.inner.lock().expect("session lock");
    let item = inner
        .session
        .next_pending()
        .and_then(|id| item_view(&inner, id));
    Json(json!({
        "revision": inner.session.revision,
        "item": item,
        "progress": progress(&inner.session),
    }))
    .into_response()
}

async fn get_item(State(st): State<AppState>, Path(id): Path<String>) -> Response {
    let inner = st.inner.lock().expect("session lock");
    let rev = inner.session.revision;
    if !inner.session.contains(&id) {
        return error(StatusCode::NOT_FOUND, rev, format!("unknown item {id:?}"));
    }
    match item_view(&inner, &id) {
        Some(item) => Json(json!({ "revision": rev, "item": item })).into_response(),
        None => error(StatusCode::NOT_FOUND, rev, format!("unknown item {id:?}")),
    }
}

async fn post_label(
    State(st): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<LabelBody>, JsonRejection>,
) -> Response {
    let mut inner = st.inner.lock().expect("session lock");
    let rev = inner.session.revision;
    if !inner.session.contains(&id) {
        return error(StatusCode::NOT_FOUND, rev, format!("unknown item {id:?}"));
    }
    let label = match body {
        Ok(Json(b)) => match parse_label(b.label) {
            Ok(l) => l,
            Err(e) => return error(StatusCode::BAD_REQUEST, rev, e.to_string()),
        },
        Err(e) => return error(StatusCode::BAD_REQUEST, rev, e.body_text()),
    };
    if inner.session.finalized {
        return error(
            StatusCode::CONFLICT,
            rev,
            RefinementError::Finalized.to_string(),
        );
    }
    let mut next = inner.session.clone();
    let ts = match next.record(&id, label) {
        Ok(ts) => ts,
        Err(e) => return error(StatusCode::BAD_REQUEST, rev, e.to_string()),
    };
    let entry = JournalEntry {
        ts,
        instance_id: id.clone(),
        label: label.sign() as i64,
    };
    let persisted =
        append_journal(&inner.files.journal, &entry).and_then(|_| next.save(&inner.files.session));
    if let Err(e) = persisted {
        return error(StatusCode::INTERNAL_SERVER_ERROR, rev, e.to_string());
    }
    inner.session = next;
    Json(json!({
        "revision": ts,
        "item_id": id,
        "label": label.sign(),
        "progress": progress(&inner.session),
    }))
    .into_response()
}

async fn get_patterns(State(st): State<AppState>) -> Response {
    let inner = st.inner.lock().expect("session lock");
    let s = &inner.session;
    Json(json!({
        "revision": s.revision,
        "p_h": s.p_h,
        "p_l": s.p_l,
        "patterns": pattern_views(s),
    }))
    .into_response()
}

async fn finalize(State(st): State<AppState>) -> Response {
    let mut inner = st.inner.lock().expect("session lock");
    let rev = inner.session.revision;
    let mut next = inner.session.clone();
    match next.finalize() {
        Ok(verdicts) => {
            let persisted = write_verdicts(&inner.files.verdicts, &verdicts)
                .and_then(|_| next.save(&inner.files.session));
            if let Err(e) = persisted {
                return error(StatusCode::INTERNAL_SERVER_ERROR, rev, e.to_string());
            }
            inner.session = next;
            st.finalized.notify_one();
            Json(json!({ "revision": inner.session.revision, "verdicts": verdicts }))
                .into_response()
        }
        Err(RefinementError::Incomplete(patterns)) => (
            StatusCode::CONFLICT,
            Json(json!({
                "revision": rev,
                "error": "patterns with unlabelled items",
                "incomplete": patterns,
            })),
        )
            .into_response(),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, rev, e.to_string()),
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/session", get(get_session))
        .route("/api/session/next", get(get_next))
        .route("/api/session/finalize", post(finalize))
        .route("/api/item/{id}", get(get_item))
        .route("/api/item/{id}/label", post(post_label))
        .route("/api/patterns", get(get_patterns))
        .with_state(state)
}

/// Binds the service to localhost; fails if the port is taken.
pub fn bind(port: u16) -> Result<TcpListener, PipelineError> {
    let addr = SocketAddr::from((Ipv4Addr::LOCALHOST, port));
    let l = TcpListener::bind(addr).map_err(|source| PipelineError::PortBusy { port, source })?;
    l.set_nonblocking(true)
        .map_err(|source| PipelineError::PortBusy { port, source })?;
    Ok(l)
}

/// Serves until the session is finalized, then returns the final session.
pub fn serve_until_finalized(
    listener: TcpListener,
    state: AppState,
) -> Result<AnnotationSession, PipelineError> {
    let rt = tokio::runtime::Builder::new_current_thread()
        .enable_io()
        .build()
        .map_err(|e| PipelineError::io(std::path::Path::new("<runtime>"), e))?;
    let done = state.finalized.clone();
    let app = router(state.clone());
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::from_std(listener)?;
        axum::serve(listener, app)
            .with_graceful_shutdown(async move { done.notified().await })
            .await
    })
    .map_err(|e| PipelineError::io(std::path::Path::new("<server>"), e))?;
    Ok(state.session())
}

pub fn run_blocking(
    session: AnnotationSession,
    corpus: Corpus,
    files: SessionFiles,
    port: u16,
) -> Result<AnnotationSession, PipelineError> {
    let listener = bind(port)?;
    let addr = listener
        .local_addr()
        .map_err(|source| PipelineError::PortBusy { port, source })?;
    info!("annotation service listening on http://{addr}");
    serve_until_finalized(listener, AppState::new(session, corpus, files))
}
