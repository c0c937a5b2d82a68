//! HTTP/JSON facade over one [`Session`].
//!
//! Every handler maps onto a single session operation. Solves run on the
//! blocking pool; while one is in flight, mutating requests get 409 and
//! `POST /api/reset` cancels it.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;

use sheetfd::compiler::emit_clp;
use sheetfd::fdsolver::{SearchConfig, SolveError};
use sheetfd::grid::{Workbook, WorkbookJson};
use sheetfd::session::{Session, SessionError, View};
use sheetfd::Diagnostic;

struct Shared {
    session: Session,
    /// Cancellation flag of the solve in flight, if any.
    solving: Option<Arc<AtomicBool>>,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Mutex<Shared>>,
}

impl AppState {
    pub fn new(workbook: Workbook) -> Self {
        AppState::with_config(workbook, SearchConfig::default())
    }

    pub fn with_config(workbook: Workbook, config: SearchConfig) -> Self {
        let shared = Shared { session: Session::with_config(workbook, config), solving: None };
        AppState { inner: Arc::new(Mutex::new(shared)) }
    }

    fn lock(&self) -> MutexGuard<'_, Shared> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StateBody {
    pub solution_count: usize,
    pub cursor: usize,
    pub view: View,
    pub can_next: bool,
    pub can_prev: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<i64>,
    pub grid: WorkbookJson,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StatusBody {
    pub view: View,
    pub cursor: usize,
    pub solution_count: usize,
    pub can_next: bool,
    pub can_prev: bool,
    pub solving: bool,
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: Diagnostic,
}

pub struct ApiError {
    status: StatusCode,
    diag: Diagnostic,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError { status, diag: Diagnostic::new(code, message) }
    }

    fn busy() -> Self {
        ApiError::new(StatusCode::CONFLICT, "SOLVE_IN_PROGRESS", "a solve is already running")
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match e {
            SessionError::Compile(_) | SessionError::Unsatisfiable => StatusCode::UNPROCESSABLE_ENTITY,
            SessionError::Solve(SolveError::NodeLimitExceeded(_)) | SessionError::Solve(SolveError::Unsatisfiable) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            SessionError::Solve(SolveError::Cancelled) | SessionError::Stale | SessionError::NoSolutions => {
                StatusCode::CONFLICT
            }
        };
        let diag = match e {
            SessionError::Stale => Diagnostic::new("CANCELLED", "the solve was cancelled or superseded"),
            other => other.to_diagnostic(),
        };
        ApiError { status, diag }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { error: self.diag })).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn state_body(s: &Session) -> StateBody {
    let st = s.status();
    StateBody {
        solution_count: st.solution_count,
        cursor: st.cursor,
        view: st.view,
        can_next: st.can_next,
        can_prev: st.can_prev,
        objective: st.objective,
        grid: s.workbook().to_json(),
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/workbook", get(get_workbook).put(put_workbook))
        .route("/api/solve", post(solve))
        .route("/api/next", post(next))
        .route("/api/prev", post(prev))
        .route("/api/reset", post(reset))
        .route("/api/clp", get(clp))
        .route("/api/status", get(status))
        .with_state(state)
}

async fn get_workbook(State(app): State<AppState>) -> Json<WorkbookJson> {
    Json(app.lock().session.workbook().to_json())
}

async fn put_workbook(State(app): State<AppState>, body: Bytes) -> ApiResult<Json<StateBody>> {
    let doc: WorkbookJson = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "INVALID_WORKBOOK", e.to_string()))?;
    let wb = Workbook::from_json(doc)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "INVALID_WORKBOOK", e.to_string()))?;
    let mut g = app.lock();
    if g.solving.is_some() {
        return Err(ApiError::busy());
    }
    g.session.replace_workbook(wb);
    Ok(Json(state_body(&g.session)))
}

async fn solve(State(app): State<AppState>) -> ApiResult<Json<StateBody>> {
    let (job, cancel) = {
        let mut g = app.lock();
        if g.solving.is_some() {
            return Err(ApiError::busy());
        }
        let job = g.session.begin_build()?;
        let cancel = Arc::new(AtomicBool::new(false));
        g.solving = Some(cancel.clone());
        (job, cancel)
    };
    let run = {
        let job = job.clone();
        let cancel = cancel.clone();
        tokio::task::spawn_blocking(move || job.run(Some(cancel)))
    };
    let result = run.await.unwrap_or(Err(SolveError::Cancelled));
    let mut g = app.lock();
    if g.solving.as_ref().is_some_and(|c| Arc::ptr_eq(c, &cancel)) {
        g.solving = None;
    }
    g.session.complete_build(&job, result)?;
    Ok(Json(state_body(&g.session)))
}

async fn next(State(app): State<AppState>) -> ApiResult<Json<StateBody>> {
    let mut g = app.lock();
    if g.solving.is_some() {
        return Err(ApiError::busy());
    }
    g.session.next_solution()?;
    Ok(Json(state_body(&g.session)))
}

async fn prev(State(app): State<AppState>) -> ApiResult<Json<StateBody>> {
    let mut g = app.lock();
    if g.solving.is_some() {
        return Err(ApiError::busy());
    }
    g.session.previous_solution()?;
    Ok(Json(state_body(&g.session)))
}

/// Back to the original grid; also cancels a solve in flight.
async fn reset(State(app): State<AppState>) -> Json<StateBody> {
    let mut g = app.lock();
    if let Some(flag) = g.solving.take() {
        flag.store(true, Ordering::Relaxed);
        g.session.abandon_build();
    }
    g.session.original_state();
    Json(state_body(&g.session))
}

async fn clp(State(app): State<AppState>) -> ApiResult<Response> {
    let wb = app.lock().session.original_workbook();
    let text = emit_clp(&wb).map_err(|e| ApiError::from(SessionError::Compile(e)))?;
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], text).into_response())
}

async fn status(State(app): State<AppState>) -> Json<StatusBody> {
    let g = app.lock();
    let st = g.session.status();
    Json(StatusBody {
        view: st.view,
        cursor: st.cursor,
        solution_count: st.solution_count,
        can_next: st.can_next,
        can_prev: st.can_prev,
        solving: g.solving.is_some(),
    })
}

/// Binds `addr` and serves until Ctrl-C.
pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
