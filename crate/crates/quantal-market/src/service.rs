//! JSON over HTTP: the schema, scenario forecasts and WTP slices.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use quantal_market_core::covariates::{Field, Population};
use quantal_market_core::schema::{AttributeSchema, Cell, Season};
use quantal_market_core::wtp::cell_entries;
use quantal_market_core::{Error as CoreError, Model};
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;

use crate::error::AppError;
use crate::io::category_name;
use crate::simulation::{self, ScenarioRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadRequest,
    UnknownCut,
    Infeasible,
    Internal,
}

impl ErrorCode {
    fn status(self) -> StatusCode {
        match self {
            ErrorCode::BadRequest => StatusCode::BAD_REQUEST,
            ErrorCode::UnknownCut => StatusCode::NOT_FOUND,
            ErrorCode::Infeasible => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    pub detail: String,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: &str, detail: impl ToString) -> ApiError {
        ApiError { code, message: message.to_string(), detail: detail.to_string() }
    }
}

impl From<AppError> for ApiError {
    fn from(e: AppError) -> ApiError {
        match &e {
            AppError::Core(CoreError::UnknownCut(_)) => ApiError::new(ErrorCode::UnknownCut, "unknown cut", &e),
            AppError::Core(CoreError::Infeasible(_)) => ApiError::new(ErrorCode::Infeasible, "infeasible parameters", &e),
            AppError::Core(CoreError::Numerical(_)) | AppError::Io { .. } => {
                ApiError::new(ErrorCode::Internal, "internal error", &e)
            }
            _ => ApiError::new(ErrorCode::BadRequest, "invalid request", &e),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.code.status(), axum::Json(self)).into_response()
    }
}

/// Immutable state shared by all requests.
pub struct AppState {
    pub schema: AttributeSchema,
    pub model: Model,
    pub population: Population,
    schema_document: String,
}

/// Schema document for building scenario forms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaDocument {
    pub schema: AttributeSchema,
    pub seasons: Vec<Season>,
    /// Profile fields and their categories.
    pub profile_fields: BTreeMap<String, Vec<String>>,
    /// Cells the loaded model covers.
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WtpValue {
    pub attribute: String,
    pub level: String,
    /// Absent where the attribute has no coefficient in the cell.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WtpSlice {
    pub cut: String,
    pub season: Season,
    pub entries: Vec<WtpValue>,
}

pub fn schema_document(schema: &AttributeSchema, model: &Model, population: &Population) -> SchemaDocument {
    let profile_fields = Field::ALL
        .iter()
        .map(|f| (f.as_str().to_string(), population.shares(*f).iter().map(|(c, _)| category_name(*f, *c)).collect()))
        .collect();
    SchemaDocument { schema: schema.clone(), seasons: Season::ALL.to_vec(), profile_fields, cells: model.cells() }
}

impl AppState {
    pub fn new(schema: AttributeSchema, model: Model, population: Population) -> Result<AppState, AppError> {
        model.validate(&schema)?;
        let doc = schema_document(&schema, &model, &population);
        let schema_document = serde_json::to_string(&doc).map_err(|e| AppError::format("schema", e))?;
        Ok(AppState { schema, model, population, schema_document })
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/schema", get(get_schema))
        .route("/simulate", post(post_simulate))
        .route("/wtp", get(get_wtp))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

fn json(body: String) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], body).into_response()
}

async fn get_schema(State(s): State<Arc<AppState>>) -> Response {
    json(s.schema_document.clone())
}

async fn post_simulate(State(s): State<Arc<AppState>>, body: Bytes) -> Response {
    let req: ScenarioRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return ApiError::new(ErrorCode::BadRequest, "request body is not a valid scenario", e).into_response(),
    };
    match simulation::run(&s.schema, &s.model, &s.population, &req) {
        Ok(out) => match serde_json::to_string(&out) {
            Ok(b) => json(b),
            Err(e) => ApiError::new(ErrorCode::Internal, "internal error", e).into_response(),
        },
        Err(e) => ApiError::from(e).into_response(),
    }
}

#[derive(Debug, Deserialize)]
struct WtpQuery {
    cut: Option<String>,
    season: Option<String>,
}

pub fn wtp_slice(state: &AppState, cut: &str, season: &str) -> Result<WtpSlice, ApiError> {
    state.schema.check_cut(cut).map_err(|e| ApiError::from(AppError::from(e)))?;
    let season: Season = season.parse().map_err(|e| ApiError::new(ErrorCode::BadRequest, "invalid season", e))?;
    let cell = Cell::new(cut, season);
    if !state.model.has_cell(&cell) {
        return Err(ApiError::new(ErrorCode::UnknownCut, "the model does not cover this cut and season", &cell));
    }
    let entries = cell_entries(&state.schema, &state.model, &cell).map_err(|e| ApiError::from(AppError::from(e)))?;
    Ok(WtpSlice {
        cut: cut.to_string(),
        season,
        entries: entries.into_iter().map(|e| WtpValue { attribute: e.attribute, level: e.level, value: e.value }).collect(),
    })
}

async fn get_wtp(State(s): State<Arc<AppState>>, q: Query<WtpQuery>) -> Response {
    let (Some(cut), Some(season)) = (q.cut.as_deref(), q.season.as_deref()) else {
        return ApiError::new(ErrorCode::BadRequest, "cut and season are required", "").into_response();
    };
    match wtp_slice(&s, cut, season) {
        Ok(slice) => axum::Json(slice).into_response(),
        Err(e) => e.into_response(),
    }
}

/// Serves until interrupted.
pub async fn serve(state: AppState, listen: &str) -> Result<(), AppError> {
    let listener = tokio::net::TcpListener::bind(listen)
        .await
        .map_err(|e| AppError::Io { path: listen.to_string(), source: e })?;
    let addr = listener.local_addr().map_err(|e| AppError::Io { path: listen.to_string(), source: e })?;
    eprintln!("listening on http://{addr}");
    axum::serve(listener, router(Arc::new(state)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| AppError::Io { path: listen.to_string(), source: e })
}
