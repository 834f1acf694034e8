//! HTTP layer over [`bcaid_core::store::Store`].
//!
//! | method | path | body |
//! |--------|------|------|
//! | GET | `/api/genesets` | page of gene-set rows with roll-up |
//! | GET | `/api/search/advanced` | same, from up to nine predicates |
//! | GET | `/api/clusters/{cluster_id}` | cluster view |
//! | GET | `/api/clusters/{cluster_id}/genesets/{marker_type}` | gene-set detail |
//! | POST | `/api/clusters/{cluster_id}/submissions` | new community submission |
//! | GET | `/api/stats` | corpus counts |
//!
//! Errors are `{"error": {"code", "message"}}` with status 400, 404 or 500.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use bcaid_core::corpus::MarkerType;
use bcaid_core::store::{
    AdvancedField, AnnotationSource, Criteria, Predicate, SearchFilters, SearchQuery, SimpleField, Store,
    SubmissionDraft, SubmissionTarget, DEFAULT_PAGE_SIZE, DEFAULT_STATS_KEYWORD,
};
use bcaid_core::Error;
use serde::Deserialize;
use serde_json::json;
use tower_http::cors::{AllowOrigin, CorsLayer};

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    /// Origin allowed to call the API from a browser, e.g. the portal's URL.
    /// `*` allows any origin; `None` disables CORS headers.
    pub cors_origin: Option<String>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn validation(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            code: "validation",
            message: message.into(),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Validation(_) | Error::Parse { .. } => StatusCode::BAD_REQUEST,
            Error::NotFound(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            tracing::error!("request failed: {e}");
            return Self {
                status,
                code: "internal",
                message: "internal error".into(),
            };
        }
        Self {
            status,
            code: e.code(),
            message: e.to_string(),
        }
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        Self::validation(r.body_text())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        Self::validation(r.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "code": self.code, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Query parameters shared by both list endpoints.
#[derive(Debug, Default, Deserialize)]
pub struct ListParams {
    page: Option<usize>,
    page_size: Option<usize>,
    field: Option<String>,
    q: Option<String>,
    class: Option<String>,
    subclass: Option<String>,
    supertype: Option<String>,
    nt_type: Option<String>,
    marker_type: Option<String>,
    source: Option<String>,
}

fn non_empty(v: &Option<String>) -> Option<&str> {
    v.as_deref().map(str::trim).filter(|s| !s.is_empty())
}

impl ListParams {
    fn filters(&self) -> Result<SearchFilters, ApiError> {
        let owned = |v: &Option<String>| non_empty(v).map(String::from);
        Ok(SearchFilters {
            class: owned(&self.class),
            subclass: owned(&self.subclass),
            supertype: owned(&self.supertype),
            nt_type: owned(&self.nt_type),
            marker_type: non_empty(&self.marker_type).map(str::parse::<MarkerType>).transpose()?,
            source: non_empty(&self.source).map(str::parse::<AnnotationSource>).transpose()?,
        })
    }

    fn query(&self, criteria: Criteria) -> Result<SearchQuery, ApiError> {
        Ok(SearchQuery {
            criteria,
            filters: self.filters()?,
            page: self.page.unwrap_or(1),
            page_size: self.page_size.unwrap_or(DEFAULT_PAGE_SIZE),
        })
    }
}

/// `q` with no `field` searches annotation text.
async fn list_genesets(
    State(store): State<Arc<Store>>,
    params: Result<Query<ListParams>, QueryRejection>,
) -> Result<Response, ApiError> {
    let Query(p) = params?;
    let criteria = match (non_empty(&p.field), non_empty(&p.q)) {
        (_, None) => Criteria::All,
        (field, Some(q)) => Criteria::Simple {
            field: field.unwrap_or(SimpleField::Annotation.key()).parse()?,
            value: q.to_string(),
        },
    };
    Ok(Json(store.search(&p.query(criteria)?)?).into_response())
}

/// One optional parameter per advanced field; blank ones are ignored. The
/// `marker_type` parameter is a predicate here, not a filter.
async fn advanced_search(
    State(store): State<Arc<Store>>,
    params: Result<Query<std::collections::BTreeMap<String, String>>, QueryRejection>,
) -> Result<Response, ApiError> {
    let Query(raw) = params?;
    let mut predicates = Vec::new();
    for field in AdvancedField::ALL {
        if let Some(v) = raw.get(field.key()).map(|v| v.trim()).filter(|v| !v.is_empty()) {
            predicates.push(Predicate::new(*field, v));
        }
    }
    let number = |key: &str| -> Result<Option<usize>, ApiError> {
        raw.get(key)
            .map(|v| v.trim().parse().map_err(|_| ApiError::validation(format!("{key} must be a positive integer"))))
            .transpose()
    };
    let p = ListParams {
        page: number("page")?,
        page_size: number("page_size")?,
        subclass: raw.get("subclass").cloned(),
        source: raw.get("source").cloned(),
        ..Default::default()
    };
    Ok(Json(store.search(&p.query(Criteria::Advanced { predicates })?)?).into_response())
}

async fn cluster_view(State(store): State<Arc<Store>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(Json(store.get_cluster_view(&id)?).into_response())
}

async fn gene_set(
    State(store): State<Arc<Store>>,
    Path((id, marker)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let marker: MarkerType = marker.parse()?;
    Ok(Json(store.get_gene_set(&id, marker)?).into_response())
}

#[derive(Debug, Deserialize)]
pub struct SubmissionBody {
    scope: String,
    field: String,
    proposed_text: String,
    author: String,
    #[serde(default)]
    contact: Option<String>,
}

async fn submit(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    body: Result<Json<SubmissionBody>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(b) = body?;
    let draft = SubmissionDraft {
        target: SubmissionTarget {
            cluster_id: id,
            scope: b.scope,
            field: b.field,
        },
        proposed_text: b.proposed_text,
        author: b.author,
        contact: b.contact,
    };
    // the journal append does blocking file I/O
    let created = tokio::task::spawn_blocking(move || store.submit_edit(draft))
        .await
        .map_err(|e| ApiError::from(Error::Integrity(format!("submission task: {e}"))))??;
    Ok((StatusCode::CREATED, Json(created)).into_response())
}

#[derive(Debug, Deserialize)]
pub struct StatsParams {
    keyword: Option<String>,
}

async fn stats(
    State(store): State<Arc<Store>>,
    params: Result<Query<StatsParams>, QueryRejection>,
) -> ApiResult<bcaid_core::store::StoreStats> {
    let Query(p) = params?;
    Ok(Json(store.stats(non_empty(&p.keyword).unwrap_or(DEFAULT_STATS_KEYWORD))))
}

async fn not_found() -> ApiError {
    ApiError {
        status: StatusCode::NOT_FOUND,
        code: "not_found",
        message: "no such endpoint".into(),
    }
}

fn cors(origin: &str) -> Result<CorsLayer, Error> {
    let allow = if origin == "*" {
        AllowOrigin::any()
    } else {
        let value = HeaderValue::from_str(origin)
            .map_err(|e| Error::Config(format!("bad CORS origin {origin:?}: {e}")))?;
        AllowOrigin::exact(value)
    };
    Ok(CorsLayer::new()
        .allow_origin(allow)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([axum::http::header::CONTENT_TYPE]))
}

pub fn router(store: Arc<Store>, config: &ServiceConfig) -> Result<Router, Error> {
    let mut app = Router::new()
        .route("/api/genesets", get(list_genesets))
        .route("/api/search/advanced", get(advanced_search))
        .route("/api/clusters/{cluster_id}", get(cluster_view))
        .route("/api/clusters/{cluster_id}/genesets/{marker_type}", get(gene_set))
        .route("/api/clusters/{cluster_id}/submissions", axum::routing::post(submit))
        .route("/api/stats", get(stats))
        .fallback(not_found)
        .with_state(store);
    if let Some(origin) = config.cors_origin.as_deref() {
        app = app.layer(cors(origin)?);
    }
    Ok(app)
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(addr: SocketAddr, store: Arc<Store>, config: &ServiceConfig) -> Result<(), Error> {
    let app = router(store, config)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app).await?;
    Ok(())
}
