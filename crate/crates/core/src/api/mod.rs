//! HTTP surface: JSON endpoints under `/v1`.

mod error;

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub use error::{ApiError, ErrorBody};

use crate::geo::{BBox, GeoPoint};
use crate::ids::{AnnotationId, DomainId, JobId, SubscriptionId, TagId};
use crate::jobs::{JobSpec, QueryContext, TrainingSample};
use crate::service::{IngestOutcome, Service};
use crate::tagstore::{AnnotationFilter, Annotator, EntityClause, NewAnnotation, Tag, TagDomain, TimeWindow};
use crate::time::{self, Timestamp};

pub const DEFAULT_PAGE_LIMIT: usize = 100;
pub const MAX_PAGE_LIMIT: usize = 1000;
pub const ANNOTATOR_HEADER: &str = "x-annotator";
const DEFAULT_ANNOTATOR: &str = "anonymous";

type Shared = Arc<Service>;
type ApiResult<T> = Result<T, ApiError>;
type Params = Query<HashMap<String, String>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Page<T> {
    pub items: Vec<T>,
    pub total: usize,
    pub offset: usize,
    pub limit: usize,
}

impl<T> Page<T> {
    fn slice(all: Vec<T>, params: &HashMap<String, String>) -> ApiResult<Page<T>> {
        let offset = usize_param(params, "offset")?.unwrap_or(0);
        let limit = usize_param(params, "limit")?
            .unwrap_or(DEFAULT_PAGE_LIMIT)
            .min(MAX_PAGE_LIMIT);
        let total = all.len();
        let items = all.into_iter().skip(offset).take(limit).collect();
        Ok(Page {
            items,
            total,
            offset,
            limit,
        })
    }
}

fn usize_param(params: &HashMap<String, String>, key: &str) -> ApiResult<Option<usize>> {
    params
        .get(key)
        .map(|v| {
            v.parse::<usize>().map_err(|_| {
                ApiError::new(
                    StatusCode::UNPROCESSABLE_ENTITY,
                    "invalid_pagination",
                    format!("{key} must be a non-negative integer"),
                )
            })
        })
        .transpose()
}

/// Parses a JSON body. Syntax errors are 400, shape errors 422.
fn body<T: DeserializeOwned>(bytes: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(bytes).map_err(|e| {
        if e.is_data() {
            ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_body", e.to_string())
        } else {
            ApiError::new(StatusCode::BAD_REQUEST, "malformed_json", e.to_string())
        }
    })
}

fn created<T: Serialize>(location: String, value: &T) -> Response {
    (StatusCode::CREATED, [(header::LOCATION, location)], Json(value)).into_response()
}

pub fn router(svc: Shared) -> Router {
    Router::new()
        .route("/v1/jobs", get(list_jobs).post(create_job))
        .route("/v1/jobs/{id}", get(get_job).put(update_job).delete(delete_job))
        .route("/v1/jobs/{id}/train", post(train_job))
        .route("/v1/jobs/{id}/start", post(start_job))
        .route("/v1/jobs/{id}/stop", post(stop_job))
        .route("/v1/tagdomains", get(list_domains).post(create_domain))
        .route("/v1/tagdomains/{id}", get(get_domain))
        .route("/v1/tagdomains/{id}/tags", post(add_tag))
        .route("/v1/tagdomains/{id}/suggest", get(suggest))
        .route("/v1/tags/relate", post(relate))
        .route("/v1/annotations", get(query_annotations).post(create_annotation))
        .route("/v1/annotations/entities", get(query_entities))
        .route("/v1/annotations/{id}", get(get_annotation))
        .route("/v1/notify", post(ingest))
        .route("/v1/observations", post(ingest))
        .route("/v1/subscriptions", get(list_subscriptions).post(create_subscription))
        .route("/v1/subscriptions/{id}", get(get_subscription).delete(delete_subscription))
        .route("/v1/health", get(health))
        .route("/v1/metrics", get(metrics))
        .fallback(|| async { ApiError::not_found("not_found", "no such endpoint") })
        .method_not_allowed_fallback(|| async {
            ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "method_not_allowed", "method not allowed")
        })
        .with_state(svc)
}

// ---- jobs

async fn list_jobs(State(svc): State<Shared>, Query(p): Params) -> ApiResult<Response> {
    Ok(Json(Page::slice(svc.jobs.list(), &p)?).into_response())
}

async fn create_job(State(svc): State<Shared>, raw: Bytes) -> ApiResult<Response> {
    let spec: JobSpec = body(&raw)?;
    let job = svc.jobs.create_job(spec)?;
    Ok(created(format!("/v1/jobs/{}", job.id), &job))
}

async fn get_job(State(svc): State<Shared>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(svc.jobs.get(&JobId::from(id))?).into_response())
}

async fn update_job(State(svc): State<Shared>, Path(id): Path<String>, raw: Bytes) -> ApiResult<Response> {
    let id = JobId::from(id);
    svc.jobs.get(&id)?;
    let spec: JobSpec = body(&raw)?;
    Ok(Json(svc.jobs.update_job(&id, spec)?).into_response())
}

async fn delete_job(State(svc): State<Shared>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(svc.jobs.delete_job(&JobId::from(id))?).into_response())
}

#[derive(Debug, Deserialize)]
struct TrainRequest {
    samples: Vec<TrainingSample>,
}

async fn train_job(State(svc): State<Shared>, Path(id): Path<String>, raw: Bytes) -> ApiResult<Response> {
    let id = JobId::from(id);
    svc.jobs.get(&id)?;
    let req: TrainRequest = body(&raw)?;
    let job = tokio::task::spawn_blocking(move || svc.jobs.submit_training(&id, &req.samples))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(Json(job).into_response())
}

async fn start_job(State(svc): State<Shared>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(svc.jobs.start_job(&JobId::from(id))?).into_response())
}

async fn stop_job(State(svc): State<Shared>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(svc.jobs.stop_job(&JobId::from(id))?).into_response())
}

// ---- tag domains

/// A domain with its tags expanded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainView {
    #[serde(flatten)]
    pub domain: TagDomain,
    pub tags: Vec<Tag>,
}

fn domain_view(svc: &Service, d: TagDomain) -> DomainView {
    let tags = svc.store.domain_tags(&d.id).unwrap_or_default();
    DomainView { domain: d, tags }
}

#[derive(Debug, Deserialize)]
struct NewDomain {
    name: String,
    #[serde(default)]
    description: String,
    tags: Vec<String>,
}

async fn list_domains(State(svc): State<Shared>, Query(p): Params) -> ApiResult<Response> {
    let mut all = svc.store.domains();
    all.sort_by(|a, b| a.id.cmp(&b.id));
    let views = all.into_iter().map(|d| domain_view(&svc, d)).collect();
    Ok(Json(Page::slice(views, &p)?).into_response())
}

async fn create_domain(State(svc): State<Shared>, raw: Bytes) -> ApiResult<Response> {
    let req: NewDomain = body(&raw)?;
    let d = svc.store.create_tag_domain(&req.name, &req.description, &req.tags)?;
    let loc = format!("/v1/tagdomains/{}", d.id);
    Ok(created(loc, &domain_view(&svc, d)))
}

fn known_domain(svc: &Service, id: String) -> ApiResult<TagDomain> {
    let id = DomainId::from(id);
    svc.store
        .domain(&id)
        .ok_or_else(|| ApiError::not_found("unknown_domain", format!("unknown tag domain {id}")))
}

async fn get_domain(State(svc): State<Shared>, Path(id): Path<String>) -> ApiResult<Response> {
    let d = known_domain(&svc, id)?;
    Ok(Json(domain_view(&svc, d)).into_response())
}

#[derive(Debug, Deserialize)]
struct NewTag {
    name: String,
}

async fn add_tag(State(svc): State<Shared>, Path(id): Path<String>, raw: Bytes) -> ApiResult<Response> {
    let d = known_domain(&svc, id)?;
    let req: NewTag = body(&raw)?;
    let tag = svc.store.add_tag(&d.id, &req.name)?;
    Ok(created(format!("/v1/tagdomains/{}", d.id), &tag))
}

fn csv_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

async fn suggest(State(svc): State<Shared>, Path(id): Path<String>, Query(p): Params) -> ApiResult<Response> {
    let d = known_domain(&svc, id)?;
    let seeds: Vec<TagId> = p
        .get("seeds")
        .map(|s| csv_list(s).into_iter().map(TagId::from).collect())
        .unwrap_or_default();
    Ok(Json(svc.store.suggest_tags(&d.id, &seeds)?).into_response())
}

#[derive(Debug, Deserialize)]
struct RelateRequest {
    tag_a: TagId,
    tag_b: TagId,
}

async fn relate(State(svc): State<Shared>, raw: Bytes) -> ApiResult<Response> {
    let req: RelateRequest = body(&raw)?;
    svc.store.relate_tags(&req.tag_a, &req.tag_b)?;
    let a = svc.store.tag(&req.tag_a);
    let b = svc.store.tag(&req.tag_b);
    Ok(Json([a, b]).into_response())
}

// ---- annotations

/// Manual annotation body; the annotator comes from the request header.
#[derive(Debug, Deserialize)]
struct ManualAnnotation {
    entity_id: String,
    attribute: String,
    tag_id: TagId,
    #[serde(with = "time::rfc3339")]
    time_from: Timestamp,
    #[serde(with = "time::rfc3339")]
    time_to: Timestamp,
    #[serde(default)]
    location: Option<GeoPoint>,
    #[serde(default)]
    numeric_value: Option<f64>,
    #[serde(default)]
    text_value: Option<String>,
    #[serde(default)]
    confidence: Option<f64>,
}

async fn create_annotation(State(svc): State<Shared>, headers: HeaderMap, raw: Bytes) -> ApiResult<Response> {
    let req: ManualAnnotation = body(&raw)?;
    let who = headers
        .get(ANNOTATOR_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .unwrap_or(DEFAULT_ANNOTATOR);
    let a = svc.store.record_annotation(NewAnnotation {
        entity_id: req.entity_id,
        attribute: req.attribute,
        tag_id: req.tag_id,
        time_from: req.time_from,
        time_to: req.time_to,
        location: req.location,
        numeric_value: req.numeric_value,
        text_value: req.text_value,
        confidence: req.confidence,
        annotator: Annotator::User(who.to_owned()),
    })?;
    Ok(created(format!("/v1/annotations/{}", a.id), &a))
}

fn time_param(p: &HashMap<String, String>, key: &str) -> ApiResult<Option<Timestamp>> {
    p.get(key)
        .map(|v| time::parse(v).map_err(|e| ApiError::malformed_filter(format!("{key}: {e}"))))
        .transpose()
}

fn window_param(p: &HashMap<String, String>) -> ApiResult<TimeWindow> {
    Ok(TimeWindow {
        from: time_param(p, "from")?,
        to: time_param(p, "to")?,
    })
}

fn bbox_param(p: &HashMap<String, String>) -> ApiResult<Option<BBox>> {
    match p.get("bbox") {
        None => Ok(None),
        Some(s) => match BBox::parse(s) {
            Some(b) if b.is_well_formed() => Ok(Some(b)),
            Some(_) => Err(ApiError::malformed_filter("bbox min exceeds max")),
            None => Err(ApiError::malformed_filter("bbox must be minLon,minLat,maxLon,maxLat")),
        },
    }
}

fn known_tag(svc: &Service, id: &TagId) -> ApiResult<()> {
    match svc.store.tag(id) {
        Some(_) => Ok(()),
        None => Err(ApiError::not_found("unknown_tag", format!("unknown tag {id}"))),
    }
}

async fn query_annotations(State(svc): State<Shared>, Query(p): Params) -> ApiResult<Response> {
    let tag_id = p.get("tag").map(|t| TagId::from(t.as_str()));
    if let Some(t) = &tag_id {
        known_tag(&svc, t)?;
    }
    let domain_id = match p.get("domain") {
        Some(d) => Some(known_domain(&svc, d.clone())?.id),
        None => None,
    };
    let window = window_param(&p)?;
    let filter = AnnotationFilter {
        entity_id: p.get("entity").cloned(),
        tag_id,
        domain_id,
        window: (window != TimeWindow::unbounded()).then_some(window),
        bbox: bbox_param(&p)?,
    };
    let all = svc.store.query_annotations(&filter)?;
    Ok(Json(Page::slice(all, &p)?).into_response())
}

async fn query_entities(State(svc): State<Shared>, Query(p): Params) -> ApiResult<Response> {
    let spec = p
        .get("tags")
        .map(|s| csv_list(s))
        .filter(|v| !v.is_empty())
        .ok_or_else(|| ApiError::malformed_filter("tags is required"))?;
    let mut clauses = Vec::with_capacity(spec.len());
    for item in spec {
        let (tag, attr) = match item.split_once('@') {
            Some((t, a)) => (t.to_owned(), Some(a.to_owned())),
            None => (item, None),
        };
        let tag_id = TagId::from(tag);
        known_tag(&svc, &tag_id)?;
        clauses.push(EntityClause {
            tag_id,
            attribute: attr,
        });
    }
    let window = window_param(&p)?;
    let bbox = bbox_param(&p)?;
    let all = svc.store.conjunctive_entity_query(&clauses, &window, bbox.as_ref())?;
    Ok(Json(Page::slice(all, &p)?).into_response())
}

async fn get_annotation(State(svc): State<Shared>, Path(id): Path<String>) -> ApiResult<Response> {
    let id = AnnotationId::from(id);
    let a = svc
        .store
        .annotation(&id)
        .ok_or_else(|| ApiError::not_found("unknown_annotation", format!("unknown annotation {id}")))?;
    Ok(Json(a).into_response())
}

// ---- ingestion

async fn ingest(State(svc): State<Shared>, raw: Bytes) -> ApiResult<Response> {
    let out: IngestOutcome = tokio::task::spawn_blocking(move || svc.ingest(&raw))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok((StatusCode::ACCEPTED, Json(out)).into_response())
}

#[derive(Debug, Deserialize)]
struct NewSubscription {
    broker_url: String,
    query: QueryContext,
}

async fn list_subscriptions(State(svc): State<Shared>, Query(p): Params) -> ApiResult<Response> {
    Ok(Json(Page::slice(svc.subscriptions.list(), &p)?).into_response())
}

async fn create_subscription(State(svc): State<Shared>, raw: Bytes) -> ApiResult<Response> {
    let req: NewSubscription = body(&raw)?;
    let s = svc.subscriptions.subscribe(&req.broker_url, req.query).await?;
    Ok(created(format!("/v1/subscriptions/{}", s.id), &s))
}

fn known_subscription(svc: &Service, id: String) -> ApiResult<SubscriptionId> {
    let id = SubscriptionId::from(id);
    match svc.subscriptions.get(&id) {
        Some(_) => Ok(id),
        None => Err(ApiError::not_found("unknown_subscription", format!("unknown subscription {id}"))),
    }
}

async fn get_subscription(State(svc): State<Shared>, Path(id): Path<String>) -> ApiResult<Response> {
    let id = known_subscription(&svc, id)?;
    Ok(Json(svc.subscriptions.get(&id)).into_response())
}

async fn delete_subscription(State(svc): State<Shared>, Path(id): Path<String>) -> ApiResult<Response> {
    let id = known_subscription(&svc, id)?;
    Ok(Json(svc.subscriptions.delete(&id)?).into_response())
}

// ---- ops

async fn health(State(svc): State<Shared>) -> ApiResult<Response> {
    if svc.is_healthy() {
        Ok(Json(serde_json::json!({"status": "ok"})).into_response())
    } else {
        Err(ApiError::new(
            StatusCode::SERVICE_UNAVAILABLE,
            "storage_unavailable",
            "journal is not writable",
        ))
    }
}

async fn metrics(State(svc): State<Shared>) -> Json<crate::service::Metrics> {
    Json(svc.metrics())
}
