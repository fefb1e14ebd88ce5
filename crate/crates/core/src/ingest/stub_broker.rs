//! Minimal in-process context broker used as a test fixture and for
//! local demos. It accepts NGSI-lite subscriptions and pushes
//! notifications for published entities to every matching callback.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use parking_lot::Mutex;
use tokio::task::JoinHandle;

use super::ngsi::{ContextEntity, Notification, SubscriptionReply, SubscriptionRequest};
use crate::jobs::glob_match;

#[derive(Default)]
struct BrokerState {
    available: AtomicBool,
    next_id: AtomicU64,
    subscriptions: Mutex<Vec<(String, SubscriptionRequest)>>,
    subscribe_requests: AtomicU64,
}

pub struct StubBroker {
    addr: SocketAddr,
    state: Arc<BrokerState>,
    client: reqwest::Client,
    server: JoinHandle<()>,
}

async fn handle_subscribe(
    State(state): State<Arc<BrokerState>>,
    Json(req): Json<SubscriptionRequest>,
) -> Result<Json<SubscriptionReply>, StatusCode> {
    state.subscribe_requests.fetch_add(1, Ordering::SeqCst);
    if !state.available.load(Ordering::SeqCst) {
        return Err(StatusCode::SERVICE_UNAVAILABLE);
    }
    let id = format!("stub-sub-{}", state.next_id.fetch_add(1, Ordering::SeqCst) + 1);
    state.subscriptions.lock().push((id.clone(), req));
    Ok(Json(SubscriptionReply { subscription_id: id }))
}

impl StubBroker {
    /// Starts the broker on an ephemeral local port.
    pub async fn start() -> std::io::Result<StubBroker> {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
        let addr = listener.local_addr()?;
        let state = Arc::new(BrokerState::default());
        state.available.store(true, Ordering::SeqCst);
        let app = Router::new()
            .route("/v1/subscriptions", post(handle_subscribe))
            .with_state(state.clone());
        let server = tokio::spawn(async move {
            let _ = axum::serve(listener, app).await;
        });
        Ok(StubBroker {
            addr,
            state,
            client: reqwest::Client::new(),
            server,
        })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// While unavailable, subscribe requests are answered with 503.
    pub fn set_available(&self, on: bool) {
        self.state.available.store(on, Ordering::SeqCst);
    }

    pub fn subscription_count(&self) -> usize {
        self.state.subscriptions.lock().len()
    }

    /// Accepted subscription requests, oldest first.
    pub fn requests(&self) -> Vec<SubscriptionRequest> {
        self.state.subscriptions.lock().iter().map(|(_, r)| r.clone()).collect()
    }

    pub fn subscribe_requests(&self) -> u64 {
        self.state.subscribe_requests.load(Ordering::SeqCst)
    }

    /// Pushes `entity` to every matching subscriber, restricted to the
    /// subscribed attributes. Returns the number of notifications accepted
    /// (2xx) by callbacks.
    pub async fn publish(&self, entity: &ContextEntity) -> usize {
        let subs = self.state.subscriptions.lock().clone();
        let mut delivered = 0;
        for (id, req) in subs {
            let selected = req.entities.iter().any(|sel| {
                glob_match(&sel.id_pattern, &entity.id)
                    && sel.entity_type.as_ref().is_none_or(|t| t == &entity.entity_type)
            });
            if !selected {
                continue;
            }
            let attributes: Vec<_> = entity
                .attributes
                .iter()
                .filter(|a| req.attributes.contains(&a.name))
                .cloned()
                .collect();
            if attributes.is_empty() {
                continue;
            }
            let body = Notification {
                subscription_id: Some(id),
                data: vec![ContextEntity {
                    id: entity.id.clone(),
                    entity_type: entity.entity_type.clone(),
                    attributes,
                }],
            };
            if let Ok(r) = self.client.post(&req.callback).json(&body).send().await {
                if r.status().is_success() {
                    delivered += 1;
                }
            }
        }
        delivered
    }
}

impl Drop for StubBroker {
    fn drop(&mut self) {
        self.server.abort();
    }
}
