//! Outbound subscriptions to an external context broker.
//!
//! A subscription is sent as `POST {broker_url}/v1/subscriptions`. When the
//! broker cannot be reached the subscription is kept as `failed` and retried
//! in the background with exponential backoff (1 s, 2 s, 4 s, ... capped at
//! 60 s) until it succeeds or is deleted.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::Arc;
use std::time::{Duration, Instant};

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use tokio::task::JoinHandle;

use super::ngsi::{SubscriptionReply, SubscriptionRequest};
use super::IngestError;
use crate::ids::SubscriptionId;
use crate::jobs::QueryContext;
use crate::journal::{Journal, Mutation};

const ATTEMPT_LOG_LEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubscriptionStatus {
    Pending,
    Active,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subscription {
    pub id: SubscriptionId,
    pub broker_url: String,
    pub query: QueryContext,
    pub callback_url: String,
    pub status: SubscriptionStatus,
    pub last_error: Option<String>,
    /// Id assigned by the broker on acknowledgment.
    pub broker_subscription_id: Option<String>,
    pub attempts: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BackoffPolicy {
    pub initial: Duration,
    pub cap: Duration,
}

impl Default for BackoffPolicy {
    fn default() -> Self {
        BackoffPolicy {
            initial: Duration::from_secs(1),
            cap: Duration::from_secs(60),
        }
    }
}

impl BackoffPolicy {
    /// Delay before retry number `retry` (0-based).
    pub fn delay(&self, retry: u32) -> Duration {
        let factor = 1u32.checked_shl(retry.min(31)).unwrap_or(u32::MAX);
        self.initial.saturating_mul(factor).min(self.cap)
    }
}

pub struct SubscriptionManager {
    subs: RwLock<BTreeMap<SubscriptionId, Subscription>>,
    retries: Mutex<HashMap<SubscriptionId, JoinHandle<()>>>,
    attempt_log: Mutex<HashMap<SubscriptionId, VecDeque<Instant>>>,
    client: reqwest::Client,
    callback_url: RwLock<String>,
    policy: BackoffPolicy,
    journal: Arc<Journal>,
}

impl SubscriptionManager {
    pub fn new(journal: Arc<Journal>, callback_url: String, policy: BackoffPolicy) -> Self {
        SubscriptionManager {
            subs: RwLock::new(BTreeMap::new()),
            retries: Mutex::new(HashMap::new()),
            attempt_log: Mutex::new(HashMap::new()),
            client: reqwest::Client::builder()
                .timeout(Duration::from_secs(10))
                .build()
                .expect("http client"),
            callback_url: RwLock::new(callback_url),
            policy,
            journal,
        }
    }

    pub fn policy(&self) -> BackoffPolicy {
        self.policy
    }

    pub fn callback_url(&self) -> String {
        self.callback_url.read().clone()
    }

    /// Points future subscriptions at a new notification endpoint, e.g.
    /// once the listening port is known.
    pub fn set_callback_url(&self, url: String) {
        *self.callback_url.write() = url;
    }

    pub fn apply(&self, m: &Mutation) {
        match m {
            Mutation::PutSubscription(s) => {
                self.subs.write().insert(s.id.clone(), s.clone());
            }
            Mutation::DeleteSubscription { id } => {
                self.subs.write().remove(id);
            }
            _ => {}
        }
    }

    pub fn list(&self) -> Vec<Subscription> {
        self.subs.read().values().cloned().collect()
    }

    pub fn get(&self, id: &SubscriptionId) -> Option<Subscription> {
        self.subs.read().get(id).cloned()
    }

    /// Times of the most recent broker attempts for `id`.
    pub fn attempt_times(&self, id: &SubscriptionId) -> Vec<Instant> {
        self.attempt_log
            .lock()
            .get(id)
            .map(|q| q.iter().copied().collect())
            .unwrap_or_default()
    }

    fn store(&self, s: &Subscription) -> Result<(), IngestError> {
        self.journal.append(&Mutation::PutSubscription(s.clone()))?;
        self.subs.write().insert(s.id.clone(), s.clone());
        Ok(())
    }

    /// Subscribes to `broker_url` for `query`. An existing subscription
    /// with the same broker and query is returned unchanged. An
    /// unreachable broker yields a `failed` subscription with a retry
    /// scheduled.
    pub async fn subscribe(self: &Arc<Self>, broker_url: &str, query: QueryContext) -> Result<Subscription, IngestError> {
        let broker_url = broker_url.trim_end_matches('/').to_owned();
        reqwest::Url::parse(&broker_url).map_err(|e| IngestError::InvalidSubscription(e.to_string()))?;
        if query.attribute.is_empty() || query.id_pattern.is_empty() {
            return Err(IngestError::InvalidSubscription("query needs an attribute and an id pattern".into()));
        }
        let pending = {
            let mut subs = self.subs.write();
            if let Some(existing) = subs.values().find(|s| s.broker_url == broker_url && s.query == query) {
                return Ok(existing.clone());
            }
            let s = Subscription {
                id: SubscriptionId::generate(),
                broker_url,
                query,
                callback_url: self.callback_url(),
                status: SubscriptionStatus::Pending,
                last_error: None,
                broker_subscription_id: None,
                attempts: 0,
            };
            self.journal.append(&Mutation::PutSubscription(s.clone()))?;
            subs.insert(s.id.clone(), s.clone());
            s
        };
        let id = pending.id.clone();
        let ok = self.attempt(&id).await;
        if !ok {
            self.schedule_retry(&id);
        }
        Ok(self.get(&id).expect("just inserted"))
    }

    /// One attempt against the broker. Returns true once active.
    async fn attempt(&self, id: &SubscriptionId) -> bool {
        let Some(sub) = self.get(id) else {
            return false;
        };
        {
            let mut log = self.attempt_log.lock();
            let q = log.entry(id.clone()).or_default();
            q.push_back(Instant::now());
            if q.len() > ATTEMPT_LOG_LEN {
                q.pop_front();
            }
        }
        let body = SubscriptionRequest::for_query(&sub.query, &sub.callback_url);
        let url = format!("{}/v1/subscriptions", sub.broker_url);
        let result = async {
            let resp = self
                .client
                .post(&url)
                .json(&body)
                .send()
                .await
                .map_err(|e| e.to_string())?;
            if !resp.status().is_success() {
                return Err(format!("broker answered {}", resp.status()));
            }
            resp.json::<SubscriptionReply>().await.map_err(|e| e.to_string())
        }
        .await;
        // The subscription may have been deleted while the request was out.
        let Some(mut sub) = self.get(id) else {
            return false;
        };
        sub.attempts += 1;
        let ok = match result {
            Ok(reply) => {
                sub.status = SubscriptionStatus::Active;
                sub.last_error = None;
                sub.broker_subscription_id = Some(reply.subscription_id);
                true
            }
            Err(e) => {
                tracing::warn!(subscription = %id, error = %e, "broker unreachable");
                sub.status = SubscriptionStatus::Failed;
                sub.last_error = Some(e);
                false
            }
        };
        if let Err(e) = self.store(&sub) {
            tracing::warn!(subscription = %id, error = %e, "subscription state not journaled");
        }
        ok
    }

    fn schedule_retry(self: &Arc<Self>, id: &SubscriptionId) {
        let this = Arc::clone(self);
        let sid = id.clone();
        let handle = tokio::spawn(async move {
            let mut retry = 0u32;
            loop {
                tokio::time::sleep(this.policy.delay(retry)).await;
                if this.get(&sid).is_none() || this.attempt(&sid).await {
                    break;
                }
                retry = retry.saturating_add(1);
            }
            this.retries.lock().remove(&sid);
        });
        if let Some(old) = self.retries.lock().insert(id.clone(), handle) {
            old.abort();
        }
    }

    /// Restarts retry loops for subscriptions restored in a non-active
    /// state. Must run inside a tokio runtime.
    pub fn resume(self: &Arc<Self>) {
        let pending: Vec<_> = self
            .list()
            .into_iter()
            .filter(|s| s.status != SubscriptionStatus::Active)
            .map(|s| s.id)
            .collect();
        for id in pending {
            self.schedule_retry(&id);
        }
    }

    pub fn retry_scheduled(&self, id: &SubscriptionId) -> bool {
        self.retries.lock().get(id).is_some_and(|h| !h.is_finished())
    }

    /// Removes the subscription and cancels any pending retry.
    pub fn delete(&self, id: &SubscriptionId) -> Result<Subscription, IngestError> {
        let existing = self.get(id).ok_or_else(|| IngestError::UnknownSubscription(id.clone()))?;
        self.journal.append(&Mutation::DeleteSubscription { id: id.clone() })?;
        self.subs.write().remove(id);
        if let Some(h) = self.retries.lock().remove(id) {
            h.abort();
        }
        Ok(existing)
    }
}
