//! Context-broker ingestion: NGSI-lite parsing, outbound subscriptions,
//! and archive replay.

mod ngsi;
mod replay;
pub mod stub_broker;
mod subscription;

use std::path::PathBuf;

use thiserror::Error;

use crate::ids::SubscriptionId;
use crate::journal::JournalError;

pub use ngsi::{
    parse_notification, to_notification, AttributeType, ContextAttribute, ContextEntity, EntitySelector, Notification,
    SubscriptionReply, SubscriptionRequest,
};
pub use replay::{read_archive, replay, write_archive, ReplayReport, ReplaySpec, CSV_HEADER, FAST_BATCH};
pub use subscription::{BackoffPolicy, Subscription, SubscriptionManager, SubscriptionStatus};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("bad row {row}: {reason}")]
    BadRow { row: u64, reason: String },
    #[error("invalid replay: {0}")]
    InvalidReplay(String),
    #[error("invalid subscription: {0}")]
    InvalidSubscription(String),
    #[error("unknown subscription {0}")]
    UnknownSubscription(SubscriptionId),
    #[error(transparent)]
    Storage(#[from] JournalError),
}
