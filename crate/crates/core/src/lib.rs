//! Smart-city sensor stream annotation.
//!
//! Observations arrive from a context broker (or directly, or from an
//! archive replay), are routed to the annotation jobs whose query context
//! selects them, scored by each job's online model, and recorded as tagged
//! spatiotemporal annotations in an embedded tag-graph store.

pub mod api;
pub mod cli;
pub mod exec;
pub mod geo;
pub mod ids;
pub mod ingest;
pub mod jobs;
pub mod journal;
pub mod mlengine;
pub mod report;
pub mod service;
pub mod synth;
pub mod tagstore;
pub mod time;

pub use service::Service;
