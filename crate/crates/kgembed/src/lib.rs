//! Multimodal knowledge graph embedding engine.
//!
//! Trains and evaluates link-prediction models that combine lookup-table
//! embeddings with modality-specific attribute encoders. A knowledge graph
//! here is a set of typed directed edges plus a partial map from entities to
//! raw attribute payloads (amino-acid sequences, molecular strings, text).
//! Entities with attributes are embedded by trainable encoders; entities
//! without attributes, and all relations, use trainable lookup tables.
//!
//! The crate is organised around the pipeline:
//!
//! - [`graph`]: loading, validation, benchmark decoupling, splits, degrees.
//! - [`scoring`]: TransE / ComplEx / RotatE scoring with analytic gradients.
//! - [`encoders`]: lookup tables and the three attribute encoder stacks.
//! - [`model`]: model state and the entity -> embedding dispatch.
//! - [`training`]: losses, negative sampling, the optimization loop,
//!   two-stage pretraining, random hyperparameter search, checkpoints.
//! - [`eval`]: rank-based link prediction metrics, degree-stratified model
//!   comparison, Welch significance test.
//! - [`benchmark`]: downstream pair-classification harness with in-repo
//!   classifiers and stratified cross-validation.

pub mod benchmark;
pub mod encoders;
pub mod error;
pub mod eval;
pub mod graph;
pub mod model;
pub mod scoring;
pub mod training;

pub use error::{Error, Result};
