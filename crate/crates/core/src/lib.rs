//! Model-agnostic comparison engine for multiple classifiers or regressors.
//!
//! Instances are sliced into model-pair cells and quadrants, symptom
//! selections are explained through feature divergence, and the discrepancy
//! between two subsets can be exported as new encoded features.

pub mod complementarity;
pub mod dataset;
pub mod divergence;
pub mod encoders;
pub mod error;
pub mod fixtures;
pub mod geometry;
pub mod ingest;
pub mod refine;
pub mod service;
pub mod slicing;

pub use dataset::{ClassId, Dataset, InstanceId, ModelId};
pub use error::{Error, Result};
