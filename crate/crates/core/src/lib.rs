//! Dense multilabel per-frame sequence labeling.
//!
//! The crate provides a from-scratch LSTM and its attention-windowed,
//! multi-output extension ([`model::MultiLstm`]), RMSProp training with
//! stateful truncated backpropagation, frame-level and detection average
//! precision, temporal retrieval queries and dataset tooling.

pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod numeric;
pub mod retrieval;
pub mod train;
pub mod verify;

pub use error::{Error, Result};
