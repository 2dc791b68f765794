//! A governance-first data lakehouse: a document catalogue of versioned
//! files over pluggable object storage, with per-collection visas, an
//! encrypted credential vault, direct-transfer URLs and a reconciling
//! janitor, served over HTTP.

pub mod catalogue;
pub mod cli;
pub mod clock;
pub mod config;
pub mod error;
pub mod gateway;
pub mod governance;
pub mod ids;
pub mod janitor;
pub mod services;
pub mod storage;
pub mod store;

pub use error::{Error, ErrorCode, Result};
pub use services::Lakehouse;
