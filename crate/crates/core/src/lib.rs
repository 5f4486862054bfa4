//! Core of the MeetCues back-channel: anonymized meeting domain types and
//! the pure engines behind the live emoji cloud, the per-minute engagement
//! timeline, and engagement-driven audio snippets.
//!
//! Nothing here performs I/O, so the same code runs on the server, in the
//! offline simulator and in the browser demo.

pub mod anon;
pub mod comments;
pub mod domain;
pub mod error;
pub mod mood;
pub mod report;
pub mod snippet;
pub mod timeline;
pub mod wav;

pub use domain::*;
pub use error::ValidationError;
