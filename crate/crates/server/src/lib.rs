//! MeetCues server: durable event log, meeting services, HTTP and push API,
//! and the meeting simulator.

pub mod api;
pub mod error;
pub mod service;
pub mod sim;
pub mod store;
