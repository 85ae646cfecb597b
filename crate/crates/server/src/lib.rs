//! HTTP service and command-line front end for synclay.

pub mod api;
pub mod cli;
pub mod store;

pub use api::{router, AppState};
pub use store::LayoutStore;
