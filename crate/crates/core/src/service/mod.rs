//! HTTP API over an immutable model + graph snapshot.

mod api;
mod server;

pub use api::{Api, ApiResponse, WhatIfRequest};
pub use server::{serve, serve_on};
