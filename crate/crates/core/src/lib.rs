//! Explainable payment-fraud detection on heterogeneous transaction graphs.

pub mod autodiff;
pub mod data;
pub mod graph;
pub mod detector;
pub mod explain;
pub mod service;
pub mod cli;
