//! Batch experiments over `eos-core` and the plumbing the `eos-lab` binary
//! uses to write them out: run manifests, `key = value` configs, and
//! long-format CSV/JSON tables.

pub mod adapt;
pub mod config;
pub mod contrast;
pub mod cx;
pub mod grid;
pub mod manifest;
pub mod output;
pub mod phases;
pub mod residual;
pub mod sweep;
pub mod vector;

pub use manifest::RunManifest;
pub use output::{Cell, Format, Table};
