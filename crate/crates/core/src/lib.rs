//! Multiple comparisons two ways: classical corrections (Bonferroni,
//! Benjamini–Hochberg) and partial pooling in a normal hierarchical model.
//!
//! The pipeline is `data` → (`classical` | `hier`) → `compare`, with `sim`
//! running both arms over replicated synthetic studies and `report`/`cli`
//! producing files.

pub mod classical;
pub mod cli;
pub mod compare;
pub mod data;
pub mod error;
pub mod fixtures;
pub mod hier;
pub mod normal;
pub mod report;
pub mod rng;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
