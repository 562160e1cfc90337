//! Unified extractive information extraction.
//!
//! Every task (entities, relations, events, sentiment triplets) is posed as
//! a schema-prompted encoding followed by one score tensor whose tables are
//! read back as spans, span labels and span links.
//!
//! The pipeline, module by module:
//!
//! * [`schema`] builds the prompt, position ids and attention mask;
//! * [`encoder`] is a small transformer producing schema and text rows;
//! * [`scoring`] turns those rows into the score tensor;
//! * [`structures`] builds supervision targets and decodes scores;
//! * [`model`] ties the three together and handles checkpoints;
//! * [`train`] holds the loss, optimizer and training loop;
//! * [`eval`] computes strict micro-F1 metrics;
//! * [`data`] reads and writes documents, converts corpora and generates
//!   synthetic fixtures;
//! * [`ndiff`] is the array and autodiff engine underneath;
//! * [`bench`], [`gradcheck`] and [`cli`] back the `uniex` binary.

pub mod bench;
pub mod cli;
pub mod data;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod fsutil;
pub mod gradcheck;
pub mod model;
pub mod ndiff;
pub mod schema;
pub mod scoring;
pub mod structures;
pub mod train;

pub use error::{Error, Result};
