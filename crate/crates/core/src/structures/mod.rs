//! Structural tables: supervision targets built from gold records and the
//! decoders that read typed structures back out of a score tensor.
//!
//! Table `r` of a score tensor belongs to schema `r`. Cell meanings
//! ("spotting designators"):
//!
//! | table            | cell        | meaning                              |
//! |------------------|-------------|--------------------------------------|
//! | detection (0)    | `(p, q)`, `q >= p` | tokens `p..=q` form a span     |
//! | classification   | `(s_i, e_i)`| span `i` carries the label           |
//! | association      | `(s_i, s_j)` and `(e_i, e_j)` | span `i` links to span `j` |
//!
//! Association rows are the subject (relation head, aspect, trigger) and
//! columns the object. A cell decides when its score exceeds the threshold.

mod brute;
mod decode;
mod record;
mod target;

pub use brute::brute_force_decode;
pub use decode::{
    assemble_record, decode, decode_association, decode_classification, decode_detection, decode_with_spans,
    endpoint_allowed, Diagnostics, DEFAULT_THRESHOLD,
};
pub use record::{Argument, Entity, Event, ExtractionRecord, Relation, Sentiment, Span};
pub use target::{build_target_tensor, TargetTensor};

use crate::scoring::ScoreTensor;

/// Maps a target to scores: 0 becomes `low`, 1 becomes `high`.
pub fn cast_target(target: &TargetTensor, low: f64, high: f64) -> ScoreTensor {
    ScoreTensor::from_array(target.values.map(|v| if v == 1.0 { high } else { low })).expect("target is rank 3")
}
