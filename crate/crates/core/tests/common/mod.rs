//! Shared helpers for the integration tests.
#![allow(dead_code)]

use uniex::data::{ExDocument, Vocabulary};
use uniex::encoder::EncoderConfig;
use uniex::model::{Ablations, Model, ModelConfig};
use uniex::schema::SchemaSet;
use uniex::structures::{Argument, Entity, Event, ExtractionRecord, Relation, Sentiment, Span};
use uniex::train::TrainConfig;

/// 1-based inclusive span as printed, shifted to 0-based.
fn s(start: usize, end: usize) -> Span {
    Span { start: start - 1, end: end - 1 }
}

fn ent(start: usize, end: usize, label: &str) -> Entity {
    Entity { span: s(start, end), label: label.into() }
}

pub type Printed = (&'static str, ExtractionRecord, Vec<(Span, &'static str)>);

/// The extraction targets of the four worked examples, written out by hand
/// from their printed 1-based form, with the surface string of each span.
pub fn printed_targets() -> Vec<Printed> {
    vec![
        (
            "conll03",
            ExtractionRecord { entities: vec![ent(1, 1, "Person"), ent(4, 4, "Location")], ..Default::default() },
            vec![(s(1, 1), "Arafat"), (s(4, 4), "Nablus")],
        ),
        (
            "conll04",
            ExtractionRecord {
                entities: vec![ent(5, 6, "Person"), ent(10, 10, "Location")],
                relations: vec![Relation { head: s(5, 6), label: "live in".into(), tail: s(10, 10) }],
                ..Default::default()
            },
            vec![(s(5, 6), "Betsy Ross"), (s(10, 10), "Philadelphia")],
        ),
        (
            "ace05_evt",
            ExtractionRecord {
                entities: vec![ent(2, 3, "Victim"), ent(6, 6, "Trigger"), ent(9, 9, "Place")],
                events: vec![Event {
                    label: "Injure".into(),
                    trigger: s(6, 6),
                    arguments: vec![
                        Argument { span: s(2, 3), role: "Victim".into() },
                        Argument { span: s(9, 9), role: "Place".into() },
                    ],
                }],
                ..Default::default()
            },
            vec![(s(2, 3), "Chuck Hagel"), (s(6, 6), "wounded"), (s(9, 9), "Vietnam")],
        ),
        (
            "res16",
            ExtractionRecord {
                entities: vec![ent(4, 6, "Aspect"), ent(14, 14, "Opinion")],
                sentiments: vec![Sentiment { aspect: s(4, 6), polarity: "Positive".into(), opinion: s(14, 14) }],
                ..Default::default()
            },
            vec![(s(4, 6), "duck breast special"), (s(14, 14), "incredible")],
        ),
    ]
}

/// Model size and optimizer settings used for the fixture training runs.
pub const D: usize = 48;
pub const LEARNING_RATE: f64 = 3e-3;

pub fn fixture_model(docs: &[ExDocument], schemas: &SchemaSet, seed: u64, ablations: Ablations) -> Model {
    let config = ModelConfig {
        encoder: EncoderConfig {
            layers: 2,
            d: D,
            heads: 4,
            ffn_hidden: 2 * D,
            max_position: 96,
            seed,
            ..Default::default()
        },
        ..Default::default()
    }
    .with_ablations(ablations);
    let vocab = Vocabulary::build(docs, [schemas]);
    Model::new(config, vocab, schemas.clone()).unwrap()
}

pub fn fixture_train_config(epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig { learning_rate: LEARNING_RATE, epochs, seed, ..Default::default() }
}

pub mod hand;
