//! Fits the relation fixture, decodes every sentence and scores the
//! predictions with all metrics.

use std::ops::ControlFlow;

use uniex::data::{fixture::make_fixture, Vocabulary};
use uniex::encoder::EncoderConfig;
use uniex::eval::Metrics;
use uniex::model::{Model, ModelConfig};
use uniex::schema::TaskKind;
use uniex::structures::DEFAULT_THRESHOLD;
use uniex::train::{train, TrainConfig};

fn main() -> uniex::Result<()> {
    let f = make_fixture(TaskKind::Relation, 8, 0);
    let config = ModelConfig {
        encoder: EncoderConfig { layers: 2, d: 48, heads: 4, ffn_hidden: 96, max_position: 96, ..Default::default() },
        ..Default::default()
    };
    let mut model = Model::new(config, Vocabulary::build(&f.documents, [&f.schemas]), f.schemas.clone())?;
    let tc = TrainConfig { learning_rate: 3e-3, epochs: 500, ..Default::default() };
    train(
        &mut model,
        &f.documents,
        &tc,
        |s| {
            if s.f1 >= 1.0 {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        },
    )?;

    let pred =
        f.documents.iter().map(|d| model.predict_document(d, DEFAULT_THRESHOLD)).collect::<uniex::Result<Vec<_>>>()?;
    for (p, d) in pred.iter().zip(&f.documents).take(3) {
        println!("{}", d.tokens.join(" "));
        for r in &p.gold.relations {
            println!("  ({}, {}, {})", d.surface(r.head), r.label, d.surface(r.tail));
        }
    }
    let metrics = Metrics::compute(&pred, &f.documents)?;
    print!("{}", metrics.to_table());
    Ok(())
}
