//! Trains a small model on the synthetic entity fixture until it fits the
//! training set, then writes the checkpoint.
//!
//! `cargo run --release --example train_fixture [checkpoint.json]`

use std::ops::ControlFlow;
use std::path::PathBuf;

use uniex::data::{fixture::make_fixture, Vocabulary};
use uniex::encoder::EncoderConfig;
use uniex::model::{Model, ModelConfig};
use uniex::schema::TaskKind;
use uniex::train::{train, TrainConfig};

fn main() -> uniex::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| "entity_model.json".into());
    let f = make_fixture(TaskKind::Entity, 8, 0);
    let config = ModelConfig {
        encoder: EncoderConfig { layers: 2, d: 48, heads: 4, ffn_hidden: 96, max_position: 96, ..Default::default() },
        ..Default::default()
    };
    let vocab = Vocabulary::build(&f.documents, [&f.schemas]);
    let mut model = Model::new(config, vocab, f.schemas.clone())?;
    let tc = TrainConfig { learning_rate: 3e-3, epochs: 500, ..Default::default() };
    let trace = train(&mut model, &f.documents, &tc, |s| {
        if s.epoch % 25 == 0 {
            println!("epoch {:>3}  loss {:>9.4}  f1 {:.3}", s.epoch, s.mean_loss, s.f1);
        }
        if s.f1 >= 1.0 {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;
    let last = trace.last().expect("at least one epoch");
    println!("stopped after {} epochs with training F1 {:.3}", last.epoch, last.f1);
    model.save(&out)?;
    println!("checkpoint written to {}", out.display());
    Ok(())
}
