//! Times scoring and decoding on sentences of equal length that hold
//! different numbers of entities. Scoring fills every table in one pass,
//! so the per-sentence cost barely depends on how many targets come out.

use uniex::bench::{self, BenchConfig};
use uniex::data::{fixture::target_count_fixture, Vocabulary};
use uniex::encoder::EncoderConfig;
use uniex::model::{Model, ModelConfig};

fn main() -> uniex::Result<()> {
    let f = target_count_fixture(16, &[1, 4, 8], 4, 0);
    let config = ModelConfig {
        encoder: EncoderConfig { layers: 2, d: 48, heads: 4, ffn_hidden: 96, max_position: 96, ..Default::default() },
        ..Default::default()
    };
    let model = Model::new(config, Vocabulary::build(&f.documents, [&f.schemas]), f.schemas.clone())?;
    let report = bench::run(&model, &f.documents, &BenchConfig::default())?;
    print!("{}", report.to_table());
    Ok(())
}
