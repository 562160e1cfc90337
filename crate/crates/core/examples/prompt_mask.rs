//! Builds the schema prompt for a relation sentence and prints each token
//! with its position id and the tokens it may attend to.

use uniex::data::{worked, Vocabulary};
use uniex::schema::{build_prompt, PromptOptions};

fn main() -> uniex::Result<()> {
    let (schemas, doc) = worked::conll04();
    let vocab = Vocabulary::build([&doc], [&schemas]);
    let input = build_prompt(&schemas, &doc.tokens, &vocab, &PromptOptions::default())?;
    let words: Vec<&str> = input.tokens.iter().map(|&t| vocab.token(t).unwrap_or("?")).collect();
    for (q, word) in words.iter().enumerate() {
        let row: String = (0..input.len()).map(|k| if input.mask.get(q, k) { '#' } else { '.' }).collect();
        println!("{q:>3} {:>3} {word:<14} {row}", input.positions[q]);
    }
    println!("text tokens occupy prompt rows {:?}", input.text_range);
    Ok(())
}
