//! Converts a CoNLL-style column file (token first, BIO tag last) into
//! EX-JSONL on stdout.
//!
//! `cargo run --example convert [file]`

use uniex::data::{convert::convert_column_ner, write_jsonl_string};

const SAMPLE: &str = include_str!("../fixtures/column/conll03_sample.txt");

fn main() -> uniex::Result<()> {
    let text = match std::env::args().nth(1) {
        Some(path) => {
            std::fs::read_to_string(&path).map_err(|source| uniex::Error::Io { path: path.clone().into(), source })?
        }
        None => SAMPLE.to_string(),
    };
    let converted = convert_column_ner(&text)?;
    eprintln!("{} documents, {} repaired tags", converted.documents.len(), converted.warnings);
    print!("{}", write_jsonl_string(&converted.documents));
    Ok(())
}
