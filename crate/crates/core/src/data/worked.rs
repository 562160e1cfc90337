//! The four worked examples shipped under `fixtures/`, each with its schema
//! set. The example files use 1-based indices.

use super::{read_jsonl_str, ExDocument};
use crate::schema::SchemaSet;

pub const CONLL03_SCHEMA: &str = include_str!("../../fixtures/schemas/conll03.toml");
pub const CONLL04_SCHEMA: &str = include_str!("../../fixtures/schemas/conll04.toml");
pub const ACE05_EVT_SCHEMA: &str = include_str!("../../fixtures/schemas/ace05_evt.toml");
pub const RES16_SCHEMA: &str = include_str!("../../fixtures/schemas/res16.toml");

pub const CONLL03_DOC: &str = include_str!("../../fixtures/worked/conll03.jsonl");
pub const CONLL04_DOC: &str = include_str!("../../fixtures/worked/conll04.jsonl");
pub const ACE05_EVT_DOC: &str = include_str!("../../fixtures/worked/ace05_evt.jsonl");
pub const RES16_DOC: &str = include_str!("../../fixtures/worked/res16.jsonl");

fn load(schema: &str, doc: &str) -> (SchemaSet, ExDocument) {
    let s = SchemaSet::from_toml_str(schema).expect("shipped schema parses");
    let mut docs = read_jsonl_str(doc).expect("shipped example parses");
    assert_eq!(docs.len(), 1);
    (s, docs.remove(0))
}

pub fn conll03() -> (SchemaSet, ExDocument) {
    load(CONLL03_SCHEMA, CONLL03_DOC)
}

pub fn conll04() -> (SchemaSet, ExDocument) {
    load(CONLL04_SCHEMA, CONLL04_DOC)
}

pub fn ace05_evt() -> (SchemaSet, ExDocument) {
    load(ACE05_EVT_SCHEMA, ACE05_EVT_DOC)
}

pub fn res16() -> (SchemaSet, ExDocument) {
    load(RES16_SCHEMA, RES16_DOC)
}

/// All four examples with a short name each.
pub fn all() -> Vec<(&'static str, SchemaSet, ExDocument)> {
    let mut out = Vec::new();
    for (name, f) in [
        ("conll03", conll03 as fn() -> (SchemaSet, ExDocument)),
        ("conll04", conll04),
        ("ace05_evt", ace05_evt),
        ("res16", res16),
    ] {
        let (s, d) = f();
        out.push((name, s, d));
    }
    out
}
