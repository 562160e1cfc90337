//! Converters from external corpus formats into [`ExDocument`]s.

use serde_json::Value;

use super::{parse_document, ExDocument};
use crate::error::{Error, Result};
use crate::structures::{Entity, ExtractionRecord, Span};

/// Task name given to documents produced by [`convert_column_ner`].
pub const NER_TASK: &str = "Entity Extraction";

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Converted {
    pub documents: Vec<ExDocument>,
    /// Dangling `I-` tags that were read as `B-`.
    pub warnings: usize,
}

/// Expands the CoNLL abbreviations; any other type passes through.
pub fn expand_ner_type(t: &str) -> String {
    match t {
        "PER" => "Person",
        "LOC" => "Location",
        "ORG" => "Organization",
        "MISC" => "Miscellaneous",
        other => other,
    }
    .to_string()
}

struct Sentence {
    tokens: Vec<String>,
    entities: Vec<Entity>,
    open: Option<(usize, String)>,
}

impl Sentence {
    fn new() -> Self {
        Sentence { tokens: Vec::new(), entities: Vec::new(), open: None }
    }

    fn close(&mut self) {
        if let Some((start, label)) = self.open.take() {
            self.entities.push(Entity { span: Span::new(start, self.tokens.len() - 1), label });
        }
    }

    fn finish(mut self, out: &mut Vec<ExDocument>) {
        self.close();
        if self.tokens.is_empty() {
            return;
        }
        let mut doc = ExDocument::from_tokens(self.tokens, NER_TASK);
        doc.gold = ExtractionRecord { entities: self.entities, ..Default::default() };
        out.push(doc);
    }
}

/// Reads whitespace-separated column files: the first column is the token,
/// the last a BIO tag. Blank lines separate sentences and `-DOCSTART-` lines
/// are skipped.
pub fn convert_column_ner(text: &str) -> Result<Converted> {
    let mut out = Converted::default();
    let mut sent = Sentence::new();
    for (i, line) in text.lines().enumerate() {
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.is_empty() {
            std::mem::replace(&mut sent, Sentence::new()).finish(&mut out.documents);
            continue;
        }
        if cols[0] == "-DOCSTART-" {
            continue;
        }
        let bad = |msg: String| Error::Data { line: i + 1, msg };
        if cols.len() < 2 {
            return Err(bad(format!("expected 'token ... tag', got '{line}'")));
        }
        let tag = cols[cols.len() - 1];
        let (prefix, ty) = match tag.split_once('-') {
            Some((p, t)) if (p == "B" || p == "I") && !t.is_empty() => (p, expand_ner_type(t)),
            _ if tag == "O" => ("O", String::new()),
            _ => return Err(bad(format!("malformed BIO tag '{tag}'"))),
        };
        match prefix {
            "O" => sent.close(),
            "B" => {
                sent.close();
                sent.open = Some((sent.tokens.len(), ty));
            }
            _ => {
                let continues = matches!(&sent.open, Some((_, open)) if *open == ty);
                if !continues {
                    out.warnings += 1;
                    sent.close();
                    sent.open = Some((sent.tokens.len(), ty));
                }
            }
        }
        sent.tokens.push(cols[0].to_string());
    }
    sent.finish(&mut out.documents);
    if out.warnings > 0 {
        log::warn!("{} dangling I- tags read as B-", out.warnings);
    }
    Ok(out)
}

/// Reads structured records, either one JSON object per line or a single
/// JSON array of objects, in the EX-JSONL field layout. Errors carry the
/// 1-based line (or, for arrays, element) number.
pub fn convert_generic_json(text: &str) -> Result<Vec<ExDocument>> {
    let trimmed = text.trim_start();
    if !trimmed.starts_with('[') {
        return super::read_jsonl_str(text);
    }
    let items: Vec<Value> = serde_json::from_str(trimmed)?;
    let mut docs = Vec::with_capacity(items.len());
    for (i, v) in items.iter().enumerate() {
        let doc = parse_document(&v.to_string()).map_err(|msg| Error::Data { line: i + 1, msg })?;
        docs.push(doc);
    }
    Ok(docs)
}
