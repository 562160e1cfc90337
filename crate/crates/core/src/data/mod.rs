//! Documents, the EX-JSONL format, corpus converters and synthetic fixtures.
//!
//! # EX-JSONL
//!
//! One UTF-8 JSON object per line:
//!
//! ```text
//! {"text": "...", "tokens": ["w0", "w1", ...], "task": "Relation Extraction",
//!  "entities":   [{"text": "Betsy Ross", "start": 4, "end": 5, "type": "Person"}],
//!  "relations":  [{"type": "live in", "head": {"text": .., "start": .., "end": ..}, "tail": {..}}],
//!  "events":     [{"type": "Injure", "trigger": {..},
//!                  "arguments": [{"text": .., "start": .., "end": .., "role": "Victim"}]}],
//!  "sentiments": [{"polarity": "Positive", "aspect": {..}, "opinion": {..}}]}
//! ```
//!
//! Indices are token offsets, 0-based, end inclusive. An optional
//! `"index_base": 1` accepts 1-based input; files written by this crate
//! never carry it. `tokens` may be omitted, in which case `text` is split
//! on whitespace. Span `text` fields are optional on input and, when
//! present, must equal the space-joined tokens they index.

pub mod worked;
pub mod convert;
pub mod fixture;
pub mod vocab;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;
use crate::structures::{Argument, Entity, Event, ExtractionRecord, Relation, Sentiment, Span};

pub use vocab::Vocabulary;

/// Base of internal token indices.
pub const INDEX_BASE: usize = 0;
/// Internal span ends point at the last token of the span.
pub const END_INCLUSIVE: bool = true;

/// Maps an external `(start, end)` pair written with `base` onto the
/// internal convention.
pub fn to_internal(start: usize, end: usize, base: usize) -> Option<Span> {
    let start = start.checked_sub(base)? + INDEX_BASE;
    let end = end.checked_sub(base)? + INDEX_BASE;
    (start <= end).then_some(Span { start, end })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExDocument {
    pub text: String,
    pub tokens: Vec<String>,
    pub task: String,
    pub gold: ExtractionRecord,
}

impl ExDocument {
    pub fn from_tokens(tokens: Vec<String>, task: &str) -> Self {
        ExDocument { text: tokens.join(" "), tokens, task: task.to_string(), gold: ExtractionRecord::default() }
    }

    /// Space-joined tokens covered by `span`.
    pub fn surface(&self, span: Span) -> String {
        self.tokens[span.start..=span.end].join(" ")
    }

    pub fn with_gold(&self, gold: ExtractionRecord) -> Self {
        ExDocument { gold, ..self.clone() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RawSpan {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    start: usize,
    end: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RawEntity {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    start: usize,
    end: usize,
    #[serde(rename = "type")]
    label: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RawRelation {
    #[serde(rename = "type")]
    label: String,
    head: RawSpan,
    tail: RawSpan,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RawArgument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    start: usize,
    end: usize,
    role: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RawEvent {
    #[serde(rename = "type")]
    label: String,
    trigger: RawSpan,
    #[serde(default)]
    arguments: Vec<RawArgument>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RawSentiment {
    polarity: String,
    aspect: RawSpan,
    opinion: RawSpan,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tokens: Option<Vec<String>>,
    task: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    index_base: Option<usize>,
    #[serde(default)]
    entities: Vec<RawEntity>,
    #[serde(default)]
    relations: Vec<RawRelation>,
    #[serde(default)]
    events: Vec<RawEvent>,
    #[serde(default)]
    sentiments: Vec<RawSentiment>,
}

struct SpanReader<'a> {
    tokens: &'a [String],
    base: usize,
}

impl SpanReader<'_> {
    fn read(&self, start: usize, end: usize, text: Option<&str>) -> std::result::Result<Span, String> {
        let span = to_internal(start, end, self.base).filter(|s| s.fits(self.tokens.len())).ok_or_else(|| {
            format!("span ({start}, {end}) invalid for {} tokens with index base {}", self.tokens.len(), self.base)
        })?;
        if let Some(t) = text {
            let surface = self.tokens[span.start..=span.end].join(" ");
            if surface != t {
                return Err(format!("surface mismatch at ({start}, {end}): '{t}' vs tokens '{surface}'"));
            }
        }
        Ok(span)
    }

    fn raw(&self, s: &RawSpan) -> std::result::Result<Span, String> {
        self.read(s.start, s.end, s.text.as_deref())
    }
}

impl RawDocument {
    fn into_document(self) -> std::result::Result<ExDocument, String> {
        let tokens = match (self.tokens, &self.text) {
            (Some(t), _) => t,
            (None, Some(text)) => vocab::words(text).map(str::to_string).collect(),
            (None, None) => return Err("document needs 'tokens' or 'text'".into()),
        };
        let base = self.index_base.unwrap_or(INDEX_BASE);
        if base > 1 {
            return Err(format!("index_base must be 0 or 1, got {base}"));
        }
        let r = SpanReader { tokens: &tokens, base };
        let mut gold = ExtractionRecord::default();
        for e in &self.entities {
            gold.entities.push(Entity { span: r.read(e.start, e.end, e.text.as_deref())?, label: e.label.clone() });
        }
        for rel in &self.relations {
            gold.relations.push(Relation {
                head: r.raw(&rel.head)?,
                label: rel.label.clone(),
                tail: r.raw(&rel.tail)?,
            });
        }
        for ev in &self.events {
            let mut arguments = Vec::new();
            for a in &ev.arguments {
                arguments.push(Argument { span: r.read(a.start, a.end, a.text.as_deref())?, role: a.role.clone() });
            }
            gold.events.push(Event { label: ev.label.clone(), trigger: r.raw(&ev.trigger)?, arguments });
        }
        for s in &self.sentiments {
            gold.sentiments.push(Sentiment {
                aspect: r.raw(&s.aspect)?,
                polarity: s.polarity.clone(),
                opinion: r.raw(&s.opinion)?,
            });
        }
        let text = self.text.unwrap_or_else(|| tokens.join(" "));
        Ok(ExDocument { text, tokens, task: self.task, gold })
    }

    fn from_document(doc: &ExDocument) -> Self {
        let span = |s: Span| RawSpan { text: Some(doc.surface(s)), start: s.start, end: s.end };
        let g = &doc.gold;
        RawDocument {
            text: Some(doc.text.clone()),
            tokens: Some(doc.tokens.clone()),
            task: doc.task.clone(),
            index_base: None,
            entities: g
                .entities
                .iter()
                .map(|e| RawEntity {
                    text: Some(doc.surface(e.span)),
                    start: e.span.start,
                    end: e.span.end,
                    label: e.label.clone(),
                })
                .collect(),
            relations: g
                .relations
                .iter()
                .map(|r| RawRelation { label: r.label.clone(), head: span(r.head), tail: span(r.tail) })
                .collect(),
            events: g
                .events
                .iter()
                .map(|e| RawEvent {
                    label: e.label.clone(),
                    trigger: span(e.trigger),
                    arguments: e
                        .arguments
                        .iter()
                        .map(|a| RawArgument {
                            text: Some(doc.surface(a.span)),
                            start: a.span.start,
                            end: a.span.end,
                            role: a.role.clone(),
                        })
                        .collect(),
                })
                .collect(),
            sentiments: g
                .sentiments
                .iter()
                .map(|s| RawSentiment {
                    polarity: s.polarity.clone(),
                    aspect: span(s.aspect),
                    opinion: span(s.opinion),
                })
                .collect(),
        }
    }
}

/// Parses one EX-JSONL record.
pub fn parse_document(line: &str) -> std::result::Result<ExDocument, String> {
    let raw: RawDocument = serde_json::from_str(line).map_err(|e| e.to_string())?;
    raw.into_document()
}

/// Serialises one document as a single JSON line (no trailing newline).
pub fn document_to_json(doc: &ExDocument) -> String {
    serde_json::to_string(&RawDocument::from_document(doc)).expect("documents always serialise")
}

/// Parses EX-JSONL text; blank lines are skipped, errors carry the 1-based
/// line number.
pub fn read_jsonl_str(text: &str) -> Result<Vec<ExDocument>> {
    let mut docs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        docs.push(parse_document(line).map_err(|msg| Error::Data { line: i + 1, msg })?);
    }
    Ok(docs)
}

pub fn write_jsonl_string(docs: &[ExDocument]) -> String {
    let mut out = String::new();
    for d in docs {
        out.push_str(&document_to_json(d));
        out.push('\n');
    }
    out
}

pub fn read_jsonl(path: &Path) -> Result<Vec<ExDocument>> {
    read_jsonl_str(&fsutil::read_to_string(path)?)
}

pub fn write_jsonl(path: &Path, docs: &[ExDocument]) -> Result<()> {
    fsutil::write_atomic(path, write_jsonl_string(docs).as_bytes())
}
