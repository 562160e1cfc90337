use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::SchemaSet;

/// Token span, 0-based with an inclusive end.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn fits(&self, n_text: usize) -> bool {
        self.start <= self.end && self.end < n_text
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Entity {
    pub span: Span,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Relation {
    pub head: Span,
    pub label: String,
    pub tail: Span,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Argument {
    pub span: Span,
    pub role: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Event {
    pub label: String,
    pub trigger: Span,
    pub arguments: Vec<Argument>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Sentiment {
    pub aspect: Span,
    pub polarity: String,
    pub opinion: Span,
}

/// Everything extracted from (or annotated on) one sentence.
///
/// `entities` holds every typed span except event-type labels, which live
/// on [`Event`]s; relations, sentiment triplets, trigger and argument spans
/// all refer to spans that appear in `entities`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExtractionRecord {
    pub entities: Vec<Entity>,
    pub relations: Vec<Relation>,
    pub events: Vec<Event>,
    pub sentiments: Vec<Sentiment>,
}

impl ExtractionRecord {
    pub fn is_empty(&self) -> bool {
        self.entities.is_empty() && self.relations.is_empty() && self.events.is_empty() && self.sentiments.is_empty()
    }

    /// Sorted, duplicate-free form used for set comparison.
    pub fn canonical(&self) -> Self {
        fn norm<T: Ord + Clone>(v: &[T]) -> Vec<T> {
            let set: BTreeSet<T> = v.iter().cloned().collect();
            set.into_iter().collect()
        }
        let events: Vec<Event> = self
            .events
            .iter()
            .map(|e| Event { label: e.label.clone(), trigger: e.trigger, arguments: norm(&e.arguments) })
            .collect();
        ExtractionRecord {
            entities: norm(&self.entities),
            relations: norm(&self.relations),
            events: norm(&events),
            sentiments: norm(&self.sentiments),
        }
    }

    /// Distinct entity spans in sorted order.
    pub fn spans(&self) -> Vec<Span> {
        let set: BTreeSet<Span> = self.entities.iter().map(|e| e.span).collect();
        set.into_iter().collect()
    }

    /// Number of extraction targets: typed spans, relations, events,
    /// arguments and triplets.
    pub fn target_count(&self) -> usize {
        self.entities.len()
            + self.relations.len()
            + self.sentiments.len()
            + self.events.iter().map(|e| 1 + e.arguments.len()).sum::<usize>()
    }

    /// Drops every structure touching a token at or beyond `n_text`.
    pub fn truncated(&self, n_text: usize) -> Self {
        let ok = |s: &Span| s.fits(n_text);
        ExtractionRecord {
            entities: self.entities.iter().filter(|e| ok(&e.span)).cloned().collect(),
            relations: self.relations.iter().filter(|r| ok(&r.head) && ok(&r.tail)).cloned().collect(),
            events: self
                .events
                .iter()
                .filter(|e| ok(&e.trigger))
                .map(|e| Event {
                    label: e.label.clone(),
                    trigger: e.trigger,
                    arguments: e.arguments.iter().filter(|a| ok(&a.span)).cloned().collect(),
                })
                .collect(),
            sentiments: self.sentiments.iter().filter(|s| ok(&s.aspect) && ok(&s.opinion)).cloned().collect(),
        }
    }

    /// Checks spans against the sentence length and labels against the
    /// schema set, and that every linked span is a typed entity span.
    pub fn validate(&self, schemas: &SchemaSet, n_text: usize) -> Result<()> {
        let spans: BTreeSet<Span> = self.entities.iter().map(|e| e.span).collect();
        let check_span = |s: &Span, what: &str| -> Result<()> {
            if !s.fits(n_text) {
                return Err(Error::Target(format!("{what} span ({}, {}) outside {n_text} tokens", s.start, s.end)));
            }
            Ok(())
        };
        let linked = |s: &Span, what: &str| -> Result<()> {
            check_span(s, what)?;
            if !spans.contains(s) {
                return Err(Error::Target(format!(
                    "{what} span ({}, {}) is not among the gold entity spans",
                    s.start, s.end
                )));
            }
            Ok(())
        };
        let class = |l: &str| -> Result<()> {
            if schemas.classification_index(l).is_none() {
                return Err(Error::Target(format!("unknown classification label '{l}'")));
            }
            Ok(())
        };
        let assoc = |l: &str| -> Result<()> {
            if schemas.association_index(l).is_none() {
                return Err(Error::Target(format!("unknown association label '{l}'")));
            }
            Ok(())
        };
        for e in &self.entities {
            check_span(&e.span, "entity")?;
            class(&e.label)?;
        }
        for r in &self.relations {
            assoc(&r.label)?;
            linked(&r.head, "relation head")?;
            linked(&r.tail, "relation tail")?;
        }
        for s in &self.sentiments {
            assoc(&s.polarity)?;
            linked(&s.aspect, "aspect")?;
            linked(&s.opinion, "opinion")?;
        }
        for ev in &self.events {
            class(&ev.label)?;
            linked(&ev.trigger, "trigger")?;
            for a in &ev.arguments {
                linked(&a.span, "argument")?;
                let carries = self.entities.iter().any(|e| e.span == a.span && e.label == a.role);
                if !carries {
                    return Err(Error::Target(format!(
                        "argument ({}, {}) does not carry its role '{}' as an entity type",
                        a.span.start, a.span.end, a.role
                    )));
                }
            }
        }
        Ok(())
    }
}
