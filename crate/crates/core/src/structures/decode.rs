use std::collections::{BTreeMap, BTreeSet};

use crate::schema::{SchemaSet, TaskKind, TRIGGER_ARGUMENT_LABEL, TRIGGER_LABEL};
use crate::scoring::ScoreTensor;

use super::{Argument, Entity, Event, ExtractionRecord, Relation, Sentiment, Span};

/// Default decision threshold.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Every `(p, q)` with `q >= p` and `S[0, p, q] > tau`, in `(p, q)` order.
pub fn decode_detection(scores: &ScoreTensor, tau: f64) -> Vec<Span> {
    let n = scores.n_text();
    let mut out = Vec::new();
    for p in 0..n {
        for q in p..n {
            if scores.get(0, p, q) > tau {
                out.push(Span::new(p, q));
            }
        }
    }
    out
}

/// Every `(span, label)` with `S[label, s, e] > tau`. Spans may receive
/// several labels or none.
pub fn decode_classification(scores: &ScoreTensor, spans: &[Span], schemas: &SchemaSet, tau: f64) -> Vec<Entity> {
    let mut out = Vec::new();
    for &span in spans {
        for (c, label) in schemas.classification.iter().enumerate() {
            if scores.get(schemas.classification_table(c), span.start, span.end) > tau {
                out.push(Entity { span, label: label.clone() });
            }
        }
    }
    out
}

fn labels_by_span(typed: &[Entity]) -> BTreeMap<Span, BTreeSet<&str>> {
    let mut map: BTreeMap<Span, BTreeSet<&str>> = BTreeMap::new();
    for e in typed {
        map.entry(e.span).or_default().insert(e.label.as_str());
    }
    map
}

/// Whether a span carrying `types` may sit on either end of association
/// `label`: always when the label has no bindings, otherwise when one of
/// the types is bound to it.
pub fn endpoint_allowed(schemas: &SchemaSet, label: &str, types: &BTreeSet<&str>) -> bool {
    if !schemas.has_bindings(label) {
        return true;
    }
    schemas.members_of(label).any(|m| types.contains(m))
}

/// Ordered pairs `(i, label, j)` of distinct typed spans whose endpoint types
/// pass the bindings and whose two interleaved cells `(s_i, s_j)` and
/// `(e_i, e_j)` both exceed `tau`.
pub fn decode_association(scores: &ScoreTensor, typed: &[Entity], schemas: &SchemaSet, tau: f64) -> Vec<Relation> {
    let spans = labels_by_span(typed);
    let mut out = Vec::new();
    for (a, label) in schemas.association.iter().enumerate() {
        let r = schemas.association_table(a);
        for (&i, ti) in &spans {
            if !endpoint_allowed(schemas, label, ti) {
                continue;
            }
            for (&j, tj) in &spans {
                if i == j || !endpoint_allowed(schemas, label, tj) {
                    continue;
                }
                if scores.get(r, i.start, j.start) > tau && scores.get(r, i.end, j.end) > tau {
                    out.push(Relation { head: i, label: label.clone(), tail: j });
                }
            }
        }
    }
    out
}

/// Notes on structures dropped or resolved ambiguously during assembly.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Diagnostics {
    pub messages: Vec<String>,
}

impl Diagnostics {
    fn note(&mut self, msg: String) {
        log::debug!("{msg}");
        self.messages.push(msg);
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }
}

/// Groups typed spans and associations into a record.
///
/// Event-type labels never become entities. In an event schema set every
/// span typed both `Trigger` and an event type `E` yields one event of type
/// `E`; its arguments are the spans it links to through `Trigger-Argument`,
/// each carrying every role label it has that `E` binds. Other association
/// labels become sentiment triplets in a sentiment schema set and relations
/// otherwise.
pub fn assemble_record(typed: &[Entity], links: &[Relation], schemas: &SchemaSet) -> (ExtractionRecord, Diagnostics) {
    let mut diag = Diagnostics::default();
    let mut rec = ExtractionRecord::default();
    let by_span = labels_by_span(typed);

    rec.entities = typed.iter().filter(|e| !schemas.is_event_type(&e.label)).cloned().collect();

    for link in links {
        if schemas.kind == TaskKind::Event && link.label == TRIGGER_ARGUMENT_LABEL {
            continue;
        }
        if schemas.kind == TaskKind::Sentiment {
            rec.sentiments.push(Sentiment { aspect: link.head, polarity: link.label.clone(), opinion: link.tail });
        } else {
            rec.relations.push(link.clone());
        }
    }

    if schemas.kind == TaskKind::Event {
        for (&span, types) in &by_span {
            let event_types: Vec<&str> = types.iter().copied().filter(|t| schemas.is_event_type(t)).collect();
            let is_trigger = types.contains(TRIGGER_LABEL);
            if !is_trigger {
                for t in &event_types {
                    diag.note(format!(
                        "span ({}, {}) typed '{t}' without '{TRIGGER_LABEL}'; event dropped",
                        span.start, span.end
                    ));
                }
                continue;
            }
            for event_type in event_types {
                let mut arguments = Vec::new();
                for link in links {
                    if link.label != TRIGGER_ARGUMENT_LABEL || link.head != span {
                        continue;
                    }
                    let roles: Vec<&str> = by_span[&link.tail]
                        .iter()
                        .copied()
                        .filter(|t| schemas.is_role(t) && schemas.members_of(event_type).any(|m| m == *t))
                        .collect();
                    if roles.is_empty() {
                        diag.note(format!(
                            "argument ({}, {}) of '{event_type}' has no role it binds",
                            link.tail.start, link.tail.end
                        ));
                    }
                    if roles.len() > 1 {
                        diag.note(format!(
                            "argument ({}, {}) of '{event_type}' carries roles {:?}",
                            link.tail.start, link.tail.end, roles
                        ));
                    }
                    arguments
                        .extend(roles.into_iter().map(|role| Argument { span: link.tail, role: role.to_string() }));
                }
                rec.events.push(Event { label: event_type.to_string(), trigger: span, arguments });
            }
        }
    }
    (rec.canonical(), diag)
}

/// Inference decoding: detection, classification on detected spans,
/// association, assembly.
pub fn decode(scores: &ScoreTensor, schemas: &SchemaSet, tau: f64) -> (ExtractionRecord, Diagnostics) {
    let spans = decode_detection(scores, tau);
    decode_with_spans(scores, &spans, schemas, tau)
}

/// Decoding with given spans in place of detection, as during teacher
/// forcing.
pub fn decode_with_spans(
    scores: &ScoreTensor,
    spans: &[Span],
    schemas: &SchemaSet,
    tau: f64,
) -> (ExtractionRecord, Diagnostics) {
    let typed = decode_classification(scores, spans, schemas, tau);
    let links = decode_association(scores, &typed, schemas, tau);
    assemble_record(&typed, &links, schemas)
}
