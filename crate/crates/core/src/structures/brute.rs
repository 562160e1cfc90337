use crate::schema::{SchemaSet, TaskKind, TRIGGER_ARGUMENT_LABEL, TRIGGER_LABEL};
use crate::scoring::ScoreTensor;

use super::{Argument, Entity, Event, ExtractionRecord, Relation, Sentiment, Span};

/// Exhaustive reference decoder: enumerates every span, label and ordered
/// span pair and applies the spotting-designator rules cell by cell.
pub fn brute_force_decode(scores: &ScoreTensor, schemas: &SchemaSet, tau: f64) -> ExtractionRecord {
    let n = scores.n_text();
    let all_spans: Vec<Span> = (0..n).flat_map(|p| (p..n).map(move |q| Span::new(p, q))).collect();
    let labels = &schemas.classification;
    let class_score = |label: &str, s: Span| {
        let c = labels.iter().position(|l| l == label).unwrap();
        scores.get(1 + c, s.start, s.end)
    };
    let detected = |s: Span| scores.get(0, s.start, s.end) > tau;
    let has = |s: Span, label: &str| detected(s) && class_score(label, s) > tau;
    let typed = |s: Span| labels.iter().any(|l| has(s, l));
    let event_type = |l: &str| {
        schemas.kind == TaskKind::Event
            && l != TRIGGER_LABEL
            && labels.iter().any(|x| x == l)
            && schemas.bindings.iter().any(|(o, _)| o == l)
    };
    let endpoint_ok = |assoc: &str, s: Span| {
        let members: Vec<&String> = schemas.bindings.iter().filter(|(o, _)| o == assoc).map(|(_, m)| m).collect();
        members.is_empty() || members.iter().any(|m| has(s, m))
    };
    let linked = |a: usize, i: Span, j: Span| {
        let assoc = &schemas.association[a];
        let r = 1 + labels.len() + a;
        i != j
            && typed(i)
            && typed(j)
            && endpoint_ok(assoc, i)
            && endpoint_ok(assoc, j)
            && scores.get(r, i.start, j.start) > tau
            && scores.get(r, i.end, j.end) > tau
    };

    let mut rec = ExtractionRecord::default();
    for &s in &all_spans {
        for l in labels {
            if has(s, l) && !event_type(l) {
                rec.entities.push(Entity { span: s, label: l.clone() });
            }
        }
    }
    for (a, assoc) in schemas.association.iter().enumerate() {
        if schemas.kind == TaskKind::Event && assoc == TRIGGER_ARGUMENT_LABEL {
            continue;
        }
        for &i in &all_spans {
            for &j in &all_spans {
                if !linked(a, i, j) {
                    continue;
                }
                if schemas.kind == TaskKind::Sentiment {
                    rec.sentiments.push(Sentiment { aspect: i, polarity: assoc.clone(), opinion: j });
                } else {
                    rec.relations.push(Relation { head: i, label: assoc.clone(), tail: j });
                }
            }
        }
    }
    let ta = schemas.association.iter().position(|a| a == TRIGGER_ARGUMENT_LABEL);
    if let (TaskKind::Event, Some(ta)) = (schemas.kind, ta) {
        for &t in &all_spans {
            for e in labels {
                if !(event_type(e) && has(t, e) && has(t, TRIGGER_LABEL)) {
                    continue;
                }
                let mut arguments = Vec::new();
                for &a in &all_spans {
                    if !linked(ta, t, a) {
                        continue;
                    }
                    for role in labels {
                        let binds = schemas.bindings.iter().any(|(o, m)| o == e && m == role);
                        if role != TRIGGER_LABEL && !event_type(role) && binds && has(a, role) {
                            arguments.push(Argument { span: a, role: role.clone() });
                        }
                    }
                }
                rec.events.push(Event { label: e.clone(), trigger: t, arguments });
            }
        }
    } else if schemas.kind == TaskKind::Event {
        for &t in &all_spans {
            for e in labels {
                if event_type(e) && has(t, e) && has(t, TRIGGER_LABEL) {
                    rec.events.push(Event { label: e.clone(), trigger: t, arguments: vec![] });
                }
            }
        }
    }
    rec.canonical()
}
