//! Hand-counted metric cases. Expected values are exact fractions.

use uniex::data::ExDocument;
use uniex::eval::{self, MetricReport};
use uniex::structures::{Argument, Entity, Event, ExtractionRecord, Relation, Sentiment, Span};

pub type Frac = (usize, usize);

pub struct HandCase {
    pub name: &'static str,
    pub metric: fn(&[ExDocument], &[ExDocument]) -> MetricReport,
    pub pred: Vec<ExDocument>,
    pub gold: Vec<ExDocument>,
    /// tp, fp, fn
    pub counts: (usize, usize, usize),
    pub precision: Frac,
    pub recall: Frac,
    pub f1: Frac,
}

fn doc(text: &str, rec: ExtractionRecord) -> ExDocument {
    let tokens = text.split_whitespace().map(str::to_string).collect();
    ExDocument::from_tokens(tokens, "T").with_gold(rec)
}

fn sp(a: usize, b: usize) -> Span {
    Span::new(a, b)
}

fn e(a: usize, b: usize, l: &str) -> Entity {
    Entity { span: sp(a, b), label: l.into() }
}

fn rel(h: Span, l: &str, t: Span) -> Relation {
    Relation { head: h, label: l.into(), tail: t }
}

fn ents(v: Vec<Entity>) -> ExtractionRecord {
    ExtractionRecord { entities: v, ..Default::default() }
}

fn entity(p: &[ExDocument], g: &[ExDocument]) -> MetricReport {
    eval::entity_f1(p, g).unwrap()
}
fn strict(p: &[ExDocument], g: &[ExDocument]) -> MetricReport {
    eval::relation_strict_f1(p, g).unwrap()
}
fn triplet(p: &[ExDocument], g: &[ExDocument]) -> MetricReport {
    eval::relation_triplet_f1(p, g).unwrap()
}
fn trigger(p: &[ExDocument], g: &[ExDocument]) -> MetricReport {
    eval::event_f1(p, g).unwrap().0
}
fn argument(p: &[ExDocument], g: &[ExDocument]) -> MetricReport {
    eval::event_f1(p, g).unwrap().1
}
fn sentiment(p: &[ExDocument], g: &[ExDocument]) -> MetricReport {
    eval::sentiment_triplet_f1(p, g).unwrap()
}

const TEXT: &str = "a b c d e f g h i j";

fn relation_gold() -> ExtractionRecord {
    ExtractionRecord {
        entities: vec![e(0, 0, "Person"), e(2, 3, "Location"), e(5, 5, "Organization"), e(7, 7, "Person")],
        relations: vec![
            rel(sp(0, 0), "live in", sp(2, 3)),
            rel(sp(0, 0), "work for", sp(5, 5)),
            rel(sp(7, 7), "live in", sp(2, 3)),
        ],
        ..Default::default()
    }
}

fn hagel(args: Vec<Argument>, label: &str) -> ExtractionRecord {
    ExtractionRecord {
        entities: vec![e(1, 2, "Victim"), e(5, 5, "Trigger"), e(8, 8, "Place")],
        events: vec![Event { label: label.into(), trigger: sp(5, 5), arguments: args }],
        ..Default::default()
    }
}

fn arg(a: usize, b: usize, role: &str) -> Argument {
    Argument { span: sp(a, b), role: role.into() }
}

fn senti(a: Span, p: &str, o: Span) -> Sentiment {
    Sentiment { aspect: a, polarity: p.into(), opinion: o }
}

pub fn cases() -> Vec<HandCase> {
    let four = ents(vec![e(0, 0, "A"), e(1, 2, "B"), e(4, 4, "A"), e(6, 8, "C")]);
    let hagel_text = "Sergeant Chuck Hagel was seriously wounded twice in Vietnam .";
    let full_args = vec![arg(1, 2, "Victim"), arg(8, 8, "Place")];
    let sent_gold = ExtractionRecord {
        entities: vec![e(0, 0, "Aspect"), e(2, 2, "Opinion"), e(4, 5, "Aspect"), e(7, 7, "Opinion")],
        sentiments: vec![senti(sp(0, 0), "Positive", sp(2, 2)), senti(sp(4, 5), "Negative", sp(7, 7))],
        ..Default::default()
    };
    vec![
        HandCase {
            name: "entity exact match",
            metric: entity,
            pred: vec![doc(TEXT, four.clone())],
            gold: vec![doc(TEXT, four.clone())],
            counts: (4, 0, 0),
            precision: (1, 1),
            recall: (1, 1),
            f1: (1, 1),
        },
        HandCase {
            name: "entity 3 predicted, 2 correct, 4 gold",
            metric: entity,
            pred: vec![doc(TEXT, ents(vec![e(0, 0, "A"), e(1, 2, "B"), e(9, 9, "A")]))],
            gold: vec![doc(TEXT, four.clone())],
            counts: (2, 1, 2),
            precision: (2, 3),
            recall: (1, 2),
            f1: (4, 7),
        },
        HandCase {
            name: "entity right span, wrong type",
            metric: entity,
            pred: vec![doc(TEXT, ents(vec![e(0, 0, "B")]))],
            gold: vec![doc(TEXT, ents(vec![e(0, 0, "A")]))],
            counts: (0, 1, 1),
            precision: (0, 1),
            recall: (0, 1),
            f1: (0, 1),
        },
        HandCase {
            name: "entity micro-aggregation over two documents",
            metric: entity,
            pred: vec![
                doc(TEXT, ents(vec![e(0, 0, "A"), e(1, 1, "A")])),
                doc(TEXT, ents(vec![e(3, 3, "A"), e(4, 4, "A")])),
            ],
            gold: vec![doc(TEXT, ents(vec![e(0, 0, "A"), e(1, 1, "A"), e(2, 2, "A")])), doc(TEXT, ents(vec![]))],
            counts: (2, 2, 1),
            precision: (1, 2),
            recall: (2, 3),
            f1: (4, 7),
        },
        HandCase {
            name: "relation strict exact match",
            metric: strict,
            pred: vec![doc(TEXT, relation_gold())],
            gold: vec![doc(TEXT, relation_gold())],
            counts: (3, 0, 0),
            precision: (1, 1),
            recall: (1, 1),
            f1: (1, 1),
        },
        HandCase {
            name: "relation strict mixed",
            metric: strict,
            pred: vec![doc(
                TEXT,
                ExtractionRecord {
                    // head 7 typed Organization instead of Person; one wrong label
                    entities: vec![
                        e(0, 0, "Person"),
                        e(2, 3, "Location"),
                        e(5, 5, "Organization"),
                        e(7, 7, "Organization"),
                    ],
                    relations: vec![
                        rel(sp(0, 0), "live in", sp(2, 3)),
                        rel(sp(0, 0), "live in", sp(5, 5)),
                        rel(sp(7, 7), "live in", sp(2, 3)),
                    ],
                    ..Default::default()
                },
            )],
            gold: vec![doc(TEXT, relation_gold())],
            counts: (1, 2, 2),
            precision: (1, 3),
            recall: (1, 3),
            f1: (1, 3),
        },
        HandCase {
            name: "relation strict right spans, one wrong entity type",
            metric: strict,
            pred: vec![doc(
                TEXT,
                ExtractionRecord {
                    entities: vec![e(0, 0, "Organization"), e(2, 3, "Location")],
                    relations: vec![rel(sp(0, 0), "live in", sp(2, 3))],
                    ..Default::default()
                },
            )],
            gold: vec![doc(
                TEXT,
                ExtractionRecord {
                    entities: vec![e(0, 0, "Person"), e(2, 3, "Location")],
                    relations: vec![rel(sp(0, 0), "live in", sp(2, 3))],
                    ..Default::default()
                },
            )],
            counts: (0, 1, 1),
            precision: (0, 1),
            recall: (0, 1),
            f1: (0, 1),
        },
        HandCase {
            name: "relation triplet matches strings at other offsets",
            metric: triplet,
            pred: vec![doc(
                "Ada met Oslo and Ada met Oslo",
                ExtractionRecord {
                    entities: vec![e(4, 4, "Person"), e(6, 6, "Location")],
                    relations: vec![rel(sp(4, 4), "live in", sp(6, 6))],
                    ..Default::default()
                },
            )],
            gold: vec![doc(
                "Ada met Oslo and Ada met Oslo",
                ExtractionRecord {
                    entities: vec![e(0, 0, "Person"), e(2, 2, "Location")],
                    relations: vec![rel(sp(0, 0), "live in", sp(2, 2))],
                    ..Default::default()
                },
            )],
            counts: (1, 0, 0),
            precision: (1, 1),
            recall: (1, 1),
            f1: (1, 1),
        },
        HandCase {
            name: "relation triplet wrong label",
            metric: triplet,
            pred: vec![doc(
                TEXT,
                ExtractionRecord {
                    entities: vec![e(0, 0, "Person"), e(2, 3, "Location")],
                    relations: vec![rel(sp(0, 0), "work for", sp(2, 3))],
                    ..Default::default()
                },
            )],
            gold: vec![doc(
                TEXT,
                ExtractionRecord {
                    entities: vec![e(0, 0, "Person"), e(2, 3, "Location")],
                    relations: vec![rel(sp(0, 0), "live in", sp(2, 3))],
                    ..Default::default()
                },
            )],
            counts: (0, 1, 1),
            precision: (0, 1),
            recall: (0, 1),
            f1: (0, 1),
        },
        HandCase {
            name: "event trigger under wrong event type",
            metric: trigger,
            pred: vec![doc(hagel_text, hagel(full_args.clone(), "Convict"))],
            gold: vec![doc(hagel_text, hagel(full_args.clone(), "Injure"))],
            counts: (0, 1, 1),
            precision: (0, 1),
            recall: (0, 1),
            f1: (0, 1),
        },
        HandCase {
            name: "event arguments under wrong event type",
            metric: argument,
            pred: vec![doc(hagel_text, hagel(full_args.clone(), "Convict"))],
            gold: vec![doc(hagel_text, hagel(full_args.clone(), "Injure"))],
            counts: (0, 2, 2),
            precision: (0, 1),
            recall: (0, 1),
            f1: (0, 1),
        },
        HandCase {
            name: "event arguments mixed",
            metric: argument,
            pred: vec![doc(
                hagel_text,
                hagel(vec![arg(1, 2, "Victim"), arg(8, 8, "Agent"), arg(0, 0, "Agent")], "Injure"),
            )],
            gold: vec![doc(hagel_text, hagel(full_args.clone(), "Injure"))],
            counts: (1, 2, 1),
            precision: (1, 3),
            recall: (1, 2),
            f1: (2, 5),
        },
        HandCase {
            name: "event trigger exact",
            metric: trigger,
            pred: vec![doc(hagel_text, hagel(vec![], "Injure"))],
            gold: vec![doc(hagel_text, hagel(full_args, "Injure"))],
            counts: (1, 0, 0),
            precision: (1, 1),
            recall: (1, 1),
            f1: (1, 1),
        },
        HandCase {
            name: "sentiment wrong polarity only",
            metric: sentiment,
            pred: vec![doc(
                TEXT,
                ExtractionRecord { sentiments: vec![senti(sp(0, 0), "Negative", sp(2, 2))], ..sent_gold.clone() },
            )],
            gold: vec![doc(
                TEXT,
                ExtractionRecord { sentiments: vec![senti(sp(0, 0), "Positive", sp(2, 2))], ..sent_gold.clone() },
            )],
            counts: (0, 1, 1),
            precision: (0, 1),
            recall: (0, 1),
            f1: (0, 1),
        },
        HandCase {
            name: "sentiment mixed",
            metric: sentiment,
            pred: vec![doc(
                TEXT,
                ExtractionRecord {
                    sentiments: vec![
                        senti(sp(0, 0), "Positive", sp(2, 2)),
                        senti(sp(4, 5), "Positive", sp(7, 7)),
                        senti(sp(4, 5), "Negative", sp(2, 2)),
                    ],
                    ..sent_gold.clone()
                },
            )],
            gold: vec![doc(TEXT, sent_gold)],
            counts: (1, 2, 1),
            precision: (1, 3),
            recall: (1, 2),
            f1: (2, 5),
        },
        HandCase {
            name: "empty prediction against empty reference",
            metric: entity,
            pred: vec![doc(TEXT, ents(vec![]))],
            gold: vec![doc(TEXT, ents(vec![]))],
            counts: (0, 0, 0),
            precision: (1, 1),
            recall: (1, 1),
            f1: (1, 1),
        },
        HandCase {
            name: "empty prediction against non-empty reference",
            metric: entity,
            pred: vec![doc(TEXT, ents(vec![]))],
            gold: vec![doc(TEXT, ents(vec![e(0, 0, "A")]))],
            counts: (0, 0, 1),
            precision: (0, 1),
            recall: (0, 1),
            f1: (0, 1),
        },
        HandCase {
            name: "duplicate prediction counts once",
            metric: entity,
            pred: vec![doc(TEXT, ents(vec![e(0, 0, "A"), e(0, 0, "A")]))],
            gold: vec![doc(TEXT, ents(vec![e(0, 0, "A")]))],
            counts: (1, 1, 0),
            precision: (1, 2),
            recall: (1, 1),
            f1: (2, 3),
        },
    ]
}

/// Names of the cases whose reported numbers disagree with the hand count
/// beyond `tol`.
pub fn failures(tol: f64) -> Vec<String> {
    let frac = |(n, d): Frac| n as f64 / d as f64;
    let mut bad = Vec::new();
    for c in cases() {
        let m = (c.metric)(&c.pred, &c.gold);
        let ok = (m.tp, m.fp, m.fn_) == c.counts
            && (m.precision - frac(c.precision)).abs() <= tol
            && (m.recall - frac(c.recall)).abs() <= tol
            && (m.f1 - frac(c.f1)).abs() <= tol;
        if !ok {
            bad.push(format!("{}: got {:?}", c.name, m));
        }
    }
    bad
}
