//! Strict micro-F1 metrics.
//!
//! Every metric reduces a record to a multiset of exact keys and matches
//! predictions to references one-to-one, so `tp = Σ_k min(pred_k, gold_k)`.
//! Counts are summed over the corpus before ratios are taken.
//!
//! | metric            | key                                                        |
//! |-------------------|------------------------------------------------------------|
//! | entity            | span, type                                                 |
//! | relation strict   | relation type, both spans, both spans' entity-type sets    |
//! | relation triplet  | relation type, subject string, object string               |
//! | event trigger     | trigger span, event type                                   |
//! | event argument    | argument span, role, event type                            |
//! | sentiment triplet | aspect span, polarity, opinion span                        |
//!
//! When a denominator is empty the ratio is 1 if the other error count is
//! also 0 and 0 otherwise; an empty prediction against an empty reference
//! therefore scores 1.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::ExDocument;
use crate::error::{Error, Result};
use crate::schema::TaskKind;
use crate::structures::{ExtractionRecord, Span};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

/// Multiset one-to-one matching of exact keys.
pub fn match_counts<K: Ord>(pred: impl IntoIterator<Item = K>, gold: impl IntoIterator<Item = K>) -> Counts {
    let mut bag: BTreeMap<K, (usize, usize)> = BTreeMap::new();
    for k in pred {
        bag.entry(k).or_default().0 += 1;
    }
    for k in gold {
        bag.entry(k).or_default().1 += 1;
    }
    let mut c = Counts::default();
    for (p, g) in bag.into_values() {
        let m = p.min(g);
        c.tp += m;
        c.fp += p - m;
        c.fn_ += g - m;
    }
    c
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize, other_err: usize) -> f64 {
    if den == 0 {
        if other_err == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        num as f64 / den as f64
    }
}

impl From<Counts> for MetricReport {
    fn from(c: Counts) -> Self {
        let precision = ratio(c.tp, c.tp + c.fp, c.fn_);
        let recall = ratio(c.tp, c.tp + c.fn_, c.fp);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        MetricReport { tp: c.tp, fp: c.fp, fn_: c.fn_, precision, recall, f1 }
    }
}

fn types_of(rec: &ExtractionRecord) -> BTreeMap<Span, BTreeSet<String>> {
    let mut m: BTreeMap<Span, BTreeSet<String>> = BTreeMap::new();
    for e in &rec.entities {
        m.entry(e.span).or_default().insert(e.label.clone());
    }
    m
}

type StrictKey = (String, Span, BTreeSet<String>, Span, BTreeSet<String>);

fn strict_keys(rec: &ExtractionRecord) -> Vec<StrictKey> {
    let types = types_of(rec);
    let t = |s: &Span| types.get(s).cloned().unwrap_or_default();
    rec.relations.iter().map(|r| (r.label.clone(), r.head, t(&r.head), r.tail, t(&r.tail))).collect()
}

fn triplet_keys(rec: &ExtractionRecord, doc: &ExDocument) -> Vec<(String, String, String)> {
    rec.relations.iter().map(|r| (r.label.clone(), doc.surface(r.head), doc.surface(r.tail))).collect()
}

fn trigger_keys(rec: &ExtractionRecord) -> Vec<(Span, String)> {
    rec.events.iter().map(|e| (e.trigger, e.label.clone())).collect()
}

fn argument_keys(rec: &ExtractionRecord) -> Vec<(Span, String, String)> {
    rec.events.iter().flat_map(|e| e.arguments.iter().map(move |a| (a.span, a.role.clone(), e.label.clone()))).collect()
}

fn check_aligned(pred: &[ExDocument], gold: &[ExDocument]) -> Result<()> {
    if pred.len() != gold.len() {
        return Err(Error::invalid(
            "eval",
            format!("{} predicted documents vs {} reference documents", pred.len(), gold.len()),
        ));
    }
    for (i, (p, g)) in pred.iter().zip(gold).enumerate() {
        if p.tokens != g.tokens {
            return Err(Error::invalid(
                "eval",
                format!("document {} has different tokens in prediction and reference", i + 1),
            ));
        }
    }
    Ok(())
}

fn corpus<F>(pred: &[ExDocument], gold: &[ExDocument], per_doc: F) -> Result<MetricReport>
where
    F: Fn(&ExDocument, &ExDocument) -> Counts,
{
    check_aligned(pred, gold)?;
    let mut c = Counts::default();
    for (p, g) in pred.iter().zip(gold) {
        c += per_doc(p, g);
    }
    Ok(c.into())
}

pub fn entity_f1(pred: &[ExDocument], gold: &[ExDocument]) -> Result<MetricReport> {
    corpus(pred, gold, |p, g| {
        match_counts(
            p.gold.entities.iter().map(|e| (e.span, &e.label)),
            g.gold.entities.iter().map(|e| (e.span, &e.label)),
        )
    })
}

pub fn relation_strict_f1(pred: &[ExDocument], gold: &[ExDocument]) -> Result<MetricReport> {
    corpus(pred, gold, |p, g| match_counts(strict_keys(&p.gold), strict_keys(&g.gold)))
}

pub fn relation_triplet_f1(pred: &[ExDocument], gold: &[ExDocument]) -> Result<MetricReport> {
    corpus(pred, gold, |p, g| match_counts(triplet_keys(&p.gold, p), triplet_keys(&g.gold, g)))
}

/// Trigger and argument reports.
pub fn event_f1(pred: &[ExDocument], gold: &[ExDocument]) -> Result<(MetricReport, MetricReport)> {
    let trig = corpus(pred, gold, |p, g| match_counts(trigger_keys(&p.gold), trigger_keys(&g.gold)))?;
    let args = corpus(pred, gold, |p, g| match_counts(argument_keys(&p.gold), argument_keys(&g.gold)))?;
    Ok((trig, args))
}

pub fn sentiment_triplet_f1(pred: &[ExDocument], gold: &[ExDocument]) -> Result<MetricReport> {
    corpus(pred, gold, |p, g| {
        match_counts(
            p.gold.sentiments.iter().map(|s| (s.aspect, &s.polarity, s.opinion)),
            g.gold.sentiments.iter().map(|s| (s.aspect, &s.polarity, s.opinion)),
        )
    })
}

/// All six metrics over one corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub entity: MetricReport,
    pub relation_strict: MetricReport,
    pub relation_triplet: MetricReport,
    pub event_trigger: MetricReport,
    pub event_argument: MetricReport,
    pub sentiment_triplet: MetricReport,
}

impl Metrics {
    pub fn compute(pred: &[ExDocument], gold: &[ExDocument]) -> Result<Self> {
        let (event_trigger, event_argument) = event_f1(pred, gold)?;
        Ok(Metrics {
            entity: entity_f1(pred, gold)?,
            relation_strict: relation_strict_f1(pred, gold)?,
            relation_triplet: relation_triplet_f1(pred, gold)?,
            event_trigger,
            event_argument,
            sentiment_triplet: sentiment_triplet_f1(pred, gold)?,
        })
    }

    pub fn named(&self) -> [(&'static str, &MetricReport); 6] {
        [
            ("entity", &self.entity),
            ("relation_strict", &self.relation_strict),
            ("relation_triplet", &self.relation_triplet),
            ("event_trigger", &self.event_trigger),
            ("event_argument", &self.event_argument),
            ("sentiment_triplet", &self.sentiment_triplet),
        ]
    }

    /// The headline metric of a task kind.
    pub fn primary(&self, kind: TaskKind) -> &MetricReport {
        match kind {
            TaskKind::Entity => &self.entity,
            TaskKind::Relation => &self.relation_strict,
            TaskKind::Event => &self.event_argument,
            TaskKind::Sentiment => &self.sentiment_triplet,
        }
    }

    /// Fixed-width table for people.
    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:<18} {:>6} {:>6} {:>6} {:>9} {:>9} {:>9}\n",
            "metric", "tp", "fp", "fn", "precision", "recall", "f1"
        );
        for (name, m) in self.named() {
            let _ = writeln!(
                s,
                "{:<18} {:>6} {:>6} {:>6} {:>9.4} {:>9.4} {:>9.4}",
                name, m.tp, m.fp, m.fn_, m.precision, m.recall, m.f1
            );
        }
        s
    }

    /// One `metric.field=value` line per number; floats keep full precision.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        for (name, m) in self.named() {
            let _ = writeln!(s, "{name}.tp={}", m.tp);
            let _ = writeln!(s, "{name}.fp={}", m.fp);
            let _ = writeln!(s, "{name}.fn={}", m.fn_);
            let _ = writeln!(s, "{name}.precision={}", m.precision);
            let _ = writeln!(s, "{name}.recall={}", m.recall);
            let _ = writeln!(s, "{name}.f1={}", m.f1);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_counted_entity_case() {
        let r: MetricReport = Counts { tp: 2, fp: 1, fn_: 2 }.into();
        assert_eq!(r.precision, 2.0 / 3.0);
        assert_eq!(r.recall, 0.5);
        assert!((r.f1 - 4.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn empty_conventions() {
        let r: MetricReport = Counts::default().into();
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
        let r: MetricReport = Counts { tp: 0, fp: 0, fn_: 3 }.into();
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
        let r: MetricReport = Counts { tp: 0, fp: 2, fn_: 0 }.into();
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn duplicates_match_once() {
        let c = match_counts([1, 1, 2], [1, 3]);
        assert_eq!(c, Counts { tp: 1, fp: 2, fn_: 1 });
    }
}
