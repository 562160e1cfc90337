//! Wall-clock throughput of encode, score and decode.
//!
//! Decoding reads every table once per sentence, so its cost depends on the
//! sentence length and schema count but not on how many structures the
//! sentence holds. [`BenchReport::groups`] makes that visible by bucketing
//! sentences on their gold target count.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::ExDocument;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::structures;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    /// Sentences per timed chunk.
    pub batch: usize,
    /// Untimed passes over the dataset.
    pub warmup: usize,
    /// Timed passes over the dataset.
    pub repeats: usize,
    pub threshold: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig { batch: 1, warmup: 2, repeats: 10, threshold: structures::DEFAULT_THRESHOLD }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 || self.repeats == 0 {
            return Err(Error::Config("batch and repeats must be positive".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config(format!("threshold must lie in (0, 1), got {}", self.threshold)));
        }
        Ok(())
    }
}

/// Median timings of one sentence over the timed passes, in seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentenceTiming {
    pub index: usize,
    pub n_text: usize,
    pub gold_targets: usize,
    pub predicted_targets: usize,
    pub encode_score_s: f64,
    pub decode_s: f64,
}

/// Sentences sharing one gold target count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupTiming {
    pub gold_targets: usize,
    pub sentences: usize,
    pub median_decode_s: f64,
    pub median_total_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub sentences: usize,
    pub batch: usize,
    pub warmup: usize,
    pub repeats: usize,
    /// Timed wall-clock seconds over all passes.
    pub seconds: f64,
    pub sentences_per_second: f64,
    pub per_sentence: Vec<SentenceTiming>,
    pub groups: Vec<GroupTiming>,
}

impl BenchReport {
    pub fn group(&self, gold_targets: usize) -> Option<&GroupTiming> {
        self.groups.iter().find(|g| g.gold_targets == gold_targets)
    }

    pub fn to_table(&self) -> String {
        let mut s = format!(
            "sentences {}  batch {}  repeats {}  throughput {:.1} sentences/s\n",
            self.sentences, self.batch, self.repeats, self.sentences_per_second
        );
        s.push_str("targets  sentences  median decode (us)  median total (us)\n");
        for g in &self.groups {
            s.push_str(&format!(
                "{:>7}  {:>9}  {:>18.2}  {:>17.2}\n",
                g.gold_targets,
                g.sentences,
                g.median_decode_s * 1e6,
                g.median_total_s * 1e6
            ));
        }
        s
    }
}

/// Median of a non-empty sample.
pub fn median(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty(), "median of an empty sample");
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Times `model` on `docs`.
pub fn run(model: &Model, docs: &[ExDocument], config: &BenchConfig) -> Result<BenchReport> {
    config.validate()?;
    if docs.is_empty() {
        return Err(Error::Config("benchmark dataset is empty".into()));
    }
    let inputs = docs.iter().map(|d| model.prompt(&d.tokens)).collect::<Result<Vec<_>>>()?;
    let tau = config.threshold;

    for _ in 0..config.warmup {
        for input in &inputs {
            let scores = model.scores(input)?;
            std::hint::black_box(structures::decode(&scores, &model.schemas, tau));
        }
    }

    let mut enc: Vec<Vec<f64>> = vec![Vec::with_capacity(config.repeats); docs.len()];
    let mut dec: Vec<Vec<f64>> = vec![Vec::with_capacity(config.repeats); docs.len()];
    let mut predicted = vec![0; docs.len()];
    let start = Instant::now();
    for _ in 0..config.repeats {
        for chunk in (0..inputs.len()).collect::<Vec<_>>().chunks(config.batch) {
            for &i in chunk {
                let t0 = Instant::now();
                let scores = model.scores(&inputs[i])?;
                let t1 = Instant::now();
                let (record, _) = structures::decode(&scores, &model.schemas, tau);
                let t2 = Instant::now();
                enc[i].push((t1 - t0).as_secs_f64());
                dec[i].push((t2 - t1).as_secs_f64());
                predicted[i] = record.target_count();
            }
        }
    }
    let seconds = start.elapsed().as_secs_f64();

    let per_sentence: Vec<SentenceTiming> = docs
        .iter()
        .enumerate()
        .map(|(i, d)| SentenceTiming {
            index: i,
            n_text: inputs[i].n_text(),
            gold_targets: d.gold.truncated(inputs[i].n_text()).target_count(),
            predicted_targets: predicted[i],
            encode_score_s: median(&enc[i]),
            decode_s: median(&dec[i]),
        })
        .collect();

    let mut buckets: BTreeMap<usize, Vec<&SentenceTiming>> = BTreeMap::new();
    for t in &per_sentence {
        buckets.entry(t.gold_targets).or_default().push(t);
    }
    let groups = buckets
        .into_iter()
        .map(|(k, ts)| {
            let decode: Vec<f64> = ts.iter().map(|t| t.decode_s).collect();
            let total: Vec<f64> = ts.iter().map(|t| t.decode_s + t.encode_score_s).collect();
            GroupTiming {
                gold_targets: k,
                sentences: ts.len(),
                median_decode_s: median(&decode),
                median_total_s: median(&total),
            }
        })
        .collect();

    let n = docs.len() * config.repeats;
    Ok(BenchReport {
        sentences: docs.len(),
        batch: config.batch,
        warmup: config.warmup,
        repeats: config.repeats,
        seconds,
        sentences_per_second: n as f64 / seconds.max(f64::MIN_POSITIVE),
        per_sentence,
        groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_odd_and_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn config_validation() {
        assert!(BenchConfig::default().validate().is_ok());
        let bad = BenchConfig { batch: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
