//! Central-difference check of the full training loss: prompt, encoder,
//! score head and masked BCE on a tiny relation instance.

use serde::{Deserialize, Serialize};

use crate::data::{ExDocument, Vocabulary};
use crate::encoder::EncoderConfig;
use crate::error::Result;
use crate::model::{Ablations, Model, ModelConfig};
use crate::ndiff::{grad_check, Fault, GradCheckReport};
use crate::schema::{PromptOptions, SchemaSet, TaskKind};
use crate::structures::{Entity, ExtractionRecord, Relation, Span};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GradcheckConfig {
    pub d: usize,
    pub layers: usize,
    pub heads: usize,
    pub n_text: usize,
    pub seed: u64,
    pub init_std: f64,
    pub step: f64,
    pub tolerance: f64,
    pub ablations: Ablations,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            d: 8,
            layers: 2,
            heads: 2,
            n_text: 6,
            seed: 0,
            init_std: 0.3,
            step: 1e-5,
            tolerance: 1e-4,
            ablations: Ablations::default(),
        }
    }
}

/// Two classification labels, one association label and an `n_text`-token
/// sentence holding one relation between its first and fourth tokens.
pub fn instance(n_text: usize) -> (SchemaSet, ExDocument) {
    assert!(n_text >= 4, "the gradient-check sentence needs at least 4 tokens");
    let schemas = SchemaSet::new(
        "Relation Extraction",
        TaskKind::Relation,
        vec!["Person".into(), "Location".into()],
        vec!["live in".into()],
        vec![("live in".into(), "Person".into()), ("live in".into(), "Location".into())],
    )
    .expect("valid schema");
    let mut tokens: Vec<String> = ["Ada", "lives", "in", "Oslo"].iter().map(|s| s.to_string()).collect();
    tokens.extend((4..n_text).map(|i| format!("w{i}")));
    let mut doc = ExDocument::from_tokens(tokens, &schemas.task_name);
    let (per, loc) = (Span::new(0, 0), Span::new(3, 3));
    doc.gold = ExtractionRecord {
        entities: vec![Entity { span: per, label: "Person".into() }, Entity { span: loc, label: "Location".into() }],
        relations: vec![Relation { head: per, label: "live in".into(), tail: loc }],
        ..Default::default()
    };
    (schemas, doc)
}

/// Builds the model and runs the check; `fault` corrupts one backward rule.
pub fn run(config: &GradcheckConfig, fault: Option<Fault>) -> Result<GradCheckReport> {
    let (schemas, doc) = instance(config.n_text);
    let prompt = PromptOptions::default();
    let model_config = ModelConfig {
        encoder: EncoderConfig {
            layers: config.layers,
            d: config.d,
            heads: config.heads,
            ffn_hidden: 2 * config.d,
            vocab_size: 0,
            max_position: prompt.text_offset + config.n_text + 2,
            seed: config.seed,
            init_std: config.init_std,
        },
        prompt,
        ..Default::default()
    }
    .with_ablations(config.ablations);
    let vocab = Vocabulary::build([&doc], [&schemas]);
    let model = Model::new(model_config, vocab, schemas)?;
    let example = model.example(&doc)?;
    grad_check(&model.params, config.step, fault, |g, p| model.loss_on(g, &example, p))
}
