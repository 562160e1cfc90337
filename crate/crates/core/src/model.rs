//! Encoder plus score head over one schema set, with checkpointing.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{ExDocument, Vocabulary};
use crate::encoder::{self, EncoderConfig};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::ndiff::{Graph, ParamStore, Var};
use crate::schema::{build_prompt, PromptOptions, SchemaSet, UnifiedInput};
use crate::scoring::{self, ScoreTensor, ScoringHead};
use crate::structures::{self, build_target_tensor, Diagnostics, ExtractionRecord, TargetTensor};

pub const CHECKPOINT_FORMAT: &str = "uniex-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Switches that each remove one component.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Ablations {
    /// Every token sees every other token.
    pub no_sam: bool,
    /// Multi-head selection replaces the triaffine head.
    pub no_triaffine: bool,
    /// Label words are replaced by per-label placeholders.
    pub no_label_names: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    pub head: ScoringHead,
    pub prompt: PromptOptions,
}

impl ModelConfig {
    pub fn with_ablations(mut self, a: Ablations) -> Self {
        if a.no_sam {
            self.prompt.sam = false;
        }
        if a.no_triaffine {
            self.head = ScoringHead::MultiHeadSelection;
        }
        if a.no_label_names {
            self.prompt.placeholder_labels = true;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        if self.encoder.max_position <= self.prompt.text_offset + 1 {
            return Err(Error::Config(format!(
                "max_position {} leaves no text positions after offset {}",
                self.encoder.max_position, self.prompt.text_offset
            )));
        }
        Ok(())
    }

    /// Longest text (in tokens) whose positions fit the position table.
    pub fn max_text_tokens(&self) -> usize {
        self.encoder.max_position - self.prompt.text_offset - 2
    }
}

/// Decoded output for one sentence.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub record: ExtractionRecord,
    pub diagnostics: Diagnostics,
    /// Text tokens dropped by truncation.
    pub truncated: usize,
}

/// A prompt together with its structural-table supervision.
#[derive(Clone, Debug)]
pub struct Example {
    pub input: UnifiedInput,
    pub target: TargetTensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub schemas: SchemaSet,
    pub params: ParamStore,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    config: ModelConfig,
    vocab: Vocabulary,
    schemas: SchemaSet,
    params: ParamStore,
}

impl Model {
    /// Fresh model; `config.encoder.vocab_size` is set from `vocab` and the
    /// parameters are drawn from `config.encoder.seed`.
    pub fn new(mut config: ModelConfig, vocab: Vocabulary, schemas: SchemaSet) -> Result<Self> {
        config.encoder.vocab_size = vocab.len();
        config.validate()?;
        schemas.validate()?;
        let params = Self::init(&config)?;
        Ok(Model { config, vocab, schemas, params })
    }

    fn init(config: &ModelConfig) -> Result<ParamStore> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.encoder.seed);
        let mut params = ParamStore::new();
        encoder::init_params(&config.encoder, &mut params, &mut rng)?;
        scoring::init_head_params(config.head, config.encoder.d, config.encoder.init_std, &mut params, &mut rng);
        Ok(params)
    }

    /// Same parameters under a different schema set (for example the same
    /// labels in another order).
    pub fn with_schemas(&self, schemas: SchemaSet) -> Result<Self> {
        schemas.validate()?;
        Ok(Model { schemas, ..self.clone() })
    }

    fn prompt_options(&self) -> PromptOptions {
        let mut opts = self.config.prompt.clone();
        let schema_len = opts.max_len.min(self.config.max_text_tokens() + self.schema_tokens() + 2);
        opts.max_len = schema_len;
        opts
    }

    fn schema_tokens(&self) -> usize {
        // one identifier per schema plus its words
        self.schemas
            .schema_names()
            .enumerate()
            .map(|(i, n)| {
                let words = if i > 0 && self.config.prompt.placeholder_labels {
                    1
                } else {
                    crate::data::vocab::words(n).count()
                };
                1 + words
            })
            .sum()
    }

    pub fn prompt<S: AsRef<str>>(&self, tokens: &[S]) -> Result<UnifiedInput> {
        build_prompt(&self.schemas, tokens, &self.vocab, &self.prompt_options())
    }

    /// Prompt and target for a gold document; gold structures beyond the
    /// truncation point are dropped.
    pub fn example(&self, doc: &ExDocument) -> Result<Example> {
        let input = self.prompt(&doc.tokens)?;
        let gold = doc.gold.truncated(input.n_text());
        let target = build_target_tensor(&gold, &self.schemas, input.n_text())?;
        Ok(Example { input, target })
    }

    /// Records the forward pass on `g` and returns the score handle.
    pub fn forward_on(&self, g: &mut Graph, input: &UnifiedInput, params: &ParamStore) -> Result<Var> {
        let enc = encoder::encode_on(g, input, &self.config.encoder, params)?;
        scoring::score_on(g, enc.hs, enc.hx, self.config.head, params)
    }

    /// Masked BCE of one example, recorded on `g`.
    pub fn loss_on(&self, g: &mut Graph, example: &Example, params: &ParamStore) -> Result<Var> {
        let s = self.forward_on(g, &example.input, params)?;
        g.bce_sum(s, &example.target.values, &example.target.valid)
    }

    pub fn scores(&self, input: &UnifiedInput) -> Result<ScoreTensor> {
        let mut g = Graph::new();
        let s = self.forward_on(&mut g, input, &self.params)?;
        ScoreTensor::from_array(g.value(s).clone())
    }

    pub fn predict<S: AsRef<str>>(&self, tokens: &[S], tau: f64) -> Result<Prediction> {
        let input = self.prompt(tokens)?;
        let scores = self.scores(&input)?;
        let (record, diagnostics) = structures::decode(&scores, &self.schemas, tau);
        Ok(Prediction { record, diagnostics, truncated: input.truncated })
    }

    /// Copy of `doc` with its gold replaced by the prediction.
    pub fn predict_document(&self, doc: &ExDocument, tau: f64) -> Result<ExDocument> {
        let p = self.predict(&doc.tokens, tau)?;
        Ok(doc.with_gold(p.record))
    }

    pub fn to_json(&self) -> Result<String> {
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            vocab: self.vocab.clone(),
            schemas: self.schemas.clone(),
            params: self.params.clone(),
        };
        Ok(serde_json::to_string(&ck)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!("unsupported checkpoint {} v{}", ck.format, ck.version)));
        }
        ck.config.validate()?;
        ck.schemas.validate()?;
        if ck.config.encoder.vocab_size != ck.vocab.len() {
            return Err(Error::Config("checkpoint vocabulary size disagrees with its config".into()));
        }
        let template = Self::init(&ck.config)?;
        for (name, a) in template.iter() {
            match ck.params.get(name) {
                Some(b) if b.shape() == a.shape() => {}
                Some(b) => {
                    return Err(Error::Config(format!(
                        "parameter {name} has shape {:?}, expected {:?}",
                        b.shape(),
                        a.shape()
                    )))
                }
                None => return Err(Error::Config(format!("checkpoint lacks parameter {name}"))),
            }
        }
        if ck.params.len() != template.len() {
            return Err(Error::Config("checkpoint has unexpected parameters".into()));
        }
        if !ck.params.is_finite() {
            return Err(Error::NonFinite("checkpoint parameters".into()));
        }
        Ok(Model { config: ck.config, vocab: ck.vocab, schemas: ck.schemas, params: ck.params })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsutil::write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fsutil::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::worked;

    fn tiny(schemas: &SchemaSet, doc: &ExDocument) -> Model {
        let config = ModelConfig {
            encoder: EncoderConfig {
                d: 8,
                heads: 2,
                ffn_hidden: 16,
                layers: 1,
                max_position: 96,
                ..Default::default()
            },
            ..Default::default()
        };
        Model::new(config, Vocabulary::build([doc], [schemas]), schemas.clone()).unwrap()
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let (s, doc) = worked::conll04();
        let m = tiny(&s, &doc);
        let back = Model::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn untrained_scores_sit_near_half() {
        let (s, doc) = worked::conll03();
        let m = tiny(&s, &doc);
        let input = m.prompt(&doc.tokens).unwrap();
        let sc = m.scores(&input).unwrap();
        assert_eq!(sc.values().shape(), &[5, 9, 9]);
        assert!(sc.values().data().iter().all(|&v| (v - 0.5).abs() < 0.05));
        assert!(m.predict(&doc.tokens, 0.999).unwrap().record.is_empty());
    }

    #[test]
    fn long_text_is_truncated_to_position_table() {
        let (s, doc) = worked::conll03();
        let m = tiny(&s, &doc);
        let long: Vec<String> = (0..100).map(|_| "Arafat".to_string()).collect();
        let p = m.prompt(&long).unwrap();
        assert!(p.positions.iter().all(|&x| x < 96));
        assert_eq!(p.n_text() + p.truncated, 100);
    }

    #[test]
    fn ablations_touch_only_their_component() {
        let base = ModelConfig::default();
        let a = base.clone().with_ablations(Ablations { no_sam: true, ..Default::default() });
        assert_eq!((a.head, a.prompt.placeholder_labels, a.prompt.sam), (base.head, false, false));
        let b = base.clone().with_ablations(Ablations { no_triaffine: true, ..Default::default() });
        assert_eq!((b.head, b.prompt.clone()), (ScoringHead::MultiHeadSelection, base.prompt.clone()));
        let c = base.clone().with_ablations(Ablations { no_label_names: true, ..Default::default() });
        assert_eq!((c.head, c.prompt.sam, c.prompt.placeholder_labels), (base.head, true, true));
    }
}
