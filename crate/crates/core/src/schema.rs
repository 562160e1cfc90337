//! Schema sets and the unified prompt built from them.
//!
//! A prompt is laid out as
//!
//! ```text
//! [D-TOK] task words  [C-TOK] label ... [C-TOK] label  [A-TOK] label ...  [SEP] text [SEP]
//! ```
//!
//! Each `[X-TOK] words` group is a block. Position ids restart at 0 in every
//! schema block and start at a fixed offset for the text block, so a label's
//! positions never depend on where it sits in the prompt. The attention mask
//! keeps unrelated label blocks from seeing each other.

use std::collections::HashSet;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::vocab::{self, Vocabulary};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::ndiff::{Array, MASK_NEG};

/// Classification label marking event triggers.
pub const TRIGGER_LABEL: &str = "Trigger";
/// Association label linking an event trigger to its arguments.
pub const TRIGGER_ARGUMENT_LABEL: &str = "Trigger-Argument";

pub const DEFAULT_MAX_LEN: usize = 512;
pub const DEFAULT_TEXT_OFFSET: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Entity,
    Relation,
    Event,
    Sentiment,
}

/// The label inventory of one extraction task.
///
/// Structural table 0 belongs to the task name (span detection), tables
/// `1..=classification.len()` to classification labels and the remaining
/// ones to association labels, in declaration order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaSet {
    pub task_name: String,
    pub kind: TaskKind,
    #[serde(rename = "labels", default)]
    pub classification: Vec<String>,
    #[serde(rename = "associations", default)]
    pub association: Vec<String>,
    /// `(owner, member)` pairs: an association or event-type label and a
    /// classification label it may see. Treated as undirected by the mask.
    #[serde(default)]
    pub bindings: Vec<(String, String)>,
}

impl SchemaSet {
    pub fn new(
        task_name: impl Into<String>,
        kind: TaskKind,
        classification: Vec<String>,
        association: Vec<String>,
        bindings: Vec<(String, String)>,
    ) -> Result<Self> {
        let s = SchemaSet { task_name: task_name.into(), kind, classification, association, bindings };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if vocab::words(&self.task_name).next().is_none() {
            return Err(Error::Schema("task_name is empty".into()));
        }
        let mut seen = HashSet::new();
        for name in self.classification.iter().chain(&self.association) {
            if vocab::words(name).next().is_none() {
                return Err(Error::Schema("empty label name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema(format!("duplicate label '{name}'")));
            }
        }
        for (owner, member) in &self.bindings {
            if !seen.contains(owner.as_str()) {
                return Err(Error::Schema(format!("binding names unknown label '{owner}'")));
            }
            if !self.classification.contains(member) {
                return Err(Error::Schema(format!("binding member '{member}' is not a classification label")));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let s: SchemaSet = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fsutil::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("schema sets always serialise")
    }

    /// `N_s`: one detection schema plus every label.
    pub fn n_schemas(&self) -> usize {
        1 + self.classification.len() + self.association.len()
    }

    pub fn n_classification(&self) -> usize {
        self.classification.len()
    }

    pub fn n_association(&self) -> usize {
        self.association.len()
    }

    /// Table index of classification label `i`.
    pub fn classification_table(&self, i: usize) -> usize {
        1 + i
    }

    /// Table index of association label `i`.
    pub fn association_table(&self, i: usize) -> usize {
        1 + self.classification.len() + i
    }

    /// Schema names in table order, starting with the task name.
    pub fn schema_names(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.task_name.as_str())
            .chain(self.classification.iter().map(String::as_str))
            .chain(self.association.iter().map(String::as_str))
    }

    pub fn schema_name(&self, table: usize) -> &str {
        self.schema_names().nth(table).expect("table index in range")
    }

    pub fn classification_index(&self, label: &str) -> Option<usize> {
        self.classification.iter().position(|l| l == label)
    }

    pub fn association_index(&self, label: &str) -> Option<usize> {
        self.association.iter().position(|l| l == label)
    }

    /// Whether a binding pairs the two labels, in either direction.
    pub fn bound(&self, a: &str, b: &str) -> bool {
        self.bindings.iter().any(|(o, m)| (o == a && m == b) || (o == b && m == a))
    }

    /// Classification labels bound to `owner`.
    pub fn members_of<'a>(&'a self, owner: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.bindings.iter().filter(move |(o, _)| o == owner).map(|(_, m)| m.as_str())
    }

    pub fn has_bindings(&self, owner: &str) -> bool {
        self.members_of(owner).next().is_some()
    }

    /// Event types are classification labels that own bindings in an event
    /// schema set.
    pub fn is_event_type(&self, label: &str) -> bool {
        self.kind == TaskKind::Event
            && label != TRIGGER_LABEL
            && self.classification_index(label).is_some()
            && self.has_bindings(label)
    }

    /// Role labels: classification labels that are neither the trigger
    /// marker nor an event type.
    pub fn is_role(&self, label: &str) -> bool {
        self.kind == TaskKind::Event && label != TRIGGER_LABEL && !self.is_event_type(label)
    }

    /// Reorders labels: `class_order[i]` is the old index of the new i-th
    /// classification label, likewise for associations.
    pub fn reordered(&self, class_order: &[usize], assoc_order: &[usize]) -> Self {
        SchemaSet {
            task_name: self.task_name.clone(),
            kind: self.kind,
            classification: class_order.iter().map(|&i| self.classification[i].clone()).collect(),
            association: assoc_order.iter().map(|&i| self.association[i].clone()).collect(),
            bindings: self.bindings.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Block {
    Task,
    /// Owned by the schema with this table index (>= 1).
    Label(usize),
    Text,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TokenRole {
    Identifier,
    SchemaWord,
    Separator,
    Text,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptOptions {
    /// Upper bound on the assembled prompt; text is truncated to fit.
    pub max_len: usize,
    /// First position id of the text block.
    pub text_offset: usize,
    /// Replace label words with one `[unused n]` placeholder per label.
    pub placeholder_labels: bool,
    /// Schema-based attention mask; `false` makes every token visible.
    pub sam: bool,
    /// Let text tokens attend to label blocks.
    pub text_sees_labels: bool,
}

impl Default for PromptOptions {
    fn default() -> Self {
        PromptOptions {
            max_len: DEFAULT_MAX_LEN,
            text_offset: DEFAULT_TEXT_OFFSET,
            placeholder_labels: false,
            sam: true,
            text_sees_labels: false,
        }
    }
}

/// Directed attention permissions: `get(q, k)` is whether query `q` may
/// attend key `k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttentionMask {
    n: usize,
    allowed: Vec<bool>,
}

impl AttentionMask {
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut allowed = Vec::with_capacity(n * n);
        for q in 0..n {
            for k in 0..n {
                allowed.push(f(q, k));
            }
        }
        AttentionMask { n, allowed }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, q: usize, k: usize) -> bool {
        self.allowed[q * self.n + k]
    }

    pub fn all_visible(&self) -> bool {
        self.allowed.iter().all(|&b| b)
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|q| (0..q).all(|k| self.get(q, k) == self.get(k, q)))
    }

    /// `[n, n]` additive mask: 0 where allowed, [`MASK_NEG`] elsewhere.
    pub fn additive(&self) -> Array {
        Array::new(vec![self.n, self.n], self.allowed.iter().map(|&b| if b { 0.0 } else { MASK_NEG }).collect())
            .expect("square mask")
    }
}

/// A tokenised prompt ready for the encoder.
#[derive(Clone, Debug, PartialEq)]
pub struct UnifiedInput {
    pub tokens: Vec<usize>,
    pub roles: Vec<TokenRole>,
    pub block_index: Vec<Block>,
    pub positions: Vec<usize>,
    pub mask: AttentionMask,
    /// Identifier token index of each schema, in table order.
    pub schema_anchor: Vec<usize>,
    /// Indices of the text tokens inside `tokens` (separators excluded).
    pub text_range: Range<usize>,
    /// Number of trailing text tokens dropped to respect `max_len`.
    pub truncated: usize,
}

impl UnifiedInput {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn n_text(&self) -> usize {
        self.text_range.len()
    }
}

/// Assembles the prompt for `text` under `schemas`, then assigns positions
/// and the attention mask according to `opts`.
pub fn build_prompt<S: AsRef<str>>(
    schemas: &SchemaSet,
    text: &[S],
    vocab: &Vocabulary,
    opts: &PromptOptions,
) -> Result<UnifiedInput> {
    if text.is_empty() {
        return Err(Error::Prompt("text is empty".into()));
    }
    let mut tokens = Vec::new();
    let mut roles = Vec::new();
    let mut blocks = Vec::new();
    let mut anchors = Vec::with_capacity(schemas.n_schemas());

    for (table, name) in schemas.schema_names().enumerate() {
        let (ident, block) = if table == 0 {
            (vocab.d_tok(), Block::Task)
        } else if table <= schemas.n_classification() {
            (vocab.c_tok(), Block::Label(table))
        } else {
            (vocab.a_tok(), Block::Label(table))
        };
        anchors.push(tokens.len());
        tokens.push(ident);
        roles.push(TokenRole::Identifier);
        blocks.push(block);
        let word_ids: Vec<usize> = if table > 0 && opts.placeholder_labels {
            let id = vocab.placeholder_id(table - 1).ok_or_else(|| {
                Error::Prompt(format!(
                    "{} labels exceed the {} reserved placeholders",
                    schemas.n_schemas() - 1,
                    vocab::NUM_PLACEHOLDERS
                ))
            })?;
            vec![id]
        } else {
            vocab::words(name).map(|w| vocab.id(w)).collect()
        };
        for id in word_ids {
            tokens.push(id);
            roles.push(TokenRole::SchemaWord);
            blocks.push(block);
        }
    }

    let budget = opts.max_len.checked_sub(tokens.len() + 2).filter(|&b| b > 0).ok_or_else(|| {
        Error::Prompt(format!(
            "schema prompt of {} tokens leaves no room for text within {}",
            tokens.len(),
            opts.max_len
        ))
    })?;
    let kept = text.len().min(budget);

    tokens.push(vocab.sep());
    roles.push(TokenRole::Separator);
    blocks.push(Block::Text);
    let start = tokens.len();
    for w in &text[..kept] {
        tokens.push(vocab.id(w.as_ref()));
        roles.push(TokenRole::Text);
        blocks.push(Block::Text);
    }
    let end = tokens.len();
    tokens.push(vocab.sep());
    roles.push(TokenRole::Separator);
    blocks.push(Block::Text);

    let mut input = UnifiedInput {
        tokens,
        roles,
        block_index: blocks,
        positions: Vec::new(),
        mask: AttentionMask::from_fn(0, |_, _| true),
        schema_anchor: anchors,
        text_range: start..end,
        truncated: text.len() - kept,
    };
    input.positions = assign_positions(&input, opts.text_offset)?;
    input.mask = build_attention_mask(&input, schemas, opts.sam, opts.text_sees_labels);
    Ok(input)
}

/// Block-local position ids: every schema block counts from 0, the text
/// block (both separators included) counts from `text_offset`.
pub fn assign_positions(input: &UnifiedInput, text_offset: usize) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(input.block_index.len());
    let mut prev: Option<Block> = None;
    let mut offset = 0;
    for (i, &block) in input.block_index.iter().enumerate() {
        let starts_block = prev != Some(block) || input.roles[i] == TokenRole::Identifier;
        if starts_block {
            offset = 0;
        }
        match block {
            Block::Text => out.push(text_offset + offset),
            Block::Task | Block::Label(_) => {
                if offset + 1 >= text_offset {
                    return Err(Error::Prompt(format!(
                        "schema block at token {} has {} or more tokens; raise the text offset above {}",
                        i,
                        offset + 1,
                        text_offset
                    )));
                }
                out.push(offset);
            }
        }
        offset += 1;
        prev = Some(block);
    }
    Ok(out)
}

/// Schema-based attention permissions.
///
/// Rules, first match wins:
/// 1. same block: visible;
/// 2. either token is a separator: visible;
/// 3. either token is in the task block: visible;
/// 4. label query, text key: visible; text query, label key: visible only
///    when `text_sees_labels`;
/// 5. two label blocks: visible iff a binding pairs their labels.
///
/// With `sam == false` everything is visible.
pub fn build_attention_mask(
    input: &UnifiedInput,
    schemas: &SchemaSet,
    sam: bool,
    text_sees_labels: bool,
) -> AttentionMask {
    let n = input.tokens.len();
    if !sam {
        return AttentionMask::from_fn(n, |_, _| true);
    }
    let blocks = &input.block_index;
    let roles = &input.roles;
    AttentionMask::from_fn(n, |q, k| {
        let (bq, bk) = (blocks[q], blocks[k]);
        if bq == bk {
            return true;
        }
        if roles[q] == TokenRole::Separator || roles[k] == TokenRole::Separator {
            return true;
        }
        match (bq, bk) {
            (Block::Task, _) | (_, Block::Task) => true,
            (Block::Label(_), Block::Text) => true,
            (Block::Text, Block::Label(_)) => text_sees_labels,
            (Block::Label(a), Block::Label(b)) => schemas.bound(schemas.schema_name(a), schemas.schema_name(b)),
            (Block::Text, Block::Text) => true,
        }
    })
}
