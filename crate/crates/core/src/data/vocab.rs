use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::ExDocument;
use crate::schema::SchemaSet;

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const D_TOK: &str = "[D-TOK]";
pub const C_TOK: &str = "[C-TOK]";
pub const A_TOK: &str = "[A-TOK]";
pub const SEP: &str = "[SEP]";

/// Number of `[unused n]` placeholder ids reserved for label-free prompts.
pub const NUM_PLACEHOLDERS: usize = 64;

/// Word-level token vocabulary.
///
/// Ids are dense from 0: the six special tokens first, then
/// `NUM_PLACEHOLDERS` placeholders `[unused0]..`, then every corpus and
/// schema word in sorted order. Reserved names are bracketed, so they never
/// collide with whitespace-split words unless a corpus literally contains
/// them, in which case the word maps onto the reserved id.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { tokens, index }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

pub fn placeholder(n: usize) -> String {
    format!("[unused{n}]")
}

/// Splits text into word tokens.
pub fn words(text: &str) -> impl Iterator<Item = &str> {
    text.split_whitespace()
}

impl Vocabulary {
    fn reserved() -> Vec<String> {
        let mut v: Vec<String> = [PAD, UNK, D_TOK, C_TOK, A_TOK, SEP].iter().map(|s| s.to_string()).collect();
        v.extend((0..NUM_PLACEHOLDERS).map(placeholder));
        v
    }

    /// Builds a vocabulary over the corpus tokens and every word of every
    /// schema name. Deterministic for a given input.
    pub fn build<'a>(
        corpus: impl IntoIterator<Item = &'a ExDocument>,
        schemas: impl IntoIterator<Item = &'a SchemaSet>,
    ) -> Self {
        let mut set = BTreeSet::new();
        for doc in corpus {
            set.extend(doc.tokens.iter().cloned());
        }
        for s in schemas {
            for name in s.schema_names() {
                set.extend(words(name).map(str::to_string));
            }
        }
        let mut tokens = Self::reserved();
        let reserved: BTreeSet<String> = tokens.iter().cloned().collect();
        tokens.extend(set.into_iter().filter(|w| !reserved.contains(w)));
        tokens.into()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Id of `token`, or the `[UNK]` id.
    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or_else(|| self.unk())
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn unk(&self) -> usize {
        self.index[UNK]
    }

    pub fn sep(&self) -> usize {
        self.index[SEP]
    }

    pub fn d_tok(&self) -> usize {
        self.index[D_TOK]
    }

    pub fn c_tok(&self) -> usize {
        self.index[C_TOK]
    }

    pub fn a_tok(&self) -> usize {
        self.index[A_TOK]
    }

    pub fn placeholder_id(&self, n: usize) -> Option<usize> {
        self.get(&placeholder(n))
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }
}
