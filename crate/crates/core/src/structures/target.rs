use crate::error::{Error, Result};
use crate::ndiff::Array;
use crate::schema::{SchemaSet, TRIGGER_ARGUMENT_LABEL};

use super::{ExtractionRecord, Span};

/// Binary supervision for one sentence: `values` and `valid` are both
/// `[N_s, N_x, N_x]`, with `values <= valid` everywhere.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetTensor {
    pub values: Array,
    pub valid: Array,
}

impl TargetTensor {
    pub fn n_schemas(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn n_text(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn value(&self, r: usize, p: usize, q: usize) -> f64 {
        self.values.at(&[r, p, q])
    }

    pub fn is_valid(&self, r: usize, p: usize, q: usize) -> bool {
        self.valid.at(&[r, p, q]) == 1.0
    }

    /// Number of valid cells in table `r`.
    pub fn valid_count(&self, r: usize) -> usize {
        let n = self.n_text();
        self.valid.data()[r * n * n..(r + 1) * n * n].iter().filter(|&&v| v == 1.0).count()
    }
}

/// Builds the structural-table supervision for `gold`.
///
/// Table 0 (detection) is valid on every `q >= p` cell and positive on each
/// gold span. Classification tables are valid on `(s_i, e_i)` for each gold
/// span `i`. Association tables are valid on `(s_i, s_j)` and `(e_i, e_j)`
/// for every ordered pair of distinct gold spans; a gold link is positive on
/// both cells.
pub fn build_target_tensor(gold: &ExtractionRecord, schemas: &SchemaSet, n_text: usize) -> Result<TargetTensor> {
    gold.validate(schemas, n_text)?;
    let ns = schemas.n_schemas();
    let shape = [ns, n_text, n_text];
    let mut values = Array::zeros(&shape);
    let mut valid = Array::zeros(&shape);

    for p in 0..n_text {
        for q in p..n_text {
            valid.set(&[0, p, q], 1.0);
        }
    }
    let spans = gold.spans();
    for s in &spans {
        values.set(&[0, s.start, s.end], 1.0);
        for c in 0..schemas.n_classification() {
            valid.set(&[schemas.classification_table(c), s.start, s.end], 1.0);
        }
    }
    let class_cell = |values: &mut Array, label: &str, s: Span| {
        let c = schemas.classification_index(label).expect("validated label");
        values.set(&[schemas.classification_table(c), s.start, s.end], 1.0);
    };
    for e in &gold.entities {
        class_cell(&mut values, &e.label, e.span);
    }
    for ev in &gold.events {
        class_cell(&mut values, &ev.label, ev.trigger);
    }

    for a in 0..schemas.n_association() {
        let r = schemas.association_table(a);
        for i in &spans {
            for j in &spans {
                if i != j {
                    valid.set(&[r, i.start, j.start], 1.0);
                    valid.set(&[r, i.end, j.end], 1.0);
                }
            }
        }
    }
    let link = |values: &mut Array, label: &str, head: Span, tail: Span| -> Result<()> {
        let a = schemas
            .association_index(label)
            .ok_or_else(|| Error::Target(format!("unknown association label '{label}'")))?;
        if head == tail {
            return Err(Error::Target(format!("'{label}' links span ({}, {}) to itself", head.start, head.end)));
        }
        let r = schemas.association_table(a);
        values.set(&[r, head.start, tail.start], 1.0);
        values.set(&[r, head.end, tail.end], 1.0);
        Ok(())
    };
    for rel in &gold.relations {
        link(&mut values, &rel.label, rel.head, rel.tail)?;
    }
    for s in &gold.sentiments {
        link(&mut values, &s.polarity, s.aspect, s.opinion)?;
    }
    for ev in &gold.events {
        for arg in &ev.arguments {
            link(&mut values, TRIGGER_ARGUMENT_LABEL, ev.trigger, arg.span)?;
        }
    }
    Ok(TargetTensor { values, valid })
}
