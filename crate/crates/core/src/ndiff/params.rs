use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::array::Array;
use crate::error::{Error, Result};
use crate::fsutil;

pub const PARAMS_FORMAT: &str = "uniex-params";
pub const PARAMS_VERSION: u32 = 1;

/// Named parameter arrays, iterated in name order.
///
/// On disk a store is a JSON object
///
/// ```text
/// {"format": "uniex-params", "version": 1,
///  "params": {"<name>": {"shape": [..], "data": [..]}, ...}}
/// ```
///
/// Values are written as shortest round-trip decimal strings and parsed with
/// correct rounding, so save/load reproduces every `f64` bit for bit. Being
/// text, the format has no byte order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamStore {
    params: BTreeMap<String, Array>,
}

#[derive(Serialize, Deserialize)]
struct ParamsFile {
    format: String,
    version: u32,
    params: ParamStore,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Array) {
        self.params.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Option<&Array> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Array> {
        self.params.get_mut(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Array)> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Array)> {
        self.params.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    /// Total number of scalar entries across all arrays.
    pub fn num_scalars(&self) -> usize {
        self.params.values().map(Array::len).sum()
    }

    /// A store of zeros with the same names and shapes.
    pub fn zeros_like(&self) -> Self {
        ParamStore { params: self.params.iter().map(|(k, v)| (k.clone(), Array::zeros(v.shape()))).collect() }
    }

    /// `self += k * other` for every name present in both.
    pub fn add_scaled(&mut self, other: &ParamStore, k: f64) {
        for (name, a) in &mut self.params {
            if let Some(b) = other.params.get(name) {
                for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                    *x += k * y;
                }
            }
        }
    }

    pub fn scale(&mut self, k: f64) {
        for a in self.params.values_mut() {
            a.scale_assign(k);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params.values().all(Array::is_finite)
    }

    pub fn to_json(&self) -> Result<String> {
        if let Some((name, _)) = self.params.iter().find(|(_, a)| !a.is_finite()) {
            return Err(Error::NonFinite(format!("parameter '{name}'")));
        }
        let file = ParamsFile { format: PARAMS_FORMAT.to_string(), version: PARAMS_VERSION, params: self.clone() };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ParamsFile = serde_json::from_str(text)?;
        if file.format != PARAMS_FORMAT || file.version != PARAMS_VERSION {
            return Err(Error::Config(format!("unsupported parameter file {} v{}", file.format, file.version)));
        }
        for (name, a) in &file.params.params {
            let n: usize = a.shape().iter().product();
            if n != a.len() {
                return Err(Error::Config(format!(
                    "parameter '{name}': shape {:?} does not match {} values",
                    a.shape(),
                    a.len()
                )));
            }
        }
        Ok(file.params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsutil::write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
