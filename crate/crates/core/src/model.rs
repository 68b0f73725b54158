//! Versioned JSON container for trained models.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::concave::ConcaveKind;
use crate::error::{Error, Result};
use crate::linear::{infer_linear, LinearModel};
use crate::nested::{infer_nested, NestedModel};
use crate::rank::{Ranking, ScoreList};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Either aggregation model, tagged by `kind` in the serialized form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Linear(LinearModel),
    Nested(NestedModel),
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    #[serde(flatten)]
    model: Model,
}

impl Model {
    /// Number of scorer lists the model consumes.
    pub fn k(&self) -> usize {
        match self {
            Model::Linear(m) => m.k,
            Model::Nested(m) => m.k1,
        }
    }

    pub fn g(&self) -> &ConcaveKind {
        match self {
            Model::Linear(m) => &m.g,
            Model::Nested(m) => &m.g,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Model::Linear(_) => "linear",
            Model::Nested(_) => "nested",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Model::Linear(m) => m.validate(),
            Model::Nested(m) => m.validate(),
        }
    }

    /// Dispatches to the matching inference rule.
    pub fn infer(&self, lists: &[ScoreList]) -> Result<(Ranking, ScoreList)> {
        match self {
            Model::Linear(m) => infer_linear(m, lists),
            Model::Nested(m) => infer_nested(m, lists),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: file.format_version,
                supported: MODEL_FORMAT_VERSION,
            });
        }
        file.model.validate()?;
        Ok(file.model)
    }

    /// Writes the model as one JSON line, atomically.
    pub fn save(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        {
            let mut w = BufWriter::new(&mut tmp);
            w.write_all(self.to_json()?.as_bytes())?;
            w.write_all(b"\n")?;
        }
        tmp.persist(path).map_err(|e| Error::Io(e.error))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        use std::io::Read;
        let mut text = String::new();
        BufReader::new(File::open(path)?).read_to_string(&mut text)?;
        Self::from_json(text.trim_end())
    }
}
