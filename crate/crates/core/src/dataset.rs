//! Query records and the JSON Lines dataset format.
//!
//! A dataset file holds one header line `{"meta": {...}}` followed by one
//! record per line `{"id", "truth", "grades"?, "lists"}`. The format is
//! streamable at large N and byte-stable: saving a loaded dataset reproduces
//! the file exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::concave::ConcaveSpec;
use crate::divergence::lb_divergence_cardinality;
use crate::error::{Error, Result};
use crate::metrics::RelevanceGrades;
use crate::rank::{Ranking, ScoreList};
use crate::synth::GeneratorParams;

/// One training/evaluation unit: K score lists over the same N candidates,
/// the ground-truth ranking, and optional relevance grades.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryRecord {
    pub id: String,
    pub lists: Vec<ScoreList>,
    pub truth: Ranking,
    pub grades: Option<RelevanceGrades>,
}

impl QueryRecord {
    pub fn new(
        id: String,
        lists: Vec<ScoreList>,
        truth: Ranking,
        grades: Option<RelevanceGrades>,
    ) -> Result<Self> {
        let record = Self {
            id,
            lists,
            truth,
            grades,
        };
        record.validate()?;
        Ok(record)
    }

    fn invalid(&self, reason: impl Into<String>) -> Error {
        Error::InvalidRecord {
            id: self.id.clone(),
            reason: reason.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lists.is_empty() {
            return Err(self.invalid("record has no score lists"));
        }
        let n = self.truth.len();
        for (i, list) in self.lists.iter().enumerate() {
            if list.len() != n {
                return Err(self.invalid(format!(
                    "list {i} has length {}, expected {n}",
                    list.len()
                )));
            }
        }
        if let Some(grades) = &self.grades {
            if grades.len() != n {
                return Err(self.invalid(format!(
                    "grades have length {}, expected {n}",
                    grades.len()
                )));
            }
            for w in self.truth.order().windows(2) {
                if grades.grades()[w[0]] < grades.grades()[w[1]] {
                    return Err(self.invalid(format!(
                        "truth does not sort the grades descending (candidates {} vs {})",
                        w[0], w[1]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Number of candidates.
    pub fn n(&self) -> usize {
        self.truth.len()
    }

    /// Number of scorers.
    pub fn k(&self) -> usize {
        self.lists.len()
    }

    /// Divergence of each scorer's list from the ground truth under `g`.
    pub fn divergences(&self, g: &ConcaveSpec) -> Result<Vec<f64>> {
        self.lists
            .iter()
            .map(|x| lb_divergence_cardinality(x, &self.truth, g))
            .collect()
    }

    /// Grades for evaluation: the record's own if present, otherwise the
    /// linear-by-position default derived from the truth.
    pub fn effective_grades(&self) -> RelevanceGrades {
        self.grades
            .clone()
            .unwrap_or_else(|| RelevanceGrades::linear_from_truth(&self.truth))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawRecord {
    id: String,
    truth: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grades: Option<Vec<f64>>,
    lists: Vec<Vec<f64>>,
}

impl TryFrom<RawRecord> for QueryRecord {
    type Error = Error;

    fn try_from(raw: RawRecord) -> Result<Self> {
        let id = raw.id;
        let wrap = |e: Error| Error::InvalidRecord {
            id: id.clone(),
            reason: e.to_string(),
        };
        let truth = Ranking::new(raw.truth).map_err(wrap)?;
        let lists = raw
            .lists
            .into_iter()
            .map(|l| ScoreList::new(l).map_err(wrap))
            .collect::<Result<Vec<_>>>()?;
        let grades = raw
            .grades
            .map(|g| RelevanceGrades::new(g).map_err(wrap))
            .transpose()?;
        QueryRecord::new(id, lists, truth, grades)
    }
}

impl From<&QueryRecord> for RawRecord {
    fn from(record: &QueryRecord) -> Self {
        RawRecord {
            id: record.id.clone(),
            truth: record.truth.order().to_vec(),
            grades: record.grades.as_ref().map(|g| g.grades().to_vec()),
            lists: record.lists.iter().map(|l| l.scores().to_vec()).collect(),
        }
    }
}

/// Dataset-level metadata carried in the header line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub n: usize,
    pub k: usize,
    pub name: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_params: Option<GeneratorParams>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    meta: DatasetMeta,
}

/// A set of query records sharing N and K.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub records: Vec<QueryRecord>,
}

impl Dataset {
    pub fn new(meta: DatasetMeta, records: Vec<QueryRecord>) -> Result<Self> {
        let dataset = Self { meta, records };
        dataset.validate()?;
        Ok(dataset)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for record in &self.records {
            record.validate()?;
            if record.n() != self.meta.n {
                return Err(Error::InvalidRecord {
                    id: record.id.clone(),
                    reason: format!("record has N = {}, dataset has N = {}", record.n(), self.meta.n),
                });
            }
            if record.k() != self.meta.k {
                return Err(Error::InvalidRecord {
                    id: record.id.clone(),
                    reason: format!("record has K = {}, dataset has K = {}", record.k(), self.meta.k),
                });
            }
            if !seen.insert(record.id.clone()) {
                return Err(Error::DuplicateId {
                    id: record.id.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_writer<W: Write>(&self, mut w: W) -> Result<()> {
        let header = Header {
            meta: self.meta.clone(),
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for record in &self.records {
            serde_json::to_writer(&mut w, &RawRecord::from(record))?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Writes the dataset to `path` atomically (temp file + rename).
    pub fn save(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        self.to_writer(BufWriter::new(&mut tmp))?;
        tmp.persist(path).map_err(|e| Error::Io(e.error))?;
        Ok(())
    }

    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let (_, first) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "missing header line".into(),
        })?;
        let header: Header = serde_json::from_str(&first?).map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?;
        let mut records = Vec::new();
        for (idx, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
            records.push(QueryRecord::try_from(raw)?);
        }
        Dataset::new(header.meta, records)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_reader(BufReader::new(File::open(path)?))
    }
}
