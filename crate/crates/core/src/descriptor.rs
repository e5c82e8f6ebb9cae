//! Descriptor sets and their on-disk record format.
//!
//! A sample is represented by a set of fixed-dimension vectors whose
//! cardinality depends on the descriptor kind: 32 row vectors for the local
//! Radon descriptor, a single 1024-vector for the global one, and however
//! many keypoints SIFT found. Records are stored as JSON lines keyed by
//! sample id.

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DescriptorKind {
    RadonLocal,
    RadonGlobal,
    Sift,
}

impl DescriptorKind {
    /// Dimension of every vector of this kind.
    pub fn vector_dim(self) -> usize {
        match self {
            DescriptorKind::RadonLocal => 32,
            DescriptorKind::RadonGlobal => 1024,
            DescriptorKind::Sift => 128,
        }
    }

    /// Required cardinality, if the kind fixes one.
    pub fn fixed_cardinality(self) -> Option<usize> {
        match self {
            DescriptorKind::RadonLocal => Some(32),
            DescriptorKind::RadonGlobal => Some(1),
            DescriptorKind::Sift => None,
        }
    }
}

impl fmt::Display for DescriptorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DescriptorKind::RadonLocal => "radon-local",
            DescriptorKind::RadonGlobal => "radon-global",
            DescriptorKind::Sift => "sift",
        };
        f.write_str(s)
    }
}

impl FromStr for DescriptorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "radon-local" => Ok(DescriptorKind::RadonLocal),
            "radon-global" => Ok(DescriptorKind::RadonGlobal),
            "sift" => Ok(DescriptorKind::Sift),
            other => Err(Error::validation(format!(
                "unknown descriptor kind `{other}` (expected radon-local, radon-global, or sift)"
            ))),
        }
    }
}

/// Set of same-dimension feature vectors describing one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DescriptorSetRepr", into = "DescriptorSetRepr")]
pub struct DescriptorSet {
    kind: DescriptorKind,
    vectors: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct DescriptorSetRepr {
    kind: DescriptorKind,
    vectors: Vec<Vec<f64>>,
}

impl TryFrom<DescriptorSetRepr> for DescriptorSet {
    type Error = Error;

    fn try_from(repr: DescriptorSetRepr) -> Result<Self> {
        DescriptorSet::new(repr.kind, repr.vectors)
    }
}

impl From<DescriptorSet> for DescriptorSetRepr {
    fn from(set: DescriptorSet) -> Self {
        DescriptorSetRepr {
            kind: set.kind,
            vectors: set.vectors,
        }
    }
}

impl DescriptorSet {
    pub fn new(kind: DescriptorKind, vectors: Vec<Vec<f64>>) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::EmptySample);
        }
        let dim = kind.vector_dim();
        for (i, v) in vectors.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::dim(
                    format!("{dim} components per {kind} vector"),
                    format!("{} in vector {i}", v.len()),
                ));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::validation(format!(
                    "non-finite component in vector {i}"
                )));
            }
        }
        if let Some(n) = kind.fixed_cardinality() {
            if vectors.len() != n {
                return Err(Error::validation(format!(
                    "{kind} requires exactly {n} vectors, got {}",
                    vectors.len()
                )));
            }
        }
        Ok(DescriptorSet { kind, vectors })
    }

    pub fn kind(&self) -> DescriptorKind {
        self.kind
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.kind.vector_dim()
    }
}

/// One exported descriptor record, keyed by sample id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorRecord {
    pub id: String,
    pub class_id: usize,
    pub subject_id: usize,
    pub repetition: usize,
    pub set: DescriptorSet,
}

/// Writes records as JSON lines.
pub fn write_jsonl(records: &[DescriptorRecord], path: &Path) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for record in records {
        let line = serde_json::to_string(record)
            .map_err(|e| Error::validation(format!("serializing record {}: {e}", record.id)))?;
        writeln!(file, "{line}")?;
    }
    file.flush()?;
    Ok(())
}

/// Reads JSON-line records, checking that every set shares one kind.
pub fn read_jsonl(path: &Path) -> Result<Vec<DescriptorRecord>> {
    let file = BufReader::new(std::fs::File::open(path)?);
    let mut records = Vec::new();
    let mut kind: Option<DescriptorKind> = None;
    for (i, line) in file.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DescriptorRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        match kind {
            None => kind = Some(record.set.kind()),
            Some(k) if k != record.set.kind() => {
                return Err(Error::validation(format!(
                    "mixed descriptor kinds in {}: {k} and {}",
                    path.display(),
                    record.set.kind()
                )));
            }
            _ => {}
        }
        records.push(record);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_ragged_sets() {
        assert!(matches!(
            DescriptorSet::new(DescriptorKind::Sift, vec![]),
            Err(Error::EmptySample)
        ));
        let ragged = vec![vec![0.0; 128], vec![0.0; 127]];
        assert!(DescriptorSet::new(DescriptorKind::Sift, ragged).is_err());
    }

    #[test]
    fn enforces_fixed_cardinality() {
        let rows31 = vec![vec![0.0; 32]; 31];
        assert!(DescriptorSet::new(DescriptorKind::RadonLocal, rows31).is_err());
        let rows32 = vec![vec![0.0; 32]; 32];
        assert!(DescriptorSet::new(DescriptorKind::RadonLocal, rows32).is_ok());
        assert!(DescriptorSet::new(DescriptorKind::RadonGlobal, vec![vec![0.0; 1024]; 2]).is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("descriptors.jsonl");
        let records: Vec<DescriptorRecord> = (0..3)
            .map(|i| DescriptorRecord {
                id: format!("{i}_0_0"),
                class_id: i,
                subject_id: 0,
                repetition: 0,
                set: DescriptorSet::new(
                    DescriptorKind::Sift,
                    vec![vec![i as f64 * 0.25; 128]; i + 1],
                )
                .unwrap(),
            })
            .collect();
        write_jsonl(&records, &path).unwrap();
        let back = read_jsonl(&path).unwrap();
        assert_eq!(records, back);
    }

    #[test]
    fn jsonl_rejects_invalid_payload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        // empty vector list violates the set invariant even in valid JSON
        std::fs::write(
            &path,
            "{\"id\":\"x\",\"class_id\":0,\"subject_id\":0,\"repetition\":0,\
             \"set\":{\"kind\":\"sift\",\"vectors\":[]}}\n",
        )
        .unwrap();
        assert!(matches!(read_jsonl(&path), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn kind_strings_round_trip() {
        for kind in [
            DescriptorKind::RadonLocal,
            DescriptorKind::RadonGlobal,
            DescriptorKind::Sift,
        ] {
            assert_eq!(kind.to_string().parse::<DescriptorKind>().unwrap(), kind);
        }
        assert!("radon".parse::<DescriptorKind>().is_err());
    }
}
