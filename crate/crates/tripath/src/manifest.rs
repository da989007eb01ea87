//! Content hashes that tie generated corpora to the runs that use them.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tripath_core::noise::NoiseSpec;

use crate::error::{CliError, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Min and mean fraction of pixels touched by the corruption masks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub min: f64,
    pub mean: f64,
}

impl Coverage {
    pub fn of(fractions: &[f64]) -> Coverage {
        if fractions.is_empty() {
            return Coverage { min: 0.0, mean: 0.0 };
        }
        Coverage {
            min: fractions.iter().copied().fold(f64::INFINITY, f64::min),
            mean: fractions.iter().sum::<f64>() / fractions.len() as f64,
        }
    }
}

/// Written next to a generated corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusManifest {
    pub noise: Option<NoiseSpec>,
    pub seed: u64,
    pub replication: usize,
    pub binarize: bool,
    pub train_limit: Option<usize>,
    pub test_limit: Option<usize>,
    /// Hashes of the source IDX files, by file name.
    pub sources: BTreeMap<String, String>,
    /// Hashes of the generated files, by file name.
    pub files: BTreeMap<String, String>,
    pub train_coverage: Coverage,
    pub test_coverage: Coverage,
    /// Hash over the generated file hashes in name order.
    pub corpus_sha256: String,
}

/// One hash standing for a set of named file hashes.
pub fn combined_hash(files: &BTreeMap<String, String>) -> String {
    let mut text = String::new();
    for (name, hash) in files {
        text.push_str(name);
        text.push(' ');
        text.push_str(hash);
        text.push('\n');
    }
    sha256_hex(text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn combined_hash_depends_on_every_entry() {
        let mut files = BTreeMap::new();
        files.insert("a".to_string(), "1".to_string());
        files.insert("b".to_string(), "2".to_string());
        let h = combined_hash(&files);
        files.insert("b".to_string(), "3".to_string());
        assert_ne!(h, combined_hash(&files));
    }

    #[test]
    fn coverage_summary() {
        let c = Coverage::of(&[0.5, 0.75, 1.0]);
        assert_eq!(c.min, 0.5);
        assert_eq!(c.mean, 0.75);
    }
}
