//! Document vectors.
//!
//! Vectors either come from a precomputed JSON Lines file (one
//! `{"id": ..., "vector": [...]}` object per line) or from a signed
//! feature-hashing embedder over lowercased unigrams, so the pipeline can
//! run without an external model.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors produced while building or loading document vectors.
#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("text has no tokens")]
    EmptyText,
    #[error("dimension must be at least 2, got {0}")]
    BadDimension(usize),
    #[error("vector contains a non-finite entry")]
    NonFinite,
    #[error("tokens cancelled to the zero vector")]
    ZeroVector,
    #[error("vector for {id:?} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        id: String,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { id: String, line: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: vector for {id:?} has zero or non-finite norm")]
    ZeroNorm { id: String, line: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A dense embedding of one article.
///
/// Entries are always finite. The dimension is not stored separately; all
/// vectors in one run are expected to share it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DocVector(Vec<f64>);

impl DocVector {
    pub fn new(values: Vec<f64>) -> Result<Self, EmbeddingError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite);
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &DocVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// In-place `self += other`. Panics on dimension mismatch.
    pub fn add_assign(&mut self, other: &DocVector) {
        assert_eq!(self.dim(), other.dim(), "vector dimension mismatch");
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }

    /// In-place `self -= other`. Panics on dimension mismatch.
    pub fn sub_assign(&mut self, other: &DocVector) {
        assert_eq!(self.dim(), other.dim(), "vector dimension mismatch");
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a -= b;
        }
    }

    /// Sums `vectors` left to right. Returns `None` for an empty iterator.
    pub fn sum<'a, I>(vectors: I) -> Option<DocVector>
    where
        I: IntoIterator<Item = &'a DocVector>,
    {
        let mut iter = vectors.into_iter();
        let mut acc = iter.next()?.clone();
        for v in iter {
            acc.add_assign(v);
        }
        Some(acc)
    }
}

impl TryFrom<Vec<f64>> for DocVector {
    type Error = EmbeddingError;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        DocVector::new(values)
    }
}

impl From<DocVector> for Vec<f64> {
    fn from(v: DocVector) -> Self {
        v.0
    }
}

/// Where a run gets its document vectors from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum VectorSource {
    /// Vectors looked up by article id in a JSON Lines file.
    PrecomputedFile { path: String, dimension: usize },
    /// Vectors carried inline in each article record.
    Inline { dimension: usize },
    /// Signed feature hashing of each article's text.
    FallbackEmbedder { dimension: usize, seed: u64 },
}

impl VectorSource {
    pub fn dimension(&self) -> usize {
        match self {
            VectorSource::PrecomputedFile { dimension, .. }
            | VectorSource::Inline { dimension }
            | VectorSource::FallbackEmbedder { dimension, .. } => *dimension,
        }
    }
}

/// Lowercases, splits on Unicode whitespace and strips leading/trailing
/// punctuation from every word. Words that are pure punctuation vanish.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|word| {
            word.trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .filter(|tok| !tok.is_empty())
        .collect()
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Seeded 64-bit hash of a token: FNV-1a over the little-endian seed bytes
/// followed by the UTF-8 token bytes, finished with the splitmix64 mixer.
pub fn token_hash(token: &str, seed: u64) -> u64 {
    let mut h = FNV_OFFSET;
    for b in seed.to_le_bytes().iter().chain(token.as_bytes()) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// Bucket index in `[0, dim)` and sign for a token hash.
fn bucket(hash: u64, dim: usize) -> (usize, i64) {
    let index = (hash % dim as u64) as usize;
    let sign = if hash >> 63 == 0 { 1 } else { -1 };
    (index, sign)
}

/// Embeds `text` by signed feature hashing of its unigram counts, then
/// L2-normalizes.
///
/// Counts are accumulated as integers, so the result does not depend on
/// token order.
pub fn embed_fallback(text: &str, dim: usize, seed: u64) -> Result<DocVector, EmbeddingError> {
    if dim < 2 {
        return Err(EmbeddingError::BadDimension(dim));
    }
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(EmbeddingError::EmptyText);
    }
    let mut counts = vec![0i64; dim];
    for tok in &tokens {
        let (index, sign) = bucket(token_hash(tok, seed), dim);
        counts[index] += sign;
    }
    let norm = counts
        .iter()
        .map(|&c| (c as f64) * (c as f64))
        .sum::<f64>()
        .sqrt();
    if norm == 0.0 {
        return Err(EmbeddingError::ZeroVector);
    }
    Ok(DocVector(counts.iter().map(|&c| c as f64 / norm).collect()))
}

/// Cosine needs a norm that is neither zero nor overflowed.
pub fn usable_norm(v: &DocVector) -> bool {
    let n = v.norm();
    n > 0.0 && n.is_finite()
}

#[derive(Deserialize)]
struct VectorRecord {
    id: String,
    vector: Vec<f64>,
}

/// Reads a precomputed vector file. See [`read_vectors`].
pub fn load_vectors(
    path: impl AsRef<Path>,
    expected_dim: usize,
) -> Result<BTreeMap<String, DocVector>, EmbeddingError> {
    let file = File::open(path)?;
    read_vectors(BufReader::new(file), expected_dim)
}

/// Parses JSON Lines vector records. Blank lines are skipped; line numbers
/// in errors are 1-based.
pub fn read_vectors<R: BufRead>(
    reader: R,
    expected_dim: usize,
) -> Result<BTreeMap<String, DocVector>, EmbeddingError> {
    if expected_dim < 2 {
        return Err(EmbeddingError::BadDimension(expected_dim));
    }
    let mut out = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| EmbeddingError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: VectorRecord =
            serde_json::from_str(&line).map_err(|e| EmbeddingError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
        if record.vector.len() != expected_dim {
            return Err(EmbeddingError::DimensionMismatch {
                id: record.id,
                expected: expected_dim,
                found: record.vector.len(),
            });
        }
        let vector = DocVector::new(record.vector).map_err(|_| EmbeddingError::Parse {
            line: line_no,
            message: format!("non-finite entry in vector for {:?}", record.id),
        })?;
        if !usable_norm(&vector) {
            return Err(EmbeddingError::ZeroNorm {
                id: record.id,
                line: line_no,
            });
        }
        if out.contains_key(&record.id) {
            return Err(EmbeddingError::DuplicateId {
                id: record.id,
                line: line_no,
            });
        }
        out.insert(record.id, vector);
    }
    Ok(out)
}
