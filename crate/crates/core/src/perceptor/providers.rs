//! Embedding backends behind the [`RelevanceProvider`] contract.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::EmbeddingVector;

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("no precomputed embedding for text #{index}: {text:?}")]
    Missing { index: usize, text: String },
    #[error("embedding for text #{index} has dimension {found}, expected {expected}")]
    Dimension { index: usize, expected: usize, found: usize },
    #[error("provider returned {found} embeddings for {expected} texts")]
    Count { expected: usize, found: usize },
    #[error("invalid embedding: {0}")]
    Invalid(String),
    #[error("embedding file {path}: {message}")]
    File { path: String, message: String },
    #[error("remote embedder {endpoint}: {message}")]
    Remote { endpoint: String, message: String },
}

impl ProviderError {
    /// Position of the offending text in the request, when known.
    pub fn text_index(&self) -> Option<usize> {
        match self {
            Self::Missing { index, .. } | Self::Dimension { index, .. } => Some(*index),
            _ => None,
        }
    }
}

/// Turns texts into embeddings. Implementations must be deterministic for
/// identical inputs and return one vector per text, all of one dimension.
pub trait RelevanceProvider: Send + Sync {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError>;
}

fn check_uniform(vectors: &[EmbeddingVector]) -> Result<(), ProviderError> {
    if let Some(first) = vectors.first() {
        let expected = first.dimension();
        if let Some((index, v)) = vectors.iter().enumerate().find(|(_, v)| v.dimension() != expected) {
            return Err(ProviderError::Dimension { index, expected, found: v.dimension() });
        }
    }
    Ok(())
}

/// Exact-match lookup into a precomputed `text -> vector` map.
#[derive(Debug, Clone)]
pub struct FileEmbeddings {
    vectors: HashMap<String, EmbeddingVector>,
    dimension: usize,
}

impl FileEmbeddings {
    pub fn from_map(map: BTreeMap<String, Vec<f64>>) -> Result<Self, ProviderError> {
        let mut dimension = None;
        let mut vectors = HashMap::with_capacity(map.len());
        for (text, values) in map {
            let v = EmbeddingVector::new(values).map_err(|e| ProviderError::Invalid(format!("{text:?}: {e}")))?;
            match dimension {
                None => dimension = Some(v.dimension()),
                Some(d) if d != v.dimension() => {
                    return Err(ProviderError::Invalid(format!(
                        "{text:?} has dimension {}, expected {d}",
                        v.dimension()
                    )))
                }
                _ => {}
            }
            vectors.insert(text, v);
        }
        Ok(Self { vectors, dimension: dimension.unwrap_or(0) })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ProviderError> {
        let path = path.as_ref();
        let file_err = |message: String| ProviderError::File { path: path.display().to_string(), message };
        let file = File::open(path).map_err(|e| file_err(e.to_string()))?;
        let map: BTreeMap<String, Vec<f64>> =
            serde_json::from_reader(BufReader::new(file)).map_err(|e| file_err(e.to_string()))?;
        Self::from_map(map).map_err(|e| file_err(e.to_string()))
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

impl RelevanceProvider for FileEmbeddings {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        texts
            .iter()
            .enumerate()
            .map(|(index, text)| {
                self.vectors.get(text).cloned().ok_or_else(|| ProviderError::Missing { index, text: text.clone() })
            })
            .collect()
    }
}

/// Writes an embedding map as pretty JSON with sorted keys.
pub fn write_embedding_file(path: impl AsRef<Path>, map: &BTreeMap<String, Vec<f64>>) -> std::io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, map)?;
    out.write_all(b"\n")?;
    out.flush()
}

/// Deterministic bag-of-tokens feature hashing.
///
/// Each lowercase alphanumeric token lands in one slot with a ±1 sign taken
/// from its SHA-256 digest, so identical texts map to identical vectors and
/// texts sharing tokens have positive similarity. A text that hashes to the
/// zero vector gets one slot set from the digest of the whole string.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dimension: usize,
}

impl HashingEmbedder {
    pub const DEFAULT_DIMENSION: usize = 256;

    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        Self { dimension }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    fn slot(&self, bytes: &[u8]) -> (usize, f64) {
        let digest = Sha256::digest(bytes);
        let mut head = [0u8; 8];
        head.copy_from_slice(&digest[..8]);
        let slot = (u64::from_le_bytes(head) % self.dimension as u64) as usize;
        let sign = if digest[8] & 1 == 0 { 1.0 } else { -1.0 };
        (slot, sign)
    }

    pub fn embed_text(&self, text: &str) -> EmbeddingVector {
        let mut values = vec![0.0; self.dimension];
        let lower = text.to_lowercase();
        for token in lower.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
            let (slot, sign) = self.slot(token.as_bytes());
            values[slot] += sign;
        }
        if values.iter().all(|v| *v == 0.0) {
            let (slot, _) = self.slot(text.as_bytes());
            values[slot] = 1.0;
        }
        EmbeddingVector::new(values).expect("hashed vector is finite and non-zero")
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self::new(Self::DEFAULT_DIMENSION)
    }
}

impl RelevanceProvider for HashingEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        Ok(texts.iter().map(|t| self.embed_text(t)).collect())
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    embeddings: Vec<Vec<f64>>,
}

/// Client for an HTTP embedding service:
/// `POST {"texts": [...]}` → `{"embeddings": [[...], ...]}`.
#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    endpoint: String,
    agent: ureq::Agent,
}

impl RemoteEmbedder {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        Self { endpoint: endpoint.into(), agent }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn remote_err(&self, message: impl ToString) -> ProviderError {
        ProviderError::Remote { endpoint: self.endpoint.clone(), message: message.to_string() }
    }
}

impl RelevanceProvider for RemoteEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        let response: EmbedResponse = self
            .agent
            .post(&self.endpoint)
            .send_json(EmbedRequest { texts })
            .map_err(|e| self.remote_err(e))?
            .body_mut()
            .read_json()
            .map_err(|e| self.remote_err(e))?;
        if response.embeddings.len() != texts.len() {
            return Err(ProviderError::Count { expected: texts.len(), found: response.embeddings.len() });
        }
        let vectors = response
            .embeddings
            .into_iter()
            .enumerate()
            .map(|(i, values)| EmbeddingVector::new(values).map_err(|e| self.remote_err(format!("text #{i}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        check_uniform(&vectors)?;
        Ok(vectors)
    }
}
