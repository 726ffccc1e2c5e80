//! Text embeddings behind a pluggable provider interface.
//!
//! Everything downstream assumes 384-dimensional unit-norm vectors. Two
//! providers ship: a deterministic, dependency-free hashed-trigram provider
//! that the whole test suite runs on, and (behind the `minilm` feature) a real
//! sentence-embedding backend loading a local all-MiniLM-L6-v2 model.

use thiserror::Error;

/// Embedding dimensionality; fixed across the whole store.
pub const EMBEDDING_DIM: usize = 384;
/// Serialized embedding size: 384 little-endian f32 values.
pub const EMBEDDING_BLOB_LEN: usize = EMBEDDING_DIM * 4;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("embedding must have {EMBEDDING_DIM} dimensions, got {0}")]
    WrongDimension(usize),
    #[error("embedding contains a non-finite value at index {0}")]
    NotFinite(usize),
    #[error("embedding blob must be {EMBEDDING_BLOB_LEN} bytes, got {0}")]
    WrongBlobLength(usize),
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("embedding provider failed: {0}")]
    Provider(String),
}

/// A 384-dimensional vector of finite f32 values.
///
/// Provider output is additionally L2-normalized; vectors deserialized from
/// storage are taken as-is so round trips stay bit-exact.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    values: Vec<f32>,
}

impl Embedding {
    /// Wraps a raw vector, validating dimension and finiteness.
    pub fn new(values: Vec<f32>) -> Result<Self, EmbeddingError> {
        if values.len() != EMBEDDING_DIM {
            return Err(EmbeddingError::WrongDimension(values.len()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(EmbeddingError::NotFinite(i));
        }
        Ok(Self { values })
    }

    /// Wraps and L2-normalizes a raw vector. A zero vector stays zero.
    pub fn normalized(values: Vec<f32>) -> Result<Self, EmbeddingError> {
        let mut e = Self::new(values)?;
        let norm = e.norm();
        if norm > 0.0 {
            for v in &mut e.values {
                *v = (*v as f64 / norm) as f32;
            }
        }
        Ok(e)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.values
    }

    /// L2 norm, accumulated in double precision.
    pub fn norm(&self) -> f64 {
        self.values
            .iter()
            .map(|&v| v as f64 * v as f64)
            .sum::<f64>()
            .sqrt()
    }
}

/// Cosine similarity in [-1, 1], accumulated in double precision.
///
/// Zero-norm input is defined as similarity 0.0; it never occurs for provider
/// output but guards vectors decoded from corrupted blobs.
pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> f32 {
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (&x, &y) in a.values.iter().zip(&b.values) {
        let (x, y) = (x as f64, y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    let denom = na.sqrt() * nb.sqrt();
    if denom <= 0.0 {
        return 0.0;
    }
    (dot / denom).clamp(-1.0, 1.0) as f32
}

/// Serializes an embedding as 1536 bytes of little-endian f32 values.
pub fn serialize_embedding(e: &Embedding) -> Vec<u8> {
    let mut blob = Vec::with_capacity(EMBEDDING_BLOB_LEN);
    for v in &e.values {
        blob.extend_from_slice(&v.to_le_bytes());
    }
    blob
}

/// Decodes a 1536-byte little-endian blob back into an embedding.
pub fn deserialize_embedding(blob: &[u8]) -> Result<Embedding, EmbeddingError> {
    if blob.len() != EMBEDDING_BLOB_LEN {
        return Err(EmbeddingError::WrongBlobLength(blob.len()));
    }
    let values: Vec<f32> = blob
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Embedding::new(values)
}

/// A text-to-vector backend.
///
/// Providers must be callable concurrently from the background indexing task
/// and the foreground search path; a provider may serialize internally, but
/// callers assume reentrancy. Within one instance the same input must produce
/// bitwise-identical output.
pub trait EmbeddingProvider: Send + Sync {
    /// Provider identifier, recorded for diagnostics.
    fn name(&self) -> &str;

    /// Whether equal inputs produce equal vectors across instances too.
    fn deterministic(&self) -> bool;

    /// Embeds non-empty text into a unit-norm 384-dim vector.
    fn embed(&self, text: &str) -> Result<Embedding, EmbeddingError>;
}

/// Deterministic, dependency-free provider: character trigrams are feature-
/// hashed into 384 buckets and L2-normalized.
///
/// Lexically overlapping texts get nonzero similarity, which is enough to make
/// retrieval behaviour observable without any model download.
#[derive(Debug, Default, Clone)]
pub struct HashedTrigramProvider;

impl HashedTrigramProvider {
    pub fn new() -> Self {
        Self
    }
}

/// FNV-1a over a trigram's UTF-8 bytes; stable across platforms and runs.
fn fnv1a(chars: &[char]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    let mut buf = [0u8; 4];
    for &c in chars {
        for &b in c.encode_utf8(&mut buf).as_bytes() {
            hash ^= b as u64;
            hash = hash.wrapping_mul(0x100000001b3);
        }
    }
    hash
}

impl EmbeddingProvider for HashedTrigramProvider {
    fn name(&self) -> &str {
        "hashed-trigram"
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn embed(&self, text: &str) -> Result<Embedding, EmbeddingError> {
        if text.is_empty() {
            return Err(EmbeddingError::EmptyText);
        }
        // Two sentinel chars on each side so even single-char inputs
        // produce trigrams.
        let mut seq: Vec<char> = vec!['\u{1}', '\u{1}'];
        seq.extend(text.to_lowercase().chars());
        seq.push('\u{1}');
        seq.push('\u{1}');

        let mut values = vec![0.0f32; EMBEDDING_DIM];
        for tri in seq.windows(3) {
            let bucket = (fnv1a(tri) % EMBEDDING_DIM as u64) as usize;
            values[bucket] += 1.0;
        }
        Embedding::normalized(values)
    }
}

#[cfg(feature = "minilm")]
pub use self::minilm::MiniLmProvider;

#[cfg(feature = "minilm")]
mod minilm {
    //! Real sentence-embedding backend: all-MiniLM-L6-v2 loaded from a local
    //! model directory (config key `embedding.model_path`). The directory
    //! must contain `model.onnx`, `tokenizer.json`, `config.json`,
    //! `special_tokens_map.json`, and `tokenizer_config.json`.

    use std::path::{Path, PathBuf};
    use std::sync::Mutex;

    use fastembed::{
        InitOptionsUserDefined, Pooling, TextEmbedding, TokenizerFiles, UserDefinedEmbeddingModel,
    };

    use super::{Embedding, EmbeddingError, EmbeddingProvider};

    pub struct MiniLmProvider {
        model: Mutex<TextEmbedding>,
        model_path: PathBuf,
    }

    impl MiniLmProvider {
        /// Loads the model from a local directory; no network access.
        pub fn from_model_dir(dir: impl AsRef<Path>) -> Result<Self, EmbeddingError> {
            let dir = dir.as_ref();
            let read = |name: &str| {
                std::fs::read(dir.join(name)).map_err(|e| {
                    EmbeddingError::Provider(format!(
                        "model file {:?} unreadable: {e}",
                        dir.join(name)
                    ))
                })
            };
            let tokenizer_files = TokenizerFiles {
                tokenizer_file: read("tokenizer.json")?,
                config_file: read("config.json")?,
                special_tokens_map_file: read("special_tokens_map.json")?,
                tokenizer_config_file: read("tokenizer_config.json")?,
            };
            let model = UserDefinedEmbeddingModel::new(read("model.onnx")?, tokenizer_files)
                .with_pooling(Pooling::Mean);
            let text_embedding = TextEmbedding::try_new_from_user_defined(
                model,
                InitOptionsUserDefined::default(),
            )
            .map_err(|e| EmbeddingError::Provider(e.to_string()))?;
            Ok(Self {
                model: Mutex::new(text_embedding),
                model_path: dir.to_path_buf(),
            })
        }

        pub fn model_path(&self) -> &Path {
            &self.model_path
        }
    }

    impl EmbeddingProvider for MiniLmProvider {
        fn name(&self) -> &str {
            "all-minilm-l6-v2"
        }

        fn deterministic(&self) -> bool {
            true
        }

        fn embed(&self, text: &str) -> Result<Embedding, EmbeddingError> {
            if text.is_empty() {
                return Err(EmbeddingError::EmptyText);
            }
            let mut model = self
                .model
                .lock()
                .map_err(|_| EmbeddingError::Provider("model lock poisoned".into()))?;
            let mut out = model
                .embed(&[text], None)
                .map_err(|e| EmbeddingError::Provider(e.to_string()))?;
            let values = out
                .pop()
                .ok_or_else(|| EmbeddingError::Provider("empty embedding batch".into()))?;
            Embedding::normalized(values)
        }
    }
}
