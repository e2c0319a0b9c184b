//! Slice-max embedding retrieval.
//!
//! A segment is cut into slices that fit the embedder's input window; its
//! score against a keyword is the best cosine similarity over those slices.

use thiserror::Error;

use crate::parallel::parallel_map;
use crate::segment::{split_paragraph, Segment};
use crate::tokens::TokenCounter;

pub const DEFAULT_TOP_K: usize = 3;
/// Input window of the reference sentence-embedding model.
pub const DEFAULT_SLICE_TOKENS: usize = 384;

pub type BoxError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("embedding provider failed: {0}")]
    Provider(#[source] BoxError),
    #[error("keyword is {tokens} tokens, over the embedder limit of {limit}")]
    KeywordTooLong { tokens: usize, limit: usize },
    #[error("no segments to retrieve from")]
    EmptyCorpus,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("embedding provider returned {got} vectors for {expected} texts")]
    CountMismatch { expected: usize, got: usize },
}

/// Produces unit-normalized embeddings of a fixed dimension.
pub trait EmbeddingProvider: Send + Sync {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, RetrievalError>;

    fn max_input_tokens(&self) -> usize;
}

/// Feature-hashed bag of words: lowercase alphanumeric tokens are hashed into
/// `dim` buckets with 64-bit FNV-1a, counted, then L2-normalized.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    pub dim: usize,
    pub max_input_tokens: usize,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self {
            dim: 256,
            max_input_tokens: DEFAULT_SLICE_TOKENS,
        }
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Lowercased maximal runs of alphanumeric chars.
pub fn word_tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
}

impl HashingEmbedder {
    pub fn embed_one(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for token in word_tokens(text) {
            v[(fnv1a(token.as_bytes()) % self.dim as u64) as usize] += 1.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            // no tokens: fixed unit vector so the output stays normalized
            v[(fnv1a(b"") % self.dim as u64) as usize] = 1.0;
        } else {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

impl EmbeddingProvider for HashingEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, RetrievalError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }

    fn max_input_tokens(&self) -> usize {
        self.max_input_tokens
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSegment {
    pub segment: Segment,
    pub score: f64,
}

/// Non-overlapping, order-preserving slices of at most `slice_limit` tokens.
pub fn slice_text(text: &str, slice_limit: usize, counter: &dyn TokenCounter) -> Vec<String> {
    split_paragraph(text, slice_limit, counter)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn embed_checked(provider: &dyn EmbeddingProvider, texts: &[String]) -> Result<Vec<Vec<f64>>, RetrievalError> {
    let vectors = provider.embed(texts)?;
    if vectors.len() != texts.len() {
        return Err(RetrievalError::CountMismatch {
            expected: texts.len(),
            got: vectors.len(),
        });
    }
    Ok(vectors)
}

fn embed_keyword(
    keyword_text: &str,
    provider: &dyn EmbeddingProvider,
    counter: &dyn TokenCounter,
) -> Result<Vec<f64>, RetrievalError> {
    let tokens = counter.count(keyword_text);
    if tokens > provider.max_input_tokens() {
        return Err(RetrievalError::KeywordTooLong {
            tokens,
            limit: provider.max_input_tokens(),
        });
    }
    Ok(embed_checked(provider, &[keyword_text.to_string()])?.remove(0))
}

fn slice_max(
    segment: &Segment,
    keyword_vec: &[f64],
    provider: &dyn EmbeddingProvider,
    counter: &dyn TokenCounter,
) -> Result<f64, RetrievalError> {
    let slices = slice_text(&segment.text, provider.max_input_tokens(), counter);
    let vectors = embed_checked(provider, &slices)?;
    Ok(vectors
        .iter()
        .map(|v| dot(v, keyword_vec).clamp(-1.0, 1.0))
        .fold(f64::NEG_INFINITY, f64::max))
}

pub fn score_segment(
    segment: &Segment,
    keyword_text: &str,
    provider: &dyn EmbeddingProvider,
    counter: &dyn TokenCounter,
) -> Result<ScoredSegment, RetrievalError> {
    let keyword_vec = embed_keyword(keyword_text, provider, counter)?;
    Ok(ScoredSegment {
        segment: segment.clone(),
        score: slice_max(segment, &keyword_vec, provider, counter)?,
    })
}

/// Scores every segment, issuing at most `parallelism` embedding calls at once.
pub fn rank_segments(
    segments: &[Segment],
    keyword_text: &str,
    provider: &dyn EmbeddingProvider,
    counter: &dyn TokenCounter,
    parallelism: usize,
) -> Result<Vec<ScoredSegment>, RetrievalError> {
    let keyword_vec = embed_keyword(keyword_text, provider, counter)?;
    parallel_map(segments, parallelism, |_, seg| {
        slice_max(seg, &keyword_vec, provider, counter).map(|score| ScoredSegment {
            segment: seg.clone(),
            score,
        })
    })
    .into_iter()
    .collect()
}

/// Positions of the `k` best scores, highest first with ties going to the
/// lower position, then re-sorted into ascending position order.
pub fn select_top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    order.sort_unstable();
    order
}

/// The `k` best segments in document order. When the corpus has at most
/// `k` segments no scoring happens and all are returned.
pub fn retrieve_top_k(
    segments: &[Segment],
    keyword_text: &str,
    k: usize,
    provider: &dyn EmbeddingProvider,
    counter: &dyn TokenCounter,
) -> Result<Vec<Segment>, RetrievalError> {
    retrieve_top_k_parallel(segments, keyword_text, k, provider, counter, 1)
}

pub fn retrieve_top_k_parallel(
    segments: &[Segment],
    keyword_text: &str,
    k: usize,
    provider: &dyn EmbeddingProvider,
    counter: &dyn TokenCounter,
    parallelism: usize,
) -> Result<Vec<Segment>, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::InvalidK);
    }
    if segments.is_empty() {
        return Err(RetrievalError::EmptyCorpus);
    }
    if segments.len() <= k {
        return Ok(segments.to_vec());
    }
    let ranked = rank_segments(segments, keyword_text, provider, counter, parallelism)?;
    // ties fall back to segment_index, which equals position for a document's segments
    let mut scored: Vec<(f64, usize, usize)> = ranked
        .iter()
        .enumerate()
        .map(|(pos, s)| (s.score, s.segment.segment_index, pos))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scored.truncate(k);
    scored.sort_by_key(|&(_, index, _)| index);
    Ok(scored.into_iter().map(|(_, _, pos)| segments[pos].clone()).collect())
}
