//! Token counting.
//!
//! Every budget in the pipeline (element, segment, slice, summary and window
//! limits) is enforced against a [`TokenCounter`]. The default heuristic is
//! model-agnostic; a real tokenizer can be plugged in behind the same trait.

/// Counts tokens in a piece of text.
///
/// Implementations must return 0 for the empty string, be deterministic, and
/// be monotone under concatenation: `count(a + b) >= max(count(a), count(b))`.
/// The splitters rely on monotonicity to binary-search for maximal prefixes.
pub trait TokenCounter: Send + Sync {
    fn count(&self, text: &str) -> usize;
}

/// `ceil(chars / 4)`, whitespace included.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HeuristicCounter;

impl HeuristicCounter {
    pub const CHARS_PER_TOKEN: usize = 4;
}

impl TokenCounter for HeuristicCounter {
    fn count(&self, text: &str) -> usize {
        text.chars().count().div_ceil(Self::CHARS_PER_TOKEN)
    }
}

impl<T: TokenCounter + ?Sized> TokenCounter for &T {
    fn count(&self, text: &str) -> usize {
        (**self).count(text)
    }
}

impl<T: TokenCounter + ?Sized> TokenCounter for std::sync::Arc<T> {
    fn count(&self, text: &str) -> usize {
        (**self).count(text)
    }
}

impl<T: TokenCounter + ?Sized> TokenCounter for Box<T> {
    fn count(&self, text: &str) -> usize {
        (**self).count(text)
    }
}

pub fn count_tokens(counter: &dyn TokenCounter, text: &str) -> usize {
    counter.count(text)
}

/// Longest char-prefix of `text` whose count stays within `limit`.
///
/// Returns a byte offset on a char boundary. May be 0 when even the first
/// char exceeds the limit.
pub(crate) fn max_prefix_within(counter: &dyn TokenCounter, text: &str, limit: usize) -> usize {
    let boundaries: Vec<usize> = text
        .char_indices()
        .map(|(i, _)| i)
        .skip(1)
        .chain(std::iter::once(text.len()))
        .collect();
    // boundaries[i] is the end offset of a prefix holding i + 1 chars
    let fits = |n: usize| n == 0 || counter.count(&text[..boundaries[n - 1]]) <= limit;
    let (mut lo, mut hi) = (0usize, boundaries.len());
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    if lo == 0 {
        0
    } else {
        boundaries[lo - 1]
    }
}

/// Truncates `text` to the longest prefix within `limit` tokens.
pub fn truncate_to_tokens(counter: &dyn TokenCounter, text: &str, limit: usize) -> String {
    if counter.count(text) <= limit {
        return text.to_string();
    }
    text[..max_prefix_within(counter, text, limit)].to_string()
}
