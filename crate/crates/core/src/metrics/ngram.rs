use std::collections::BTreeMap;

use super::Caption;

/// A contiguous window of tokens.
pub type NGram = Vec<String>;

/// Largest n-gram order used by CIDEr and BLEU.
pub const MAX_ORDER: usize = 4;

/// All contiguous `n`-token windows of `caption`, with multiplicities.
///
/// Returns an empty map when the caption is shorter than `n` or `n == 0`.
pub fn extract_ngrams(caption: &Caption, n: usize) -> BTreeMap<NGram, usize> {
    let mut counts = BTreeMap::new();
    if n == 0 {
        return counts;
    }
    for window in caption.tokens().windows(n) {
        *counts.entry(window.to_vec()).or_insert(0) += 1;
    }
    counts
}
