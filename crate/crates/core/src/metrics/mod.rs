//! Tokenization, n-gram statistics and the caption metrics: CIDEr, the
//! unit-normalized CIDEr similarity, self-CIDEr diversity, BLEU and ROUGE-L.

mod caption;
mod cider;
mod diversity;
mod ngram;
mod overlap;
mod tfidf;

pub use caption::{tokenize, Caption};
pub use cider::{cider, cider_from_profiles, similarity_from_profiles, similarity_unit, CIDER_SCALE};
pub use diversity::{
    diversity_from_kernel, diversity_from_profiles, self_cider_diversity, similarity_matrix,
};
pub use ngram::{extract_ngrams, NGram, MAX_ORDER};
pub use overlap::{bleu_n, lcs_len, rouge_l, ROUGE_BETA};
pub use tfidf::{DocFreq, TfIdfProfile};
