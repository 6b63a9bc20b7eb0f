//! CIDEr quality and the unit-normalized caption similarity built on the same
//! TF-IDF vectors.

use super::ngram::MAX_ORDER;
use super::tfidf::{DocFreq, TfIdfProfile};
use super::Caption;

/// Scale applied to the averaged cosine so a perfect match scores 10.
pub const CIDER_SCALE: f64 = 10.0;

/// Vanilla CIDEr of `candidate` against `refs`, in `[0, 10]`.
///
/// No length penalty and no count clipping. Orders at which either vector is
/// zero contribute a cosine of 0. An empty reference list scores 0.
pub fn cider(candidate: &Caption, refs: &[Caption], df: &DocFreq) -> f64 {
    let cand = df.profile(candidate);
    let refs: Vec<TfIdfProfile> = refs.iter().map(|r| df.profile(r)).collect();
    cider_from_profiles(&cand, &refs)
}

/// [`cider`] on precomputed profiles.
pub fn cider_from_profiles(candidate: &TfIdfProfile, refs: &[TfIdfProfile]) -> f64 {
    if refs.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for n in 1..=MAX_ORDER {
        let per_ref: f64 = refs.iter().map(|r| candidate.cosine(r, n)).sum();
        total += per_ref / refs.len() as f64;
    }
    CIDER_SCALE * total / MAX_ORDER as f64
}

/// Unit-diagonal similarity between two captions, in `[0, 1]`.
///
/// Each caption maps to the concatenation of its active per-order TF-IDF unit
/// vectors, scaled by `1/sqrt(#active orders)`, so the result is an inner
/// product of unit vectors. When both captions have all four orders active
/// this equals `cider(ci, [cj]) / 10`. A caption with no active order is
/// similar only to an exact copy of itself.
pub fn similarity_unit(ci: &Caption, cj: &Caption, df: &DocFreq) -> f64 {
    similarity_from_profiles(&df.profile(ci), &df.profile(cj))
}

/// [`similarity_unit`] on precomputed profiles.
pub fn similarity_from_profiles(a: &TfIdfProfile, b: &TfIdfProfile) -> f64 {
    if a.caption() == b.caption() {
        return 1.0;
    }
    let (ka, kb) = (a.active_orders(), b.active_orders());
    if ka == 0 || kb == 0 {
        return 0.0;
    }
    let dot: f64 = (1..=MAX_ORDER).map(|n| a.cosine(b, n)).sum();
    (dot / ((ka * kb) as f64).sqrt()).clamp(0.0, 1.0)
}
