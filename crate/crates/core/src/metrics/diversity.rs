use nalgebra::DMatrix;

use super::cider::similarity_from_profiles;
use super::tfidf::{DocFreq, TfIdfProfile};
use super::Caption;
use crate::error::{Error, Result};

/// Pairwise [`similarity_unit`](super::similarity_unit) kernel over a caption set.
pub fn similarity_matrix(profiles: &[TfIdfProfile]) -> DMatrix<f64> {
    let m = profiles.len();
    let mut k = DMatrix::zeros(m, m);
    for i in 0..m {
        k[(i, i)] = 1.0;
        for j in (i + 1)..m {
            let s = similarity_from_profiles(&profiles[i], &profiles[j]);
            k[(i, j)] = s;
            k[(j, i)] = s;
        }
    }
    k
}

/// Self-CIDEr diversity of a caption set, in `[0, 1]`.
///
/// With `λ` the eigenvalues of the similarity kernel, the score is
/// `-ln(λ_max / Σλ) / ln(m)`: 0 when every caption is the same and 1 when
/// the captions are pairwise dissimilar.
pub fn self_cider_diversity(captions: &[Caption], df: &DocFreq) -> Result<f64> {
    let profiles: Vec<TfIdfProfile> = captions.iter().map(|c| df.profile(c)).collect();
    diversity_from_profiles(&profiles)
}

pub fn diversity_from_profiles(profiles: &[TfIdfProfile]) -> Result<f64> {
    if profiles.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(diversity_from_kernel(&similarity_matrix(profiles)))
}

/// Diversity score from an explicit similarity kernel (symmetric, unit diagonal).
pub fn diversity_from_kernel(kernel: &DMatrix<f64>) -> f64 {
    let m = kernel.nrows();
    if m <= 1 {
        return 0.0;
    }
    let eig = kernel.clone().symmetric_eigen();
    let lambdas: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    let total: f64 = lambdas.iter().sum();
    let top = lambdas.iter().cloned().fold(0.0, f64::max);
    if total <= 0.0 {
        return 0.0;
    }
    let ratio = top / total;
    // `+ 0.0` turns the -0.0 of an exact duplicate set into 0.0.
    (-ratio.ln() / (m as f64).ln()).clamp(0.0, 1.0) + 0.0
}
