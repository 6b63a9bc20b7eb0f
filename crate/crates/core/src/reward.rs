//! Set-level rewards for sampled captions and their policy-gradient weights.
//!
//! Both rewards are written so that
//! `grad R = sum_i weights[i] * grad log p(c_i)`,
//! which lets the trainer reuse one score-function code path for either mode.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dpp::{max_asymmetry, EnsembleMatrices, SYMMETRY_TOL};
use crate::error::{Error, Result};
use crate::metrics::{cider_from_profiles, similarity_matrix, Caption, DocFreq, TfIdfProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardMode {
    /// Expected CIDEr of the sampled captions.
    Scst,
    /// Sign-weighted pairwise L-ensemble reward.
    Rdpp,
}

impl fmt::Display for RewardMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RewardMode::Scst => "scst",
            RewardMode::Rdpp => "rdpp",
        })
    }
}

impl FromStr for RewardMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "scst" => Ok(RewardMode::Scst),
            "rdpp" | "r-dpp" => Ok(RewardMode::Rdpp),
            other => Err(Error::Config(format!(
                "unknown reward mode `{other}` (expected scst or rdpp)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBundle {
    pub reward: f64,
    /// Coefficient of `grad log p(c_i)` in the reward gradient.
    pub weights: Vec<f64>,
    pub mode: RewardMode,
}

/// Captions drawn independently from the policy for one context.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSet {
    pub image_id: String,
    pub captions: Vec<Caption>,
    pub log_probs: Vec<f64>,
}

impl SampledSet {
    pub fn new(image_id: impl Into<String>, captions: Vec<Caption>, log_probs: Vec<f64>) -> Result<Self> {
        if captions.is_empty() {
            return Err(Error::EmptySet);
        }
        if captions.len() != log_probs.len() {
            return Err(Error::Shape(format!(
                "{} captions but {} log-probabilities",
                captions.len(),
                log_probs.len()
            )));
        }
        if let Some(lp) = log_probs.iter().find(|lp| !(**lp <= 0.0)) {
            return Err(Error::Shape(format!("log-probability {lp} is not <= 0")));
        }
        Ok(SampledSet {
            image_id: image_id.into(),
            captions,
            log_probs,
        })
    }

    pub fn len(&self) -> usize {
        self.captions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.captions.is_empty()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.log_probs.iter().map(|lp| lp.exp()).collect()
    }
}

/// `R = sum_i q_i p_i`, weights `(q_i - b) p_i`.
///
/// With `baseline = None` this is the plain expected-quality gradient and every
/// weight is non-negative.
pub fn scst_reward(q: &[f64], p: &[f64], baseline: Option<f64>) -> Result<RewardBundle> {
    if q.len() != p.len() {
        return Err(Error::Shape(format!(
            "{} quality scores but {} probabilities",
            q.len(),
            p.len()
        )));
    }
    let b = baseline.unwrap_or(0.0);
    let reward = q.iter().zip(p).map(|(q, p)| q * p).sum();
    let weights = q.iter().zip(p).map(|(q, p)| (q - b) * p).collect();
    Ok(RewardBundle {
        reward,
        weights,
        mode: RewardMode::Scst,
    })
}

fn check_pair_inputs(l: &DMatrix<f64>, signs: &DMatrix<i8>, p: &[f64]) -> Result<()> {
    let m = p.len();
    if l.shape() != (m, m) || signs.shape() != (m, m) {
        return Err(Error::Shape(format!(
            "kernel {:?} and signs {:?} must both be {m}x{m}",
            l.shape(),
            signs.shape()
        )));
    }
    let asym = max_asymmetry(l);
    if asym > SYMMETRY_TOL {
        return Err(Error::Symmetry {
            max_asymmetry: asym,
        });
    }
    if signs != &signs.transpose() {
        return Err(Error::Symmetry { max_asymmetry: 2.0 });
    }
    Ok(())
}

/// `R = sum_ij sign_ij L_ij p_i p_j`, weights `2 p_i sum_j sign_ij L_ij p_j`.
///
/// `L` and the sign pattern are held fixed; only the probabilities depend on
/// the policy. The factor 2 comes from folding the `j` derivative onto `i`,
/// which requires both matrices to be symmetric.
pub fn rdpp_reward(l: &DMatrix<f64>, signs: &DMatrix<i8>, p: &[f64]) -> Result<RewardBundle> {
    check_pair_inputs(l, signs, p)?;
    let m = p.len();
    let mut reward = 0.0;
    let mut weights = vec![0.0; m];
    for i in 0..m {
        let mut row = 0.0;
        for j in 0..m {
            row += f64::from(signs[(i, j)]) * l[(i, j)] * p[j];
        }
        reward += row * p[i];
        weights[i] = 2.0 * p[i] * row;
    }
    Ok(RewardBundle {
        reward,
        weights,
        mode: RewardMode::Rdpp,
    })
}

/// Weights from the unfolded product rule, before using symmetry:
/// `sum_ij sign_ij L_ij (p_j grad p_i + p_i grad p_j)`.
pub fn rdpp_weights_two_term(l: &DMatrix<f64>, signs: &DMatrix<i8>, p: &[f64]) -> Result<Vec<f64>> {
    check_pair_inputs(l, signs, p)?;
    let m = p.len();
    let mut weights = vec![0.0; m];
    for i in 0..m {
        for j in 0..m {
            let c = f64::from(signs[(i, j)]) * l[(i, j)] * p[i] * p[j];
            // d(p_i)/dθ = p_i d(log p_i)/dθ, so each term lands on a log-grad.
            weights[i] += c;
            weights[j] += c;
        }
    }
    Ok(weights)
}

/// Quality from CIDEr against the references, similarity from the unit CIDEr
/// kernel, then the ridged inverse-sign pattern.
pub fn ensemble_from_profiles(
    samples: &[TfIdfProfile],
    refs: &[TfIdfProfile],
    eps: f64,
    tol: f64,
) -> Result<EnsembleMatrices> {
    if samples.is_empty() {
        return Err(Error::EmptySet);
    }
    let q: Vec<f64> = samples.iter().map(|c| cider_from_profiles(c, refs)).collect();
    let s = similarity_matrix(samples);
    EnsembleMatrices::new(q, s, eps, tol)
}

pub fn assemble_ensemble(
    captions: &[Caption],
    refs: &[Caption],
    df: &DocFreq,
    eps: f64,
    tol: f64,
) -> Result<EnsembleMatrices> {
    let samples: Vec<TfIdfProfile> = captions.iter().map(|c| df.profile(c)).collect();
    let refs: Vec<TfIdfProfile> = refs.iter().map(|c| df.profile(c)).collect();
    ensemble_from_profiles(&samples, &refs, eps, tol)
}

/// Full R-DPP reward for a sampled set: CIDEr quality, unit similarity,
/// L-ensemble, inverse signs, pairwise reward.
pub fn assemble_rdpp(
    sampled: &SampledSet,
    refs: &[Caption],
    df: &DocFreq,
    eps: f64,
    tol: f64,
) -> Result<RewardBundle> {
    let ens = assemble_ensemble(&sampled.captions, refs, df, eps, tol)?;
    rdpp_reward(&ens.l, &ens.signs, &sampled.probabilities())
}
