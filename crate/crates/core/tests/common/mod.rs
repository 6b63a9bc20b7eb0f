//! Independent reference implementations used as test oracles.
//!
//! Nothing here calls into the library's numerical code: n-grams are plain
//! joined strings, determinants come from cofactor expansion, inverses from
//! Gauss-Jordan elimination, eigenvalues from cyclic Jacobi rotations and
//! sequence probabilities from a direct softmax over the raw logits.

#![allow(dead_code)]

use std::collections::HashMap;

use rand::seq::IndexedRandom;
use rand::Rng;
use rdpp::dpp::build_l;
use rdpp::metrics::{cider, similarity_matrix, Caption, DocFreq};
use rdpp::policy::{PolicyParams, Vocab};

pub type Mat = Vec<Vec<f64>>;

pub fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn grams(tokens: &[String], n: usize) -> HashMap<String, f64> {
    let mut out = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *out.entry(w.join(" ")).or_insert(0.0) += 1.0;
        }
    }
    out
}

/// CIDEr (x10, no length penalty, no clipping) computed from scratch.
/// `corpus` holds every image's reference set and defines document frequency.
pub fn brute_cider(cand: &str, refs: &[&str], corpus: &[Vec<&str>]) -> f64 {
    let n_images = corpus.len() as f64;
    let idf = |g: &str, n: usize| -> f64 {
        let df = corpus
            .iter()
            .filter(|set| set.iter().any(|r| grams(&words(r), n).contains_key(g)))
            .count()
            .max(1);
        (n_images / df as f64).ln()
    };
    let vec_of = |s: &str, n: usize| -> HashMap<String, f64> {
        grams(&words(s), n)
            .into_iter()
            .map(|(g, c)| {
                let w = c * idf(&g, n);
                (g, w)
            })
            .collect()
    };
    let mut total = 0.0;
    for n in 1..=4 {
        let c = vec_of(cand, n);
        let cn: f64 = c.values().map(|x| x * x).sum::<f64>().sqrt();
        let mut acc = 0.0;
        for r in refs {
            let rv = vec_of(r, n);
            let rn: f64 = rv.values().map(|x| x * x).sum::<f64>().sqrt();
            if cn > 0.0 && rn > 0.0 {
                let dot: f64 = c.iter().map(|(g, w)| w * rv.get(g).copied().unwrap_or(0.0)).sum();
                acc += dot / (cn * rn);
            }
        }
        total += acc / refs.len() as f64;
    }
    10.0 * total / 4.0
}

/// Determinant by Laplace expansion along the first row.
pub fn cofactor_det(m: &Mat) -> f64 {
    let n = m.len();
    match n {
        0 => 1.0,
        1 => m[0][0],
        _ => (0..n)
            .map(|j| {
                let minor: Mat = (1..n)
                    .map(|r| (0..n).filter(|&c| c != j).map(|c| m[r][c]).collect())
                    .collect();
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * m[0][j] * cofactor_det(&minor)
            })
            .sum(),
    }
}

/// Inverse by Gauss-Jordan elimination with partial pivoting.
pub fn gauss_inverse(m: &Mat) -> Mat {
    let n = m.len();
    let mut a: Mat = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
        a.swap(col, piv);
        let d = a[col][col];
        for v in a[col].iter_mut() {
            *v /= d;
        }
        for r in 0..n {
            if r != col {
                let f = a[r][col];
                for c in 0..2 * n {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    a.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(m: &Mat) -> Vec<f64> {
    let n = m.len();
    let mut a = m.clone();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

/// `-ln(lambda_max / sum lambda) / ln m` from Jacobi eigenvalues.
pub fn oracle_diversity(kernel: &Mat) -> f64 {
    let m = kernel.len();
    if m <= 1 {
        return 0.0;
    }
    let ev: Vec<f64> = jacobi_eigenvalues(kernel).into_iter().map(|l| l.max(0.0)).collect();
    let top = ev.iter().cloned().fold(0.0, f64::max);
    let sum: f64 = ev.iter().sum();
    (-(top / sum).ln() / (m as f64).ln()).clamp(0.0, 1.0)
}

pub fn random_psd(n: usize, rank: usize, rng: &mut impl Rng) -> Mat {
    let a: Mat = (0..n).map(|_| (0..rank).map(|_| rng.random_range(-1.0..=1.0)).collect()).collect();
    (0..n)
        .map(|i| (0..n).map(|j| (0..rank).map(|k| a[i][k] * a[j][k]).sum()).collect())
        .collect()
}

pub fn to_dmatrix(m: &Mat) -> nalgebra::DMatrix<f64> {
    let n = m.len();
    nalgebra::DMatrix::from_fn(n, n, |i, j| m[i][j])
}

pub fn from_dmatrix(m: &nalgebra::DMatrix<f64>) -> Mat {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn add_ridge(m: &Mat, eps: f64) -> Mat {
    let mut out = m.clone();
    for (i, row) in out.iter_mut().enumerate() {
        row[i] += eps;
    }
    out
}

/// Token ids: 0 is `<bos>`, 1 is `<eos>`, words start at 2.
pub const BOS: usize = 0;
pub const EOS: usize = 1;

/// Log-probability of a word-id sequence straight from the logits: the first
/// step excludes `<eos>`, every step excludes `<bos>`, and a sequence of
/// `max_len` words carries no `<eos>` factor.
pub fn oracle_log_prob(logits: &[f64], vocab_len: usize, max_len: usize, context: usize, ids: &[usize]) -> f64 {
    let at = |prev: usize, next: usize| logits[(context * vocab_len + prev) * vocab_len + next];
    let mut total = 0.0;
    let mut prev = BOS;
    let mut steps: Vec<usize> = ids.to_vec();
    if ids.len() < max_len {
        steps.push(EOS);
    }
    for (k, &next) in steps.iter().enumerate() {
        let allowed: Vec<usize> = (0..vocab_len).filter(|&t| t != BOS && !(k == 0 && t == EOS)).collect();
        let z: f64 = allowed.iter().map(|&t| at(prev, t).exp()).sum();
        total += at(prev, next) - z.ln();
        prev = next;
    }
    total
}

/// Every word-id sequence of 1..=max_len words over `num_words` words.
pub fn all_sequences(num_words: usize, max_len: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut frontier: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for w in 0..num_words {
                let mut t = s.clone();
                t.push(w + 2);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

pub fn ids_to_caption(params: &PolicyParams, ids: &[usize]) -> rdpp::metrics::Caption {
    rdpp::metrics::Caption::from_tokens(ids.iter().map(|&i| params.vocab().token(i).to_string())).unwrap()
}

/// Central finite difference of `f` along every coordinate of `x`.
pub fn finite_diff(x: &[f64], h: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|k| {
            y[k] = x[k] + h;
            let up = f(&y);
            y[k] = x[k] - h;
            let down = f(&y);
            y[k] = x[k];
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 1e-12 {
        diff / norm
    } else {
        diff
    }
}

/// `sum_ij sign_ij L_ij p_i p_j` written out directly.
pub fn oracle_rdpp_reward(l: &Mat, signs: &[Vec<i8>], p: &[f64]) -> f64 {
    let m = p.len();
    let mut r = 0.0;
    for i in 0..m {
        for j in 0..m {
            r += f64::from(signs[i][j]) * l[i][j] * p[i] * p[j];
        }
    }
    r
}

/// Sign of each entry of `(L + eps I)^-1`, zero at or below `tol`.
pub fn oracle_signs(l: &Mat, eps: f64, tol: f64) -> Vec<Vec<i8>> {
    gauss_inverse(&add_ridge(l, eps))
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|x| if x.abs() <= tol { 0 } else if x > 0.0 { 1 } else { -1 })
                .collect()
        })
        .collect()
}

/// Hand-written Adam on a flat parameter vector.
pub struct RefAdam {
    pub lr: f64,
    pub b1: f64,
    pub b2: f64,
    pub eps: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: i32,
}

impl RefAdam {
    pub fn new(n: usize, lr: f64, b1: f64, b2: f64, eps: f64) -> Self {
        RefAdam { lr, b1, b2, eps, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn step(&mut self, x: &mut [f64], g: &[f64]) {
        self.t += 1;
        for k in 0..x.len() {
            self.m[k] = self.b1 * self.m[k] + (1.0 - self.b1) * g[k];
            self.v[k] = self.b2 * self.v[k] + (1.0 - self.b2) * g[k] * g[k];
            let mh = self.m[k] / (1.0 - self.b1.powi(self.t));
            let vh = self.v[k] / (1.0 - self.b2.powi(self.t));
            x[k] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

/// A tabular policy over 3 words (5 tokens with `<bos>`/`<eos>`), captions of
/// at most 3 words, and a sampled set of `m` word-id sequences.
pub struct Fixture {
    pub params: PolicyParams,
    pub sets: Vec<Vec<usize>>,
    pub q: Vec<f64>,
    pub l: Vec<Vec<f64>>,
}

pub fn fixture(rng: &mut impl Rng, m: usize) -> Fixture {
    let params = PolicyParams::random(Vocab::new(["x", "y", "z"]).unwrap(), 1, 3, 1.5, rng).unwrap();
    let space = all_sequences(3, 3);
    let refs: Vec<Caption> = (0..3).map(|_| ids_to_caption(&params, space.choose(&mut *rng).unwrap())).collect();
    let other: Vec<Caption> = (0..2).map(|_| ids_to_caption(&params, space.choose(&mut *rng).unwrap())).collect();
    let df = DocFreq::from_reference_sets([refs.as_slice(), other.as_slice()]);
    let sets: Vec<Vec<usize>> = (0..m).map(|_| space.choose(&mut *rng).unwrap().clone()).collect();
    let caps: Vec<Caption> = sets.iter().map(|s| ids_to_caption(&params, s)).collect();
    // Keep every quality strictly positive so the kernel has no decoupled rows.
    let q: Vec<f64> = caps.iter().map(|c| cider(c, &refs, &df) + 0.5).collect();
    let profiles: Vec<_> = caps.iter().map(|c| df.profile(c)).collect();
    let l = from_dmatrix(&build_l(&q, &similarity_matrix(&profiles)).unwrap());
    Fixture { params, sets, q, l }
}

pub fn probs(logits: &[f64], f: &Fixture) -> Vec<f64> {
    f.sets.iter().map(|s| oracle_log_prob(logits, 5, 3, 0, s).exp()).collect()
}

/// Library weights times library score-function gradients.
pub fn assembled_gradient(f: &Fixture, weights: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; f.params.logits().len()];
    for (s, w) in f.sets.iter().zip(weights) {
        let (_, grad) = f.params.log_prob(0, &ids_to_caption(&f.params, s)).unwrap();
        grad.accumulate_into(&mut g, *w);
    }
    g
}
