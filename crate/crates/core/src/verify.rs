//! Self-checks run by `rdpp verify`: finite-difference gradients, exact DPP
//! normalization, metric boundary values, beam/enumeration agreement and
//! round trips. Every check is cheap enough to run on a fresh checkout.

use std::fmt;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{generate_synthetic, RefCorpus, SynthSpec};
use crate::dpp::{dpp_log_prob, inverse_sign_matrix, log_det, ridge_inverse, SubsetIndex, DEFAULT_EPS, DEFAULT_SIGN_TOL};
use crate::error::Result;
use crate::eval::Harness;
use crate::metrics::{cider, self_cider_diversity, similarity_matrix, Caption, DocFreq};
use crate::policy::{PolicyParams, Vocab};
use crate::reward::{rdpp_reward, rdpp_weights_two_term, scst_reward, RewardBundle};
use crate::train::{init_policy, TrainConfig, Trainer};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {:<22} {}", self.name, self.detail)
    }
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name, passed, detail }
}

/// Random `n x n` PSD matrix `A A^T` with `A` entries in `[-1, 1]`.
pub fn random_psd(n: usize, rank: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, rank, |_, _| rng.random_range(-1.0..=1.0));
    &a * a.transpose()
}

/// Runs every check; the suite passes when all entries pass.
pub fn run_suite(seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let checks: Vec<(&'static str, Box<dyn Fn(&mut ChaCha8Rng) -> Result<(bool, String)>>)> = vec![
        ("logdet_gradient", Box::new(logdet_gradient)),
        ("rdpp_gradient", Box::new(|r| policy_gradient(r, true))),
        ("scst_gradient", Box::new(|r| policy_gradient(r, false))),
        ("rdpp_symmetry", Box::new(rdpp_symmetry)),
        ("dpp_normalization", Box::new(dpp_normalization)),
        ("metric_boundaries", Box::new(|_| metric_boundaries())),
        ("beam_enumeration", Box::new(beam_enumeration)),
        ("round_trips", Box::new(|_| round_trips())),
        ("determinism", Box::new(|_| determinism())),
    ];
    checks
        .into_iter()
        .map(|(name, f)| match f(&mut rng) {
            Ok((passed, detail)) => check(name, passed, detail),
            Err(e) => check(name, false, format!("error: {e}")),
        })
        .collect()
}

fn logdet_gradient(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let (eps, h) = (1e-6, 1e-6);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(1..=8);
        let l = random_psd(n, n + 2, rng);
        let inv = ridge_inverse(&l, eps)?;
        for i in 0..n {
            for j in 0..n {
                let bump = |d: f64| {
                    let mut m = l.clone();
                    m[(i, j)] += d;
                    if i != j {
                        m[(j, i)] += d;
                    }
                    log_det(&m, eps)
                };
                // A symmetric bump of an off-diagonal pair counts the entry twice.
                let scale = if i == j { 1.0 } else { 2.0 };
                let fd = (bump(h)? - bump(-h)?) / (2.0 * h * scale);
                let expect = inv[(i, j)];
                worst = worst.max((fd - expect).abs());
            }
        }
    }
    Ok((worst <= 1e-5, format!("max abs error {worst:.2e}")))
}

fn tiny_policy(rng: &mut ChaCha8Rng) -> Result<PolicyParams> {
    PolicyParams::random(Vocab::new(["a", "b", "c"])?, 1, 3, 1.5, rng)
}

fn set_reward(params: &PolicyParams, captions: &[Caption], q: &[f64], l: &DMatrix<f64>, signs: &DMatrix<i8>, rdpp: bool) -> Result<RewardBundle> {
    let p: Vec<f64> = captions
        .iter()
        .map(|c| params.log_prob(0, c).map(|(lp, _)| lp.exp()))
        .collect::<Result<_>>()?;
    if rdpp {
        rdpp_reward(l, signs, &p)
    } else {
        scst_reward(q, &p, None)
    }
}

fn policy_gradient(rng: &mut ChaCha8Rng, rdpp: bool) -> Result<(bool, String)> {
    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let params = tiny_policy(rng)?;
        let space: Vec<Caption> = params.enumerate_all(0)?.into_iter().map(|(c, _)| c).collect();
        let refs: Vec<Caption> = (0..3).map(|_| space[rng.random_range(0..space.len())].clone()).collect();
        let df = DocFreq::from_reference_sets([refs.as_slice(), &space[..4]]);
        let captions: Vec<Caption> = (0..4).map(|_| space[rng.random_range(0..space.len())].clone()).collect();
        let q: Vec<f64> = captions.iter().map(|c| cider(c, &refs, &df)).collect();
        let profiles: Vec<_> = captions.iter().map(|c| df.profile(c)).collect();
        let l = crate::dpp::build_l(&q, &similarity_matrix(&profiles))?;
        let signs = inverse_sign_matrix(&l, DEFAULT_EPS, DEFAULT_SIGN_TOL)?;

        let bundle = set_reward(&params, &captions, &q, &l, &signs, rdpp)?;
        let mut analytic = vec![0.0; params.logits().len()];
        for (c, w) in captions.iter().zip(&bundle.weights) {
            let (_, g) = params.log_prob(0, c)?;
            g.accumulate_into(&mut analytic, *w);
        }
        let mut numeric = vec![0.0; analytic.len()];
        for (k, slot) in numeric.iter_mut().enumerate() {
            let mut shifted = params.clone();
            shifted.logits_mut()[k] += h;
            let up = set_reward(&shifted, &captions, &q, &l, &signs, rdpp)?.reward;
            shifted.logits_mut()[k] -= 2.0 * h;
            let down = set_reward(&shifted, &captions, &q, &l, &signs, rdpp)?.reward;
            *slot = (up - down) / (2.0 * h);
        }
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = numeric.iter().map(|x| x * x).sum::<f64>().sqrt();
        worst = worst.max(if norm > 1e-12 { diff / norm } else { diff });
    }
    Ok((worst <= 1e-4, format!("max relative error {worst:.2e}")))
}

fn rdpp_symmetry(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(1..=8);
        let l = random_psd(n, rng.random_range(1..=n), rng);
        let signs = inverse_sign_matrix(&l, DEFAULT_EPS, DEFAULT_SIGN_TOL)?;
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let folded = rdpp_reward(&l, &signs, &p)?.weights;
        let unfolded = rdpp_weights_two_term(&l, &signs, &p)?;
        for (a, b) in folded.iter().zip(&unfolded) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok((worst <= 1e-12, format!("max abs difference {worst:.2e}")))
}

fn dpp_normalization(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for n in 1..=8 {
        let l = random_psd(n, rng.random_range(1..=n), rng);
        let mut total = 0.0;
        for mask in 0..(1u64 << n) {
            total += dpp_log_prob(&l, &SubsetIndex::from_mask(mask, n))?.exp();
        }
        worst = worst.max((total - 1.0).abs());
    }
    Ok((worst <= 1e-8, format!("max |sum - 1| {worst:.2e}")))
}

fn metric_boundaries() -> Result<(bool, String)> {
    let refs: Vec<Caption> = ["a man rides a horse", "a dog on the beach", "two cats sleep"]
        .iter()
        .map(|s| s.parse())
        .collect::<Result<_>>()?;
    let df = DocFreq::from_reference_sets([&refs[..1], &refs[1..2], &refs[2..]]);
    let self_match = cider(&refs[0], &refs[..1], &df);
    let dup = self_cider_diversity(&[refs[0].clone(), refs[0].clone(), refs[0].clone()], &df)?;
    let disjoint = self_cider_diversity(&[refs[1].clone(), refs[2].clone()], &df)?;
    let ok = (self_match - 10.0).abs() <= 1e-9 && dup.abs() <= 1e-9 && (disjoint - 1.0).abs() <= 1e-9;
    Ok((ok, format!("self-match {self_match:.12} duplicates {dup:.1e} disjoint {disjoint:.12}")))
}

fn beam_enumeration(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut failures = 0;
    for _ in 0..100 {
        let words = rng.random_range(1..=4);
        let vocab = Vocab::new((0..words).map(|i| format!("w{i}")))?;
        let params = PolicyParams::random(vocab, 1, rng.random_range(1..=3), 3.0, rng)?;
        let all = params.enumerate_all(0)?;
        let best = all
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(c, _)| c.clone())
            .expect("non-empty space");
        let width = params.sequence_space_size() as usize;
        if params.beam_search(0, width)? != best {
            failures += 1;
        }
    }
    Ok((failures == 0, format!("{failures} mismatches in 100 draws")))
}

fn small_corpus() -> Result<RefCorpus> {
    generate_synthetic(&SynthSpec {
        num_images: 12,
        ..SynthSpec::default()
    })
}

fn round_trips() -> Result<(bool, String)> {
    let corpus = small_corpus()?;
    let back = RefCorpus::from_jsonl(&corpus.to_jsonl(), "memory")?;
    let params = PolicyParams::random(Vocab::new(corpus.vocabulary())?, corpus.len(), 10, 2.0, &mut ChaCha8Rng::seed_from_u64(3))?;
    let bytes = params.to_bytes();
    let restored = PolicyParams::from_bytes(&bytes, "memory")?;
    let ok = back == corpus && restored == params && restored.to_bytes() == bytes;
    Ok((ok, "corpus and checkpoint".into()))
}

fn determinism() -> Result<(bool, String)> {
    let corpus = small_corpus()?;
    let config = TrainConfig {
        xe_epochs: 2,
        rl_epochs: 2,
        ..TrainConfig::desk()
    };
    let run = || -> Result<_> {
        let trainer = Trainer::new(&corpus, config.clone())?;
        let (xe, xe_log) = trainer.train_xe(init_policy(&corpus, 10)?)?;
        let (rl, rl_log) = trainer.train_rl(xe)?;
        let report = Harness::new(&corpus).random_sampling(&rl, 4, 9)?;
        Ok((rl, xe_log, rl_log, report))
    };
    let (a, b) = (run()?, run()?);
    let ok = a.0 == b.0 && a.1.same_run(&b.1) && a.2.same_run(&b.2) && a.3 == b.3;
    Ok((ok, "train log, params and eval report".into()))
}
