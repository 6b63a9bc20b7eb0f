mod common;

use std::collections::BTreeMap;

use common::{all_sequences, finite_diff, ids_to_caption, oracle_log_prob, rel_err};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rdpp::metrics::Caption;
use rdpp::policy::{PolicyParams, Vocab};
use rdpp::Error;

fn vocab(n: usize) -> Vocab {
    Vocab::new((0..n).map(|i| format!("w{i}"))).unwrap()
}

fn random_policy(rng: &mut ChaCha8Rng, words: usize, contexts: usize, max_len: usize, scale: f64) -> PolicyParams {
    PolicyParams::random(vocab(words), contexts, max_len, scale, rng).unwrap()
}

#[test]
fn log_prob_matches_direct_softmax() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = random_policy(&mut rng, 3, 2, 3, 2.0);
    let v = p.vocab().len();
    for ctx in 0..2 {
        for ids in all_sequences(3, 3) {
            let (lp, _) = p.log_prob(ctx, &ids_to_caption(&p, &ids)).unwrap();
            let want = oracle_log_prob(p.logits(), v, 3, ctx, &ids);
            assert!((lp - want).abs() < 1e-12, "{ids:?}: {lp} vs {want}");
        }
    }
}

#[test]
fn probabilities_sum_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (w, max_len) in [(1, 1), (2, 4), (3, 3), (4, 2)] {
        let p = random_policy(&mut rng, w, 1, max_len, 3.0);
        let total: f64 = all_sequences(w, max_len)
            .iter()
            .map(|ids| oracle_log_prob(p.logits(), w + 2, max_len, 0, ids).exp())
            .sum();
        assert!((total - 1.0).abs() < 1e-12, "{w} words, max_len {max_len}: {total}");
        let listed: f64 = p.enumerate_all(0).unwrap().iter().map(|(_, q)| q).sum();
        assert!((listed - 1.0).abs() < 1e-12);
        assert_eq!(p.sequence_space_size() as usize, all_sequences(w, max_len).len());
    }
}

#[test]
fn uniform_policy_closed_form() {
    // First step chooses among W words, later steps among W words and <eos>;
    // a caption of max_len words carries no <eos> factor.
    let (w, max_len) = (4usize, 5usize);
    let p = PolicyParams::uniform(vocab(w), 1, max_len).unwrap();
    let (lw, lw1) = ((w as f64).ln(), ((w + 1) as f64).ln());
    for k in 1..=max_len {
        let ids: Vec<usize> = (0..k).map(|i| 2 + i % w).collect();
        let (lp, _) = p.log_prob(0, &ids_to_caption(&p, &ids)).unwrap();
        let want = if k < max_len { -lw - k as f64 * lw1 } else { -lw - (k - 1) as f64 * lw1 };
        assert!((lp - want).abs() < 1e-12, "k {k}: {lp} vs {want}");
    }
}

#[test]
fn sample_frequencies_follow_exact_probabilities() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = random_policy(&mut rng, 2, 1, 2, 1.0);
    let exact: BTreeMap<String, f64> = p.enumerate_all(0).unwrap().into_iter().map(|(c, q)| (c.to_string(), q)).collect();
    let n = 200_000;
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for _ in 0..n {
        let r = p.sample(0, &mut rng).unwrap();
        let (lp, _) = p.log_prob(0, &r.caption).unwrap();
        assert!((lp - r.log_prob).abs() < 1e-12);
        *counts.entry(r.caption.to_string()).or_default() += 1;
    }
    for (cap, q) in &exact {
        let freq = counts.get(cap).copied().unwrap_or(0) as f64 / n as f64;
        // Five binomial standard deviations.
        let tol = 5.0 * (q * (1.0 - q) / n as f64).sqrt();
        assert!((freq - q).abs() <= tol, "{cap}: {freq} vs {q}");
    }
    assert!(counts.keys().all(|c| exact.contains_key(c)));
}

#[test]
fn rollout_gradient_equals_log_prob_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let p = random_policy(&mut rng, 3, 2, 4, 1.0);
    for _ in 0..50 {
        let r = p.sample(1, &mut rng).unwrap();
        let (_, g) = p.log_prob(1, &r.caption).unwrap();
        assert_eq!(g, r.grad);
        assert_eq!(r.grad.context(), 1);
    }
}

#[test]
fn saturating_beam_is_exact_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for draw in 0..100 {
        let w = rng.random_range(1..=3);
        let max_len = rng.random_range(1..=3);
        let p = random_policy(&mut rng, w, 1, max_len, 3.0);
        let v = w + 2;
        // Argmax over the full caption space from the direct softmax.
        let best = all_sequences(w, max_len)
            .into_iter()
            .map(|ids| (oracle_log_prob(p.logits(), v, max_len, 0, &ids), ids))
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap();
        let width = p.sequence_space_size() as usize;
        let got = p.beam_search(0, width).unwrap();
        assert_eq!(got, ids_to_caption(&p, &best.1), "draw {draw}");
    }
}

#[test]
fn width_one_beam_is_greedy() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..50 {
        let p = random_policy(&mut rng, 4, 1, 5, 2.0);
        assert_eq!(p.beam_search(0, 1).unwrap(), p.greedy(0).unwrap());
    }
    let p = random_policy(&mut rng, 2, 1, 2, 1.0);
    assert!(matches!(p.beam_search(0, 0), Err(Error::Config(_))));
}

#[test]
fn out_of_vocabulary_and_overlong_captions_are_rejected() {
    let p = PolicyParams::uniform(vocab(2), 1, 2).unwrap();
    let unknown: Caption = "w0 zebra".parse().unwrap();
    assert!(matches!(p.log_prob(0, &unknown), Err(Error::Vocab(_))));
    let long: Caption = "w0 w1 w0".parse().unwrap();
    assert!(p.log_prob(0, &long).is_err());
    assert!(p.log_prob(1, &"w0".parse().unwrap()).is_err());
}

#[test]
fn checkpoint_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let p = random_policy(&mut rng, 5, 3, 4, 2.0);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.ckpt");
    p.save(&path).unwrap();
    let q = PolicyParams::load(&path).unwrap();
    assert_eq!(p, q);
    assert_eq!(p.to_bytes(), q.to_bytes());
    for ctx in 0..3 {
        assert_eq!(p.beam_search(ctx, 3).unwrap(), q.beam_search(ctx, 3).unwrap());
        assert_eq!(p.sample_seeded(ctx, 9).unwrap(), q.sample_seeded(ctx, 9).unwrap());
    }
    assert!(matches!(PolicyParams::load(&dir.path().join("missing.ckpt")), Err(Error::Format { .. })));
    let bytes = p.to_bytes();
    assert!(matches!(PolicyParams::from_bytes(&bytes[..bytes.len() - 3], "cut"), Err(Error::Format { .. })));
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(PolicyParams::from_bytes(&bad, "magic"), Err(Error::Format { .. })));
}

proptest! {
    #[test]
    fn log_prob_gradient_matches_finite_differences(seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_policy(&mut rng, 3, 1, 3, 2.0);
        let space = all_sequences(3, 3);
        let ids = pick.get(&space).clone();
        let (_, g) = p.log_prob(0, &ids_to_caption(&p, &ids)).unwrap();
        let mut analytic = vec![0.0; p.logits().len()];
        g.accumulate_into(&mut analytic, 1.0);
        let numeric = finite_diff(p.logits(), 1e-6, |x| oracle_log_prob(x, 5, 3, 0, &ids));
        prop_assert!(rel_err(&analytic, &numeric) <= 1e-6);
    }

    #[test]
    fn xe_step_is_negated_log_prob(seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_policy(&mut rng, 3, 1, 3, 2.0);
        let space = all_sequences(3, 3);
        let c = ids_to_caption(&p, pick.get(&space));
        let (lp, g) = p.log_prob(0, &c).unwrap();
        let (nll, gx) = p.xe_step(0, &c).unwrap();
        prop_assert_eq!(nll, -lp);
        for (prev, row) in g.rows() {
            for (next, x) in row.iter().enumerate() {
                prop_assert_eq!(gx.get(prev, next), -x);
            }
        }
    }
}
