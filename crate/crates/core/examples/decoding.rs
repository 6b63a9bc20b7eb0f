//! Greedy, beam and exhaustive decoding of a small random policy.
//!
//! cargo run --release --example decoding

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rdpp::policy::{PolicyParams, Vocab};

fn main() -> rdpp::Result<()> {
    let vocab = Vocab::new(["red", "blue", "car", "bike"])?;
    let policy = PolicyParams::random(vocab, 1, 3, 2.0, &mut ChaCha8Rng::seed_from_u64(11))?;
    let all = policy.enumerate_all(0)?;
    println!("{} captions; most probable:", all.len());
    for (c, p) in all.iter().take(5) {
        println!("  {:<16} {p:.4}", c.to_string());
    }
    println!("greedy      {}", policy.greedy(0)?);
    for width in [1, 2, 4, policy.sequence_space_size() as usize] {
        let c = policy.beam_search(0, width)?;
        let (lp, _) = policy.log_prob(0, &c)?;
        println!("beam {width:<6} {:<16} p {:.4}", c.to_string(), lp.exp());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..3 {
        let r = policy.sample(0, &mut rng)?;
        println!("sample      {:<16} p {:.4}", r.caption.to_string(), r.log_prob.exp());
    }
    Ok(())
}
