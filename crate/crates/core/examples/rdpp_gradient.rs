//! R-DPP and SCST weights for one sampled set, and the resulting gradient
//! with respect to the policy logits.
//!
//! cargo run --release --example rdpp_gradient

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rdpp::dpp::{DEFAULT_EPS, DEFAULT_SIGN_TOL};
use rdpp::metrics::{Caption, DocFreq};
use rdpp::policy::{PolicyParams, Vocab};
use rdpp::reward::{assemble_ensemble, rdpp_reward, scst_reward};

fn main() -> rdpp::Result<()> {
    let vocab = Vocab::new(["a", "dog", "cat", "runs", "sleeps"])?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let policy = PolicyParams::random(vocab, 1, 3, 1.0, &mut rng)?;
    let refs: Vec<Caption> = vec!["a dog runs".parse()?, "a cat sleeps".parse()?];
    let other: Vec<Caption> = vec!["dog".parse()?];
    let df = DocFreq::from_reference_sets([refs.as_slice(), other.as_slice()]);

    let rollouts: Vec<_> = (0..5).map(|_| policy.sample(0, &mut rng)).collect::<rdpp::Result<_>>()?;
    let captions: Vec<Caption> = rollouts.iter().map(|r| r.caption.clone()).collect();
    let p: Vec<f64> = rollouts.iter().map(|r| r.log_prob.exp()).collect();
    let ens = assemble_ensemble(&captions, &refs, &df, DEFAULT_EPS, DEFAULT_SIGN_TOL)?;
    let rdpp = rdpp_reward(&ens.l, &ens.signs, &p)?;
    let scst = scst_reward(&ens.q, &p, None)?;

    println!("{:<16} {:>8} {:>8} {:>10} {:>10}", "caption", "p", "cider", "w_rdpp", "w_scst");
    for i in 0..captions.len() {
        println!(
            "{:<16} {:>8.4} {:>8.3} {:>10.2e} {:>10.2e}",
            captions[i].to_string(),
            p[i],
            ens.q[i],
            rdpp.weights[i],
            scst.weights[i]
        );
    }
    println!("signs\n{}", ens.signs);
    println!("rdpp reward {:.3e}, scst reward {:.3e}", rdpp.reward, scst.reward);

    let mut grad = vec![0.0; policy.slab_len()];
    for (r, w) in rollouts.iter().zip(&rdpp.weights) {
        r.grad.accumulate_into(&mut grad, *w);
    }
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    println!("|R-DPP gradient| = {norm:.3e} over {} logits", grad.len());
    Ok(())
}
