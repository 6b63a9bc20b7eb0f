//! XE pretraining once, then SCST and R-DPP refinement from the same
//! checkpoint, scored by random sampling and the 20-sample oracle.
//!
//! cargo run --release --example scst_vs_rdpp -- [seed]

use std::time::Instant;

use rdpp::corpus::{generate_synthetic, SynthSpec};
use rdpp::eval::Harness;
use rdpp::policy::PolicyParams;
use rdpp::reward::RewardMode;
use rdpp::train::{init_policy, TrainConfig, Trainer, DEFAULT_MAX_LEN};

fn main() -> rdpp::Result<()> {
    let seed: u64 = std::env::args().nth(1).map_or(0, |s| s.parse().expect("seed must be an integer"));
    let start = Instant::now();
    let corpus = generate_synthetic(&SynthSpec::default())?;
    let harness = Harness::new(&corpus);
    let base = TrainConfig { seed, ..TrainConfig::desk() };

    let (xe, _) = Trainer::new(&corpus, base.clone())?.train_xe(init_policy(&corpus, DEFAULT_MAX_LEN)?)?;
    let report = |name: &str, p: &PolicyParams| -> rdpp::Result<()> {
        let s = harness.random_sampling(p, 10, seed)?;
        let o = harness.oracle(p, 20, seed)?;
        println!(
            "{name:<10} cider {:.3}  self_cider {:.3}  oracle20 cider {:.3}",
            s.metric("cider").unwrap(),
            s.metric("self_cider").unwrap(),
            o.metric("cider").unwrap()
        );
        Ok(())
    };
    let h = harness.human_loo()?;
    println!("{:<10} cider {:.3}  self_cider {:.3}", "human", h.metric("cider").unwrap(), h.metric("self_cider").unwrap());
    report("xe", &xe)?;

    for (mode, m) in [(RewardMode::Scst, 5), (RewardMode::Rdpp, 2), (RewardMode::Rdpp, 5)] {
        let cfg = TrainConfig { mode, m, ..base.clone() };
        let (p, log) = Trainer::new(&corpus, cfg)?.train_rl(xe.clone())?;
        report(&format!("{mode} m={m}"), &p)?;
        let (first, last) = (&log.records[0], log.last().unwrap());
        println!("{:<10} train cider {:.3} -> {:.3}", "", first.mean_cider, last.mean_cider);
    }
    println!("elapsed {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
