//! The four evaluation protocols on a briefly pretrained policy, with the
//! oracle score as the sample budget grows.
//!
//! cargo run --release --example evaluation

use rdpp::corpus::{generate_synthetic, SynthSpec};
use rdpp::eval::Harness;
use rdpp::train::{init_policy, TrainConfig, Trainer, DEFAULT_MAX_LEN};

fn main() -> rdpp::Result<()> {
    let corpus = generate_synthetic(&SynthSpec { num_images: 60, ..SynthSpec::default() })?;
    let cfg = TrainConfig { xe_epochs: 10, ..TrainConfig::desk() };
    let (policy, log) = Trainer::new(&corpus, cfg)?.train_xe(init_policy(&corpus, DEFAULT_MAX_LEN)?)?;
    println!("xe log-likelihood {:.3} -> {:.3}", log.records[0].mean_reward, log.last().unwrap().mean_reward);

    let harness = Harness::new(&corpus);
    let show = |r: &rdpp::eval::EvalReport| {
        let cols: Vec<String> = r.params.metrics.iter().zip(&r.aggregate).map(|(m, v)| format!("{m} {v:.3}")).collect();
        println!("{:<16} {}", r.protocol.to_string(), cols.join("  "));
    };
    show(&harness.human_loo()?);
    show(&harness.random_sampling(&policy, 10, 0)?);
    show(&harness.beam(&policy, 3)?);
    for n in [1, 5, 10, 20] {
        let r = harness.oracle(&policy, n, 0)?;
        print!("n={n:<3} ");
        show(&r);
    }
    Ok(())
}
