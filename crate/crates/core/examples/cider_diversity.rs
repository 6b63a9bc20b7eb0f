//! CIDEr against references and self-CIDEr diversity of caption sets.
//!
//! cargo run --release --example cider_diversity

use rdpp::metrics::{bleu_n, cider, rouge_l, self_cider_diversity, similarity_matrix, Caption, DocFreq};

fn caps(v: &[&str]) -> Vec<Caption> {
    v.iter().map(|s| s.parse().expect("non-empty caption")).collect()
}

fn main() -> rdpp::Result<()> {
    let horse = caps(&["a man rides a horse on the beach", "a person riding a brown horse", "a rider on a horse near the sea"]);
    let dog = caps(&["a dog runs across the grass", "a brown dog playing in a park"]);
    let df = DocFreq::from_reference_sets([horse.as_slice(), dog.as_slice()]);

    for cand in caps(&["a man riding a horse on the beach", "a horse", "a dog runs on the beach"]) {
        println!(
            "{:<36} cider {:.3}  bleu4 {:.3}  rouge_l {:.3}",
            cand.to_string(),
            cider(&cand, &horse, &df),
            bleu_n(&cand, &horse, 4),
            rouge_l(&cand, &horse)
        );
    }

    let sets = [
        ("identical", caps(&["a man rides a horse", "a man rides a horse", "a man rides a horse"])),
        ("paraphrases", caps(&["a man rides a horse", "a person riding a horse", "a rider on a horse"])),
        ("unrelated", caps(&["a man rides a horse", "a dog runs across the grass", "the sea"])),
    ];
    for (name, set) in &sets {
        let profiles: Vec<_> = set.iter().map(|c| df.profile(c)).collect();
        println!("\n{name}: diversity {:.3}", self_cider_diversity(set, &df)?);
        println!("{:.3}", similarity_matrix(&profiles));
    }
    Ok(())
}
