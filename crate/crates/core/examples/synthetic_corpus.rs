//! Synthetic reference corpus: generation, the line-delimited format, and
//! the leave-one-out human score as templates per image vary.
//!
//! cargo run --release --example synthetic_corpus

use rdpp::corpus::{generate_synthetic, RefCorpus, SynthSpec};
use rdpp::eval::Harness;

fn main() -> rdpp::Result<()> {
    let corpus = generate_synthetic(&SynthSpec::default())?;
    let img = &corpus.images()[0];
    println!("{} images, {} words; {} ({}):", corpus.len(), corpus.vocabulary().len(), img.image_id, img.split);
    for r in &img.refs {
        println!("  {r}");
    }
    let text = corpus.to_jsonl();
    println!("{}", text.lines().take(2).collect::<Vec<_>>().join("\n"));
    assert_eq!(RefCorpus::from_jsonl(&text, "memory")?, corpus);
    println!("hash {}", corpus.content_hash());

    for templates in [1, 2, 5] {
        let c = generate_synthetic(&SynthSpec { templates_per_image: templates, ..SynthSpec::default() })?;
        let h = Harness::new(&c).human_loo()?;
        println!(
            "templates {templates}: human cider {:.3}  self_cider {:.3}",
            h.metric("cider").unwrap(),
            h.metric("self_cider").unwrap()
        );
    }
    Ok(())
}
