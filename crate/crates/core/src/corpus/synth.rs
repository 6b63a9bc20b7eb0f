use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ImageRefs, RefCorpus, Split};
use crate::error::{Error, Result};
use crate::metrics::Caption;

/// Glue words shared by every image; they carry almost no IDF weight.
pub const FUNCTION_WORDS: [&str; 8] = ["a", "the", "on", "in", "with", "of", "and", "near"];

const CONTENT_WORDS: [&str; 48] = [
    "man", "woman", "dog", "cat", "horse", "bike", "car", "tree", "ball", "kite", "boat", "train",
    "bird", "table", "pizza", "cake", "street", "beach", "field", "park", "river", "snow", "grass",
    "bench", "rides", "holds", "sits", "runs", "eats", "flies", "stands", "plays", "red", "small",
    "large", "young", "wooden", "green", "white", "old", "child", "sheep", "truck", "plate",
    "phone", "umbrella", "clock", "window",
];

/// Parameters of a synthetic reference corpus.
///
/// An image's templates are captions of alternating content and function
/// words that always end in a content word. The last `shared_words` content
/// words are common to every template of the image; the others are private to
/// one template. A function word is drawn from a small pool fixed by its
/// distance to the end of the caption, so no word can follow itself through
/// any chain of transitions and a first-order policy represents the
/// references exactly. References cycle through the image's templates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub num_images: usize,
    pub vocab_size: usize,
    pub templates_per_image: usize,
    pub refs_per_image: usize,
    pub min_tokens: usize,
    pub max_tokens: usize,
    /// Trailing content words common to all templates of an image.
    pub shared_words: usize,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            num_images: 200,
            vocab_size: 40,
            templates_per_image: 5,
            refs_per_image: 5,
            min_tokens: 4,
            max_tokens: 8,
            shared_words: 1,
            val_fraction: 0.1,
            test_fraction: 0.1,
            seed: 7,
        }
    }
}

const POOL_SIZE: usize = 2;

/// Function words allowed `j` function slots before the end.
fn function_pool(j: usize) -> &'static [&'static str] {
    let k = j % (FUNCTION_WORDS.len() / POOL_SIZE);
    &FUNCTION_WORDS[POOL_SIZE * k..POOL_SIZE * (k + 1)]
}

fn content_slots(len: usize) -> usize {
    len.div_ceil(2)
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("synthetic corpus: {m}")));
        if self.num_images == 0 {
            return fail("num_images must be positive");
        }
        if self.templates_per_image == 0 || self.refs_per_image == 0 {
            return fail("templates_per_image and refs_per_image must be positive");
        }
        if self.min_tokens < 1 || self.min_tokens > self.max_tokens {
            return fail("need 1 <= min_tokens <= max_tokens");
        }
        if self.shared_words > content_slots(self.min_tokens) {
            return fail("shared_words exceeds the content slots of the shortest caption");
        }
        if self.content_vocab_size() < self.content_words_per_image() {
            return fail("vocab_size too small for templates_per_image and max_tokens");
        }
        if !(0.0..1.0).contains(&(self.val_fraction + self.test_fraction)) {
            return fail("val_fraction + test_fraction must be in [0, 1)");
        }
        Ok(())
    }

    pub fn content_vocab_size(&self) -> usize {
        self.vocab_size.saturating_sub(FUNCTION_WORDS.len())
    }

    fn content_words_per_image(&self) -> usize {
        self.shared_words + self.templates_per_image * (content_slots(self.max_tokens) - self.shared_words)
    }

    pub fn content_words(&self) -> Vec<String> {
        (0..self.content_vocab_size())
            .map(|i| match CONTENT_WORDS.get(i) {
                Some(w) => (*w).to_string(),
                None => format!("thing{i}"),
            })
            .collect()
    }
}

fn template(len: usize, shared: &[String], private: &mut impl Iterator<Item = String>, rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut words = Vec::with_capacity(len);
    for from_end in 0..len {
        if from_end % 2 == 0 {
            let slot = from_end / 2;
            words.push(match shared.get(slot) {
                Some(w) => w.clone(),
                None => private.next().expect("validated content budget"),
            });
        } else {
            let pool = function_pool(from_end / 2);
            words.push(pool.choose(rng).expect("non-empty pool").to_string());
        }
    }
    words.reverse();
    words
}

/// Builds a corpus from `spec`; identical specs give identical corpora.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<RefCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let content = spec.content_words();
    let n_val = (spec.num_images as f64 * spec.val_fraction).round() as usize;
    let n_test = (spec.num_images as f64 * spec.test_fraction).round() as usize;
    let n_train = spec.num_images.saturating_sub(n_val + n_test);

    let mut images = Vec::with_capacity(spec.num_images);
    for i in 0..spec.num_images {
        let mut drawn = content
            .choose_multiple(&mut rng, spec.content_words_per_image())
            .cloned()
            .collect::<Vec<_>>()
            .into_iter();
        let shared: Vec<String> = drawn.by_ref().take(spec.shared_words).collect();
        let templates: Vec<Vec<String>> = (0..spec.templates_per_image)
            .map(|_| {
                let len = rng.random_range(spec.min_tokens..=spec.max_tokens);
                template(len, &shared, &mut drawn, &mut rng)
            })
            .collect();
        let refs = (0..spec.refs_per_image)
            .map(|r| Caption::from_tokens(templates[r % templates.len()].clone()))
            .collect::<Result<Vec<_>>>()?;
        let split = if i < n_train {
            Split::Train
        } else if i < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
        images.push(ImageRefs {
            image_id: format!("img{i:05}"),
            refs,
            split,
        });
    }
    RefCorpus::new(images)
}
