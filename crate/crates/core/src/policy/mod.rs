//! A context-conditioned first-order autoregressive caption model.
//!
//! Each context ("image") owns a table of logits indexed by
//! `[previous token][next token]`. Generation starts from `<bos>`; every step
//! is a softmax over the words plus `<eos>`, except the first step where
//! `<eos>` is masked so captions are never empty. A caption that reaches
//! `max_len` words is terminated without an `<eos>` factor. Under this
//! convention the probabilities of all captions of 1..=max_len words sum to 1.

mod checkpoint;
mod decode;

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metrics::Caption;

pub use checkpoint::CHECKPOINT_VERSION;
pub use decode::ENUMERATION_LIMIT;

pub const BOS: &str = "<bos>";
pub const EOS: &str = "<eos>";
pub(crate) const BOS_ID: usize = 0;
pub(crate) const EOS_ID: usize = 1;

/// Token table: `<bos>`, `<eos>`, then the words in the order given.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn new<I, S>(words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut tokens = vec![BOS.to_string(), EOS.to_string()];
        let mut index = HashMap::new();
        index.insert(BOS.to_string(), BOS_ID);
        index.insert(EOS.to_string(), EOS_ID);
        for w in words {
            let w = w.into();
            // Validates normalization.
            Caption::from_tokens([w.as_str()])?;
            if index.insert(w.clone(), tokens.len()).is_some() {
                return Err(Error::Config(format!("duplicate vocabulary word `{w}`")));
            }
            tokens.push(w);
        }
        if tokens.len() < 3 {
            return Err(Error::Config("vocabulary needs at least one word".into()));
        }
        Ok(Vocab { tokens, index })
    }

    /// Full table size including `<bos>` and `<eos>`.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of emittable words (excludes `<bos>` and `<eos>`).
    pub fn num_words(&self) -> usize {
        self.tokens.len() - 2
    }

    pub fn words(&self) -> &[String] {
        &self.tokens[2..]
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Word ids of `caption`; `<bos>`/`<eos>` and unknown words are rejected.
    pub fn encode(&self, caption: &Caption) -> Result<Vec<usize>> {
        caption
            .tokens()
            .iter()
            .map(|t| match self.id(t) {
                Some(id) if id > EOS_ID => Ok(id),
                _ => Err(Error::Vocab(t.clone())),
            })
            .collect()
    }

    pub(crate) fn decode(&self, ids: &[usize]) -> Caption {
        Caption::from_tokens(ids.iter().map(|&i| self.tokens[i].clone()))
            .expect("policy only emits non-empty word sequences")
    }
}

/// Trainable logits, flat in `[context][prev][next]` order.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    vocab: Vocab,
    num_contexts: usize,
    max_len: usize,
    logits: Vec<f64>,
}

impl PolicyParams {
    /// All-zero logits: every allowed next token is equally likely.
    pub fn uniform(vocab: Vocab, num_contexts: usize, max_len: usize) -> Result<Self> {
        if num_contexts == 0 {
            return Err(Error::Config("policy needs at least one context".into()));
        }
        if max_len == 0 {
            return Err(Error::Config("max_len must be at least 1".into()));
        }
        let v = vocab.len();
        Ok(PolicyParams {
            vocab,
            num_contexts,
            max_len,
            logits: vec![0.0; num_contexts * v * v],
        })
    }

    /// Logits drawn uniformly from `[-scale, scale]`.
    pub fn random(
        vocab: Vocab,
        num_contexts: usize,
        max_len: usize,
        scale: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let mut p = Self::uniform(vocab, num_contexts, max_len)?;
        if scale > 0.0 {
            for x in &mut p.logits {
                *x = rng.random_range(-scale..=scale);
            }
        }
        Ok(p)
    }

    pub(crate) fn from_parts(
        vocab: Vocab,
        num_contexts: usize,
        max_len: usize,
        logits: Vec<f64>,
    ) -> Result<Self> {
        let mut p = Self::uniform(vocab, num_contexts, max_len)?;
        if logits.len() != p.logits.len() {
            return Err(Error::Shape(format!(
                "expected {} logits, got {}",
                p.logits.len(),
                logits.len()
            )));
        }
        if logits.iter().any(|x| !x.is_finite()) {
            return Err(Error::Shape("logits must be finite".into()));
        }
        p.logits = logits;
        Ok(p)
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn num_contexts(&self) -> usize {
        self.num_contexts
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn logits_mut(&mut self) -> &mut [f64] {
        &mut self.logits
    }

    /// Parameters owned by one context.
    pub fn slab_len(&self) -> usize {
        self.vocab.len() * self.vocab.len()
    }

    pub fn slab(&self, context: usize) -> &[f64] {
        let n = self.slab_len();
        &self.logits[context * n..(context + 1) * n]
    }

    pub fn slab_mut(&mut self, context: usize) -> &mut [f64] {
        let n = self.slab_len();
        &mut self.logits[context * n..(context + 1) * n]
    }

    /// Flat index of `logits[context][prev][next]`.
    pub fn index(&self, context: usize, prev: usize, next: usize) -> usize {
        let v = self.vocab.len();
        (context * v + prev) * v + next
    }

    fn check_context(&self, context: usize) -> Result<()> {
        if context >= self.num_contexts {
            return Err(Error::Shape(format!(
                "context {context} out of range (policy has {})",
                self.num_contexts
            )));
        }
        Ok(())
    }

    /// Read-only view of one context's logits.
    pub fn view(&self, context: usize) -> Result<ContextView<'_>> {
        self.check_context(context)?;
        Ok(ContextView {
            vocab: &self.vocab,
            max_len: self.max_len,
            context,
            slab: self.slab(context),
        })
    }

    /// Vocabulary, max length and the mutable per-context slabs, borrowed
    /// together so slabs can be read through a [`ContextView`] and then updated.
    pub fn split_slabs_mut(&mut self) -> (&Vocab, usize, std::slice::ChunksExactMut<'_, f64>) {
        let n = self.slab_len();
        (&self.vocab, self.max_len, self.logits.chunks_exact_mut(n))
    }

    /// Exact log-probability of `caption` under `context`, with its gradient
    /// with respect to the logits.
    pub fn log_prob(&self, context: usize, caption: &Caption) -> Result<(f64, SparseGrad)> {
        self.view(context)?.log_prob(caption)
    }

    /// Negative log-likelihood of `reference` and its gradient (teacher forcing).
    pub fn xe_step(&self, context: usize, reference: &Caption) -> Result<(f64, SparseGrad)> {
        self.view(context)?.xe_step(reference)
    }

    /// Ancestral sample from the per-step softmax.
    pub fn sample(&self, context: usize, rng: &mut impl Rng) -> Result<Rollout> {
        Ok(self.view(context)?.sample(rng))
    }

    /// [`Self::sample`] with a fresh ChaCha8 stream seeded by `seed`.
    pub fn sample_seeded(&self, context: usize, seed: u64) -> Result<Rollout> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample(context, &mut rng)
    }
}

/// The logits of a single context together with what is needed to score
/// and sample from them.
#[derive(Debug, Clone, Copy)]
pub struct ContextView<'a> {
    vocab: &'a Vocab,
    max_len: usize,
    context: usize,
    slab: &'a [f64],
}

impl<'a> ContextView<'a> {
    /// Wraps a slab laid out as `[prev][next]` for `vocab`.
    pub fn new(vocab: &'a Vocab, max_len: usize, context: usize, slab: &'a [f64]) -> Self {
        assert_eq!(slab.len(), vocab.len() * vocab.len(), "slab size");
        ContextView {
            vocab,
            max_len,
            context,
            slab,
        }
    }

    /// Log-softmax over the tokens allowed after `prev`, with `words_so_far`
    /// words already emitted. Disallowed entries are `-inf`.
    pub fn step_log_probs(&self, prev: usize, words_so_far: usize) -> Vec<f64> {
        let v = self.vocab.len();
        let row = &self.slab[prev * v..(prev + 1) * v];
        let mut out = vec![f64::NEG_INFINITY; v];
        let first = words_so_far == 0;
        let allowed = |t: usize| t != BOS_ID && !(first && t == EOS_ID);
        let max = (0..v)
            .filter(|&t| allowed(t))
            .map(|t| row[t])
            .fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for t in (0..v).filter(|&t| allowed(t)) {
            z += (row[t] - max).exp();
        }
        let lse = max + z.ln();
        for t in (0..v).filter(|&t| allowed(t)) {
            out[t] = row[t] - lse;
        }
        out
    }

    pub fn log_prob(&self, caption: &Caption) -> Result<(f64, SparseGrad)> {
        let ids = self.vocab.encode(caption)?;
        if ids.len() > self.max_len {
            return Err(Error::Shape(format!(
                "caption has {} words, policy max_len is {}",
                ids.len(),
                self.max_len
            )));
        }
        let mut grad = SparseGrad::new(self.context, self.vocab.len());
        let mut total = 0.0;
        let mut prev = BOS_ID;
        for (k, &next) in ids.iter().chain(std::iter::once(&EOS_ID)).enumerate() {
            if k == self.max_len {
                break;
            }
            let lp = self.step_log_probs(prev, k);
            total += lp[next];
            grad.add_step(prev, next, &lp);
            prev = next;
        }
        Ok((total, grad))
    }

    pub fn xe_step(&self, reference: &Caption) -> Result<(f64, SparseGrad)> {
        let (lp, mut grad) = self.log_prob(reference)?;
        grad.scale(-1.0);
        Ok((-lp, grad))
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Rollout {
        let mut grad = SparseGrad::new(self.context, self.vocab.len());
        let mut ids = Vec::with_capacity(self.max_len);
        let mut total = 0.0;
        let mut prev = BOS_ID;
        while ids.len() < self.max_len {
            let lp = self.step_log_probs(prev, ids.len());
            let next = draw(&lp, rng);
            total += lp[next];
            grad.add_step(prev, next, &lp);
            if next == EOS_ID {
                break;
            }
            ids.push(next);
            prev = next;
        }
        Rollout {
            caption: self.vocab.decode(&ids),
            log_prob: total,
            grad,
        }
    }
}

fn draw(log_probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (t, lp) in log_probs.iter().enumerate() {
        if lp.is_finite() {
            acc += lp.exp();
            last = t;
            if u < acc {
                return t;
            }
        }
    }
    // Rounding left u above the cumulative sum.
    last
}

/// Gradient of a log-probability with respect to one context's logits,
/// stored per visited `prev` row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGrad {
    context: usize,
    vocab_len: usize,
    rows: BTreeMap<usize, Vec<f64>>,
}

impl SparseGrad {
    pub fn new(context: usize, vocab_len: usize) -> Self {
        SparseGrad {
            context,
            vocab_len,
            rows: BTreeMap::new(),
        }
    }

    fn add_step(&mut self, prev: usize, next: usize, log_probs: &[f64]) {
        let row = self
            .rows
            .entry(prev)
            .or_insert_with(|| vec![0.0; log_probs.len()]);
        for (g, lp) in row.iter_mut().zip(log_probs) {
            if lp.is_finite() {
                *g -= lp.exp();
            }
        }
        row[next] += 1.0;
    }

    pub fn context(&self) -> usize {
        self.context
    }

    pub fn scale(&mut self, factor: f64) {
        for row in self.rows.values_mut() {
            for g in row {
                *g *= factor;
            }
        }
    }

    /// `(prev, d/d logits[context][prev][*])` for every visited row.
    pub fn rows(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.rows.iter().map(|(&p, r)| (p, r.as_slice()))
    }

    /// Adds `factor * self` into a context slab (`[prev][next]` layout).
    pub fn accumulate_into(&self, slab: &mut [f64], factor: f64) {
        let v = self.vocab_len;
        for (&prev, row) in &self.rows {
            for (s, g) in slab[prev * v..(prev + 1) * v].iter_mut().zip(row) {
                *s += factor * g;
            }
        }
    }

    /// Value for `logits[context][prev][next]`; zero when not visited.
    pub fn get(&self, prev: usize, next: usize) -> f64 {
        self.rows.get(&prev).map_or(0.0, |r| r[next])
    }
}

/// One sampled caption with its log-probability and score-function gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub caption: Caption,
    pub log_prob: f64,
    pub grad: SparseGrad,
}
