//! Two-phase training: teacher-forced cross-entropy, then policy-gradient
//! refinement with SCST or R-DPP weights.
//!
//! Each context owns its own slab of logits, so images are updated
//! independently (in parallel) with one Adam state per slab. Random streams
//! are derived per (phase, epoch, image), which keeps runs bit-reproducible.

mod adam;
mod config;
mod log;

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use crate::corpus::{build_doc_freq, RefCorpus, Split};
use crate::dpp::EnsembleMatrices;
use crate::error::{Error, Result};
use crate::metrics::{cider_from_profiles, diversity_from_kernel, similarity_matrix, Caption, DocFreq, TfIdfProfile};
use crate::policy::{ContextView, PolicyParams, Rollout, Vocab};
use crate::reward::{rdpp_reward, scst_reward, RewardBundle, RewardMode};
use crate::seed;

pub use adam::{Adam, AdamConfig};
pub use config::{TrainConfig, DESK_LEARNING_RATE, DESK_XE_LEARNING_RATE};
pub use log::{EpochRecord, TrainLog, TRAIN_LOG_HEADER};

const XE_STREAM: u64 = 1;
const RL_STREAM: u64 = 2;

/// Default generation cap for policies built from a corpus.
pub const DEFAULT_MAX_LEN: usize = 10;

/// Uniform policy with one context per corpus image and the corpus vocabulary.
pub fn init_policy(corpus: &RefCorpus, max_len: usize) -> Result<PolicyParams> {
    let longest = corpus
        .images()
        .iter()
        .flat_map(|i| i.refs.iter().map(Caption::len))
        .max()
        .unwrap_or(0);
    if longest > max_len {
        return Err(Error::Config(format!(
            "max_len {max_len} is shorter than the longest reference ({longest} words)"
        )));
    }
    PolicyParams::uniform(Vocab::new(corpus.vocabulary())?, corpus.len().max(1), max_len)
}

/// What happened in one RL update for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub captions: Vec<Caption>,
    pub log_probs: Vec<f64>,
    pub quality: Vec<f64>,
    /// `None` when the step was skipped after a numerical failure.
    pub bundle: Option<RewardBundle>,
    /// `sum_i w_i grad log p_i` over the context slab (the ascent direction).
    pub gradient: Vec<f64>,
    pub diversity: f64,
    pub log_det: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default)]
struct ImageStats {
    reward: f64,
    mean_cider: f64,
    diversity: f64,
    log_det: Option<f64>,
    skipped: bool,
}

/// Training driver bound to a corpus.
#[derive(Debug, Clone)]
pub struct Trainer<'a> {
    corpus: &'a RefCorpus,
    df: DocFreq,
    ref_profiles: Vec<Vec<TfIdfProfile>>,
    images: Vec<usize>,
    config: TrainConfig,
}

impl<'a> Trainer<'a> {
    /// Trains on the corpus' train split (all images if the split is empty).
    pub fn new(corpus: &'a RefCorpus, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if corpus.is_empty() {
            return Err(Error::Config("cannot train on an empty corpus".into()));
        }
        let df = build_doc_freq(corpus);
        let ref_profiles = corpus
            .images()
            .iter()
            .map(|img| img.refs.iter().map(|r| df.profile(r)).collect())
            .collect();
        let mut images = corpus.split_indices(Split::Train);
        if images.is_empty() {
            images = (0..corpus.len()).collect();
        }
        Ok(Trainer {
            corpus,
            df,
            ref_profiles,
            images,
            config,
        })
    }

    /// Restricts training to the given corpus positions.
    pub fn with_images(mut self, images: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = images.iter().find(|&&i| i >= self.corpus.len()) {
            return Err(Error::Config(format!("image index {bad} out of range")));
        }
        self.images = images;
        Ok(self)
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn doc_freq(&self) -> &DocFreq {
        &self.df
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    fn check_policy(&self, params: &PolicyParams) -> Result<()> {
        if params.num_contexts() != self.corpus.len() {
            return Err(Error::Config(format!(
                "policy has {} contexts but the corpus has {} images",
                params.num_contexts(),
                self.corpus.len()
            )));
        }
        Ok(())
    }

    /// Runs `per_image` on every training image's slab in parallel; results
    /// come back in image order.
    fn for_each_image<T, F>(&self, params: &mut PolicyParams, adams: &mut [Adam], per_image: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize, &Vocab, usize, &mut [f64], &mut Adam) -> Result<T> + Sync,
    {
        let (vocab, max_len, slabs) = params.split_slabs_mut();
        let mut slots: Vec<Option<&mut [f64]>> = slabs.map(Some).collect();
        let mut work: Vec<(usize, &mut [f64], &mut Adam)> = Vec::with_capacity(self.images.len());
        for (&ctx, adam) in self.images.iter().zip(adams.iter_mut()) {
            let slab = slots[ctx]
                .take()
                .ok_or_else(|| Error::Config(format!("image {ctx} listed twice")))?;
            work.push((ctx, slab, adam));
        }
        work.into_par_iter()
            .map(|(ctx, slab, adam)| per_image(ctx, vocab, max_len, slab, adam))
            .collect()
    }

    fn new_adams(&self, params: &PolicyParams, xe: bool) -> Vec<Adam> {
        (0..self.images.len())
            .map(|_| Adam::new(params.slab_len(), self.config.adam(xe)))
            .collect()
    }

    /// Teacher-forced cross-entropy on every reference, one Adam step each.
    pub fn train_xe(&self, mut params: PolicyParams) -> Result<(PolicyParams, TrainLog)> {
        self.check_policy(&params)?;
        let mut adams = self.new_adams(&params, true);
        let mut log = TrainLog::default();
        for epoch in 0..self.config.xe_epochs {
            let start = Instant::now();
            let stats = self.for_each_image(&mut params, &mut adams, |ctx, vocab, max_len, slab, adam| {
                self.xe_image(epoch, ctx, vocab, max_len, slab, adam)
            })?;
            log.records.push(self.summarize(epoch, "xe", &stats, start));
        }
        Ok((params, log))
    }

    fn xe_image(
        &self,
        epoch: usize,
        ctx: usize,
        vocab: &Vocab,
        max_len: usize,
        slab: &mut [f64],
        adam: &mut Adam,
    ) -> Result<ImageStats> {
        let refs = &self.corpus.images()[ctx].refs;
        let mut grad = vec![0.0; slab.len()];
        let mut log_lik = 0.0;
        for r in refs {
            let (loss, g) = ContextView::new(vocab, max_len, ctx, slab).xe_step(r)?;
            grad.fill(0.0);
            g.accumulate_into(&mut grad, 1.0);
            adam.step(slab, &grad);
            log_lik -= loss;
        }
        let view = ContextView::new(vocab, max_len, ctx, slab);
        let mut rng = seed::stream(self.config.seed, &[XE_STREAM, epoch as u64, ctx as u64]);
        let rollouts: Vec<Rollout> = (0..self.config.m).map(|_| view.sample(&mut rng)).collect();
        let (quality, kernel) = self.score(ctx, &rollouts);
        Ok(ImageStats {
            reward: log_lik / refs.len() as f64,
            mean_cider: mean(&quality),
            diversity: diversity_from_kernel(&kernel),
            log_det: None,
            skipped: false,
        })
    }

    fn score(&self, ctx: usize, rollouts: &[Rollout]) -> (Vec<f64>, nalgebra::DMatrix<f64>) {
        let profiles: Vec<TfIdfProfile> = rollouts.iter().map(|r| self.df.profile(&r.caption)).collect();
        let quality = profiles
            .iter()
            .map(|p| cider_from_profiles(p, &self.ref_profiles[ctx]))
            .collect();
        (quality, similarity_matrix(&profiles))
    }

    /// Policy-gradient refinement with the configured reward.
    pub fn train_rl(&self, mut params: PolicyParams) -> Result<(PolicyParams, TrainLog)> {
        self.check_policy(&params)?;
        let mut adams = self.new_adams(&params, false);
        let mut log = TrainLog::default();
        let mode = self.config.mode.to_string();
        for epoch in 0..self.config.rl_epochs {
            let start = Instant::now();
            let stats = self.for_each_image(&mut params, &mut adams, |ctx, vocab, max_len, slab, adam| {
                let mut rng = seed::stream(self.config.seed, &[RL_STREAM, epoch as u64, ctx as u64]);
                let report = self.rl_step_slab(ctx, vocab, max_len, slab, adam, &mut rng)?;
                Ok(ImageStats {
                    reward: report.bundle.as_ref().map_or(0.0, |b| b.reward),
                    mean_cider: mean(&report.quality),
                    diversity: report.diversity,
                    log_det: report.log_det,
                    skipped: report.bundle.is_none(),
                })
            })?;
            log.records.push(self.summarize(epoch, &mode, &stats, start));
        }
        Ok((params, log))
    }

    /// One RL update of a single context: sample `m` captions, build the
    /// reward bundle, and ascend `sum_i w_i grad log p_i` with `adam`.
    pub fn rl_step(
        &self,
        params: &mut PolicyParams,
        adam: &mut Adam,
        context: usize,
        rng: &mut impl Rng,
    ) -> Result<StepReport> {
        self.check_policy(params)?;
        params.view(context)?;
        let (vocab, max_len, slabs) = params.split_slabs_mut();
        let slab = slabs.into_iter().nth(context).expect("context checked");
        self.rl_step_slab(context, vocab, max_len, slab, adam, rng)
    }

    fn rl_step_slab(
        &self,
        ctx: usize,
        vocab: &Vocab,
        max_len: usize,
        slab: &mut [f64],
        adam: &mut Adam,
        rng: &mut impl Rng,
    ) -> Result<StepReport> {
        let cfg = &self.config;
        let view = ContextView::new(vocab, max_len, ctx, slab);
        let rollouts: Vec<Rollout> = (0..cfg.m).map(|_| view.sample(rng)).collect();
        let (quality, kernel) = self.score(ctx, &rollouts);
        let probs: Vec<f64> = rollouts.iter().map(|r| r.log_prob.exp()).collect();
        let diversity = diversity_from_kernel(&kernel);

        let ensemble = EnsembleMatrices::new(quality.clone(), kernel, cfg.eps, cfg.tol);
        let log_det = ensemble.as_ref().ok().and_then(|e| e.log_det().ok());
        let bundle = match cfg.mode {
            RewardMode::Scst => {
                let baseline = cfg.scst_baseline.then(|| {
                    let greedy = self.df.profile(&view.greedy());
                    cider_from_profiles(&greedy, &self.ref_profiles[ctx])
                });
                Some(scst_reward(&quality, &probs, baseline)?)
            }
            RewardMode::Rdpp => match &ensemble {
                Ok(e) => Some(rdpp_reward(&e.l, &e.signs, &probs)?),
                Err(err) => {
                    ::log::warn!("image {ctx}: skipping R-DPP step: {err}");
                    None
                }
            },
        };

        let mut gradient = vec![0.0; slab.len()];
        if let Some(b) = &bundle {
            for (r, w) in rollouts.iter().zip(&b.weights) {
                r.grad.accumulate_into(&mut gradient, *w);
            }
            let descent: Vec<f64> = gradient.iter().map(|g| -g).collect();
            adam.step(slab, &descent);
        }
        Ok(StepReport {
            captions: rollouts.iter().map(|r| r.caption.clone()).collect(),
            log_probs: rollouts.iter().map(|r| r.log_prob).collect(),
            quality,
            bundle,
            gradient,
            diversity,
            log_det,
        })
    }

    fn summarize(&self, epoch: usize, mode: &str, stats: &[ImageStats], start: Instant) -> EpochRecord {
        let used: Vec<&ImageStats> = stats.iter().filter(|s| !s.skipped).collect();
        let n = used.len().max(1) as f64;
        let log_dets: Vec<f64> = stats.iter().filter_map(|s| s.log_det).collect();
        EpochRecord {
            epoch,
            mode: mode.to_string(),
            m: self.config.m,
            mean_reward: used.iter().map(|s| s.reward).sum::<f64>() / n,
            mean_cider: used.iter().map(|s| s.mean_cider).sum::<f64>() / n,
            self_cider: used.iter().map(|s| s.diversity).sum::<f64>() / n,
            mean_log_det: (!log_dets.is_empty()).then(|| mean(&log_dets)),
            skipped: stats.len() - used.len(),
            seconds: start.elapsed().as_secs_f64(),
        }
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// [`Trainer::train_xe`] on the corpus' train split.
pub fn train_xe(params: PolicyParams, corpus: &RefCorpus, config: &TrainConfig) -> Result<(PolicyParams, TrainLog)> {
    Trainer::new(corpus, config.clone())?.train_xe(params)
}

/// [`Trainer::train_rl`] on the corpus' train split.
pub fn train_rl(params: PolicyParams, corpus: &RefCorpus, config: &TrainConfig) -> Result<(PolicyParams, TrainLog)> {
    Trainer::new(corpus, config.clone())?.train_rl(params)
}
