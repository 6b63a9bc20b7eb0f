//! Evaluation protocols: random-sampling accuracy and diversity, single-caption
//! beam decoding, per-metric oracle over samples, and the leave-one-out
//! human reference score.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{build_doc_freq, RefCorpus, Split};
use crate::error::{Error, Result};
use crate::metrics::{bleu_n, cider_from_profiles, diversity_from_profiles, rouge_l, Caption, DocFreq, TfIdfProfile};
use crate::policy::PolicyParams;
use crate::seed;

pub const REPORT_FORMAT_VERSION: u32 = 1;

const EVAL_STREAM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    RandomSampling,
    Beam,
    Oracle,
    HumanLoo,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::RandomSampling => "random_sampling",
            Protocol::Beam => "beam",
            Protocol::Oracle => "oracle",
            Protocol::HumanLoo => "human_loo",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalParams {
    pub num_samples: Option<usize>,
    pub beam_width: Option<usize>,
    pub seed: Option<u64>,
    pub metrics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub image_id: String,
    /// One value per entry of [`EvalParams::metrics`].
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format_version: u32,
    pub protocol: Protocol,
    pub params: EvalParams,
    pub rows: Vec<EvalRow>,
    /// Column means over `rows`.
    pub aggregate: Vec<f64>,
}

impl EvalReport {
    fn new(protocol: Protocol, params: EvalParams, rows: Vec<EvalRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptySet);
        }
        let k = params.metrics.len();
        let mut aggregate = vec![0.0; k];
        for r in &rows {
            for (a, v) in aggregate.iter_mut().zip(&r.values) {
                *a += v;
            }
        }
        for a in &mut aggregate {
            *a /= rows.len() as f64;
        }
        Ok(EvalReport {
            format_version: REPORT_FORMAT_VERSION,
            protocol,
            params,
            rows,
            aggregate,
        })
    }

    /// Aggregate value of a named metric.
    pub fn metric(&self, name: &str) -> Option<f64> {
        let i = self.column(name)?;
        Some(self.aggregate[i])
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.params.metrics.iter().position(|m| m == name)
    }

    /// Per-image rows followed by an `AGG` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("image_id");
        for m in &self.params.metrics {
            out.push(',');
            out.push_str(m);
        }
        out.push('\n');
        let mut line = |id: &str, values: &[f64]| {
            out.push_str(id);
            for v in values {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        };
        for r in &self.rows {
            line(&r.image_id, &r.values);
        }
        line("AGG", &self.aggregate);
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn from_json(text: &str, source_name: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::format(source_name, e.to_string()))
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        let csv = dir.join(format!("{stem}.csv"));
        fs::write(&csv, self.to_csv()).map_err(|e| Error::io(&csv, e))?;
        let json = dir.join(format!("{stem}.json"));
        fs::write(&json, self.to_json()).map_err(|e| Error::io(&json, e))
    }
}

const SAMPLING_METRICS: [&str; 2] = ["cider", "self_cider"];
const CAPTION_METRICS: [&str; 3] = ["bleu4", "rouge_l", "cider"];

fn names(ms: &[&str]) -> Vec<String> {
    ms.iter().map(|s| s.to_string()).collect()
}

/// Images evaluated by default.
///
/// The toy policy keeps one table per image and cannot generalize to unseen
/// ones, so models are scored on the images they were trained on.
pub fn default_images(corpus: &RefCorpus) -> Vec<usize> {
    let train = corpus.split_indices(Split::Train);
    if train.is_empty() {
        (0..corpus.len()).collect()
    } else {
        train
    }
}

/// Scores policies and references against one corpus.
#[derive(Debug, Clone)]
pub struct Harness<'a> {
    corpus: &'a RefCorpus,
    df: DocFreq,
    ref_profiles: Vec<Vec<TfIdfProfile>>,
    images: Vec<usize>,
}

impl<'a> Harness<'a> {
    pub fn new(corpus: &'a RefCorpus) -> Self {
        let df = build_doc_freq(corpus);
        let ref_profiles = corpus
            .images()
            .iter()
            .map(|img| img.refs.iter().map(|r| df.profile(r)).collect())
            .collect();
        Harness {
            corpus,
            df,
            ref_profiles,
            images: default_images(corpus),
        }
    }

    pub fn with_images(mut self, images: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = images.iter().find(|&&i| i >= self.corpus.len()) {
            return Err(Error::Config(format!("image index {bad} out of range")));
        }
        self.images = images;
        Ok(self)
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn doc_freq(&self) -> &DocFreq {
        &self.df
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

    fn draw(&self, params: &PolicyParams, ctx: usize, n: usize, seed: u64) -> Result<Vec<Caption>> {
        let view = params.view(ctx)?;
        let mut rng = seed::stream(seed, &[EVAL_STREAM, ctx as u64]);
        Ok((0..n).map(|_| view.sample(&mut rng).caption).collect())
    }

    fn caption_scores(&self, ctx: usize, c: &Caption) -> Vec<f64> {
        let refs = &self.corpus.images()[ctx].refs;
        vec![
            bleu_n(c, refs, 4),
            rouge_l(c, refs),
            cider_from_profiles(&self.df.profile(c), &self.ref_profiles[ctx]),
        ]
    }

    fn rows<F>(&self, f: F) -> Result<Vec<EvalRow>>
    where
        F: Fn(usize) -> Result<Option<Vec<f64>>> + Sync,
    {
        let rows: Vec<Option<EvalRow>> = self
            .images
            .par_iter()
            .map(|&ctx| {
                Ok(f(ctx)?.map(|values| EvalRow {
                    image_id: self.corpus.images()[ctx].image_id.clone(),
                    values,
                }))
            })
            .collect::<Result<_>>()?;
        Ok(rows.into_iter().flatten().collect())
    }

    /// Mean CIDEr of `num_samples` sampled captions and their self-CIDEr
    /// diversity, per image.
    pub fn random_sampling(&self, params: &PolicyParams, num_samples: usize, seed: u64) -> Result<EvalReport> {
        self.check_policy(params)?;
        if num_samples < 2 {
            return Err(Error::Config("random sampling needs at least 2 samples".into()));
        }
        let rows = self.rows(|ctx| {
            let profiles: Vec<TfIdfProfile> = self
                .draw(params, ctx, num_samples, seed)?
                .iter()
                .map(|c| self.df.profile(c))
                .collect();
            let acc = profiles
                .iter()
                .map(|p| cider_from_profiles(p, &self.ref_profiles[ctx]))
                .sum::<f64>()
                / num_samples as f64;
            Ok(Some(vec![acc, diversity_from_profiles(&profiles)?]))
        })?;
        EvalReport::new(
            Protocol::RandomSampling,
            EvalParams {
                num_samples: Some(num_samples),
                beam_width: None,
                seed: Some(seed),
                metrics: names(&SAMPLING_METRICS),
            },
            rows,
        )
    }

    /// BLEU-4, ROUGE-L and CIDEr of the beam-search caption.
    pub fn beam(&self, params: &PolicyParams, beam_width: usize) -> Result<EvalReport> {
        self.check_policy(params)?;
        if beam_width == 0 {
            return Err(Error::Config("beam width must be at least 1".into()));
        }
        let rows = self.rows(|ctx| {
            let c = params.beam_search(ctx, beam_width)?;
            Ok(Some(self.caption_scores(ctx, &c)))
        })?;
        EvalReport::new(
            Protocol::Beam,
            EvalParams {
                num_samples: None,
                beam_width: Some(beam_width),
                seed: None,
                metrics: names(&CAPTION_METRICS),
            },
            rows,
        )
    }

    /// Per-metric maximum over `num_samples` sampled captions.
    ///
    /// Samples for a given seed are nested: the first `k` draws are the same
    /// for every `num_samples >= k`.
    pub fn oracle(&self, params: &PolicyParams, num_samples: usize, seed: u64) -> Result<EvalReport> {
        self.check_policy(params)?;
        if num_samples == 0 {
            return Err(Error::Config("oracle needs at least 1 sample".into()));
        }
        let rows = self.rows(|ctx| {
            let mut best = vec![f64::NEG_INFINITY; CAPTION_METRICS.len()];
            for c in self.draw(params, ctx, num_samples, seed)? {
                for (b, v) in best.iter_mut().zip(self.caption_scores(ctx, &c)) {
                    *b = b.max(v);
                }
            }
            Ok(Some(best))
        })?;
        EvalReport::new(
            Protocol::Oracle,
            EvalParams {
                num_samples: Some(num_samples),
                beam_width: None,
                seed: Some(seed),
                metrics: names(&CAPTION_METRICS),
            },
            rows,
        )
    }

    /// Each reference scored by CIDEr against the others, plus the diversity
    /// of the reference set. Images with a single reference are skipped.
    pub fn human_loo(&self) -> Result<EvalReport> {
        let rows = self.rows(|ctx| {
            let profiles = &self.ref_profiles[ctx];
            let k = profiles.len();
            if k < 2 {
                log::warn!(
                    "image {}: single reference, skipped in leave-one-out scoring",
                    self.corpus.images()[ctx].image_id
                );
                return Ok(None);
            }
            let mut acc = 0.0;
            for i in 0..k {
                let others: Vec<TfIdfProfile> = (0..k).filter(|&j| j != i).map(|j| profiles[j].clone()).collect();
                acc += cider_from_profiles(&profiles[i], &others);
            }
            Ok(Some(vec![acc / k as f64, diversity_from_profiles(profiles)?]))
        })?;
        EvalReport::new(
            Protocol::HumanLoo,
            EvalParams {
                num_samples: None,
                beam_width: None,
                seed: None,
                metrics: names(&SAMPLING_METRICS),
            },
            rows,
        )
    }
}

pub fn eval_random_sampling(params: &PolicyParams, corpus: &RefCorpus, num_samples: usize, seed: u64) -> Result<EvalReport> {
    Harness::new(corpus).random_sampling(params, num_samples, seed)
}

pub fn eval_beam(params: &PolicyParams, corpus: &RefCorpus, beam_width: usize) -> Result<EvalReport> {
    Harness::new(corpus).beam(params, beam_width)
}

pub fn eval_oracle(params: &PolicyParams, corpus: &RefCorpus, num_samples: usize, seed: u64) -> Result<EvalReport> {
    Harness::new(corpus).oracle(params, num_samples, seed)
}

pub fn eval_human_loo(corpus: &RefCorpus) -> Result<EvalReport> {
    Harness::new(corpus).human_loo()
}
