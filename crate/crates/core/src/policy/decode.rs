use std::cmp::Ordering;

use super::{ContextView, PolicyParams, BOS_ID, EOS_ID};
use crate::error::{Error, Result};
use crate::metrics::Caption;

/// Largest number of sequences [`PolicyParams::enumerate_all`] will list.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone)]
struct Hypothesis {
    ids: Vec<usize>,
    score: f64,
    done: bool,
}

impl ContextView<'_> {
    fn word_order(&self, a: &[usize], b: &[usize]) -> Ordering {
        let va = &self.vocab;
        a.iter()
            .map(|&i| va.token(i))
            .cmp(b.iter().map(|&i| va.token(i)))
    }

    /// Higher score first, then lexicographic word order.
    fn rank(&self, a: &Hypothesis, b: &Hypothesis) -> Ordering {
        b.score
            .total_cmp(&a.score)
            .then_with(|| self.word_order(&a.ids, &b.ids))
    }

    /// Length-capped beam search over sequence log-probability.
    ///
    /// At every step all expansions of the live beams (finished or not) are
    /// ranked together and the best `beam_width` survive; finished ones leave
    /// the beam. Width 1 is greedy decoding, and a width at least the size of
    /// the sequence space is exact search.
    pub fn beam_search(&self, beam_width: usize) -> Result<Caption> {
        if beam_width == 0 {
            return Err(Error::Config("beam width must be at least 1".into()));
        }
        let mut live = vec![Hypothesis {
            ids: Vec::new(),
            score: 0.0,
            done: false,
        }];
        let mut finished: Vec<Hypothesis> = Vec::new();
        while !live.is_empty() {
            let mut pool = Vec::new();
            for h in &live {
                let prev = h.ids.last().copied().unwrap_or(BOS_ID);
                let lp = self.step_log_probs(prev, h.ids.len());
                for (next, &l) in lp.iter().enumerate() {
                    if !l.is_finite() {
                        continue;
                    }
                    let mut ids = h.ids.clone();
                    let done = if next == EOS_ID {
                        true
                    } else {
                        ids.push(next);
                        ids.len() == self.max_len
                    };
                    pool.push(Hypothesis {
                        ids,
                        score: h.score + l,
                        done,
                    });
                }
            }
            pool.sort_by(|a, b| self.rank(a, b));
            pool.truncate(beam_width);
            live.clear();
            for h in pool {
                if h.done {
                    finished.push(h);
                } else {
                    live.push(h);
                }
            }
        }
        let best = finished
            .into_iter()
            .min_by(|a, b| self.rank(a, b))
            .expect("every beam terminates by max_len");
        Ok(self.vocab.decode(&best.ids))
    }

    /// Step-by-step argmax decoding. Ties prefer `<eos>`, then the smaller word.
    pub fn greedy(&self) -> Caption {
        let mut ids = Vec::new();
        let mut prev = BOS_ID;
        while ids.len() < self.max_len {
            let lp = self.step_log_probs(prev, ids.len());
            let mut best = None::<usize>;
            for t in (0..lp.len()).filter(|&t| lp[t].is_finite()) {
                best = match best {
                    None => Some(t),
                    Some(b) => {
                        let better = lp[t] > lp[b]
                            || (lp[t] == lp[b]
                                && b != EOS_ID
                                && (t == EOS_ID || self.vocab.token(t) < self.vocab.token(b)));
                        Some(if better { t } else { b })
                    }
                };
            }
            let next = best.expect("at least one word is always allowed");
            if next == EOS_ID {
                break;
            }
            ids.push(next);
            prev = next;
        }
        self.vocab.decode(&ids)
    }

    /// Number of distinct captions the policy can emit.
    pub fn sequence_space_size(&self) -> u128 {
        sequence_space_size(self.vocab.num_words(), self.max_len)
    }

    /// Every caption with its exact probability, most probable first
    /// (ties in lexicographic word order).
    pub fn enumerate_all(&self) -> Result<Vec<(Caption, f64)>> {
        let size = self.sequence_space_size();
        if size > ENUMERATION_LIMIT {
            return Err(Error::Capacity {
                what: "caption space",
                size,
                limit: ENUMERATION_LIMIT,
            });
        }
        let mut out: Vec<Hypothesis> = Vec::with_capacity(size as usize);
        let mut stack = vec![Hypothesis {
            ids: Vec::new(),
            score: 0.0,
            done: false,
        }];
        while let Some(h) = stack.pop() {
            let prev = h.ids.last().copied().unwrap_or(BOS_ID);
            let lp = self.step_log_probs(prev, h.ids.len());
            for (next, &l) in lp.iter().enumerate() {
                if !l.is_finite() {
                    continue;
                }
                let score = h.score + l;
                if next == EOS_ID {
                    out.push(Hypothesis {
                        ids: h.ids.clone(),
                        score,
                        done: true,
                    });
                    continue;
                }
                let mut ids = h.ids.clone();
                ids.push(next);
                let done = ids.len() == self.max_len;
                let child = Hypothesis { ids, score, done };
                if done {
                    out.push(child);
                } else {
                    stack.push(child);
                }
            }
        }
        out.sort_by(|a, b| self.rank(a, b));
        Ok(out
            .into_iter()
            .map(|h| (self.vocab.decode(&h.ids), h.score.exp()))
            .collect())
    }
}

impl PolicyParams {
    /// See [`ContextView::beam_search`].
    pub fn beam_search(&self, context: usize, beam_width: usize) -> Result<Caption> {
        self.view(context)?.beam_search(beam_width)
    }

    /// See [`ContextView::greedy`].
    pub fn greedy(&self, context: usize) -> Result<Caption> {
        Ok(self.view(context)?.greedy())
    }

    /// See [`ContextView::enumerate_all`].
    pub fn enumerate_all(&self, context: usize) -> Result<Vec<(Caption, f64)>> {
        self.view(context)?.enumerate_all()
    }

    pub fn sequence_space_size(&self) -> u128 {
        sequence_space_size(self.vocab.num_words(), self.max_len)
    }
}

fn sequence_space_size(num_words: usize, max_len: usize) -> u128 {
    let w = num_words as u128;
    let mut total: u128 = 0;
    let mut layer: u128 = 1;
    for _ in 0..max_len {
        layer = layer.saturating_mul(w);
        total = total.saturating_add(layer);
    }
    total
}
