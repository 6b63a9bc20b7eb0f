//! Sentence-level BLEU and ROUGE-L, used by the beam and oracle protocols.

use super::ngram::extract_ngrams;
use super::Caption;

/// F-measure weight for ROUGE-L (recall weighted 1.2x precision).
pub const ROUGE_BETA: f64 = 1.2;

/// Sentence BLEU with uniform weights over orders `1..=n` and brevity penalty.
///
/// Counts are clipped by the maximum count in any single reference. The
/// reference length for the brevity penalty is the one closest to the
/// candidate length (shorter wins ties). No smoothing: any order with zero
/// matches gives 0.
pub fn bleu_n(candidate: &Caption, refs: &[Caption], n: usize) -> f64 {
    if refs.is_empty() || n == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for k in 1..=n {
        let cand = extract_ngrams(candidate, k);
        let total: usize = cand.values().sum();
        if total == 0 {
            return 0.0;
        }
        let ref_grams: Vec<_> = refs.iter().map(|r| extract_ngrams(r, k)).collect();
        let matched: usize = cand
            .iter()
            .map(|(g, &c)| {
                let max_ref = ref_grams
                    .iter()
                    .map(|r| r.get(g).copied().unwrap_or(0))
                    .max()
                    .unwrap_or(0);
                c.min(max_ref)
            })
            .sum();
        if matched == 0 {
            return 0.0;
        }
        log_sum += (matched as f64 / total as f64).ln();
    }
    let c = candidate.len();
    let r = refs
        .iter()
        .map(Caption::len)
        .min_by_key(|&len| (len.abs_diff(c), len))
        .unwrap_or(c);
    let bp = if c >= r {
        1.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    };
    bp * (log_sum / n as f64).exp()
}

/// Length of the longest common subsequence of two token slices.
pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F-measure, taking the best reference.
pub fn rouge_l(candidate: &Caption, refs: &[Caption]) -> f64 {
    let beta2 = ROUGE_BETA * ROUGE_BETA;
    refs.iter()
        .map(|r| {
            let lcs = lcs_len(candidate.tokens(), r.tokens()) as f64;
            if lcs == 0.0 {
                return 0.0;
            }
            let p = lcs / candidate.len() as f64;
            let rec = lcs / r.len() as f64;
            (1.0 + beta2) * p * rec / (rec + beta2 * p)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cap(s: &str) -> Caption {
        s.parse().unwrap()
    }

    #[test]
    fn identical_is_perfect() {
        let c = cap("a man rides a horse");
        assert!((bleu_n(&c, std::slice::from_ref(&c), 4) - 1.0).abs() < 1e-12);
        assert!((rouge_l(&c, std::slice::from_ref(&c)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_is_zero() {
        let c = cap("two cats sleep");
        let r = [cap("a man rides a horse")];
        assert_eq!(bleu_n(&c, &r, 4), 0.0);
        assert_eq!(rouge_l(&c, &r), 0.0);
    }

    #[test]
    fn worked_example() {
        // cand "a b c d", ref "a b d c e".
        // unigram 4/4, bigram {ab} 1/3, trigram 0 -> BLEU-2 only is nonzero.
        let c = cap("a b c d");
        let r = [cap("a b d c e")];
        let bp = (1.0f64 - 5.0 / 4.0).exp();
        let bleu2 = bp * ((1.0f64).ln() / 2.0 + (1.0f64 / 3.0).ln() / 2.0).exp();
        assert!((bleu_n(&c, &r, 2) - bleu2).abs() < 1e-12);
        assert_eq!(bleu_n(&c, &r, 3), 0.0);
        // LCS = 3 ("a b d" or "a b c"); P = 3/4, R = 3/5.
        let (p, rec) = (0.75, 0.6);
        let b2 = 1.44;
        let f = (1.0 + b2) * p * rec / (rec + b2 * p);
        assert!((rouge_l(&c, &r) - f).abs() < 1e-12);
    }

    #[test]
    fn clipping_and_brevity() {
        // "the the the" vs "the cat": clipped unigram precision 1/3.
        let c = cap("the the the");
        let r = [cap("the cat")];
        assert!((bleu_n(&c, &r, 1) - 1.0 / 3.0).abs() < 1e-12);
    }
}
