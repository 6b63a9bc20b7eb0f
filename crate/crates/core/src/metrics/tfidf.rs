use std::collections::{BTreeMap, BTreeSet};

use super::ngram::{extract_ngrams, NGram, MAX_ORDER};
use super::Caption;

/// Document frequencies of reference n-grams, counted per image.
#[derive(Debug, Clone, PartialEq)]
pub struct DocFreq {
    n_max: usize,
    df: BTreeMap<NGram, usize>,
    num_images: usize,
}

impl DocFreq {
    /// Counts, for every n-gram of order `1..=4`, the number of reference
    /// sets (one per image) in which at least one reference contains it.
    pub fn from_reference_sets<'a, I>(sets: I) -> Self
    where
        I: IntoIterator<Item = &'a [Caption]>,
    {
        let mut df: BTreeMap<NGram, usize> = BTreeMap::new();
        let mut num_images = 0;
        for refs in sets {
            num_images += 1;
            let mut seen: BTreeSet<NGram> = BTreeSet::new();
            for r in refs {
                for n in 1..=MAX_ORDER {
                    seen.extend(extract_ngrams(r, n).into_keys());
                }
            }
            for g in seen {
                *df.entry(g).or_insert(0) += 1;
            }
        }
        DocFreq {
            n_max: MAX_ORDER,
            df,
            num_images,
        }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn num_images(&self) -> usize {
        self.num_images
    }

    /// Document frequency of `gram`; 0 when it never occurs in a reference.
    pub fn get(&self, gram: &[String]) -> usize {
        self.df.get(gram).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.df.len()
    }

    pub fn is_empty(&self) -> bool {
        self.df.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NGram, usize)> {
        self.df.iter().map(|(g, &c)| (g, c))
    }

    /// Natural-log inverse document frequency. Unseen n-grams count as df = 1.
    pub fn idf(&self, gram: &[String]) -> f64 {
        let df = self.get(gram).max(1);
        (self.num_images as f64 / df as f64).ln()
    }

    /// TF-IDF vectors of `caption` for every order, unit-normalized where nonzero.
    pub fn profile(&self, caption: &Caption) -> TfIdfProfile {
        let mut vectors: [BTreeMap<NGram, f64>; MAX_ORDER] = Default::default();
        let mut active = [false; MAX_ORDER];
        for n in 1..=self.n_max {
            let mut v: BTreeMap<NGram, f64> = extract_ngrams(caption, n)
                .into_iter()
                .map(|(g, count)| {
                    let w = count as f64 * self.idf(&g);
                    (g, w)
                })
                .collect();
            let norm = v.values().map(|w| w * w).sum::<f64>().sqrt();
            if norm > 0.0 {
                for w in v.values_mut() {
                    *w /= norm;
                }
                active[n - 1] = true;
            }
            vectors[n - 1] = v;
        }
        TfIdfProfile {
            caption: caption.clone(),
            vectors,
            active,
        }
    }
}

/// Per-order TF-IDF vectors of a single caption.
#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfProfile {
    caption: Caption,
    vectors: [BTreeMap<NGram, f64>; MAX_ORDER],
    active: [bool; MAX_ORDER],
}

impl TfIdfProfile {
    pub fn caption(&self) -> &Caption {
        &self.caption
    }

    /// Vector for order `n` (1-based). Unit norm when [`Self::is_active`] is true.
    pub fn vector(&self, n: usize) -> &BTreeMap<NGram, f64> {
        &self.vectors[n - 1]
    }

    /// Whether the order-`n` vector was nonzero and has been normalized.
    pub fn is_active(&self, n: usize) -> bool {
        self.active[n - 1]
    }

    pub fn unit_norm_flags(&self) -> [bool; MAX_ORDER] {
        self.active
    }

    pub fn active_orders(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    /// Cosine similarity at order `n`; 0 when either vector is zero.
    pub fn cosine(&self, other: &TfIdfProfile, n: usize) -> f64 {
        if !(self.is_active(n) && other.is_active(n)) {
            return 0.0;
        }
        let (a, b) = (self.vector(n), other.vector(n));
        let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
        small
            .iter()
            .filter_map(|(g, w)| large.get(g).map(|v| w * v))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cap(s: &str) -> Caption {
        s.parse().unwrap()
    }

    fn gram(s: &str) -> NGram {
        s.split(' ').map(String::from).collect()
    }

    #[test]
    fn df_counts_images_not_references() {
        let sets = [vec![cap("a b"), cap("a b")], vec![cap("a c")]];
        let df = DocFreq::from_reference_sets(sets.iter().map(Vec::as_slice));
        assert_eq!(df.num_images(), 2);
        assert_eq!(df.get(&gram("a")), 2);
        assert_eq!(df.get(&gram("b")), 1);
        assert_eq!(df.get(&gram("c")), 1);
        assert_eq!(df.get(&gram("a b")), 1);
        assert_eq!(df.get(&gram("zebra")), 0);
    }

    #[test]
    fn single_image_has_zero_idf() {
        let sets = [vec![cap("a b c")]];
        let df = DocFreq::from_reference_sets(sets.iter().map(Vec::as_slice));
        assert_eq!(df.idf(&gram("a")), 0.0);
        assert_eq!(df.idf(&gram("unseen")), 0.0);
        let p = df.profile(&cap("a b c d"));
        assert_eq!(p.unit_norm_flags(), [false; 4]);
    }

    #[test]
    fn profile_vectors_are_unit() {
        let sets = [vec![cap("a b c")], vec![cap("d e f")], vec![cap("a e")]];
        let df = DocFreq::from_reference_sets(sets.iter().map(Vec::as_slice));
        let p = df.profile(&cap("a b e b g"));
        for n in 1..=4 {
            if p.is_active(n) {
                let norm: f64 = p.vector(n).values().map(|w| w * w).sum::<f64>().sqrt();
                assert!((norm - 1.0).abs() < 1e-12);
            }
        }
        assert!(p.is_active(1));
        assert!(!p.is_active(4) || p.caption().len() >= 4);
    }
}
