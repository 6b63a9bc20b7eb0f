//! Reference corpora: images with human-style reference captions, their
//! line-delimited JSON format, and a synthetic generator.

mod synth;

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::metrics::{tokenize, Caption, DocFreq};

pub use synth::{generate_synthetic, SynthSpec, FUNCTION_WORDS};

/// Version written in the dataset header line.
pub const CORPUS_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    #[default]
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRefs {
    pub image_id: String,
    pub refs: Vec<Caption>,
    pub split: Split,
}

/// Images with their reference captions. Ids are unique and every image
/// has at least one reference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefCorpus {
    images: Vec<ImageRefs>,
}

impl RefCorpus {
    pub fn new(images: Vec<ImageRefs>) -> Result<Self> {
        let mut seen = HashSet::new();
        for img in &images {
            if !seen.insert(img.image_id.as_str()) {
                return Err(Error::format(
                    "corpus",
                    format!("duplicate image id `{}`", img.image_id),
                ));
            }
            if img.refs.is_empty() {
                return Err(Error::format(
                    "corpus",
                    format!("image `{}` has no references", img.image_id),
                ));
            }
        }
        Ok(RefCorpus { images })
    }

    pub fn images(&self) -> &[ImageRefs] {
        &self.images
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Images of one split, in corpus order, with their corpus positions.
    pub fn split_indices(&self, split: Split) -> Vec<usize> {
        (0..self.images.len())
            .filter(|&i| self.images[i].split == split)
            .collect()
    }

    /// Sorted set of every word used by a reference.
    pub fn vocabulary(&self) -> Vec<String> {
        let words: BTreeSet<&String> = self
            .images
            .iter()
            .flat_map(|img| img.refs.iter().flat_map(|c| c.tokens()))
            .collect();
        words.into_iter().cloned().collect()
    }

    /// One JSON object per line: a version header, then one line per image.
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&Header {
            format_version: CORPUS_FORMAT_VERSION,
        })
        .expect("header serializes");
        out.push('\n');
        for img in &self.images {
            let rec = Record {
                image_id: img.image_id.clone(),
                refs: img.refs.iter().map(Caption::to_string).collect(),
                split: Some(img.split),
            };
            out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    /// Parses the line-delimited format. The version header is optional;
    /// `split` defaults to `train`. Errors name the first bad line.
    pub fn from_jsonl(text: &str, source_name: &str) -> Result<Self> {
        let mut images = Vec::new();
        for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| Error::format(source_name, format!("line {lineno}: {msg}"));
            let value: serde_json::Value =
                serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
            if value.get("image_id").is_none() {
                if let Some(v) = value.get("format_version") {
                    if v.as_u64() != Some(u64::from(CORPUS_FORMAT_VERSION)) {
                        return Err(bad(format!("unsupported format_version {v}")));
                    }
                    continue;
                }
            }
            let rec: Record = serde_json::from_value(value).map_err(|e| bad(e.to_string()))?;
            if rec.refs.is_empty() {
                return Err(bad(format!("image `{}` has an empty refs array", rec.image_id)));
            }
            let refs = rec
                .refs
                .iter()
                .map(|r| tokenize(r))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| bad(e.to_string()))?;
            images.push(ImageRefs {
                image_id: rec.image_id,
                refs,
                split: rec.split.unwrap_or_default(),
            });
        }
        RefCorpus::new(images).map_err(|e| match e {
            Error::Format { message, .. } => Error::format(source_name, message),
            other => other,
        })
    }

    /// SHA-256 of the canonical line-delimited serialization, hex encoded.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_jsonl().as_bytes()))
    }
}

#[derive(Serialize)]
struct Header {
    format_version: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    image_id: String,
    refs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<Split>,
}

pub fn load_corpus(path: &Path) -> Result<RefCorpus> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RefCorpus::from_jsonl(&text, &path.display().to_string())
}

pub fn save_corpus(corpus: &RefCorpus, path: &Path) -> Result<()> {
    fs::write(path, corpus.to_jsonl()).map_err(|e| Error::io(path, e))
}

/// Per-image document frequencies over all reference sets of the corpus.
pub fn build_doc_freq(corpus: &RefCorpus) -> DocFreq {
    DocFreq::from_reference_sets(corpus.images.iter().map(|img| img.refs.as_slice()))
}
