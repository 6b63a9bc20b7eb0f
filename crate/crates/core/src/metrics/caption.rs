use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A normalized token sequence: lowercase, punctuation-free, at least one token.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Caption {
    tokens: Vec<String>,
}

impl Caption {
    /// Builds a caption from tokens that are already normalized.
    ///
    /// Each token must be non-empty and equal to its own normalization
    /// (see [`tokenize`]); anything else is rejected rather than rewritten.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        if tokens.is_empty() {
            return Err(Error::EmptyCaption);
        }
        for t in &tokens {
            if normalize_word(t).as_deref() != Some(t.as_str()) {
                return Err(Error::format(
                    "caption",
                    format!("token `{t}` is not normalized"),
                ));
            }
        }
        Ok(Caption { tokens })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

impl fmt::Display for Caption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tokens.join(" "))
    }
}

impl TryFrom<Vec<String>> for Caption {
    type Error = Error;

    fn try_from(tokens: Vec<String>) -> Result<Self> {
        Caption::from_tokens(tokens)
    }
}

impl From<Caption> for Vec<String> {
    fn from(c: Caption) -> Self {
        c.tokens
    }
}

impl std::str::FromStr for Caption {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        tokenize(s)
    }
}

/// Lowercases, strips punctuation and splits on whitespace.
///
/// Every character that is not alphanumeric is dropped, except an apostrophe
/// sitting between two alphanumeric characters of the same word (`don't`).
pub fn tokenize(text: &str) -> Result<Caption> {
    let tokens: Vec<String> = text.split_whitespace().filter_map(normalize_word).collect();
    if tokens.is_empty() {
        return Err(Error::EmptyCaption);
    }
    Ok(Caption { tokens })
}

fn normalize_word(word: &str) -> Option<String> {
    let chars: Vec<char> = word.chars().collect();
    let mut out = String::with_capacity(word.len());
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            out.extend(c.to_lowercase());
        } else if c == '\'' {
            let prev = i > 0 && chars[i - 1].is_alphanumeric();
            let next = chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
            if prev && next {
                out.push(c);
            }
        }
    }
    (!out.is_empty()).then_some(out)
}
