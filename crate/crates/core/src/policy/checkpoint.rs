//! Binary checkpoint format, little-endian throughout:
//!
//! ```text
//! magic        8 bytes  "RDPPCKPT"
//! version      u32
//! num_contexts u32
//! max_len      u32
//! num_words    u32
//! words        num_words x (u32 byte length, utf-8 bytes)
//! logits       num_contexts * V * V x f64 bits   (V = num_words + 2)
//! ```

use std::fs;
use std::path::Path;

use super::{PolicyParams, Vocab};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"RDPPCKPT";

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    name: &'a str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::format(self.name, "truncated checkpoint"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

impl PolicyParams {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + self.logits.len() * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.num_contexts as u32).to_le_bytes());
        out.extend_from_slice(&(self.max_len as u32).to_le_bytes());
        out.extend_from_slice(&(self.vocab.num_words() as u32).to_le_bytes());
        for w in self.vocab.words() {
            out.extend_from_slice(&(w.len() as u32).to_le_bytes());
            out.extend_from_slice(w.as_bytes());
        }
        for x in &self.logits {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], name: &str) -> Result<Self> {
        let mut r = Reader {
            buf: bytes,
            pos: 0,
            name,
        };
        if r.take(8)? != MAGIC {
            return Err(Error::format(name, "not a policy checkpoint (bad magic)"));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::format(
                name,
                format!("unsupported checkpoint version {version}"),
            ));
        }
        let num_contexts = r.u32()? as usize;
        let max_len = r.u32()? as usize;
        let num_words = r.u32()? as usize;
        let mut words = Vec::with_capacity(num_words.min(1 << 16));
        for _ in 0..num_words {
            let len = r.u32()? as usize;
            let raw = r.take(len)?;
            let w = std::str::from_utf8(raw)
                .map_err(|_| Error::format(name, "vocabulary word is not utf-8"))?;
            words.push(w.to_string());
        }
        let vocab = Vocab::new(words).map_err(|e| Error::format(name, e.to_string()))?;
        let v = vocab.len();
        let count = num_contexts
            .checked_mul(v * v)
            .ok_or_else(|| Error::format(name, "logit table size overflows"))?;
        if bytes.len() - r.pos != count * 8 {
            return Err(Error::format(
                name,
                format!(
                    "expected {} bytes of logits, found {}",
                    count * 8,
                    bytes.len() - r.pos
                ),
            ));
        }
        let mut logits = Vec::with_capacity(count);
        for _ in 0..count {
            logits.push(r.f64()?);
        }
        PolicyParams::from_parts(vocab, num_contexts, max_len, logits)
            .map_err(|e| Error::format(name, e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Loads a checkpoint; a missing or unreadable file is a format error.
    pub fn load(path: &Path) -> Result<Self> {
        let name = path.display().to_string();
        let bytes = fs::read(path).map_err(|e| Error::format(&name, e.to_string()))?;
        Self::from_bytes(&bytes, &name)
    }
}
