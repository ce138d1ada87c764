//! Versioned model file: a UTF-8 `key=value` header ended by a blank line,
//! parameter blocks as little-endian `f64`, then a little-endian FNV-1a-64
//! checksum of the parameter bytes.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const FORMAT_MAGIC: &str = "nadekit-model";
pub const FORMAT_VERSION: u32 = 1;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelContainer {
    pub kind: String,
    pub meta: BTreeMap<String, String>,
    pub blocks: Vec<(String, Vec<f64>)>,
}

impl ModelContainer {
    pub fn new(kind: impl Into<String>) -> Self {
        ModelContainer {
            kind: kind.into(),
            meta: BTreeMap::new(),
            blocks: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    pub fn push_block(&mut self, name: &str, data: Vec<f64>) -> &mut Self {
        self.blocks.push((name.to_string(), data));
        self
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.meta
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Format(format!("missing header key `{key}`")))
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T> {
        let v = self.get(key)?;
        v.parse()
            .map_err(|_| Error::Format(format!("invalid value `{v}` for header key `{key}`")))
    }

    pub fn parse_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>> {
        let v = self.get(key)?;
        if v.is_empty() {
            return Ok(Vec::new());
        }
        v.split(',')
            .map(|t| {
                t.parse()
                    .map_err(|_| Error::Format(format!("invalid list entry `{t}` for header key `{key}`")))
            })
            .collect()
    }

    pub fn block(&self, name: &str) -> Result<&[f64]> {
        self.blocks
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, d)| d.as_slice())
            .ok_or_else(|| Error::Format(format!("missing parameter block `{name}`")))
    }

    /// Block `name`, which must hold exactly `len` values.
    pub fn block_len(&self, name: &str, len: usize) -> Result<Vec<f64>> {
        let b = self.block(name)?;
        if b.len() != len {
            return Err(Error::Format(format!(
                "block `{name}` has {} values, expected {len}",
                b.len()
            )));
        }
        Ok(b.to_vec())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut header = format!("{FORMAT_MAGIC}\nversion={FORMAT_VERSION}\nkind={}\n", self.kind);
        let blocks: Vec<String> = self
            .blocks
            .iter()
            .map(|(n, d)| format!("{n}:{}", d.len()))
            .collect();
        header.push_str(&format!("blocks={}\n", blocks.join(",")));
        for (k, v) in &self.meta {
            if matches!(k.as_str(), "version" | "kind" | "blocks") || k.contains(['=', '\n']) || v.contains('\n') {
                return Err(Error::Format(format!("header entry `{k}` cannot be stored")));
            }
            header.push_str(&format!("{k}={v}\n"));
        }
        header.push('\n');
        let mut out = header.into_bytes();
        let start = out.len();
        for (_, d) in &self.blocks {
            for v in d {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let sum = fnv1a64(&out[start..]);
        out.extend_from_slice(&sum.to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let end = bytes
            .windows(2)
            .position(|w| w == b"\n\n")
            .ok_or_else(|| Error::Format("header is not terminated by a blank line".into()))?;
        let header = std::str::from_utf8(&bytes[..end])
            .map_err(|_| Error::Format("header is not UTF-8".into()))?;
        let mut lines = header.lines();
        if lines.next() != Some(FORMAT_MAGIC) {
            return Err(Error::Format("not a model file".into()));
        }
        let mut meta = BTreeMap::new();
        for line in lines {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("malformed header line `{line}`")))?;
            meta.insert(k.to_string(), v.to_string());
        }
        let version = meta.remove("version").unwrap_or_default();
        if version != FORMAT_VERSION.to_string() {
            return Err(Error::Format(format!(
                "unsupported format version `{version}` (expected {FORMAT_VERSION})"
            )));
        }
        let kind = meta
            .remove("kind")
            .ok_or_else(|| Error::Format("missing model kind".into()))?;
        let layout = meta.remove("blocks").unwrap_or_default();
        let mut specs = Vec::new();
        for item in layout.split(',').filter(|s| !s.is_empty()) {
            let (n, l) = item
                .rsplit_once(':')
                .ok_or_else(|| Error::Format(format!("malformed block entry `{item}`")))?;
            let l: usize = l
                .parse()
                .map_err(|_| Error::Format(format!("malformed block length `{l}`")))?;
            specs.push((n.to_string(), l));
        }
        let body = &bytes[end + 2..];
        let total: usize = specs.iter().map(|(_, l)| l * 8).sum();
        if body.len() < total + 8 {
            return Err(Error::Format(format!(
                "truncated file: {} parameter bytes plus checksum expected, {} present",
                total,
                body.len()
            )));
        }
        if body.len() > total + 8 {
            return Err(Error::Format("trailing bytes after checksum".into()));
        }
        let stored = u64::from_le_bytes(body[total..].try_into().expect("8 bytes"));
        if stored != fnv1a64(&body[..total]) {
            return Err(Error::Format("checksum mismatch".into()));
        }
        let mut blocks = Vec::with_capacity(specs.len());
        let mut off = 0;
        for (n, l) in specs {
            let data = body[off..off + 8 * l]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            off += 8 * l;
            blocks.push((n, data));
        }
        Ok(ModelContainer { kind, meta, blocks })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Comma-joined list for header values.
pub fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}
