//! Binary LangID model files.
//!
//! Layout, all integers and floats little-endian:
//! magic `LTLANGID`, u32 version, u32 order count, u32 orders, u32 bucket
//! count, u64 hash seed, u32 language count, per language u32 byte length
//! and UTF-8 bytes, then the row-major f32 weight matrix and the f32 biases.

use std::fs;
use std::path::Path;

use longtail_core::langid::{FeatureSpec, LangIdModel};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"LTLANGID";

pub fn encode(model: &LangIdModel) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + 4 * (model.weights.len() + model.bias.len()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&model.version.to_le_bytes());
    out.extend_from_slice(&(model.spec.ngram_orders.len() as u32).to_le_bytes());
    for o in &model.spec.ngram_orders {
        out.extend_from_slice(&o.to_le_bytes());
    }
    out.extend_from_slice(&model.spec.n_buckets.to_le_bytes());
    out.extend_from_slice(&model.spec.hash_seed.to_le_bytes());
    out.extend_from_slice(&(model.languages.len() as u32).to_le_bytes());
    for l in &model.languages {
        out.extend_from_slice(&(l.len() as u32).to_le_bytes());
        out.extend_from_slice(l.as_bytes());
    }
    for w in model.weights.iter().chain(&model.bias) {
        out.extend_from_slice(&w.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> std::result::Result<Vec<f32>, String> {
        let len = n.checked_mul(4).ok_or("weight count overflows")?;
        Ok(self
            .take(len)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn decode_inner(bytes: &[u8]) -> std::result::Result<LangIdModel, String> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(MAGIC.len())? != MAGIC {
        return Err("bad magic".into());
    }
    let version = c.u32()?;
    if version != LangIdModel::VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let n_orders = c.u32()? as usize;
    let ngram_orders = (0..n_orders)
        .map(|_| c.u32())
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let n_buckets = c.u32()?;
    let hash_seed = c.u64()?;
    let spec = FeatureSpec {
        ngram_orders,
        n_buckets,
        hash_seed,
    };
    spec.validate().map_err(|e| e.to_string())?;
    let n_langs = c.u32()? as usize;
    let mut languages = Vec::new();
    for _ in 0..n_langs {
        let len = c.u32()? as usize;
        let name = std::str::from_utf8(c.take(len)?).map_err(|_| "language name is not UTF-8")?;
        languages.push(name.to_string());
    }
    let weights = c.f32s(n_langs * n_buckets as usize)?;
    let bias = c.f32s(n_langs)?;
    if c.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - c.pos));
    }
    let model = LangIdModel {
        spec,
        languages,
        weights,
        bias,
        version,
    };
    model.validate().map_err(|e| e.to_string())?;
    Ok(model)
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<LangIdModel> {
    decode_inner(bytes).map_err(|message| Error::Model {
        path: path.to_path_buf(),
        message,
    })
}

pub fn save(path: &Path, model: &LangIdModel) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, encode(model)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<LangIdModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}
