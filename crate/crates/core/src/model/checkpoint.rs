//! Binary checkpoint: magic `VDPM`, version, a JSON header carrying the
//! model config and token vocabulary, then named f32 tensors. All integers
//! are little-endian u32.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelError, ModelParams};
use crate::vocab::TokenVocab;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"VDPM";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub vocab: TokenVocab,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    vocab: TokenVocab,
}

fn bad(msg: impl Into<String>) -> ModelError {
    ModelError::Checkpoint(msg.into())
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&Header {
            config: self.params.config.clone(),
            vocab: self.vocab.clone(),
        })
        .expect("config serializes");
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        put_u32(&mut out, CHECKPOINT_VERSION as usize);
        put_u32(&mut out, header.len());
        out.extend_from_slice(&header);
        let tensors = self.params.named();
        put_u32(&mut out, tensors.len());
        for (name, m) in tensors {
            put_u32(&mut out, name.len());
            out.extend_from_slice(name.as_bytes());
            put_u32(&mut out, 2);
            put_u32(&mut out, m.rows);
            put_u32(&mut out, m.cols);
            for &v in &m.data {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(bad("bad magic"));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let header_len = r.u32()? as usize;
        let header: Header =
            serde_json::from_slice(r.take(header_len)?).map_err(|e| bad(format!("header: {e}")))?;
        if header.vocab.len() != header.config.vocab_size {
            return Err(bad("vocabulary size disagrees with config"));
        }
        header.config.validate()?;
        let mut params = ModelParams::zeros(&header.config);
        let count = r.u32()? as usize;
        {
            let mut slots = params.named_mut();
            if count != slots.len() {
                return Err(bad(format!(
                    "expected {} tensors, found {count}",
                    slots.len()
                )));
            }
            for (name, m) in slots.iter_mut() {
                let len = r.u32()? as usize;
                let found = std::str::from_utf8(r.take(len)?)
                    .map_err(|_| bad("tensor name is not UTF-8"))?;
                if found != name {
                    return Err(bad(format!("expected tensor {name}, found {found}")));
                }
                let ndim = r.u32()? as usize;
                let dims = (0..ndim)
                    .map(|_| r.u32().map(|d| d as usize))
                    .collect::<Result<Vec<_>, _>>()?;
                if dims != [m.rows, m.cols] {
                    return Err(bad(format!(
                        "tensor {name} has shape {dims:?}, expected [{}, {}]",
                        m.rows, m.cols
                    )));
                }
                for v in m.data.iter_mut() {
                    *v = f32::from_le_bytes(r.take(4)?.try_into().unwrap()) as f64;
                }
            }
        }
        if r.pos != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        Ok(Checkpoint {
            params,
            vocab: header.vocab,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| bad("truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn write_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<(), ModelError> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&ckpt.to_bytes())?;
    Ok(())
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint, ModelError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    Checkpoint::from_bytes(&bytes)
}
