//! Binary checkpoints: `HOICKPT1` magic, u32 version, u32 meta length, JSON metadata,
//! u32 block count, then named blocks (u32 name length, name, u32 rank, u32 dims, f32 data).
//! Every integer and float is little-endian.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{DualEncoder, ModelError, Vocab};
use crate::Scalar;

const MAGIC: &[u8; 8] = b"HOICKPT1";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Meta {
    alpha: f64,
    tau: f64,
    vocab: Vec<String>,
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_block<T: Scalar>(out: &mut Vec<u8>, name: &str, dims: &[usize], data: impl Iterator<Item = T>) {
    put_u32(out, name.len() as u32);
    out.extend_from_slice(name.as_bytes());
    put_u32(out, dims.len() as u32);
    for &d in dims {
        put_u32(out, d as u32);
    }
    for x in data {
        out.extend_from_slice(&(x.as_f64() as f32).to_le_bytes());
    }
}

/// Serialise an encoder. Parameters are stored as f32 whatever `T` is.
pub fn encode_checkpoint<T: Scalar>(enc: &DualEncoder<T>) -> Vec<u8> {
    let meta = Meta { alpha: enc.alpha.as_f64(), tau: enc.tau.as_f64(), vocab: enc.vocab.words().to_vec() };
    let meta = serde_json::to_vec(&meta).expect("metadata serialises");
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, CHECKPOINT_VERSION);
    put_u32(&mut out, meta.len() as u32);
    out.extend_from_slice(&meta);
    put_u32(&mut out, 5);
    for (name, m) in [("w0", &enc.w0), ("a", &enc.a), ("bm", &enc.bm), ("word_emb", &enc.word_emb)] {
        put_block(&mut out, name, &[m.nrows(), m.ncols()], m.iter().copied());
    }
    put_block(&mut out, "unk", &[enc.unk.len()], enc.unk.iter().copied());
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    at: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], ModelError> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| ModelError::Checkpoint("truncated file".into()))?;
        let s = &self.buf[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

struct Block {
    name: String,
    dims: Vec<usize>,
    data: Vec<f32>,
}

fn read_block(c: &mut Cursor<'_>) -> Result<Block, ModelError> {
    let n = c.u32()? as usize;
    let name = String::from_utf8(c.take(n)?.to_vec()).map_err(|_| ModelError::Checkpoint("block name".into()))?;
    let rank = c.u32()? as usize;
    if rank == 0 || rank > 2 {
        return Err(ModelError::Checkpoint(format!("block {name} has rank {rank}")));
    }
    let dims = (0..rank).map(|_| c.u32().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
    let len: usize = dims.iter().product();
    let raw = c.take(len.checked_mul(4).ok_or_else(|| ModelError::Checkpoint("block too large".into()))?)?;
    let data = raw.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes"))).collect();
    Ok(Block { name, dims, data })
}

pub fn decode_checkpoint<T: Scalar>(buf: &[u8]) -> Result<DualEncoder<T>, ModelError> {
    let mut c = Cursor { buf, at: 0 };
    if c.take(8)? != MAGIC {
        return Err(ModelError::Checkpoint("bad magic".into()));
    }
    let version = c.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(ModelError::Checkpoint(format!("unsupported version {version}")));
    }
    let meta_len = c.u32()? as usize;
    let meta: Meta =
        serde_json::from_slice(c.take(meta_len)?).map_err(|e| ModelError::Checkpoint(format!("metadata: {e}")))?;
    let count = c.u32()?;
    let mut blocks = std::collections::HashMap::new();
    for _ in 0..count {
        let b = read_block(&mut c)?;
        blocks.insert(b.name.clone(), b);
    }
    if c.at != buf.len() {
        return Err(ModelError::Checkpoint("trailing bytes".into()));
    }
    let mut mat = |name: &str| -> Result<Array2<T>, ModelError> {
        let b = blocks.remove(name).ok_or_else(|| ModelError::Checkpoint(format!("missing block {name}")))?;
        if b.dims.len() != 2 {
            return Err(ModelError::Checkpoint(format!("block {name} must be a matrix")));
        }
        Ok(Array2::from_shape_vec((b.dims[0], b.dims[1]), b.data.into_iter().map(|x| T::of(x as f64)).collect())
            .expect("length checked by reader"))
    };
    let w0 = mat("w0")?;
    let a = mat("a")?;
    let bm = mat("bm")?;
    let word_emb = mat("word_emb")?;
    let unk = blocks.remove("unk").ok_or_else(|| ModelError::Checkpoint("missing block unk".into()))?;
    let unk = Array1::from_iter(unk.data.into_iter().map(|x| T::of(x as f64)));
    let vocab = Vocab::from_words(meta.vocab.iter().cloned());
    let d = w0.nrows();
    let consistent = a.ncols() == w0.ncols()
        && bm.nrows() == d
        && bm.ncols() == a.nrows()
        && word_emb.ncols() == d
        && word_emb.nrows() == vocab.len()
        && vocab.len() == meta.vocab.len()
        && unk.len() == d;
    if !consistent {
        return Err(ModelError::Checkpoint("inconsistent block shapes".into()));
    }
    Ok(DualEncoder { w0, a, bm, alpha: T::of(meta.alpha), word_emb, unk, vocab, tau: T::of(meta.tau) })
}

pub fn save_checkpoint<T: Scalar>(enc: &DualEncoder<T>, path: &Path) -> Result<(), ModelError> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode_checkpoint(enc))?;
    Ok(())
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<DualEncoder<T>, ModelError> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    decode_checkpoint(&buf)
}

/// FNV-1a over the little-endian f32 bytes of a matrix; used to show frozen weights are untouched.
pub fn checksum<T: Scalar>(m: &Array2<T>) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for x in m.iter() {
        for b in (x.as_f64() as f32).to_le_bytes().iter().chain(&x.as_f64().to_le_bytes()) {
            h ^= *b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    fn enc() -> DualEncoder<f32> {
        let cfg = ModelConfig { dim: 4, rank: 2, alpha: 2.0, tau: 0.05 };
        DualEncoder::init(&cfg, 3, Vocab::from_texts(["#C C cuts the onion"]), 5).unwrap()
    }

    #[test]
    fn round_trip_is_exact_for_f32() {
        let e = enc();
        let bytes = encode_checkpoint(&e);
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
        let back: DualEncoder<f32> = decode_checkpoint(&bytes).unwrap();
        assert_eq!(back, e);
        assert_eq!(encode_checkpoint(&back), bytes);
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let bytes = encode_checkpoint(&enc());
        assert!(decode_checkpoint::<f32>(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_checkpoint::<f32>(&bad).is_err());
        let mut long = bytes;
        long.push(0);
        assert!(decode_checkpoint::<f32>(&long).is_err());
    }

    #[test]
    fn checksum_sees_single_bit() {
        let e = enc();
        let mut w = e.w0.clone();
        assert_eq!(checksum(&w), checksum(&e.w0));
        w[[0, 0]] = f32::from_bits(w[[0, 0]].to_bits() ^ 1);
        assert_ne!(checksum(&w), checksum(&e.w0));
    }
}
