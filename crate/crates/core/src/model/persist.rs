//! Binary model container, all integers and floats little-endian:
//!
//! ```text
//! "SACT"  u32 version  u64 spec_len  spec_text
//! u64 tensor_count
//! per tensor: u64 name_len  name  u64 rank  u64 dims[rank]  f64 data[prod(dims)]
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use super::state::{build_model, LayerParams, ModelState};
use super::ModelSpec;
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const MODEL_MAGIC: [u8; 4] = *b"SACT";
pub const MODEL_VERSION: u32 = 1;

/// Upper bound on any single length field, to fail fast on garbage.
const MAX_LEN: u64 = 1 << 32;

/// Named tensors of a state, in layer order.
fn named_tensors(state: &ModelState) -> Vec<(String, Vec<usize>, &[f64])> {
    let mut out = Vec::new();
    for (i, layer) in state.layers().iter().enumerate() {
        match layer {
            LayerParams::None => {}
            LayerParams::Conv { weight, bias } | LayerParams::Dense { weight, bias } => {
                out.push((format!("layer{i}.weight"), weight.shape().to_vec(), weight.data()));
                out.push((format!("layer{i}.bias"), bias.shape().to_vec(), bias.data()));
            }
            LayerParams::Activation(p) => {
                for q in &p.learnable {
                    out.push((format!("layer{i}.{}", q.name), vec![q.values.len()], q.values.as_slice()));
                }
                for q in &p.fixed {
                    out.push((format!("layer{i}.fixed.{}", q.name), vec![q.values.len()], q.values.as_slice()));
                }
            }
        }
    }
    out
}

pub fn write_model<W: Write>(state: &ModelState, mut w: W) -> Result<()> {
    let spec = state.spec().to_text();
    w.write_all(&MODEL_MAGIC)?;
    w.write_all(&MODEL_VERSION.to_le_bytes())?;
    w.write_all(&(spec.len() as u64).to_le_bytes())?;
    w.write_all(spec.as_bytes())?;
    let tensors = named_tensors(state);
    w.write_all(&(tensors.len() as u64).to_le_bytes())?;
    for (name, dims, data) in tensors {
        w.write_all(&(name.len() as u64).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(dims.len() as u64).to_le_bytes())?;
        for d in dims {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Incompatible(msg.into())
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        ErrorKind::UnexpectedEof => corrupt("file is truncated"),
        _ => Error::Io(e),
    })
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_len<R: Read>(r: &mut R, what: &str) -> Result<usize> {
    let v = read_u64(r)?;
    if v > MAX_LEN {
        return Err(corrupt(format!("implausible {what} {v}")));
    }
    Ok(v as usize)
}

fn read_string<R: Read>(r: &mut R, what: &str) -> Result<String> {
    let n = read_len(r, what)?;
    let mut buf = vec![0u8; n];
    read_exact(r, &mut buf)?;
    String::from_utf8(buf).map_err(|_| corrupt(format!("{what} is not UTF-8")))
}

/// Reads a model. Nothing is returned unless every expected tensor is present
/// with the right shape and the stream holds nothing else.
pub fn read_model<R: Read>(mut r: R) -> Result<ModelState> {
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic)?;
    if magic != MODEL_MAGIC {
        return Err(corrupt(format!("bad magic {magic:02x?}")));
    }
    let mut ver = [0u8; 4];
    read_exact(&mut r, &mut ver)?;
    let version = u32::from_le_bytes(ver);
    if version != MODEL_VERSION {
        return Err(corrupt(format!(
            "format version {version}, this build reads version {MODEL_VERSION}"
        )));
    }
    let spec = ModelSpec::parse(&read_string(&mut r, "spec length")?)?;

    let count = read_len(&mut r, "tensor count")?;
    let mut found: BTreeMap<String, (Vec<usize>, Vec<f64>)> = BTreeMap::new();
    for _ in 0..count {
        let name = read_string(&mut r, "name length")?;
        let rank = read_len(&mut r, "rank")?;
        if rank > 8 {
            return Err(corrupt(format!("tensor {name} has rank {rank}")));
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(read_len(&mut r, "dimension")?);
        }
        let len = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).filter(|&l| l as u64 <= MAX_LEN);
        let len = len.ok_or_else(|| corrupt(format!("tensor {name} is implausibly large")))?;
        let mut bytes = vec![0u8; len * 8];
        read_exact(&mut r, &mut bytes)?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        if found.insert(name.clone(), (dims, data)).is_some() {
            return Err(corrupt(format!("tensor {name} appears twice")));
        }
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(corrupt("trailing bytes after the last tensor"));
    }

    // the skeleton fixes names and shapes; every value is then overwritten
    let mut state = build_model(&spec, &mut Rng::new(0))?;
    let expected: Vec<(String, Vec<usize>)> = named_tensors(&state)
        .into_iter()
        .map(|(n, d, _)| (n, d))
        .collect();
    if expected.len() != found.len() {
        return Err(corrupt(format!(
            "expected {} tensors, file has {}",
            expected.len(),
            found.len()
        )));
    }
    let mut values = Vec::with_capacity(expected.len());
    for (name, dims) in &expected {
        let (fd, data) = found
            .remove(name)
            .ok_or_else(|| corrupt(format!("missing tensor {name}")))?;
        if &fd != dims {
            return Err(corrupt(format!("tensor {name} has shape {fd:?}, expected {dims:?}")));
        }
        values.push(data);
    }
    let mut values = values.into_iter();
    for layer in state.layers_mut() {
        match layer {
            LayerParams::None => {}
            LayerParams::Conv { weight, bias } | LayerParams::Dense { weight, bias } => {
                weight.data_mut().copy_from_slice(&values.next().expect("counted"));
                bias.data_mut().copy_from_slice(&values.next().expect("counted"));
            }
            LayerParams::Activation(p) => {
                for q in p.learnable.iter_mut().chain(p.fixed.iter_mut()) {
                    q.values = values.next().expect("counted");
                }
            }
        }
    }
    Ok(state)
}

pub fn save_model(state: &ModelState, path: impl AsRef<Path>) -> Result<()> {
    let f = File::create(path.as_ref())?;
    write_model(state, BufWriter::new(f))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelState> {
    let f = File::open(path.as_ref())?;
    read_model(BufReader::new(f))
}
