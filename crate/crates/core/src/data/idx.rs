use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Unsigned-byte, three dimensions.
pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
/// Unsigned-byte, one dimension.
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

/// Validates the header and returns `(dims, payload)`.
fn parse<'a>(path: &Path, bytes: &'a [u8], magic: u32) -> Result<(Vec<usize>, &'a [u8])> {
    let ndims = (magic & 0xff) as usize;
    let header = 4 + 4 * ndims;
    if bytes.len() < 4 {
        return Err(Error::ingest(path, "file too short for an IDX header"));
    }
    let found = be_u32(bytes, 0);
    if found != magic {
        return Err(Error::ingest(
            path,
            format!("bad magic {found:#010x}, expected {magic:#010x}"),
        ));
    }
    if bytes.len() < header {
        return Err(Error::ingest(path, "truncated IDX header"));
    }
    let dims: Vec<usize> = (0..ndims).map(|i| be_u32(bytes, 4 + 4 * i) as usize).collect();
    let expected: usize = dims.iter().product();
    let payload = &bytes[header..];
    if payload.len() != expected {
        return Err(Error::ingest(
            path,
            format!("header {dims:?} needs {expected} bytes of data, file has {}", payload.len()),
        ));
    }
    Ok((dims, payload))
}

/// Reads an IDX image file as `[N, 1, H, W]` scaled to `[0, 1]`.
pub fn read_idx_images(path: &Path) -> Result<Tensor> {
    let bytes = fs::read(path).map_err(|e| Error::ingest(path, e.to_string()))?;
    let (dims, payload) = parse(path, &bytes, IDX_IMAGES_MAGIC)?;
    if dims.contains(&0) {
        return Err(Error::ingest(path, format!("empty image set {dims:?}")));
    }
    let data = payload.iter().map(|&b| f64::from(b) / 255.0).collect();
    Tensor::new(vec![dims[0], 1, dims[1], dims[2]], data)
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<usize>> {
    let bytes = fs::read(path).map_err(|e| Error::ingest(path, e.to_string()))?;
    let (_, payload) = parse(path, &bytes, IDX_LABELS_MAGIC)?;
    Ok(payload.iter().map(|&b| usize::from(b)).collect())
}

/// Writes `[N, 1, H, W]` images in `[0, 1]` as unsigned bytes (`round(255 v)`).
pub fn write_idx_images(path: &Path, images: &Tensor) -> Result<()> {
    let s = images.shape();
    if s.len() != 4 || s[1] != 1 {
        return Err(Error::dim(format!("IDX images must be [N, 1, H, W], got {s:?}")));
    }
    let mut out = Vec::with_capacity(16 + images.len());
    out.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    for d in [s[0], s[2], s[3]] {
        let d = u32::try_from(d).map_err(|_| Error::dim("dimension exceeds u32"))?;
        out.extend_from_slice(&d.to_be_bytes());
    }
    for &v in images.data() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::contract(format!("pixel value {v} outside [0, 1]")));
        }
        out.push((v * 255.0).round() as u8);
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_idx_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    let n = u32::try_from(labels.len()).map_err(|_| Error::dim("too many labels"))?;
    out.extend_from_slice(&n.to_be_bytes());
    for &l in labels {
        out.push(u8::try_from(l).map_err(|_| Error::contract(format!("label {l} does not fit a byte")))?);
    }
    fs::write(path, out)?;
    Ok(())
}
