use std::fs;
use std::path::{Path, PathBuf};

use image::imageops::{self, FilterType};

use super::Dataset;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::ingest(dir, e.to_string()))? {
        let path = entry.map_err(|e| Error::ingest(dir, e.to_string()))?.path();
        let hidden = path
            .file_name()
            .and_then(|n| n.to_str())
            .is_none_or(|n| n.starts_with('.'));
        if !hidden {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Reads `root/<class>/<image>` files. Classes are the subdirectories in
/// name order; every image is converted to `channels` (1 = luma, 3 = RGB),
/// resized to `size x size` with a triangle filter, and scaled to `[0, 1]`.
pub fn load_image_dir(root: &Path, size: usize, channels: usize) -> Result<Dataset> {
    if channels != 1 && channels != 3 {
        return Err(Error::config(format!("channels must be 1 or 3, got {channels}")));
    }
    if size == 0 {
        return Err(Error::config("image size must be positive"));
    }
    let class_dirs: Vec<PathBuf> = sorted_entries(root)?.into_iter().filter(|p| p.is_dir()).collect();
    if class_dirs.len() < 2 {
        return Err(Error::ingest(root, "need at least two class subdirectories"));
    }
    let side = size as u32;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (class, dir) in class_dirs.iter().enumerate() {
        let files: Vec<PathBuf> = sorted_entries(dir)?.into_iter().filter(|p| p.is_file()).collect();
        if files.is_empty() {
            return Err(Error::ingest(dir, "class directory contains no images"));
        }
        for file in files {
            let img = image::open(&file).map_err(|e| Error::ingest(&file, e.to_string()))?;
            if channels == 1 {
                let g = imageops::resize(&img.to_luma8(), side, side, FilterType::Triangle);
                data.extend(g.as_raw().iter().map(|&b| f64::from(b) / 255.0));
            } else {
                let rgb = imageops::resize(&img.to_rgb8(), side, side, FilterType::Triangle);
                let raw = rgb.as_raw();
                for c in 0..3 {
                    data.extend(raw.iter().skip(c).step_by(3).map(|&b| f64::from(b) / 255.0));
                }
            }
            labels.push(class);
        }
    }
    let n = labels.len();
    Dataset::new(
        Tensor::new(vec![n, channels, size, size], data)?,
        labels,
        class_dirs.len(),
    )
}
