//! Labelled image sets: the in-memory container, IDX and image-directory
//! readers, and seeded synthetic generators.

mod idx;
mod imagedir;
mod synth;

use std::path::Path;
use std::str::FromStr;

pub use idx::{read_idx_images, read_idx_labels, write_idx_images, write_idx_labels, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use imagedir::load_image_dir;
pub use synth::{synth_dataset, synth_dataset_with_noise, Recipe};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Images `[N, C, H, W]` with values in `[0, 1]` and their class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    images: Tensor,
    labels: Vec<usize>,
    classes: usize,
}

impl Dataset {
    pub fn new(images: Tensor, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if images.rank() != 4 {
            return Err(Error::dim(format!("images must be NCHW, got {:?}", images.shape())));
        }
        if images.shape()[0] != labels.len() {
            return Err(Error::dim(format!(
                "{} images but {} labels",
                images.shape()[0],
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::config(format!("label {bad} out of range for {classes} classes")));
        }
        Ok(Self {
            images,
            labels,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn images(&self) -> &Tensor {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// `[C, H, W]`.
    pub fn sample_shape(&self) -> [usize; 3] {
        let s = self.images.shape();
        [s[1], s[2], s[3]]
    }

    /// Samples at `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            images: self.images.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
        }
    }

    /// `self` followed by `other`; the class count is the larger of the two.
    pub fn concat(&self, other: &Dataset) -> Result<Self> {
        let images = Tensor::concat_rows(&self.images, &other.images)?;
        let labels = self.labels.iter().chain(&other.labels).copied().collect();
        Self::new(images, labels, self.classes.max(other.classes))
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.classes];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }

    /// Block-average downsampling to `size x size`; `size` must divide both sides.
    pub fn downsampled(&self, size: usize) -> Result<Self> {
        let [c, h, w] = self.sample_shape();
        if size == h && size == w {
            return Ok(self.clone());
        }
        if size == 0 || h % size != 0 || w % size != 0 {
            return Err(Error::config(format!("cannot block-average {h}x{w} images to {size}x{size}")));
        }
        let (fh, fw) = (h / size, w / size);
        let norm = (fh * fw) as f64;
        let src = self.images.data();
        let mut out = Vec::with_capacity(self.len() * c * size * size);
        for plane in 0..self.len() * c {
            let base = plane * h * w;
            for i in 0..size {
                for j in 0..size {
                    let mut acc = 0.0;
                    for di in 0..fh {
                        let row = base + (i * fh + di) * w + j * fw;
                        acc += src[row..row + fw].iter().sum::<f64>();
                    }
                    out.push(acc / norm);
                }
            }
        }
        Self::new(
            Tensor::new(vec![self.len(), c, size, size], out)?,
            self.labels.clone(),
            self.classes,
        )
    }
}

/// On-disk dataset layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    /// `<prefix>-images.idx` and `<prefix>-labels.idx`.
    Idx,
    /// One subdirectory per class, named in class order.
    ImageDir,
}

impl FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "idx" => Ok(DataFormat::Idx),
            "image-dir" | "imagedir" => Ok(DataFormat::ImageDir),
            _ => Err(Error::config(format!("unknown dataset format '{s}' (expected idx or image-dir)"))),
        }
    }
}

/// Reads a dataset and brings it to `size x size` when a size is given.
/// Image directories are read as single-channel images.
pub fn load_dataset(path: &Path, format: DataFormat, size: Option<usize>) -> Result<Dataset> {
    match format {
        DataFormat::Idx => {
            let (img, lab) = idx_pair(path);
            let images = read_idx_images(&img)?;
            let labels = read_idx_labels(&lab)?;
            if images.shape()[0] != labels.len() {
                return Err(Error::ingest(
                    &lab,
                    format!("{} labels for {} images", labels.len(), images.shape()[0]),
                ));
            }
            let classes = labels.iter().max().map_or(0, |m| m + 1);
            let ds = Dataset::new(images, labels, classes)?;
            match size {
                Some(s) => ds.downsampled(s),
                None => Ok(ds),
            }
        }
        DataFormat::ImageDir => {
            let s = size.ok_or_else(|| Error::config("image-dir datasets need an input size"))?;
            load_image_dir(path, s, 1)
        }
    }
}

/// Image and label file paths for an IDX prefix.
pub fn idx_pair(prefix: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let p = prefix.to_string_lossy();
    (format!("{p}-images.idx").into(), format!("{p}-labels.idx").into())
}

/// Writes `ds` as an IDX pair under `prefix` (single-channel images only).
pub fn save_idx(ds: &Dataset, prefix: &Path) -> Result<()> {
    let (img, lab) = idx_pair(prefix);
    write_idx_images(&img, ds.images())?;
    write_idx_labels(&lab, ds.labels())
}

/// Quantises to the nearest multiple of 1/255, the precision of 8-bit sources.
pub(crate) fn quantize(v: f64) -> f64 {
    (v.clamp(0.0, 1.0) * 255.0).round() / 255.0
}
