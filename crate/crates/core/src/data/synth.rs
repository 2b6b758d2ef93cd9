use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use super::{quantize, Dataset};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Synthetic single-channel image families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recipe {
    /// Gaussian spots; the class sets how many, evenly spaced on a ring.
    Blobs,
    /// An annulus whose radius depends on the class.
    Rings,
    /// A sinusoidal grating; the class sets its orientation up to mirroring.
    Textures,
}

impl Recipe {
    pub fn as_str(self) -> &'static str {
        match self {
            Recipe::Blobs => "blobs",
            Recipe::Rings => "rings",
            Recipe::Textures => "textures",
        }
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Recipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blobs" => Ok(Recipe::Blobs),
            "rings" => Ok(Recipe::Rings),
            "textures" => Ok(Recipe::Textures),
            _ => Err(Error::config(format!("unknown synthetic recipe '{s}' (expected blobs, rings or textures)"))),
        }
    }
}

/// [`synth_dataset_with_noise`] at noise level 1.
pub fn synth_dataset(recipe: Recipe, n: usize, classes: usize, size: usize, seed: u64) -> Result<Dataset> {
    synth_dataset_with_noise(recipe, n, classes, size, seed, 1.0)
}

/// `n` balanced samples of `size x size` pixels, quantised to 8 bits.
///
/// `noise` scales every random perturbation (position, rotation and radius
/// jitter, grating phase, pixel noise). At 0 all samples of a blobs or rings
/// class are identical and a textures class shows one of two mirror images.
///
/// Blobs and textures labels survive reflections about either axis and
/// centred rescaling, so they stay valid under [`crate::trainer::augment`].
pub fn synth_dataset_with_noise(
    recipe: Recipe,
    n: usize,
    classes: usize,
    size: usize,
    seed: u64,
    noise: f64,
) -> Result<Dataset> {
    if classes < 2 {
        return Err(Error::config("synthetic data needs at least two classes"));
    }
    if n < classes * 10 {
        return Err(Error::config(format!(
            "need at least {} samples for {classes} classes",
            classes * 10
        )));
    }
    if size < 4 {
        return Err(Error::config("synthetic images must be at least 4x4"));
    }
    if !(noise >= 0.0) {
        return Err(Error::config("noise must be non-negative"));
    }
    let mut rng = Rng::new(seed);
    let mut labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    rng.shuffle(&mut labels);
    let plane = size * size;
    let mut data = Vec::with_capacity(n * plane);
    let s = size as f64;
    let mid = (s - 1.0) / 2.0;
    for &c in &labels {
        let mut img = vec![0.0; plane];
        match recipe {
            Recipe::Blobs => {
                // class c: c + 1 spots evenly spaced on a ring (one central spot for c = 0)
                let spots = c + 1;
                let radius = if spots == 1 { 0.0 } else { 0.22 * s };
                let turn = noise * 0.3 * rng.normal();
                let sigma = s / 10.0;
                let centres: Vec<(f64, f64)> = (0..spots)
                    .map(|k| {
                        let a = turn + TAU * k as f64 / spots as f64;
                        (
                            mid + radius * a.cos() + noise * 0.03 * s * rng.normal(),
                            mid + radius * a.sin() + noise * 0.03 * s * rng.normal(),
                        )
                    })
                    .collect();
                let amp = 1.0 - noise * 0.3 * rng.unit();
                for (k, v) in img.iter_mut().enumerate() {
                    let (y, x) = ((k / size) as f64, (k % size) as f64);
                    let peak = centres
                        .iter()
                        .map(|(cx, cy)| (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * sigma * sigma)).exp())
                        .fold(0.0, f64::max);
                    *v = amp * peak;
                }
            }
            Recipe::Rings => {
                let r0 = 0.12 * s + 0.28 * s * c as f64 / (classes - 1) as f64;
                let r = r0 + noise * 0.04 * s * rng.normal();
                let cx = mid + noise * 0.06 * s * rng.normal();
                let cy = mid + noise * 0.06 * s * rng.normal();
                let width = 0.05 * s + 0.5;
                for (k, v) in img.iter_mut().enumerate() {
                    let (y, x) = ((k / size) as f64, (k % size) as f64);
                    let d = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
                    *v = (-(d - r).powi(2) / (2.0 * width * width)).exp();
                }
            }
            Recipe::Textures => {
                // orientations +-theta_c form one class, so mirror images keep their label
                let base = 0.5 * PI * c as f64 / (classes - 1) as f64;
                let sign = if rng.coin() { 1.0 } else { -1.0 };
                let theta = sign * base + noise * 0.12 * rng.normal();
                let period = s / 3.0;
                let phase = noise * TAU * rng.unit();
                let (ct, st) = (theta.cos(), theta.sin());
                for (k, v) in img.iter_mut().enumerate() {
                    let (y, x) = ((k / size) as f64 - mid, (k % size) as f64 - mid);
                    *v = 0.5 + 0.3 * (TAU * (x * ct + y * st) / period + phase).sin();
                }
            }
        }
        let pixel_sd = match recipe {
            Recipe::Textures => 0.3,
            _ => 0.12,
        };
        for v in &mut img {
            *v = quantize(*v + noise * pixel_sd * rng.normal());
        }
        data.extend(img);
    }
    Dataset::new(Tensor::new(vec![n, 1, size, size], data)?, labels, classes)
}
