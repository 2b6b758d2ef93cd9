//! Seeded randomness. Every stochastic step in the crate draws from an [`Rng`]
//! built from an explicit 64-bit seed; parallel work gets child seeds from
//! [`derive_seed`] instead of sharing a generator.

use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Portable seeded generator (ChaCha8, identical streams on every platform).
#[derive(Debug, Clone)]
pub struct Rng {
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        self.inner.random_range(0..n)
    }

    pub fn coin(&mut self) -> bool {
        self.unit() < 0.5
    }

    /// Standard normal draw (Box-Muller).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.unit();
        let u2 = self.unit();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// One component of a derived-seed path.
#[derive(Debug, Clone, Copy)]
pub enum SeedPart<'a> {
    Str(&'a str),
    Int(u64),
}

impl<'a> From<&'a str> for SeedPart<'a> {
    fn from(s: &'a str) -> Self {
        SeedPart::Str(s)
    }
}

impl<'a> From<&'a String> for SeedPart<'a> {
    fn from(s: &'a String) -> Self {
        SeedPart::Str(s)
    }
}

impl From<u64> for SeedPart<'_> {
    fn from(v: u64) -> Self {
        SeedPart::Int(v)
    }
}

impl From<usize> for SeedPart<'_> {
    fn from(v: usize) -> Self {
        SeedPart::Int(v as u64)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for the path `parts` under `master`.
///
/// Stable across runs and platforms: string parts are hashed byte-wise
/// (FNV-1a, length-prefixed so `("ab","c")` and `("a","bc")` differ) and
/// mixed with SplitMix64.
pub fn derive_seed(master: u64, parts: &[SeedPart<'_>]) -> u64 {
    let mut h = splitmix(master);
    for part in parts {
        let v = match *part {
            SeedPart::Int(v) => v ^ 0x5a5a_5a5a_5a5a_5a5a,
            SeedPart::Str(s) => {
                let mut f: u64 = 0xcbf2_9ce4_8422_2325;
                for b in (s.len() as u64).to_le_bytes().iter().chain(s.as_bytes()) {
                    f ^= u64::from(*b);
                    f = f.wrapping_mul(0x0000_0100_0000_01b3);
                }
                f
            }
        };
        h = splitmix(h ^ v);
    }
    h
}

/// `derive_seed(master, &[a.into(), b.into(), ...])`.
#[macro_export]
macro_rules! seed_path {
    ($master:expr $(, $part:expr)* $(,)?) => {
        $crate::rng::derive_seed($master, &[$($crate::rng::SeedPart::from($part)),*])
    };
}
