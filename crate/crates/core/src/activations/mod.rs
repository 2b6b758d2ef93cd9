//! The activation-function zoo.
//!
//! Every kind provides a forward map, its analytic derivative with respect to
//! the input, and analytic derivatives with respect to its learnable
//! parameters. Learnable parameters are either one value per channel
//! (PReLU, SReLU, APLU, MeLU, GaLU, PDELU) or a single scalar per layer
//! (Swish, Mish, SRS, Soft Learnable).
//!
//! | kind              | learnable                 | fixed              |
//! |-------------------|---------------------------|--------------------|
//! | `relu`            |                           |                    |
//! | `leaky_relu`      |                           | `a = 0.01`         |
//! | `elu`             |                           | `a = 1`            |
//! | `prelu`           | `a` per channel           |                    |
//! | `srelu`           | `t_left a_left t_right a_right` per channel | |
//! | `aplu`            | `a b` per channel per hinge | `hinges = 3`     |
//! | `melu_k4/k8`      | `c` (k per channel)       | hat table          |
//! | `galu_k4/k2`      | `c` (k per channel)       | hat table          |
//! | `pdelu`           | `a` per channel           | `t = 0.9`          |
//! | `swish`           |                           | `beta = 1`         |
//! | `swish_learnable` | `beta`                    |                    |
//! | `mish_learnable`  | `alpha`                   |                    |
//! | `srs`             | `alpha beta`              |                    |
//! | `soft_learnable`  | `alpha`                   | `beta = 1`         |
//! | `soft_learnable2` | `alpha beta`              |                    |

mod hats;
pub mod suite;

use std::fmt;
use std::str::FromStr;

pub use hats::{gaussian_hat, mexican_hat, HAT_TABLE};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Slope of Leaky ReLU on the negative side.
pub const LEAKY_SLOPE: f64 = 0.01;
/// ELU saturation scale.
pub const ELU_SCALE: f64 = 1.0;
/// PDELU deformation.
pub const PDELU_T: f64 = 0.9;
/// Hinges per channel in APLU.
pub const APLU_HINGES: usize = 3;
/// L2 penalty weight on APLU slopes.
pub const APLU_PENALTY: f64 = 1e-3;
/// Lower bound for parameters that must stay positive (SRS, Soft Learnable).
pub const POSITIVE_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActivationKind {
    Relu,
    LeakyRelu,
    Elu,
    Prelu,
    Srelu,
    Aplu,
    /// MeLU with four coefficients.
    MeluK4,
    /// Wider MeLU, eight coefficients.
    MeluK8,
    GaluK4,
    /// Smaller GaLU, two coefficients.
    GaluK2,
    Pdelu,
    SwishFixed,
    SwishLearnable,
    MishLearnable,
    Srs,
    /// Soft Learnable with fixed `beta`.
    SoftLearnable,
    /// Soft Learnable with learnable `beta`.
    SoftLearnable2,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 17] = [
        Self::Relu,
        Self::LeakyRelu,
        Self::Elu,
        Self::Prelu,
        Self::Srelu,
        Self::Aplu,
        Self::MeluK4,
        Self::MeluK8,
        Self::GaluK4,
        Self::GaluK2,
        Self::Pdelu,
        Self::SwishFixed,
        Self::SwishLearnable,
        Self::MishLearnable,
        Self::Srs,
        Self::SoftLearnable,
        Self::SoftLearnable2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Relu => "relu",
            Self::LeakyRelu => "leaky_relu",
            Self::Elu => "elu",
            Self::Prelu => "prelu",
            Self::Srelu => "srelu",
            Self::Aplu => "aplu",
            Self::MeluK4 => "melu_k4",
            Self::MeluK8 => "melu_k8",
            Self::GaluK4 => "galu_k4",
            Self::GaluK2 => "galu_k2",
            Self::Pdelu => "pdelu",
            Self::SwishFixed => "swish",
            Self::SwishLearnable => "swish_learnable",
            Self::MishLearnable => "mish_learnable",
            Self::Srs => "srs",
            Self::SoftLearnable => "soft_learnable",
            Self::SoftLearnable2 => "soft_learnable2",
        }
    }

    /// Kinds whose shape is scaled by `maxInput`.
    pub fn uses_max_input(self) -> bool {
        matches!(
            self,
            Self::Srelu | Self::Aplu | Self::MeluK4 | Self::MeluK8 | Self::GaluK4 | Self::GaluK2
        )
    }

    /// Kinds with one parameter set per channel.
    pub fn per_channel(self) -> bool {
        matches!(
            self,
            Self::Prelu
                | Self::Srelu
                | Self::Aplu
                | Self::MeluK4
                | Self::MeluK8
                | Self::GaluK4
                | Self::GaluK2
                | Self::Pdelu
        )
    }

    pub fn is_learnable(self) -> bool {
        !matches!(
            self,
            Self::Relu | Self::LeakyRelu | Self::Elu | Self::SwishFixed
        )
    }

    /// Total coefficient count `k` for MeLU/GaLU (PReLU slope plus `k - 1` hats).
    fn hat_coefficients(self) -> Option<usize> {
        match self {
            Self::MeluK4 | Self::GaluK4 => Some(4),
            Self::MeluK8 => Some(8),
            Self::GaluK2 => Some(2),
            _ => None,
        }
    }

    fn is_galu(self) -> bool {
        matches!(self, Self::GaluK4 | Self::GaluK2)
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown activation kind '{s}'")))
    }
}

/// A kind together with its `maxInput`, e.g. `melu_k8_255`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivationId {
    pub kind: ActivationKind,
    pub max_input: f64,
}

impl ActivationId {
    pub fn new(kind: ActivationKind, max_input: f64) -> Self {
        Self { kind, max_input }
    }
}

impl fmt::Display for ActivationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.max_input == 1.0 {
            write!(f, "{}", self.kind)
        } else {
            write!(f, "{}_{}", self.kind, self.max_input)
        }
    }
}

impl FromStr for ActivationId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(base) = s.strip_suffix("_255") {
            return Ok(Self::new(base.parse()?, 255.0));
        }
        Ok(Self::new(s.parse()?, 1.0))
    }
}

pub fn check_max_input(max_input: f64) -> Result<()> {
    if max_input == 1.0 || max_input == 255.0 {
        Ok(())
    } else {
        Err(Error::config(format!(
            "maxInput must be 1 or 255, got {max_input}"
        )))
    }
}

/// A named block of real values.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub values: Vec<f64>,
}

impl Param {
    pub fn new(name: &str, values: Vec<f64>) -> Self {
        Self {
            name: name.to_string(),
            values,
        }
    }
}

/// Hyperparameters and parameter values of one activation layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationParams {
    pub kind: ActivationKind,
    pub max_input: f64,
    pub channels: usize,
    pub learnable: Vec<Param>,
    pub fixed: Vec<Param>,
}

/// Fresh parameters for `kind`.
///
/// Every kind that generalises ReLU (PReLU, SReLU, APLU, MeLU, GaLU) starts
/// out equal to ReLU. APLU hinge positions are drawn uniformly from
/// `[0, maxInput]`.
pub fn act_init(
    kind: ActivationKind,
    max_input: f64,
    channels: usize,
    rng: &mut Rng,
) -> Result<ActivationParams> {
    check_max_input(max_input)?;
    if channels == 0 {
        return Err(Error::config("activation needs at least one channel"));
    }
    let c = channels;
    let (learnable, fixed) = match kind {
        ActivationKind::Relu => (vec![], vec![]),
        ActivationKind::LeakyRelu => (vec![], vec![Param::new("a", vec![LEAKY_SLOPE])]),
        ActivationKind::Elu => (vec![], vec![Param::new("a", vec![ELU_SCALE])]),
        ActivationKind::Prelu => (vec![Param::new("a", vec![0.0; c])], vec![]),
        ActivationKind::Srelu => (
            vec![
                Param::new("t_left", vec![0.0; c]),
                Param::new("a_left", vec![0.0; c]),
                Param::new("t_right", vec![max_input; c]),
                Param::new("a_right", vec![1.0; c]),
            ],
            vec![],
        ),
        ActivationKind::Aplu => {
            let n = APLU_HINGES;
            let hinges = (0..c * n).map(|_| rng.uniform(0.0, max_input)).collect();
            (
                vec![Param::new("a", vec![0.0; c * n]), Param::new("b", hinges)],
                vec![Param::new("hinges", vec![n as f64])],
            )
        }
        ActivationKind::MeluK4
        | ActivationKind::MeluK8
        | ActivationKind::GaluK4
        | ActivationKind::GaluK2 => {
            let k = kind.hat_coefficients().expect("hat kind");
            let table = &HAT_TABLE[..k - 1];
            (
                vec![Param::new("c", vec![0.0; c * k])],
                vec![
                    Param::new("hat_a", table.iter().map(|h| h.0).collect()),
                    Param::new("hat_lambda", table.iter().map(|h| h.1).collect()),
                ],
            )
        }
        ActivationKind::Pdelu => (
            vec![Param::new("a", vec![1.0; c])],
            vec![Param::new("t", vec![PDELU_T])],
        ),
        ActivationKind::SwishFixed => (vec![], vec![Param::new("beta", vec![1.0])]),
        ActivationKind::SwishLearnable => (vec![Param::new("beta", vec![1.0])], vec![]),
        ActivationKind::MishLearnable => (vec![Param::new("alpha", vec![1.0])], vec![]),
        ActivationKind::Srs => (
            vec![Param::new("alpha", vec![2.0]), Param::new("beta", vec![3.0])],
            vec![],
        ),
        ActivationKind::SoftLearnable => (
            vec![Param::new("alpha", vec![1.0])],
            vec![Param::new("beta", vec![1.0])],
        ),
        ActivationKind::SoftLearnable2 => (
            vec![Param::new("alpha", vec![1.0]), Param::new("beta", vec![1.0])],
            vec![],
        ),
    };
    Ok(ActivationParams {
        kind,
        max_input,
        channels,
        learnable,
        fixed,
    })
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
#[inline]
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl ActivationParams {
    pub fn id(&self) -> ActivationId {
        ActivationId::new(self.kind, self.max_input)
    }

    fn p(&self, i: usize) -> &[f64] {
        &self.learnable[i].values
    }

    fn fixed_scalar(&self, name: &str) -> f64 {
        self.fixed
            .iter()
            .find(|p| p.name == name)
            .map(|p| p.values[0])
            .unwrap_or_else(|| panic!("{} has no fixed parameter {name}", self.kind))
    }

    fn fixed_vec(&self, name: &str) -> &[f64] {
        self.fixed
            .iter()
            .find(|p| p.name == name)
            .map(|p| p.values.as_slice())
            .unwrap_or_else(|| panic!("{} has no fixed parameter {name}", self.kind))
    }

    pub fn learnable_named(&self, name: &str) -> Option<&[f64]> {
        self.learnable
            .iter()
            .find(|p| p.name == name)
            .map(|p| p.values.as_slice())
    }

    pub fn learnable_named_mut(&mut self, name: &str) -> Option<&mut Vec<f64>> {
        self.learnable
            .iter_mut()
            .find(|p| p.name == name)
            .map(|p| &mut p.values)
    }

    /// Swish/Soft Learnable `beta`: learnable or fixed depending on the kind.
    fn beta(&self) -> f64 {
        match self.kind {
            ActivationKind::SwishLearnable => self.p(0)[0],
            ActivationKind::SoftLearnable2 | ActivationKind::Srs => self.p(1)[0],
            _ => self.fixed_scalar("beta"),
        }
    }

    /// Zero-valued gradient container with the same layout as `learnable`.
    pub fn zero_grads(&self) -> Vec<Param> {
        self.learnable
            .iter()
            .map(|p| Param {
                name: p.name.clone(),
                values: vec![0.0; p.values.len()],
            })
            .collect()
    }

    fn hats(&self) -> (&[f64], &[f64]) {
        (self.fixed_vec("hat_a"), self.fixed_vec("hat_lambda"))
    }

    /// Forward value for one element in channel `ch`.
    pub fn value(&self, ch: usize, x: f64) -> f64 {
        use ActivationKind as K;
        match self.kind {
            K::Relu => {
                if x < 0.0 {
                    0.0
                } else {
                    x
                }
            }
            K::LeakyRelu => {
                if x < 0.0 {
                    self.fixed_scalar("a") * x
                } else {
                    x
                }
            }
            K::Elu => {
                if x < 0.0 {
                    self.fixed_scalar("a") * x.exp_m1()
                } else {
                    x
                }
            }
            K::Prelu => {
                if x < 0.0 {
                    self.p(0)[ch] * x
                } else {
                    x
                }
            }
            K::Srelu => {
                let (tl, al, tr, ar) = (self.p(0)[ch], self.p(1)[ch], self.p(2)[ch], self.p(3)[ch]);
                // a*x + (1-a)*t keeps the identity branches exact when a is 0 or 1.
                if x < tl {
                    al * x + (1.0 - al) * tl
                } else if x > tr {
                    ar * x + (1.0 - ar) * tr
                } else {
                    x
                }
            }
            K::Aplu => {
                let n = APLU_HINGES;
                let (a, b) = (&self.p(0)[ch * n..][..n], &self.p(1)[ch * n..][..n]);
                let mut y = if x < 0.0 { 0.0 } else { x };
                for (&ah, &bh) in a.iter().zip(b) {
                    y += ah * (bh - x).max(0.0);
                }
                y
            }
            K::MeluK4 | K::MeluK8 | K::GaluK4 | K::GaluK2 => {
                let k = self.kind.hat_coefficients().unwrap();
                let c = &self.p(0)[ch * k..][..k];
                let (ha, hl) = self.hats();
                let m = self.max_input;
                let mut y = if x < 0.0 { c[0] * x } else { x };
                let galu = self.kind.is_galu();
                for j in 1..k {
                    let phi = if galu {
                        gaussian_hat(x, ha[j - 1], hl[j - 1], m)
                    } else {
                        mexican_hat(x, ha[j - 1], hl[j - 1], m)
                    };
                    y += c[j] * phi;
                }
                y
            }
            K::Pdelu => {
                if x > 0.0 {
                    x
                } else {
                    let a = self.p(0)[ch];
                    let t = self.fixed_scalar("t");
                    let u = (1.0 - t) * x;
                    if u > -1.0 {
                        a * (u.ln_1p() / (1.0 - t)).exp_m1()
                    } else {
                        -a
                    }
                }
            }
            K::SwishFixed | K::SwishLearnable => x * sigmoid(self.beta() * x),
            K::MishLearnable => x * softplus(self.p(0)[0] * x).tanh(),
            K::Srs => {
                let (alpha, beta) = (self.p(0)[0], self.p(1)[0]);
                if x >= 0.0 {
                    x / (x / alpha + (-x / beta).exp())
                } else {
                    // multiply through by e^{x/beta} so nothing overflows
                    let q = (x / beta).exp();
                    x * q / (1.0 + x * q / alpha)
                }
            }
            K::SoftLearnable | K::SoftLearnable2 => {
                if x > 0.0 {
                    x
                } else {
                    self.p(0)[0] * (softplus(self.beta() * x) - std::f64::consts::LN_2)
                }
            }
        }
    }

    /// Derivative of [`value`](Self::value) with respect to `x`.
    pub fn slope(&self, ch: usize, x: f64) -> f64 {
        use ActivationKind as K;
        match self.kind {
            K::Relu => {
                if x < 0.0 {
                    0.0
                } else {
                    1.0
                }
            }
            K::LeakyRelu => {
                if x < 0.0 {
                    self.fixed_scalar("a")
                } else {
                    1.0
                }
            }
            K::Elu => {
                if x < 0.0 {
                    self.fixed_scalar("a") * x.exp()
                } else {
                    1.0
                }
            }
            K::Prelu => {
                if x < 0.0 {
                    self.p(0)[ch]
                } else {
                    1.0
                }
            }
            K::Srelu => {
                let (tl, tr) = (self.p(0)[ch], self.p(2)[ch]);
                if x < tl {
                    self.p(1)[ch]
                } else if x > tr {
                    self.p(3)[ch]
                } else {
                    1.0
                }
            }
            K::Aplu => {
                let n = APLU_HINGES;
                let (a, b) = (&self.p(0)[ch * n..][..n], &self.p(1)[ch * n..][..n]);
                let mut d = if x < 0.0 { 0.0 } else { 1.0 };
                for (&ah, &bh) in a.iter().zip(b) {
                    if x < bh {
                        d -= ah;
                    }
                }
                d
            }
            K::MeluK4 | K::MeluK8 | K::GaluK4 | K::GaluK2 => {
                let k = self.kind.hat_coefficients().unwrap();
                let c = &self.p(0)[ch * k..][..k];
                let (ha, hl) = self.hats();
                let m = self.max_input;
                let galu = self.kind.is_galu();
                let mut d = if x < 0.0 { c[0] } else { 1.0 };
                for j in 1..k {
                    let s = if galu {
                        hats::gaussian_hat_slope(x, ha[j - 1], hl[j - 1], m)
                    } else {
                        hats::mexican_hat_slope(x, ha[j - 1], hl[j - 1], m)
                    };
                    d += c[j] * s;
                }
                d
            }
            K::Pdelu => {
                if x > 0.0 {
                    1.0
                } else {
                    let a = self.p(0)[ch];
                    let t = self.fixed_scalar("t");
                    let u = (1.0 - t) * x;
                    if u > -1.0 {
                        // a * (1+u)^{1/(1-t) - 1}
                        a * (u.ln_1p() * (t / (1.0 - t))).exp()
                    } else {
                        0.0
                    }
                }
            }
            K::SwishFixed | K::SwishLearnable => {
                let b = self.beta();
                let s = sigmoid(b * x);
                s + b * x * s * (1.0 - s)
            }
            K::MishLearnable => {
                let a = self.p(0)[0];
                let th = softplus(a * x).tanh();
                th + x * (1.0 - th * th) * sigmoid(a * x) * a
            }
            K::Srs => {
                let (alpha, beta) = (self.p(0)[0], self.p(1)[0]);
                if x >= 0.0 {
                    let e = (-x / beta).exp();
                    let den = x / alpha + e;
                    e * (1.0 + x / beta) / (den * den)
                } else {
                    let q = (x / beta).exp();
                    let den = 1.0 + x * q / alpha;
                    q * (1.0 + x / beta) / (den * den)
                }
            }
            K::SoftLearnable | K::SoftLearnable2 => {
                if x > 0.0 {
                    1.0
                } else {
                    let b = self.beta();
                    self.p(0)[0] * b * sigmoid(b * x)
                }
            }
        }
    }

    /// Adds `up * d value / d theta` for every learnable `theta` into `grads`
    /// (laid out like `self.learnable`).
    pub fn accumulate_param_grads(&self, ch: usize, x: f64, up: f64, grads: &mut [Param]) {
        use ActivationKind as K;
        match self.kind {
            K::Relu | K::LeakyRelu | K::Elu | K::SwishFixed => {}
            K::Prelu => {
                if x < 0.0 {
                    grads[0].values[ch] += up * x;
                }
            }
            K::Srelu => {
                let (tl, al, tr, ar) = (self.p(0)[ch], self.p(1)[ch], self.p(2)[ch], self.p(3)[ch]);
                if x < tl {
                    grads[0].values[ch] += up * (1.0 - al);
                    grads[1].values[ch] += up * (x - tl);
                } else if x > tr {
                    grads[2].values[ch] += up * (1.0 - ar);
                    grads[3].values[ch] += up * (x - tr);
                }
            }
            K::Aplu => {
                let n = APLU_HINGES;
                for h in 0..n {
                    let i = ch * n + h;
                    let (a, b) = (self.p(0)[i], self.p(1)[i]);
                    if x < b {
                        grads[0].values[i] += up * (b - x);
                        grads[1].values[i] += up * a;
                    }
                }
            }
            K::MeluK4 | K::MeluK8 | K::GaluK4 | K::GaluK2 => {
                let k = self.kind.hat_coefficients().unwrap();
                let (ha, hl) = self.hats();
                let m = self.max_input;
                let galu = self.kind.is_galu();
                let g = &mut grads[0].values[ch * k..][..k];
                if x < 0.0 {
                    g[0] += up * x;
                }
                for j in 1..k {
                    let phi = if galu {
                        gaussian_hat(x, ha[j - 1], hl[j - 1], m)
                    } else {
                        mexican_hat(x, ha[j - 1], hl[j - 1], m)
                    };
                    g[j] += up * phi;
                }
            }
            K::Pdelu => {
                if x <= 0.0 {
                    let t = self.fixed_scalar("t");
                    let u = (1.0 - t) * x;
                    let d = if u > -1.0 {
                        (u.ln_1p() / (1.0 - t)).exp_m1()
                    } else {
                        -1.0
                    };
                    grads[0].values[ch] += up * d;
                }
            }
            K::SwishLearnable => {
                let s = sigmoid(self.p(0)[0] * x);
                grads[0].values[0] += up * x * x * s * (1.0 - s);
            }
            K::MishLearnable => {
                let a = self.p(0)[0];
                let th = softplus(a * x).tanh();
                grads[0].values[0] += up * x * x * (1.0 - th * th) * sigmoid(a * x);
            }
            K::Srs => {
                let (alpha, beta) = (self.p(0)[0], self.p(1)[0]);
                // with D = x/alpha + e^{-x/beta}:
                //   d/dalpha = x^2 / (alpha^2 D^2),  d/dbeta = -x^2 e^{-x/beta} / (beta^2 D^2)
                let (da, db) = if x >= 0.0 {
                    let e = (-x / beta).exp();
                    let den = x / alpha + e;
                    let den2 = den * den;
                    (x * x / (alpha * alpha * den2), -x * x * e / (beta * beta * den2))
                } else {
                    // D = D' / q with q = e^{x/beta}
                    let q = (x / beta).exp();
                    let den = 1.0 + x * q / alpha;
                    let den2 = den * den;
                    (
                        x * x * q * q / (alpha * alpha * den2),
                        -x * x * q / (beta * beta * den2),
                    )
                };
                grads[0].values[0] += up * da;
                grads[1].values[0] += up * db;
            }
            K::SoftLearnable | K::SoftLearnable2 => {
                if x <= 0.0 {
                    let b = self.beta();
                    grads[0].values[0] += up * (softplus(b * x) - std::f64::consts::LN_2);
                    if self.kind == K::SoftLearnable2 {
                        grads[1].values[0] += up * self.p(0)[0] * x * sigmoid(b * x);
                    }
                }
            }
        }
    }

    /// Non-differentiable points of channel `ch`.
    pub fn kinks(&self, ch: usize) -> Vec<f64> {
        use ActivationKind as K;
        match self.kind {
            K::Relu | K::LeakyRelu | K::Elu | K::Prelu | K::SoftLearnable | K::SoftLearnable2 => {
                vec![0.0]
            }
            K::Srelu => vec![self.p(0)[ch], self.p(2)[ch]],
            K::Aplu => {
                let n = APLU_HINGES;
                let mut k = vec![0.0];
                k.extend_from_slice(&self.p(1)[ch * n..][..n]);
                k
            }
            K::MeluK4 | K::MeluK8 | K::GaluK4 | K::GaluK2 => {
                let (ha, hl) = self.hats();
                let mut k = vec![0.0];
                for (&a, &l) in ha.iter().zip(hl) {
                    hats::hat_kinks(a, l, self.max_input, self.kind.is_galu(), &mut k);
                }
                k
            }
            K::Pdelu => vec![0.0, -1.0 / (1.0 - self.fixed_scalar("t"))],
            K::SwishFixed | K::SwishLearnable | K::MishLearnable | K::Srs => vec![],
        }
    }

    /// Regularisation term this layer adds to the loss (APLU only).
    pub fn penalty(&self) -> f64 {
        if self.kind == ActivationKind::Aplu {
            APLU_PENALTY * self.p(0).iter().map(|a| a * a).sum::<f64>()
        } else {
            0.0
        }
    }

    /// Adds the gradient of [`penalty`](Self::penalty) into `grads`.
    pub fn add_penalty_grad(&self, grads: &mut [Param]) {
        if self.kind == ActivationKind::Aplu {
            for (g, a) in grads[0].values.iter_mut().zip(self.p(0)) {
                *g += 2.0 * APLU_PENALTY * a;
            }
        }
    }

    /// Clamps constrained parameters into range and returns the layer's penalty.
    pub fn apply_constraints(&mut self) -> f64 {
        if matches!(
            self.kind,
            ActivationKind::Srs | ActivationKind::SoftLearnable | ActivationKind::SoftLearnable2
        ) {
            for p in &mut self.learnable {
                for v in &mut p.values {
                    if !(*v >= POSITIVE_FLOOR) {
                        *v = POSITIVE_FLOOR;
                    }
                }
            }
        }
        self.penalty()
    }

    /// Number of channels along which `x` is laid out, and the stride of one channel.
    ///
    /// Rank-1 inputs are a single vector of channels; otherwise axis 1 is the
    /// channel axis (`[N, C, ...]`).
    fn layout(&self, shape: &[usize]) -> Result<(usize, usize)> {
        let (c, inner) = match shape.len() {
            0 => return Err(Error::dim("activation input has no dimensions")),
            1 => (shape[0], 1),
            _ => (shape[1], shape[2..].iter().product()),
        };
        if self.kind.per_channel() && c != self.channels {
            return Err(Error::dim(format!(
                "{} layer has {} channels, input {shape:?} has {c}",
                self.kind, self.channels
            )));
        }
        Ok((if self.kind.per_channel() { c } else { 1 }, inner))
    }
}

#[inline]
fn channel_of(i: usize, channels: usize, inner: usize) -> usize {
    if channels == 1 {
        0
    } else {
        (i / inner) % channels
    }
}

/// Applies the activation elementwise.
pub fn act_forward(params: &ActivationParams, x: &Tensor) -> Result<Tensor> {
    let (c, inner) = params.layout(x.shape())?;
    let data = x
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| params.value(channel_of(i, c, inner), v))
        .collect();
    Tensor::new(x.shape().to_vec(), data)
}

/// `upstream ⊙ f'(x)`.
pub fn act_backward_input(params: &ActivationParams, x: &Tensor, upstream: &Tensor) -> Result<Tensor> {
    if x.shape() != upstream.shape() {
        return Err(Error::dim(format!(
            "input {:?} and upstream {:?} differ",
            x.shape(),
            upstream.shape()
        )));
    }
    let (c, inner) = params.layout(x.shape())?;
    let data = x
        .data()
        .iter()
        .zip(upstream.data())
        .enumerate()
        .map(|(i, (&v, &u))| u * params.slope(channel_of(i, c, inner), v))
        .collect();
    Tensor::new(x.shape().to_vec(), data)
}

/// Gradients of `sum(upstream ⊙ f(x))` with respect to each learnable parameter.
/// Empty for kinds without learnable parameters.
pub fn act_backward_params(
    params: &ActivationParams,
    x: &Tensor,
    upstream: &Tensor,
) -> Result<Vec<Param>> {
    if x.shape() != upstream.shape() {
        return Err(Error::dim(format!(
            "input {:?} and upstream {:?} differ",
            x.shape(),
            upstream.shape()
        )));
    }
    let (c, inner) = params.layout(x.shape())?;
    let mut grads = params.zero_grads();
    if params.kind.is_learnable() {
        for (i, (&v, &u)) in x.data().iter().zip(upstream.data()).enumerate() {
            params.accumulate_param_grads(channel_of(i, c, inner), v, u, &mut grads);
        }
    }
    Ok(grads)
}

/// Forward and both backward maps in one pass (used by the network).
pub(crate) fn act_backward(
    params: &ActivationParams,
    x: &Tensor,
    upstream: &Tensor,
) -> Result<(Tensor, Vec<Param>)> {
    let (c, inner) = params.layout(x.shape())?;
    let mut grads = params.zero_grads();
    let learnable = params.kind.is_learnable();
    let mut gx = Vec::with_capacity(x.len());
    for (i, (&v, &u)) in x.data().iter().zip(upstream.data()).enumerate() {
        let ch = channel_of(i, c, inner);
        gx.push(u * params.slope(ch, v));
        if learnable && u != 0.0 {
            params.accumulate_param_grads(ch, v, u, &mut grads);
        }
    }
    Ok((Tensor::new(x.shape().to_vec(), gx)?, grads))
}
