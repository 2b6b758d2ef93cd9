//! Layer-graph descriptions, parameter state, forward inference and
//! hand-written backpropagation for small CNNs with swappable activation
//! slots.

mod net;
mod persist;
mod state;

use std::collections::BTreeSet;
use std::fmt;

pub use net::{backward_pass, forward_pass, predict, Backward, Cache};
pub use persist::{load_model, read_model, save_model, write_model, MODEL_MAGIC, MODEL_VERSION};
pub use state::{build_model, Gradients, LayerParams, ModelState};

use crate::activations::ActivationId;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Conv2d {
        filters: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    Dense {
        units: usize,
    },
    MaxPool {
        size: usize,
    },
    GlobalAvgPool,
    Flatten,
    /// A swappable activation; `slot` is its stable address.
    Activation {
        slot: usize,
        act: ActivationId,
    },
    Softmax,
}

impl LayerSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::MaxPool { .. } => "maxpool",
            LayerSpec::GlobalAvgPool => "gap",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Activation { .. } => "act",
            LayerSpec::Softmax => "softmax",
        }
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::Conv2d {
                filters,
                kernel,
                stride,
                padding,
            } => write!(f, "conv2d {filters} {kernel} {stride} {padding}"),
            LayerSpec::Dense { units } => write!(f, "dense {units}"),
            LayerSpec::MaxPool { size } => write!(f, "maxpool {size}"),
            LayerSpec::GlobalAvgPool => write!(f, "gap"),
            LayerSpec::Flatten => write!(f, "flatten"),
            LayerSpec::Activation { slot, act } => {
                write!(f, "act {slot} {} {}", act.kind, act.max_input)
            }
            LayerSpec::Softmax => write!(f, "softmax"),
        }
    }
}

/// Network description: per-sample input shape, class count and layer list.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub input: Vec<usize>,
    pub classes: usize,
    pub layers: Vec<LayerSpec>,
}

const SPEC_HEADER: &str = "stochact-model 1";

impl ModelSpec {
    /// The default backbone: `[conv 3x3 -> act -> maxpool 2]` per entry of
    /// `conv_filters`, then flatten, `[dense -> act]` per entry of
    /// `dense_units`, and a final dense layer into the softmax. All slots
    /// start as ReLU.
    pub fn mini_conv_net(
        input: [usize; 3],
        classes: usize,
        conv_filters: &[usize],
        dense_units: &[usize],
    ) -> Self {
        let relu = ActivationId::new(crate::activations::ActivationKind::Relu, 1.0);
        let mut layers = Vec::new();
        let mut slot = 0;
        for &filters in conv_filters {
            layers.push(LayerSpec::Conv2d {
                filters,
                kernel: 3,
                stride: 1,
                padding: 1,
            });
            layers.push(LayerSpec::Activation { slot, act: relu });
            slot += 1;
            layers.push(LayerSpec::MaxPool { size: 2 });
        }
        layers.push(LayerSpec::Flatten);
        for &units in dense_units {
            layers.push(LayerSpec::Dense { units });
            layers.push(LayerSpec::Activation { slot, act: relu });
            slot += 1;
        }
        layers.push(LayerSpec::Dense { units: classes });
        layers.push(LayerSpec::Softmax);
        Self {
            input: input.to_vec(),
            classes,
            layers,
        }
    }

    /// `mini_conv_net` with two conv blocks (8, 16 filters) and one 64-unit dense block.
    pub fn default_backbone(input: [usize; 3], classes: usize) -> Self {
        Self::mini_conv_net(input, classes, &[8, 16], &[64])
    }

    /// Per-sample output shape of every layer, checking that they compose.
    pub fn layer_shapes(&self) -> Result<Vec<Vec<usize>>> {
        if self.input.is_empty() || self.input.contains(&0) {
            return Err(Error::config(format!("invalid input shape {:?}", self.input)));
        }
        if self.classes < 2 {
            return Err(Error::config("need at least two classes"));
        }
        match self.layers.last() {
            Some(LayerSpec::Softmax) => {}
            _ => return Err(Error::config("last layer must be softmax")),
        }
        let softmaxes = self
            .layers
            .iter()
            .filter(|l| matches!(l, LayerSpec::Softmax))
            .count();
        if softmaxes != 1 {
            return Err(Error::config("exactly one softmax layer is allowed"));
        }
        let mut seen = BTreeSet::new();
        for l in &self.layers {
            if let LayerSpec::Activation { slot, act } = l {
                if !seen.insert(*slot) {
                    return Err(Error::config(format!("duplicate activation slot {slot}")));
                }
                crate::activations::check_max_input(act.max_input)?;
            }
        }

        let mut shape = self.input.clone();
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let bad = |msg: String| Error::config(format!("layer {i} ({layer}): {msg}"));
            shape = match layer {
                LayerSpec::Conv2d {
                    filters,
                    kernel,
                    stride,
                    padding,
                } => {
                    if shape.len() != 3 {
                        return Err(bad(format!("needs CHW input, got {shape:?}")));
                    }
                    if *filters == 0 || *kernel == 0 || *stride == 0 {
                        return Err(bad("zero-sized convolution".into()));
                    }
                    let (h, w) = (shape[1] + 2 * padding, shape[2] + 2 * padding);
                    if *kernel > h || *kernel > w {
                        return Err(bad(format!("kernel larger than padded input {h}x{w}")));
                    }
                    vec![*filters, (h - kernel) / stride + 1, (w - kernel) / stride + 1]
                }
                LayerSpec::Dense { units } => {
                    if shape.len() != 1 {
                        return Err(bad(format!("needs a flat input, got {shape:?}")));
                    }
                    if *units == 0 {
                        return Err(bad("zero units".into()));
                    }
                    vec![*units]
                }
                LayerSpec::MaxPool { size } => {
                    if shape.len() != 3 || *size == 0 || shape[1] < *size || shape[2] < *size {
                        return Err(bad(format!("cannot pool {shape:?} by {size}")));
                    }
                    vec![shape[0], shape[1] / size, shape[2] / size]
                }
                LayerSpec::GlobalAvgPool => {
                    if shape.len() != 3 {
                        return Err(bad(format!("needs CHW input, got {shape:?}")));
                    }
                    vec![shape[0]]
                }
                LayerSpec::Flatten => vec![shape.iter().product()],
                LayerSpec::Activation { .. } => shape,
                LayerSpec::Softmax => {
                    if shape != [self.classes] {
                        return Err(bad(format!(
                            "softmax input {shape:?} does not match {} classes",
                            self.classes
                        )));
                    }
                    shape
                }
            };
            out.push(shape.clone());
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        self.layer_shapes().map(|_| ())
    }

    /// Slot indices in layer order.
    pub fn activation_slots(&self) -> Vec<usize> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                LayerSpec::Activation { slot, .. } => Some(*slot),
                _ => None,
            })
            .collect()
    }

    /// Current assignment of every slot, in layer order.
    pub fn slot_assignments(&self) -> Vec<(usize, ActivationId)> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                LayerSpec::Activation { slot, act } => Some((*slot, *act)),
                _ => None,
            })
            .collect()
    }

    /// Installs `act` in every slot.
    pub fn with_all_slots(&self, act: ActivationId) -> Self {
        let mut s = self.clone();
        for l in &mut s.layers {
            if let LayerSpec::Activation { act: a, .. } = l {
                *a = act;
            }
        }
        s
    }

    /// Canonical text form; [`ModelSpec::parse`] inverts it exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(SPEC_HEADER);
        s.push('\n');
        s.push_str("input");
        for d in &self.input {
            s.push_str(&format!(" {d}"));
        }
        s.push('\n');
        s.push_str(&format!("classes {}\n", self.classes));
        for l in &self.layers {
            s.push_str(&l.to_string());
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        if lines.next() != Some(SPEC_HEADER) {
            return Err(Error::config(format!("model spec must start with '{SPEC_HEADER}'")));
        }
        let mut input = None;
        let mut classes = None;
        let mut layers = Vec::new();
        for line in lines {
            let toks: Vec<&str> = line.split_whitespace().collect();
            let nums = |n: usize| -> Result<Vec<usize>> {
                if toks.len() != n + 1 {
                    return Err(Error::config(format!("expected {n} arguments in '{line}'")));
                }
                toks[1..]
                    .iter()
                    .map(|t| {
                        t.parse::<usize>()
                            .map_err(|_| Error::config(format!("bad integer '{t}' in '{line}'")))
                    })
                    .collect()
            };
            match toks[0] {
                "input" => {
                    input = Some(
                        toks[1..]
                            .iter()
                            .map(|t| t.parse::<usize>())
                            .collect::<std::result::Result<Vec<_>, _>>()
                            .map_err(|_| Error::config(format!("bad input shape '{line}'")))?,
                    )
                }
                "classes" => classes = Some(nums(1)?[0]),
                "conv2d" => {
                    let v = nums(4)?;
                    layers.push(LayerSpec::Conv2d {
                        filters: v[0],
                        kernel: v[1],
                        stride: v[2],
                        padding: v[3],
                    });
                }
                "dense" => layers.push(LayerSpec::Dense { units: nums(1)?[0] }),
                "maxpool" => layers.push(LayerSpec::MaxPool { size: nums(1)?[0] }),
                "gap" => {
                    nums(0)?;
                    layers.push(LayerSpec::GlobalAvgPool)
                }
                "flatten" => {
                    nums(0)?;
                    layers.push(LayerSpec::Flatten)
                }
                "softmax" => {
                    nums(0)?;
                    layers.push(LayerSpec::Softmax)
                }
                "act" => {
                    if toks.len() != 4 {
                        return Err(Error::config(format!("expected 'act <slot> <kind> <maxInput>', got '{line}'")));
                    }
                    let slot = toks[1]
                        .parse()
                        .map_err(|_| Error::config(format!("bad slot in '{line}'")))?;
                    let kind = toks[2].parse()?;
                    let max_input: f64 = toks[3]
                        .parse()
                        .map_err(|_| Error::config(format!("bad maxInput in '{line}'")))?;
                    layers.push(LayerSpec::Activation {
                        slot,
                        act: ActivationId::new(kind, max_input),
                    });
                }
                other => return Err(Error::config(format!("unknown layer '{other}'"))),
            }
        }
        let spec = Self {
            input: input.ok_or_else(|| Error::config("missing 'input' line"))?,
            classes: classes.ok_or_else(|| Error::config("missing 'classes' line"))?,
            layers,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Slot indices of `spec` in layer order.
pub fn list_activation_slots(spec: &ModelSpec) -> Vec<usize> {
    spec.activation_slots()
}

#[cfg(test)]
mod tests;
