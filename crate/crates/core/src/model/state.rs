use std::sync::atomic::{AtomicU64, Ordering};

use super::{LayerSpec, ModelSpec};
use crate::activations::{act_init, ActivationParams};
use crate::error::Result;
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Parameters owned by one layer.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerParams {
    None,
    /// `weight` is OIHW, `bias` has one entry per output channel.
    Conv { weight: Tensor, bias: Tensor },
    /// `weight` is `[in, out]`.
    Dense { weight: Tensor, bias: Tensor },
    Activation(ActivationParams),
}

impl LayerParams {
    /// Every learnable buffer, in a fixed order shared with gradients.
    pub fn blocks(&self) -> Vec<&[f64]> {
        match self {
            LayerParams::None => vec![],
            LayerParams::Conv { weight, bias } | LayerParams::Dense { weight, bias } => {
                vec![weight.data(), bias.data()]
            }
            LayerParams::Activation(p) => p.learnable.iter().map(|q| q.values.as_slice()).collect(),
        }
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            LayerParams::None => vec![],
            LayerParams::Conv { weight, bias } | LayerParams::Dense { weight, bias } => {
                vec![weight.data_mut(), bias.data_mut()]
            }
            LayerParams::Activation(p) => p
                .learnable
                .iter_mut()
                .map(|q| q.values.as_mut_slice())
                .collect(),
        }
    }

    fn zeros_like(&self) -> Self {
        match self {
            LayerParams::None => LayerParams::None,
            LayerParams::Conv { weight, bias } => LayerParams::Conv {
                weight: Tensor::zeros(weight.shape()),
                bias: Tensor::zeros(bias.shape()),
            },
            LayerParams::Dense { weight, bias } => LayerParams::Dense {
                weight: Tensor::zeros(weight.shape()),
                bias: Tensor::zeros(bias.shape()),
            },
            LayerParams::Activation(p) => {
                let mut z = p.clone();
                z.learnable = p.zero_grads();
                LayerParams::Activation(z)
            }
        }
    }
}

/// Trained (or freshly initialised) parameters for a [`ModelSpec`].
#[derive(Debug, Clone)]
pub struct ModelState {
    spec: ModelSpec,
    layers: Vec<LayerParams>,
    /// Fresh process-wide value on every mutable access; caches remember the
    /// value they saw.
    generation: u64,
}

impl PartialEq for ModelState {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec && self.layers == other.layers
    }
}

impl ModelState {
    pub(crate) fn from_parts(spec: ModelSpec, layers: Vec<LayerParams>) -> Self {
        Self {
            spec,
            layers,
            generation: next_generation(),
        }
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    /// Mutable access to the parameters. Invalidates outstanding caches.
    pub fn layers_mut(&mut self) -> &mut [LayerParams] {
        self.generation = next_generation();
        &mut self.layers
    }

    pub(crate) fn generation(&self) -> u64 {
        self.generation
    }

    /// Parameters of activation slot `slot`.
    pub fn slot_params(&self, slot: usize) -> Option<&ActivationParams> {
        self.spec
            .layers
            .iter()
            .zip(&self.layers)
            .find_map(|(l, p)| match (l, p) {
                (LayerSpec::Activation { slot: s, .. }, LayerParams::Activation(a)) if *s == slot => Some(a),
                _ => None,
            })
    }

    /// Applies every activation's constraints; returns the summed penalty.
    pub fn apply_constraints(&mut self) -> f64 {
        let mut penalty = 0.0;
        for layer in self.layers_mut() {
            if let LayerParams::Activation(p) = layer {
                penalty += p.apply_constraints();
            }
        }
        penalty
    }

    /// Summed regularisation penalty of all activation slots.
    pub fn penalty(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| match l {
                LayerParams::Activation(p) => p.penalty(),
                _ => 0.0,
            })
            .sum()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| l.blocks())
            .map(|b| b.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            let learn = l.blocks().iter().all(|b| b.iter().all(|v| v.is_finite()));
            let fixed = match l {
                LayerParams::Activation(p) => p.fixed.iter().all(|q| q.values.iter().all(|v| v.is_finite())),
                _ => true,
            };
            learn && fixed
        })
    }
}

fn next_generation() -> u64 {
    static NEXT: AtomicU64 = AtomicU64::new(1);
    NEXT.fetch_add(1, Ordering::Relaxed)
}

/// Gradients with the same layout as a [`ModelState`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerParams>,
}

impl Gradients {
    pub fn zeros_like(state: &ModelState) -> Self {
        Self {
            layers: state.layers.iter().map(LayerParams::zeros_like).collect(),
        }
    }

    /// Flat view in the order used by [`LayerParams::blocks`].
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.blocks())
            .flat_map(|b| b.iter().copied())
            .collect()
    }

    /// Gradient block of layer `index`.
    pub fn layer(&self, index: usize) -> &LayerParams {
        &self.layers[index]
    }
}

/// Fresh parameters: He-normal weights (std `sqrt(2 / fan_in)`), zero biases,
/// activation slots from `act_init`. Layers are initialised in order from `rng`.
pub fn build_model(spec: &ModelSpec, rng: &mut Rng) -> Result<ModelState> {
    let shapes = spec.layer_shapes()?;
    let mut layers = Vec::with_capacity(spec.layers.len());
    let mut in_shape = spec.input.clone();
    for (layer, out_shape) in spec.layers.iter().zip(&shapes) {
        let params = match layer {
            LayerSpec::Conv2d { filters, kernel, .. } => {
                let c = in_shape[0];
                let fan_in = c * kernel * kernel;
                LayerParams::Conv {
                    weight: he_normal(&[*filters, c, *kernel, *kernel], fan_in, rng),
                    bias: Tensor::zeros(&[*filters]),
                }
            }
            LayerSpec::Dense { units } => {
                let fan_in = in_shape[0];
                LayerParams::Dense {
                    weight: he_normal(&[fan_in, *units], fan_in, rng),
                    bias: Tensor::zeros(&[*units]),
                }
            }
            LayerSpec::Activation { act, .. } => {
                LayerParams::Activation(act_init(act.kind, act.max_input, in_shape[0], rng)?)
            }
            _ => LayerParams::None,
        };
        layers.push(params);
        in_shape = out_shape.clone();
    }
    Ok(ModelState::from_parts(spec.clone(), layers))
}

fn he_normal(shape: &[usize], fan_in: usize, rng: &mut Rng) -> Tensor {
    let std = (2.0 / fan_in as f64).sqrt();
    let n = shape.iter().product();
    let data = (0..n).map(|_| std * rng.normal()).collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches length")
}
