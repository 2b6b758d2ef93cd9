use super::state::{Gradients, LayerParams, ModelState};
use super::LayerSpec;
use crate::activations::{act_backward, act_forward};
use crate::error::{Error, Result};
use crate::tensor::{
    conv2d_backward, conv2d_forward, gemm, gemm_nt, gemm_tn, maxpool_forward, softmax_in_place, ConvGeometry,
    Tensor, PROB_FLOOR,
};

/// Per-layer intermediates of one forward pass.
#[derive(Debug, Clone)]
pub struct Cache {
    generation: u64,
    /// `inputs[i]` is the input of layer `i`.
    inputs: Vec<Tensor>,
    /// Max-pool winners, empty for other layers.
    pool_args: Vec<Vec<usize>>,
    probs: Tensor,
}

impl Cache {
    pub fn probs(&self) -> &Tensor {
        &self.probs
    }

    pub fn batch(&self) -> usize {
        self.probs.shape()[0]
    }

    /// Input of layer `i`.
    pub fn input(&self, i: usize) -> &Tensor {
        &self.inputs[i]
    }

    /// Output of layer `i`.
    pub fn output(&self, i: usize) -> &Tensor {
        self.inputs.get(i + 1).unwrap_or(&self.probs)
    }

    /// First layer whose output contains a NaN or infinity.
    pub fn first_non_finite(&self) -> Option<usize> {
        (0..self.inputs.len()).find(|&i| !self.output(i).is_finite())
    }
}

/// Result of [`backward_pass`].
#[derive(Debug, Clone)]
pub struct Backward {
    /// Mean cross-entropy plus activation penalties.
    pub loss: f64,
    /// Mean cross-entropy alone.
    pub data_loss: f64,
    pub grads: Gradients,
    /// Gradient of the loss with respect to each slot's output, keyed by slot index.
    pub slot_upstream: Vec<(usize, Tensor)>,
}

fn check_input(state: &ModelState, x: &Tensor) -> Result<()> {
    let want = &state.spec().input;
    let s = x.shape();
    if s.len() != want.len() + 1 || &s[1..] != want.as_slice() || s[0] == 0 {
        return Err(Error::dim(format!(
            "input batch {s:?} does not match model input {want:?}"
        )));
    }
    Ok(())
}

fn layer_forward(spec: &LayerSpec, params: &LayerParams, x: &Tensor) -> Result<(Tensor, Vec<usize>)> {
    let n = x.shape()[0];
    let out = match (spec, params) {
        (LayerSpec::Conv2d { stride, padding, .. }, LayerParams::Conv { weight, bias }) => {
            let g = ConvGeometry::new(x.shape(), weight.shape(), *stride, *padding)?;
            conv2d_forward(&g, x.data(), weight.data(), Some(bias.data()))
        }
        (LayerSpec::Dense { units }, LayerParams::Dense { weight, bias }) => {
            let k = x.shape()[1];
            let mut out: Vec<f64> = (0..n).flat_map(|_| bias.data().iter().copied()).collect();
            gemm(x.data(), weight.data(), &mut out, n, k, *units);
            Tensor::new(vec![n, *units], out)?
        }
        (LayerSpec::MaxPool { size }, _) => return maxpool_forward(x, *size),
        (LayerSpec::GlobalAvgPool, _) => {
            let s = x.shape();
            let plane = s[2] * s[3];
            let data = x
                .data()
                .chunks(plane)
                .map(|c| c.iter().sum::<f64>() / plane as f64)
                .collect();
            Tensor::new(vec![s[0], s[1]], data)?
        }
        (LayerSpec::Flatten, _) => {
            let len = x.row_len();
            x.clone().reshape(&[n, len])?
        }
        (LayerSpec::Activation { .. }, LayerParams::Activation(p)) => act_forward(p, x)?,
        (LayerSpec::Softmax, _) => {
            let mut out = x.clone();
            let c = x.row_len();
            for row in out.data_mut().chunks_mut(c) {
                softmax_in_place(row);
            }
            out
        }
        _ => return Err(Error::contract(format!("parameters do not match layer '{spec}'"))),
    };
    Ok((out, Vec::new()))
}

/// Class probabilities for a batch `[N, ...input]`, plus the intermediates
/// needed by [`backward_pass`].
pub fn forward_pass(state: &ModelState, x: &Tensor) -> Result<(Tensor, Cache)> {
    check_input(state, x)?;
    let spec = state.spec();
    let mut inputs = Vec::with_capacity(spec.layers.len());
    let mut pool_args = Vec::with_capacity(spec.layers.len());
    let mut cur = x.clone();
    for (l, p) in spec.layers.iter().zip(state.layers()) {
        let (out, arg) = layer_forward(l, p, &cur)?;
        inputs.push(std::mem::replace(&mut cur, out));
        pool_args.push(arg);
    }
    let cache = Cache {
        generation: state.generation(),
        inputs,
        pool_args,
        probs: cur.clone(),
    };
    Ok((cur, cache))
}

/// Forward pass without keeping intermediates.
pub fn predict(state: &ModelState, x: &Tensor) -> Result<Tensor> {
    check_input(state, x)?;
    let mut cur = x.clone();
    for (l, p) in state.spec().layers.iter().zip(state.layers()) {
        cur = layer_forward(l, p, &cur)?.0;
    }
    Ok(cur)
}

/// Gradients of `mean cross-entropy + activation penalties` with respect to
/// every learnable tensor.
pub fn backward_pass(state: &ModelState, cache: &Cache, labels: &[usize]) -> Result<Backward> {
    if cache.generation != state.generation() || cache.inputs.len() != state.layers().len() {
        return Err(Error::contract(
            "cache does not belong to the current model parameters",
        ));
    }
    let n = cache.batch();
    let classes = state.spec().classes;
    if labels.len() != n {
        return Err(Error::contract(format!(
            "{} labels for a batch of {n}",
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::contract(format!("label {bad} out of range for {classes} classes")));
    }

    let probs = cache.probs.data();
    let mut data_loss = 0.0;
    let mut g = probs.to_vec();
    for (i, &y) in labels.iter().enumerate() {
        data_loss -= probs[i * classes + y].max(PROB_FLOOR).ln();
        g[i * classes + y] -= 1.0;
    }
    data_loss /= n as f64;
    for v in &mut g {
        *v /= n as f64;
    }
    let mut up = Tensor::new(vec![n, classes], g)?;

    let mut grads = Gradients::zeros_like(state);
    let mut slot_upstream = Vec::new();
    let spec = state.spec();
    let last = spec.layers.len() - 1;
    for i in (0..last).rev() {
        let x = &cache.inputs[i];
        let params = &state.layers()[i];
        up = match (&spec.layers[i], params) {
            (LayerSpec::Conv2d { stride, padding, .. }, LayerParams::Conv { weight, .. }) => {
                let geo = ConvGeometry::new(x.shape(), weight.shape(), *stride, *padding)?;
                let (gx, gw, gb) = conv2d_backward(&geo, x.data(), weight.data(), up.data());
                grads.layers[i] = LayerParams::Conv {
                    weight: Tensor::new(weight.shape().to_vec(), gw)?,
                    bias: Tensor::vector(gb),
                };
                Tensor::new(x.shape().to_vec(), gx)?
            }
            (LayerSpec::Dense { units }, LayerParams::Dense { weight, .. }) => {
                let k = x.shape()[1];
                let mut gw = vec![0.0; k * units];
                gemm_tn(x.data(), up.data(), &mut gw, n, k, *units);
                let mut gb = vec![0.0; *units];
                for row in up.data().chunks(*units) {
                    for (b, v) in gb.iter_mut().zip(row) {
                        *b += v;
                    }
                }
                let mut gx = vec![0.0; n * k];
                gemm_nt(up.data(), weight.data(), &mut gx, n, *units, k);
                grads.layers[i] = LayerParams::Dense {
                    weight: Tensor::new(vec![k, *units], gw)?,
                    bias: Tensor::vector(gb),
                };
                Tensor::new(vec![n, k], gx)?
            }
            (LayerSpec::MaxPool { .. }, _) => {
                let mut gx = vec![0.0; x.len()];
                for (&src, &u) in cache.pool_args[i].iter().zip(up.data()) {
                    gx[src] += u;
                }
                Tensor::new(x.shape().to_vec(), gx)?
            }
            (LayerSpec::GlobalAvgPool, _) => {
                let s = x.shape();
                let plane = s[2] * s[3];
                let gx = up
                    .data()
                    .iter()
                    .flat_map(|&u| std::iter::repeat_n(u / plane as f64, plane))
                    .collect();
                Tensor::new(s.to_vec(), gx)?
            }
            (LayerSpec::Flatten, _) => up.reshape(x.shape())?,
            (LayerSpec::Activation { slot, .. }, LayerParams::Activation(p)) => {
                let (gx, mut pg) = act_backward(p, x, &up)?;
                p.add_penalty_grad(&mut pg);
                let mut gp = p.clone();
                gp.learnable = pg;
                grads.layers[i] = LayerParams::Activation(gp);
                slot_upstream.push((*slot, up));
                gx
            }
            (l, _) => return Err(Error::contract(format!("unexpected layer '{l}' before softmax"))),
        };
    }
    slot_upstream.reverse();

    Ok(Backward {
        loss: data_loss + state.penalty(),
        data_loss,
        grads,
        slot_upstream,
    })
}
