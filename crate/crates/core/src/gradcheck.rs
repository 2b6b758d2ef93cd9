//! Central finite differences, the reference every analytic gradient in the
//! crate is checked against.

use crate::tensor::Tensor;

/// Relative step: `h_i = scale * max(1, |x_i|)`.
pub const DEFAULT_STEP_SCALE: f64 = 1e-4;

/// Points closer than this to a non-differentiable point are not checked.
pub const KINK_RADIUS: f64 = 1e-3;

/// Step used for coordinate value `v`.
pub fn step_for(v: f64, scale: f64) -> f64 {
    scale * v.abs().max(1.0)
}

/// Central-difference gradient of a scalar function, one coordinate at a time.
///
/// `step_scale` defaults to [`DEFAULT_STEP_SCALE`].
pub fn finite_diff_grad<F>(f: F, x: &Tensor, step_scale: Option<f64>) -> Tensor
where
    F: Fn(&Tensor) -> f64,
{
    let scale = step_scale.unwrap_or(DEFAULT_STEP_SCALE);
    let mut probe = x.clone();
    let mut grad = Tensor::zeros(x.shape());
    for i in 0..x.len() {
        let xi = x.data()[i];
        let h = step_for(xi, scale);
        probe.data_mut()[i] = xi + h;
        let up = f(&probe);
        probe.data_mut()[i] = xi - h;
        let down = f(&probe);
        probe.data_mut()[i] = xi;
        grad.data_mut()[i] = (up - down) / (2.0 * h);
    }
    grad
}

/// Whether a central difference at `x` could straddle one of `kinks`.
///
/// The exclusion zone is [`KINK_RADIUS`] plus the stencil half-width, so a
/// point is only kept when neither `x - h` nor `x + h` lies within the
/// radius of a kink.
pub fn near_kink(x: f64, kinks: &[f64], step_scale: f64) -> bool {
    let reach = KINK_RADIUS + step_for(x, step_scale);
    kinks.iter().any(|&k| (x - k).abs() < reach)
}

/// Magnitudes below this are compared on an absolute scale in [`rel_error`].
pub const REL_ERROR_FLOOR: f64 = 1e-3;

/// `|a - b| / max(|a|, |b|, REL_ERROR_FLOOR)`.
///
/// The floor keeps derivatives that pass through zero (Swish, Mish near
/// their minima) from turning the finite-difference truncation error into an
/// unbounded relative error.
pub fn rel_error(a: f64, b: f64) -> f64 {
    let denom = a.abs().max(b.abs()).max(REL_ERROR_FLOOR);
    (a - b).abs() / denom
}
