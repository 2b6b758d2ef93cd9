//! Gradient-fidelity and ReLU-equivalence checks over the whole zoo.
//!
//! Analytic derivatives are compared with central finite differences of the
//! forward map only, so the checks share no code path with the derivatives
//! they validate.

use super::{act_backward_params, act_forward, act_init, ActivationKind, ActivationParams};
use crate::error::Result;
use crate::gradcheck::{finite_diff_grad, near_kink, rel_error, step_for, DEFAULT_STEP_SCALE, KINK_RADIUS};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Half-width of the sampling interval, in input units.
pub fn input_scale(kind: ActivationKind, max_input: f64) -> f64 {
    if kind.uses_max_input() {
        max_input
    } else {
        4.0
    }
}

/// Parameters drawn away from their initial values so every branch is exercised.
pub fn random_params(
    kind: ActivationKind,
    max_input: f64,
    channels: usize,
    rng: &mut Rng,
) -> Result<ActivationParams> {
    use ActivationKind as K;
    let mut p = act_init(kind, max_input, channels, rng)?;
    let m = max_input;
    for param in &mut p.learnable {
        let name = param.name.as_str();
        for v in &mut param.values {
            *v = match (kind, name) {
                (K::Prelu, _) => rng.uniform(-0.5, 1.0),
                (K::Srelu, "t_left") => rng.uniform(-m, 0.0),
                (K::Srelu, "a_left") => rng.uniform(-0.5, 1.0),
                (K::Srelu, "t_right") => rng.uniform(0.25 * m, 2.0 * m),
                (K::Srelu, "a_right") => rng.uniform(-0.5, 1.5),
                (K::Aplu, "a") => rng.uniform(-0.5, 0.5),
                (K::Aplu, "b") => rng.uniform(0.0, m),
                (K::MeluK4 | K::MeluK8 | K::GaluK4 | K::GaluK2, _) => rng.uniform(-0.5, 0.5),
                (K::Pdelu, _) => rng.uniform(0.5, 1.5),
                (K::SwishLearnable | K::MishLearnable, _) => rng.uniform(0.5, 2.0),
                (K::Srs, "alpha") => rng.uniform(1.5, 3.0),
                (K::Srs, "beta") => rng.uniform(0.5, 2.5),
                (K::SoftLearnable | K::SoftLearnable2, _) => rng.uniform(0.5, 2.0),
                _ => *v,
            };
        }
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CheckStats {
    pub checked: usize,
    pub skipped_near_kink: usize,
    pub max_rel_error: f64,
}

impl CheckStats {
    fn record(&mut self, err: f64) {
        self.checked += 1;
        if err > self.max_rel_error || err.is_nan() {
            self.max_rel_error = err;
        }
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.checked > 0 && self.max_rel_error <= tolerance
    }
}

/// Compares `slope` with a central difference of `value` at `points` random
/// inputs, each at least the kink radius (plus stencil) away from a kink.
pub fn check_input_grads(
    kind: ActivationKind,
    max_input: f64,
    points: usize,
    rng: &mut Rng,
) -> Result<CheckStats> {
    let channels = 3;
    let s = input_scale(kind, max_input);
    let mut stats = CheckStats::default();
    let mut params = random_params(kind, max_input, channels, rng)?;
    while stats.checked < points {
        // fresh parameters every 50 points
        if stats.checked % 50 == 49 {
            params = random_params(kind, max_input, channels, rng)?;
        }
        let ch = rng.below(channels);
        let x = rng.uniform(-3.0 * s, 3.0 * s);
        if near_kink(x, &params.kinks(ch), DEFAULT_STEP_SCALE) {
            stats.skipped_near_kink += 1;
            continue;
        }
        let fd = finite_diff_grad(|t| params.value(ch, t.data()[0]), &Tensor::scalar(x), None).data()[0];
        stats.record(rel_error(params.slope(ch, x), fd));
    }
    Ok(stats)
}

/// Compares `act_backward_params` with central differences over the
/// parameter vector at `configs` random configurations. Returns `None` for
/// kinds without learnable parameters.
pub fn check_param_grads(
    kind: ActivationKind,
    max_input: f64,
    configs: usize,
    rng: &mut Rng,
) -> Result<Option<CheckStats>> {
    if !kind.is_learnable() {
        return Ok(None);
    }
    let (batch, channels) = (3, 2);
    let s = input_scale(kind, max_input);
    let mut stats = CheckStats::default();
    for _ in 0..configs {
        let params = random_params(kind, max_input, channels, rng)?;
        let theta_max = params
            .learnable
            .iter()
            .flat_map(|p| p.values.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        // kinks can move by one parameter step while differencing
        let margin_step = step_for(theta_max, DEFAULT_STEP_SCALE);
        let mut xs = Vec::with_capacity(batch * channels);
        while xs.len() < batch * channels {
            let ch = xs.len() % channels;
            let x = rng.uniform(-3.0 * s, 3.0 * s);
            let reach = KINK_RADIUS + step_for(x, DEFAULT_STEP_SCALE) + margin_step;
            if params.kinks(ch).iter().any(|k| (x - k).abs() < reach) {
                stats.skipped_near_kink += 1;
                continue;
            }
            xs.push(x);
        }
        let x = Tensor::new(vec![batch, channels], xs)?;
        let up = Tensor::new(
            vec![batch, channels],
            (0..batch * channels).map(|_| rng.uniform(-1.0, 1.0)).collect(),
        )?;
        let analytic = act_backward_params(&params, &x, &up)?;

        let flat: Vec<f64> = params.learnable.iter().flat_map(|p| p.values.clone()).collect();
        let objective = |theta: &Tensor| {
            let mut p = params.clone();
            let mut off = 0;
            for block in &mut p.learnable {
                let n = block.values.len();
                block.values.copy_from_slice(&theta.data()[off..off + n]);
                off += n;
            }
            let y = act_forward(&p, &x).expect("shape checked above");
            y.data().iter().zip(up.data()).map(|(a, b)| a * b).sum::<f64>()
        };
        let fd = finite_diff_grad(objective, &Tensor::vector(flat), None);
        let analytic_flat = analytic.iter().flat_map(|p| p.values.iter().copied());
        for (a, n) in analytic_flat.zip(fd.data()) {
            stats.record(rel_error(a, *n));
        }
    }
    Ok(Some(stats))
}

/// Whether freshly initialised parameters reproduce ReLU exactly on an evenly
/// spaced grid over `[-3M, 3M]`.
pub fn relu_equivalent_at_init(kind: ActivationKind, max_input: f64, grid: usize, seed: u64) -> Result<bool> {
    let channels = 2;
    let params = act_init(kind, max_input, channels, &mut Rng::new(seed))?;
    let lo = -3.0 * max_input;
    let step = 6.0 * max_input / (grid - 1) as f64;
    let xs: Vec<f64> = (0..grid).map(|i| lo + step * i as f64).collect();
    let n = xs.len();
    let x = Tensor::new(vec![1, channels, n / channels], xs[..n / channels * channels].to_vec())?;
    let y = act_forward(&params, &x)?;
    Ok(x
        .data()
        .iter()
        .zip(y.data())
        .all(|(&xi, &yi)| yi == if xi < 0.0 { 0.0 } else { xi }))
}

/// One row of the gradient-fidelity report.
#[derive(Debug, Clone)]
pub struct SuiteRow {
    pub kind: ActivationKind,
    pub max_input: f64,
    pub input: CheckStats,
    pub params: Option<CheckStats>,
}

impl SuiteRow {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.input.passes(tolerance) && self.params.is_none_or(|p| p.passes(tolerance))
    }
}

/// Runs the gradient checks for every kind, at both `maxInput` values where
/// the kind depends on it.
pub fn gradient_suite(points: usize, configs: usize, seed: u64) -> Result<Vec<SuiteRow>> {
    let mut rows = Vec::new();
    for kind in ActivationKind::ALL {
        let inputs: &[f64] = if kind.uses_max_input() { &[1.0, 255.0] } else { &[1.0] };
        for &m in inputs {
            let mut rng = Rng::new(crate::seed_path!(seed, kind.name(), m as u64));
            let input = check_input_grads(kind, m, points, &mut rng)?;
            let params = check_param_grads(kind, m, configs, &mut rng)?;
            rows.push(SuiteRow {
                kind,
                max_input: m,
                input,
                params,
            });
        }
    }
    Ok(rows)
}
