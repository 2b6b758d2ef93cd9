//! Compactly supported bumps underlying MeLU and GaLU.

/// `(a, λ)` pairs for the hat basis, in units of `maxInput`.
///
/// Recursive bisection of the positive axis: one wide hat, then two halves,
/// then four quarters. A MeLU/GaLU with `k` coefficients uses the first
/// `k - 1` rows.
pub const HAT_TABLE: [(f64, f64); 7] = [
    (2.0, 2.0),
    (1.0, 1.0),
    (3.0, 1.0),
    (0.5, 0.5),
    (1.5, 0.5),
    (2.5, 0.5),
    (3.5, 0.5),
];

/// `max(λM - |x - aM|, 0)`.
pub fn mexican_hat(x: f64, a: f64, lambda: f64, max_input: f64) -> f64 {
    (lambda * max_input - (x - a * max_input).abs()).max(0.0)
}

pub(crate) fn mexican_hat_slope(x: f64, a: f64, lambda: f64, max_input: f64) -> f64 {
    let d = x - a * max_input;
    if d.abs() < lambda * max_input {
        if d > 0.0 {
            -1.0
        } else if d < 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        0.0
    }
}

/// Positive hat at `aM` plus a negative lobe of the same width centred at `aM + 2λM`.
pub fn gaussian_hat(x: f64, a: f64, lambda: f64, max_input: f64) -> f64 {
    let lm = lambda * max_input;
    let lobe = ((x - a * max_input - 2.0 * lm).abs() - lm).min(0.0);
    mexican_hat(x, a, lambda, max_input) + lobe
}

pub(crate) fn gaussian_hat_slope(x: f64, a: f64, lambda: f64, max_input: f64) -> f64 {
    let lm = lambda * max_input;
    let d = x - a * max_input - 2.0 * lm;
    let lobe = if d.abs() < lm {
        if d > 0.0 {
            1.0
        } else if d < 0.0 {
            -1.0
        } else {
            0.0
        }
    } else {
        0.0
    };
    mexican_hat_slope(x, a, lambda, max_input) + lobe
}

/// Breakpoints of one hat (and, for the Gaussian-like variant, its lobe).
pub(crate) fn hat_kinks(a: f64, lambda: f64, max_input: f64, with_lobe: bool, out: &mut Vec<f64>) {
    let (c, l) = (a * max_input, lambda * max_input);
    out.extend([c - l, c, c + l]);
    if with_lobe {
        out.extend([c + 2.0 * l, c + 3.0 * l]);
    }
}
