//! Dense row-major `f64` tensors and the handful of kernels the networks need:
//! matrix product, direct 2-D cross-correlation (with its adjoints), max
//! pooling, softmax and cross-entropy.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{:?}", self.shape)?;
        if self.data.len() <= 16 {
            write!(f, " {:?}", self.data)?;
        }
        Ok(())
    }
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::dim(format!("zero-sized dimension in shape {shape:?}")));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::dim(format!(
                "shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    /// Rank-1 tensor holding `data`.
    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    /// Rank-2 tensor from nested rows. Panics on ragged input.
    pub fn matrix(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self {
            shape: vec![rows.len(), cols],
            data: rows.iter().flat_map(|r| r.iter().copied()).collect(),
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(Error::dim(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Number of elements in one entry along axis 0.
    pub fn row_len(&self) -> usize {
        self.shape[1..].iter().product()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.row_len();
        &self.data[i * w..(i + 1) * w]
    }

    /// Gather entries along axis 0 into a new tensor.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let w = self.row_len();
        let mut data = Vec::with_capacity(idx.len() * w);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        let mut shape = self.shape.clone();
        shape[0] = idx.len();
        Self { shape, data }
    }

    /// Stack equally shaped tensors along a new leading axis.
    pub fn stack(items: &[Tensor]) -> Result<Self> {
        let first = items
            .first()
            .ok_or_else(|| Error::dim("cannot stack an empty list"))?;
        let mut data = Vec::with_capacity(items.len() * first.len());
        for t in items {
            if t.shape != first.shape {
                return Err(Error::dim(format!(
                    "cannot stack {:?} with {:?}",
                    t.shape, first.shape
                )));
            }
            data.extend_from_slice(&t.data);
        }
        let mut shape = vec![items.len()];
        shape.extend_from_slice(&first.shape);
        Ok(Self { shape, data })
    }

    /// Concatenate along axis 0.
    pub fn concat_rows(a: &Tensor, b: &Tensor) -> Result<Self> {
        if a.shape[1..] != b.shape[1..] {
            return Err(Error::dim(format!(
                "cannot concatenate {:?} and {:?}",
                a.shape, b.shape
            )));
        }
        let mut shape = a.shape.clone();
        shape[0] += b.shape[0];
        let mut data = a.data.clone();
        data.extend_from_slice(&b.data);
        Ok(Self { shape, data })
    }
}

/// Standard matrix product of two rank-2 tensors.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.rank() != 2 || b.rank() != 2 {
        return Err(Error::dim(format!(
            "matmul needs rank-2 operands, got {:?} and {:?}",
            a.shape, b.shape
        )));
    }
    let (m, k) = (a.shape[0], a.shape[1]);
    let (k2, n) = (b.shape[0], b.shape[1]);
    if k != k2 {
        return Err(Error::dim(format!(
            "matmul inner dimensions differ: {:?} x {:?}",
            a.shape, b.shape
        )));
    }
    let mut out = vec![0.0; m * n];
    gemm(&a.data, &b.data, &mut out, m, k, n);
    Ok(Tensor {
        shape: vec![m, n],
        data: out,
    })
}

/// `out += a(m×k) · b(k×n)`, all row-major.
pub(crate) fn gemm(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for (p, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            for (o, &bv) in row.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *o += av * bv;
            }
        }
    }
}

/// `out += aᵀ · b` where `a` is (k×m) and `b` is (k×n).
pub(crate) fn gemm_tn(a: &[f64], b: &[f64], out: &mut [f64], k: usize, m: usize, n: usize) {
    for p in 0..k {
        let brow = &b[p * n..(p + 1) * n];
        for (i, &av) in a[p * m..(p + 1) * m].iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            for (o, &bv) in out[i * n..(i + 1) * n].iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// `out += a · bᵀ` where `a` is (m×k) and `b` is (n×k).
pub(crate) fn gemm_nt(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            out[i * n + j] += arow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
        }
    }
}

/// Geometry of one 2-D convolution; shared by the forward kernel and both adjoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub batch: usize,
    pub in_channels: usize,
    pub height: usize,
    pub width: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeometry {
    pub fn new(input: &[usize], kernels: &[usize], stride: usize, padding: usize) -> Result<Self> {
        if input.len() != 4 || kernels.len() != 4 {
            return Err(Error::dim(format!(
                "conv2d expects NCHW input and OIHW kernels, got {input:?} and {kernels:?}"
            )));
        }
        if stride == 0 {
            return Err(Error::dim("conv2d stride must be at least 1"));
        }
        if input[1] != kernels[1] {
            return Err(Error::dim(format!(
                "conv2d channel mismatch: input has {}, kernels expect {}",
                input[1], kernels[1]
            )));
        }
        let g = Self {
            batch: input[0],
            in_channels: input[1],
            height: input[2],
            width: input[3],
            out_channels: kernels[0],
            kernel_h: kernels[2],
            kernel_w: kernels[3],
            stride,
            padding,
        };
        if g.kernel_h > g.height + 2 * padding || g.kernel_w > g.width + 2 * padding {
            return Err(Error::dim(format!(
                "kernel {}x{} larger than padded input {}x{}",
                g.kernel_h,
                g.kernel_w,
                g.height + 2 * padding,
                g.width + 2 * padding
            )));
        }
        Ok(g)
    }

    pub fn out_h(&self) -> usize {
        (self.height + 2 * self.padding - self.kernel_h) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.width + 2 * self.padding - self.kernel_w) / self.stride + 1
    }

    /// Output index range along one axis whose taps at kernel offset `k` land inside the input.
    fn valid(&self, k: usize, extent: usize, out_extent: usize) -> (usize, usize) {
        let (s, p) = (self.stride, self.padding);
        // need o*s + k - p in [0, extent)
        let lo = if k >= p { 0 } else { (p - k).div_ceil(s) };
        let hi = if extent + p <= k {
            0
        } else {
            ((extent - 1 + p - k) / s + 1).min(out_extent)
        };
        (lo, hi.max(lo))
    }

    /// Calls `f(out_offset, in_offset, count)` once per contiguous run of
    /// output/input pairs for kernel tap (`ki`, `kj`) within one plane.
    #[inline]
    fn for_each_run(&self, ki: usize, kj: usize, mut f: impl FnMut(usize, usize, usize)) {
        let (oh, ow) = (self.out_h(), self.out_w());
        let (r0, r1) = self.valid(ki, self.height, oh);
        let (c0, c1) = self.valid(kj, self.width, ow);
        if c1 <= c0 {
            return;
        }
        for oi in r0..r1 {
            let ii = oi * self.stride + ki - self.padding;
            let jj0 = c0 * self.stride + kj - self.padding;
            f(oi * ow + c0, ii * self.width + jj0, c1 - c0);
        }
    }
}

/// 2-D cross-correlation of an NCHW batch with OIHW kernels.
pub fn conv2d(input: &Tensor, kernels: &Tensor, stride: usize, padding: usize) -> Result<Tensor> {
    let g = ConvGeometry::new(input.shape(), kernels.shape(), stride, padding)?;
    Ok(conv2d_forward(&g, input.data(), kernels.data(), None))
}

pub(crate) fn conv2d_forward(g: &ConvGeometry, x: &[f64], w: &[f64], bias: Option<&[f64]>) -> Tensor {
    let (oh, ow) = (g.out_h(), g.out_w());
    let plane = oh * ow;
    let in_plane = g.height * g.width;
    let ksz = g.kernel_h * g.kernel_w;
    let mut out = vec![0.0; g.batch * g.out_channels * plane];
    for n in 0..g.batch {
        for o in 0..g.out_channels {
            let dst = &mut out[(n * g.out_channels + o) * plane..][..plane];
            if let Some(b) = bias {
                dst.fill(b[o]);
            }
            for c in 0..g.in_channels {
                let src = &x[(n * g.in_channels + c) * in_plane..][..in_plane];
                let kern = &w[(o * g.in_channels + c) * ksz..][..ksz];
                for ki in 0..g.kernel_h {
                    for kj in 0..g.kernel_w {
                        let wv = kern[ki * g.kernel_w + kj];
                        if g.stride == 1 {
                            g.for_each_run(ki, kj, |od, is, len| {
                                for (d, s) in dst[od..od + len].iter_mut().zip(&src[is..is + len]) {
                                    *d += wv * s;
                                }
                            });
                        } else {
                            let st = g.stride;
                            g.for_each_run(ki, kj, |od, is, len| {
                                for t in 0..len {
                                    dst[od + t] += wv * src[is + t * st];
                                }
                            });
                        }
                    }
                }
            }
        }
    }
    Tensor {
        shape: vec![g.batch, g.out_channels, oh, ow],
        data: out,
    }
}

/// Gradients of a convolution with respect to its input, kernels and bias.
pub(crate) fn conv2d_backward(
    g: &ConvGeometry,
    x: &[f64],
    w: &[f64],
    upstream: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let plane = g.out_h() * g.out_w();
    let in_plane = g.height * g.width;
    let ksz = g.kernel_h * g.kernel_w;
    let st = g.stride;
    let mut gx = vec![0.0; x.len()];
    let mut gw = vec![0.0; w.len()];
    let mut gb = vec![0.0; g.out_channels];
    for n in 0..g.batch {
        for o in 0..g.out_channels {
            let up = &upstream[(n * g.out_channels + o) * plane..][..plane];
            gb[o] += up.iter().sum::<f64>();
            for c in 0..g.in_channels {
                let base = (n * g.in_channels + c) * in_plane;
                let src = &x[base..base + in_plane];
                let kern_off = (o * g.in_channels + c) * ksz;
                for ki in 0..g.kernel_h {
                    for kj in 0..g.kernel_w {
                        let widx = kern_off + ki * g.kernel_w + kj;
                        let wv = w[widx];
                        let mut acc = 0.0;
                        let gxp = &mut gx[base..base + in_plane];
                        g.for_each_run(ki, kj, |od, is, len| {
                            for t in 0..len {
                                let u = up[od + t];
                                acc += u * src[is + t * st];
                                gxp[is + t * st] += wv * u;
                            }
                        });
                        gw[widx] += acc;
                    }
                }
            }
        }
    }
    (gx, gw, gb)
}

/// Non-overlapping max pooling with window `size` (floor semantics).
/// Returns the pooled tensor and, for every output element, the flat index of its winner.
pub(crate) fn maxpool_forward(x: &Tensor, size: usize) -> Result<(Tensor, Vec<usize>)> {
    let s = x.shape();
    if s.len() != 4 {
        return Err(Error::dim(format!("maxpool expects NCHW, got {s:?}")));
    }
    let (n, c, h, w) = (s[0], s[1], s[2], s[3]);
    let (oh, ow) = (h / size, w / size);
    if oh == 0 || ow == 0 {
        return Err(Error::dim(format!(
            "maxpool window {size} larger than {h}x{w} input"
        )));
    }
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut arg = Vec::with_capacity(out.capacity());
    let data = x.data();
    for plane in 0..n * c {
        let base = plane * h * w;
        for oi in 0..oh {
            for oj in 0..ow {
                let mut best = base + oi * size * w + oj * size;
                for di in 0..size {
                    for dj in 0..size {
                        let idx = base + (oi * size + di) * w + oj * size + dj;
                        if data[idx] > data[best] {
                            best = idx;
                        }
                    }
                }
                out.push(data[best]);
                arg.push(best);
            }
        }
    }
    Ok((
        Tensor {
            shape: vec![n, c, oh, ow],
            data: out,
        },
        arg,
    ))
}

/// Numerically stable softmax of a rank-1 tensor.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    if logits.rank() != 1 {
        return Err(Error::dim(format!(
            "softmax expects a vector, got {:?}",
            logits.shape()
        )));
    }
    let mut out = logits.data().to_vec();
    softmax_in_place(&mut out);
    Ok(Tensor::vector(out))
}

pub(crate) fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// Probabilities below this are clamped before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CrossEntropy {
    pub loss: f64,
    /// Gradient with respect to the logits feeding the softmax: `probs - onehot(label)`.
    pub grad: Tensor,
    /// Set when `probs[label]` was below [`PROB_FLOOR`] and had to be clamped.
    pub clamped: bool,
}

pub fn cross_entropy(probs: &Tensor, label: usize) -> Result<CrossEntropy> {
    if probs.rank() != 1 {
        return Err(Error::dim(format!(
            "cross_entropy expects a vector, got {:?}",
            probs.shape()
        )));
    }
    if label >= probs.len() {
        return Err(Error::dim(format!(
            "label {label} out of range for {} classes",
            probs.len()
        )));
    }
    let p = probs.data()[label];
    let clamped = p < PROB_FLOOR;
    let loss = -p.max(PROB_FLOOR).ln();
    let mut grad = probs.clone();
    grad.data_mut()[label] -= 1.0;
    Ok(CrossEntropy {
        loss,
        grad,
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn naive_conv(x: &Tensor, k: &Tensor, s: usize, p: usize) -> Tensor {
        let (n, c, h, w) = (x.shape[0], x.shape[1], x.shape[2], x.shape[3]);
        let (o, kh, kw) = (k.shape[0], k.shape[2], k.shape[3]);
        let oh = (h + 2 * p - kh) / s + 1;
        let ow = (w + 2 * p - kw) / s + 1;
        let mut out = Tensor::zeros(&[n, o, oh, ow]);
        for b in 0..n {
            for oc in 0..o {
                for i in 0..oh {
                    for j in 0..ow {
                        let mut acc = 0.0;
                        for ic in 0..c {
                            for a in 0..kh {
                                for bb in 0..kw {
                                    let ii = (i * s + a) as isize - p as isize;
                                    let jj = (j * s + bb) as isize - p as isize;
                                    if ii < 0 || jj < 0 || ii >= h as isize || jj >= w as isize {
                                        continue;
                                    }
                                    acc += x.data[((b * c + ic) * h + ii as usize) * w + jj as usize]
                                        * k.data[((oc * c + ic) * kh + a) * kw + bb];
                                }
                            }
                        }
                        out.data[((b * o + oc) * oh + i) * ow + j] = acc;
                    }
                }
            }
        }
        out
    }

    fn random(shape: &[usize], rng: &mut Rng) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap()
    }

    #[test]
    fn new_checks_element_count() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::new(vec![2, 0], vec![]).is_err());
        assert_eq!(Tensor::new(vec![2, 3], vec![0.0; 6]).unwrap().len(), 6);
    }

    #[test]
    fn matmul_identity_and_hand_values() {
        let i2 = Tensor::matrix(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let m = Tensor::matrix(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(matmul(&i2, &m).unwrap(), m);
        let ones = Tensor::matrix(&[&[1.0], &[1.0]]);
        assert_eq!(matmul(&m, &ones).unwrap().data(), &[3.0, 7.0]);
    }

    #[test]
    fn matmul_rejects_mismatched_inner_dims() {
        let a = Tensor::zeros(&[2, 3]);
        let b = Tensor::zeros(&[2, 2]);
        assert!(matches!(matmul(&a, &b), Err(Error::Dimension(_))));
    }

    #[test]
    fn conv_unit_kernel_scales() {
        let x = Tensor::new(vec![1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let k = Tensor::new(vec![1, 1, 1, 1], vec![2.0]).unwrap();
        assert_eq!(conv2d(&x, &k, 1, 0).unwrap().data(), &[2.0, 4.0, 6.0, 8.0]);
    }

    #[test]
    fn conv_ones_kernel_sums() {
        let x = Tensor::new(vec![1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let k = Tensor::full(&[1, 1, 2, 2], 1.0);
        let y = conv2d(&x, &k, 1, 0).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 1]);
        assert_eq!(y.data(), &[10.0]);
    }

    #[test]
    fn conv_matches_naive_definition() {
        let mut rng = Rng::new(7);
        let x = random(&[1, 3, 5, 5], &mut rng);
        let k = random(&[2, 3, 3, 3], &mut rng);
        for (s, p) in [(1, 0), (1, 1), (2, 1), (2, 0), (3, 2)] {
            let fast = conv2d(&x, &k, s, p).unwrap();
            let slow = naive_conv(&x, &k, s, p);
            assert_eq!(fast.shape(), slow.shape());
            for (a, b) in fast.data().iter().zip(slow.data()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conv_rejects_oversized_kernel() {
        let x = Tensor::zeros(&[1, 1, 2, 2]);
        let k = Tensor::zeros(&[1, 1, 3, 3]);
        assert!(matches!(conv2d(&x, &k, 1, 0), Err(Error::Dimension(_))));
        assert!(conv2d(&x, &k, 1, 1).is_ok());
        let k2 = Tensor::zeros(&[1, 2, 1, 1]);
        assert!(conv2d(&x, &k2, 1, 0).is_err());
    }

    #[test]
    fn conv_backward_is_adjoint_of_forward() {
        // <conv(x), u> is bilinear in (x, w): check gx and gw against it.
        let mut rng = Rng::new(11);
        let x = random(&[2, 2, 5, 4], &mut rng);
        let w = random(&[3, 2, 3, 2], &mut rng);
        for (s, p) in [(1, 1), (2, 0), (2, 1)] {
            let g = ConvGeometry::new(x.shape(), w.shape(), s, p).unwrap();
            let y = conv2d_forward(&g, x.data(), w.data(), None);
            let u = random(y.shape(), &mut rng);
            let (gx, gw, gb) = conv2d_backward(&g, x.data(), w.data(), u.data());
            let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
            let lhs = dot(y.data(), u.data());
            assert!((dot(&gx, x.data()) - lhs).abs() < 1e-10);
            assert!((dot(&gw, w.data()) - lhs).abs() < 1e-10);
            let plane = g.out_h() * g.out_w();
            let expect_b0: f64 = (0..2)
                .map(|n| u.data()[(n * 3) * plane..(n * 3 + 1) * plane].iter().sum::<f64>())
                .sum();
            assert!((gb[0] - expect_b0).abs() < 1e-12);
        }
    }

    #[test]
    fn maxpool_picks_window_max() {
        let x = Tensor::new(
            vec![1, 1, 2, 4],
            vec![1.0, 5.0, 2.0, 0.0, 3.0, 4.0, -1.0, 7.0],
        )
        .unwrap();
        let (y, arg) = maxpool_forward(&x, 2).unwrap();
        assert_eq!(y.data(), &[5.0, 7.0]);
        assert_eq!(arg, vec![1, 7]);
    }

    #[test]
    fn softmax_known_values() {
        let s = softmax(&Tensor::vector(vec![0.0, 0.0])).unwrap();
        assert_eq!(s.data(), &[0.5, 0.5]);
        let s = softmax(&Tensor::vector(vec![1.0, 2.0, 3.0])).unwrap();
        // e^k / (e + e^2 + e^3)
        let expect = [0.09003057317038046, 0.24472847105479767, 0.6652409557748219];
        for (a, b) in s.data().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        let s = softmax(&Tensor::vector(vec![5.0, 1005.0])).unwrap();
        assert!(s.is_finite());
        assert!(s.data()[0] < 1e-300 && (s.data()[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cross_entropy_values_and_gradient() {
        let ce = cross_entropy(&Tensor::vector(vec![0.5, 0.5]), 0).unwrap();
        assert!((ce.loss - std::f64::consts::LN_2).abs() < 1e-12);
        let ce = cross_entropy(&Tensor::vector(vec![0.0, 1.0]), 1).unwrap();
        assert_eq!(ce.loss, 0.0);
        assert!(!ce.clamped);

        let p = softmax(&Tensor::vector(vec![1.0, 2.0, 3.0])).unwrap();
        let ce = cross_entropy(&p, 2).unwrap();
        let expect = [0.09003057317038046, 0.24472847105479767, -0.3347590442251781];
        for (a, b) in ce.grad.data().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_entropy_clamps_zero_probability() {
        let ce = cross_entropy(&Tensor::vector(vec![1.0, 0.0]), 1).unwrap();
        assert!(ce.clamped);
        assert!((ce.loss - (-PROB_FLOOR.ln())).abs() < 1e-12);
        assert!(cross_entropy(&Tensor::vector(vec![1.0, 0.0]), 2).is_err());
    }
}
