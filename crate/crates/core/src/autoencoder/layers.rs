//! Convolution via im2col + GEMM, nearest-neighbour upsampling and the
//! pointwise activations, each with its backward pass.

use rand::Rng;
use rand_distr::{Distribution, Normal};

/// `c (+)= a · b` for row-major views with arbitrary element strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_strides: (usize, usize),
    b: &[f64],
    b_strides: (usize, usize),
    c: &mut [f64],
    accumulate: bool,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(k == 0 || (m - 1) * a_strides.0 + (k - 1) * a_strides.1 < a.len());
    assert!(k == 0 || (k - 1) * b_strides.0 + (n - 1) * b_strides.1 < b.len());
    assert!(m * n <= c.len());
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: the asserts above bound every index dgemm touches.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0 as isize,
            a_strides.1 as isize,
            b.as_ptr(),
            b_strides.0 as isize,
            b_strides.1 as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Square-kernel 2-D convolution with "same"-style padding `kernel / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    /// `(out, in, k, k)` row-major.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrad {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv2d {
    /// He (fan-in) normal initialization, zero bias.
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize, stride: usize, rng: &mut impl Rng) -> Self {
        let fan_in = (in_channels * kernel * kernel) as f64;
        let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).expect("positive std");
        let weight = (0..out_channels * in_channels * kernel * kernel).map(|_| normal.sample(rng)).collect();
        Self { in_channels, out_channels, kernel, stride, weight, bias: vec![0.0; out_channels] }
    }

    pub fn parameter_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    fn pad(&self) -> usize {
        self.kernel / 2
    }

    pub fn out_side(&self, side: usize) -> usize {
        (side + 2 * self.pad() - self.kernel) / self.stride + 1
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    pub fn zero_grad(&self) -> ConvGrad {
        ConvGrad { weight: vec![0.0; self.weight.len()], bias: vec![0.0; self.bias.len()] }
    }

    /// Unfolds `input` (`in_channels × h × w`) into `[patch_len, oh·ow]`.
    pub fn im2col(&self, input: &[f64], h: usize, w: usize) -> Vec<f64> {
        let (oh, ow) = (self.out_side(h), self.out_side(w));
        let (k, s, pad) = (self.kernel, self.stride, self.pad() as isize);
        let p = oh * ow;
        let mut cols = vec![0.0; self.patch_len() * p];
        for c in 0..self.in_channels {
            let plane = &input[c * h * w..(c + 1) * h * w];
            for ky in 0..k {
                for kx in 0..k {
                    let row = &mut cols[((c * k + ky) * k + kx) * p..][..p];
                    for oy in 0..oh {
                        let iy = (oy * s + ky) as isize - pad;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let src = &plane[iy as usize * w..][..w];
                        let dst = &mut row[oy * ow..][..ow];
                        for (ox, d) in dst.iter_mut().enumerate() {
                            let ix = (ox * s + kx) as isize - pad;
                            if ix >= 0 && ix < w as isize {
                                *d = src[ix as usize];
                            }
                        }
                    }
                }
            }
        }
        cols
    }

    fn col2im(&self, cols: &[f64], h: usize, w: usize) -> Vec<f64> {
        let (oh, ow) = (self.out_side(h), self.out_side(w));
        let (k, s, pad) = (self.kernel, self.stride, self.pad() as isize);
        let p = oh * ow;
        let mut out = vec![0.0; self.in_channels * h * w];
        for c in 0..self.in_channels {
            let plane = &mut out[c * h * w..(c + 1) * h * w];
            for ky in 0..k {
                for kx in 0..k {
                    let row = &cols[((c * k + ky) * k + kx) * p..][..p];
                    for oy in 0..oh {
                        let iy = (oy * s + ky) as isize - pad;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let dst = &mut plane[iy as usize * w..][..w];
                        for (ox, &g) in row[oy * ow..][..ow].iter().enumerate() {
                            let ix = (ox * s + kx) as isize - pad;
                            if ix >= 0 && ix < w as isize {
                                dst[ix as usize] += g;
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Applies the convolution to unfolded columns; output is `out_channels × oh·ow`.
    pub fn forward_cols(&self, cols: &[f64], positions: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.out_channels * positions];
        for (o, row) in out.chunks_exact_mut(positions).enumerate() {
            row.fill(self.bias[o]);
        }
        let kk = self.patch_len();
        gemm(self.out_channels, kk, positions, &self.weight, (kk, 1), cols, (positions, 1), &mut out, true);
        out
    }

    pub fn forward(&self, input: &[f64], h: usize, w: usize) -> Vec<f64> {
        let cols = self.im2col(input, h, w);
        self.forward_cols(&cols, self.out_side(h) * self.out_side(w))
    }

    /// Accumulates parameter gradients; returns the input gradient when asked.
    pub fn backward(
        &self,
        cols: &[f64],
        grad_out: &[f64],
        h: usize,
        w: usize,
        grads: &mut ConvGrad,
        want_input_grad: bool,
    ) -> Option<Vec<f64>> {
        let p = self.out_side(h) * self.out_side(w);
        let kk = self.patch_len();
        for (o, row) in grad_out.chunks_exact(p).enumerate() {
            grads.bias[o] += row.iter().sum::<f64>();
        }
        // dW[out, kk] += dY[out, p] · cols[kk, p]^T
        gemm(self.out_channels, p, kk, grad_out, (p, 1), cols, (1, p), &mut grads.weight, true);
        if !want_input_grad {
            return None;
        }
        // dcols[kk, p] = W[out, kk]^T · dY[out, p]
        let mut dcols = vec![0.0; kk * p];
        gemm(kk, self.out_channels, p, &self.weight, (1, kk), grad_out, (p, 1), &mut dcols, false);
        Some(self.col2im(&dcols, h, w))
    }
}

/// Nearest-neighbour ×2 upsampling of `c × h × w`.
pub fn upsample2(input: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let (oh, ow) = (2 * h, 2 * w);
    let mut out = vec![0.0; c * oh * ow];
    for ch in 0..c {
        for y in 0..oh {
            let src = &input[(ch * h + y / 2) * w..][..w];
            let dst = &mut out[(ch * oh + y) * ow..][..ow];
            for (x, d) in dst.iter_mut().enumerate() {
                *d = src[x / 2];
            }
        }
    }
    out
}

/// Adjoint of [`upsample2`]: sums each 2×2 block. `h`, `w` are the small sides.
pub fn upsample2_backward(grad: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let ow = 2 * w;
    let mut out = vec![0.0; c * h * w];
    for ch in 0..c {
        for y in 0..2 * h {
            let src = &grad[(ch * 2 * h + y) * ow..][..ow];
            let dst = &mut out[(ch * h + y / 2) * w..][..w];
            for (x, &g) in src.iter().enumerate() {
                dst[x / 2] += g;
            }
        }
    }
    out
}

pub fn relu_in_place(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// Masks `grad` by the positive part of the activation output.
pub fn relu_backward(grad: &mut [f64], activated: &[f64]) {
    for (g, &a) in grad.iter_mut().zip(activated) {
        if a <= 0.0 {
            *g = 0.0;
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn naive_conv(conv: &Conv2d, input: &[f64], h: usize, w: usize) -> Vec<f64> {
        let (oh, ow) = (conv.out_side(h), conv.out_side(w));
        let k = conv.kernel;
        let pad = (k / 2) as isize;
        let mut out = vec![0.0; conv.out_channels * oh * ow];
        for o in 0..conv.out_channels {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = conv.bias[o];
                    for c in 0..conv.in_channels {
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = (oy * conv.stride + ky) as isize - pad;
                                let ix = (ox * conv.stride + kx) as isize - pad;
                                if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                                    acc += conv.weight[((o * conv.in_channels + c) * k + ky) * k + kx]
                                        * input[(c * h + iy as usize) * w + ix as usize];
                                }
                            }
                        }
                    }
                    out[(o * oh + oy) * ow + ox] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(cin, cout, k, s, h, w) in &[(3, 4, 3, 1, 5, 6), (2, 3, 3, 2, 8, 8), (4, 2, 1, 1, 3, 3), (1, 1, 3, 2, 7, 5)] {
            let mut conv = Conv2d::new(cin, cout, k, s, &mut rng);
            conv.bias = (0..cout).map(|i| i as f64 * 0.1).collect();
            let input: Vec<f64> = (0..cin * h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
            let fast = conv.forward(&input, h, w);
            let slow = naive_conv(&conv, &input, h, w);
            assert_eq!(fast.len(), slow.len());
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conv_backward_is_adjoint() {
        // <conv(x) - b, g> == <x, dX(g)> for the linear part
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (cin, cout, h, w) = (3, 2, 6, 6);
        let conv = Conv2d::new(cin, cout, 3, 2, &mut rng);
        let x: Vec<f64> = (0..cin * h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..cout * 9).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = conv.forward(&x, h, w);
        let lhs: f64 = y.iter().zip(&g).map(|(a, b)| a * b).sum();
        let mut grads = conv.zero_grad();
        let dx = conv.backward(&conv.im2col(&x, h, w), &g, h, w, &mut grads, true).unwrap();
        let rhs: f64 = x.iter().zip(&dx).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
        // d<y,g>/dW[i] pairs with x, so <W, dW> equals the linear part too
        let lin: f64 = conv.weight.iter().zip(&grads.weight).map(|(a, b)| a * b).sum();
        assert!((lin - rhs).abs() < 1e-10);
    }

    #[test]
    fn upsample_roundtrip_adjoint() {
        let x = vec![1.0, 2.0, 3.0, 4.0];
        let up = upsample2(&x, 1, 2, 2);
        assert_eq!(up.len(), 16);
        assert_eq!(&up[..4], &[1.0, 1.0, 2.0, 2.0]);
        assert_eq!(upsample2_backward(&up, 1, 2, 2), vec![4.0, 8.0, 12.0, 16.0]);
    }

    #[test]
    fn stride_two_halves() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let conv = Conv2d::new(1, 1, 3, 2, &mut rng);
        assert_eq!(conv.out_side(256), 128);
        assert_eq!(conv.out_side(2), 1);
    }
}
