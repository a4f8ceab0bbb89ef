//! Convolution via im2col and single-precision GEMM.

use alloc::vec;
use alloc::vec::Vec;

/// `c = a * b + beta * c` for row-major `a: m x k`, `b: k x n`; either operand
/// may be passed as the transpose of what is stored.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f32], a_t: bool, b: &[f32], b_t: bool, beta: f32, c: &mut [f32]) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserts above bound every index the strides can reach.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub(crate) const LEAK: f32 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Conv2d {
    pub cin: usize,
    pub cout: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub leaky: bool,
    pub w_off: usize,
    pub b_off: usize,
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct ConvCache {
    pub col: Vec<f32>,
    pub out: Vec<f32>,
    pub in_h: usize,
    pub in_w: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl Conv2d {
    pub fn patch_len(&self) -> usize {
        self.cin * self.k * self.k
    }

    pub fn weight_len(&self) -> usize {
        self.cout * self.patch_len()
    }

    pub fn out_dim(&self, d: usize) -> usize {
        (d + 2 * self.pad - self.k) / self.stride + 1
    }

    fn im2col(&self, input: &[f32], h: usize, w: usize, oh: usize, ow: usize) -> Vec<f32> {
        let p = oh * ow;
        let mut col = vec![0.0f32; self.patch_len() * p];
        for ci in 0..self.cin {
            let plane = &input[ci * h * w..(ci + 1) * h * w];
            for ky in 0..self.k {
                for kx in 0..self.k {
                    let row = (ci * self.k + ky) * self.k + kx;
                    let dst = &mut col[row * p..(row + 1) * p];
                    for oy in 0..oh {
                        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                        let d = &mut dst[oy * ow..(oy + 1) * ow];
                        for (ox, v) in d.iter_mut().enumerate() {
                            let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                            if ix >= 0 && ix < w as isize {
                                *v = src[ix as usize];
                            }
                        }
                    }
                }
            }
        }
        col
    }

    fn col2im(&self, col: &[f32], h: usize, w: usize, oh: usize, ow: usize) -> Vec<f32> {
        let p = oh * ow;
        let mut out = vec![0.0f32; self.cin * h * w];
        for ci in 0..self.cin {
            let plane = &mut out[ci * h * w..(ci + 1) * h * w];
            for ky in 0..self.k {
                for kx in 0..self.k {
                    let row = (ci * self.k + ky) * self.k + kx;
                    let src = &col[row * p..(row + 1) * p];
                    for oy in 0..oh {
                        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let dst = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                        for ox in 0..ow {
                            let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                            if ix >= 0 && ix < w as isize {
                                dst[ix as usize] += src[oy * ow + ox];
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn forward(&self, params: &[f32], input: &[f32], h: usize, w: usize) -> ConvCache {
        let (oh, ow) = (self.out_dim(h), self.out_dim(w));
        let p = oh * ow;
        let col = self.im2col(input, h, w, oh, ow);
        let mut out = vec![0.0f32; self.cout * p];
        for (co, row) in out.chunks_exact_mut(p).enumerate() {
            row.fill(params[self.b_off + co]);
        }
        let weight = &params[self.w_off..self.w_off + self.weight_len()];
        gemm(self.cout, self.patch_len(), p, weight, false, &col, false, 1.0, &mut out);
        if self.leaky {
            for v in &mut out {
                if *v < 0.0 {
                    *v *= LEAK;
                }
            }
        }
        ConvCache { col, out, in_h: h, in_w: w, out_h: oh, out_w: ow }
    }

    /// Backward pass. `grad_out` is d loss / d output (post-activation) and is
    /// consumed. Adds weight gradients into `grad_params` when given and
    /// returns d loss / d input when `want_input`.
    pub fn backward(
        &self,
        params: &[f32],
        cache: &ConvCache,
        mut grad_out: Vec<f32>,
        grad_params: Option<&mut [f32]>,
        want_input: bool,
    ) -> Option<Vec<f32>> {
        let p = cache.out_h * cache.out_w;
        if self.leaky {
            for (g, &a) in grad_out.iter_mut().zip(&cache.out) {
                if a < 0.0 {
                    *g *= LEAK;
                }
            }
        }
        if let Some(gp) = grad_params {
            let kk = self.patch_len();
            let gw = &mut gp[self.w_off..self.w_off + self.weight_len()];
            gemm(self.cout, p, kk, &grad_out, false, &cache.col, true, 1.0, gw);
            for (co, row) in grad_out.chunks_exact(p).enumerate() {
                gp[self.b_off + co] += row.iter().sum::<f32>();
            }
        }
        if !want_input {
            return None;
        }
        let weight = &params[self.w_off..self.w_off + self.weight_len()];
        let mut dcol = vec![0.0f32; self.patch_len() * p];
        gemm(self.patch_len(), self.cout, p, weight, true, &grad_out, false, 0.0, &mut dcol);
        Some(self.col2im(&dcol, cache.in_h, cache.in_w, cache.out_h, cache.out_w))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct convolution used as the reference.
    fn naive(conv: &Conv2d, params: &[f32], input: &[f32], h: usize, w: usize) -> Vec<f32> {
        let (oh, ow) = (conv.out_dim(h), conv.out_dim(w));
        let mut out = vec![0.0; conv.cout * oh * ow];
        for co in 0..conv.cout {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = params[conv.b_off + co];
                    for ci in 0..conv.cin {
                        for ky in 0..conv.k {
                            for kx in 0..conv.k {
                                let iy = (oy * conv.stride + ky) as isize - conv.pad as isize;
                                let ix = (ox * conv.stride + kx) as isize - conv.pad as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                    continue;
                                }
                                let wi = conv.w_off + ((co * conv.cin + ci) * conv.k + ky) * conv.k + kx;
                                acc += params[wi] * input[(ci * h + iy as usize) * w + ix as usize];
                            }
                        }
                    }
                    out[(co * oh + oy) * ow + ox] = if conv.leaky && acc < 0.0 { acc * LEAK } else { acc };
                }
            }
        }
        out
    }

    fn lcg(n: usize, seed: u32) -> Vec<f32> {
        let mut s = seed;
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(1_664_525).wrapping_add(1_013_904_223);
                (s >> 8) as f32 / (1u32 << 24) as f32 - 0.5
            })
            .collect()
    }

    #[test]
    fn im2col_conv_matches_direct() {
        for &(k, stride, pad) in &[(3, 1, 1), (3, 2, 1), (4, 4, 0), (1, 1, 0)] {
            let conv = Conv2d { cin: 3, cout: 5, k, stride, pad, leaky: true, w_off: 0, b_off: 5 * 3 * k * k };
            let params = lcg(conv.b_off + 5, 7);
            let input = lcg(3 * 12 * 8, 3);
            let got = conv.forward(&params, &input, 12, 8).out;
            let want = naive(&conv, &params, &input, 12, 8);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-5, "k={k} s={stride}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let conv = Conv2d { cin: 2, cout: 3, k: 3, stride: 2, pad: 1, leaky: true, w_off: 0, b_off: 54 };
        let params: Vec<f32> = lcg(57, 11);
        let input = lcg(2 * 6 * 6, 5);
        let weights = lcg(3 * 3 * 3, 17);
        let loss = |p: &[f32], x: &[f32]| -> f64 {
            naive(&conv, p, x, 6, 6).iter().zip(&weights).map(|(a, b)| (*a as f64) * (*b as f64)).sum()
        };
        let cache = conv.forward(&params, &input, 6, 6);
        let mut gp = vec![0.0; params.len()];
        let gx = conv.backward(&params, &cache, weights.clone(), Some(&mut gp), true).unwrap();
        let h = 1e-2f32;
        for i in [0usize, 7, 20, 40, 54, 56] {
            let mut a = params.clone();
            let mut b = params.clone();
            a[i] += h;
            b[i] -= h;
            let fd = (loss(&a, &input) - loss(&b, &input)) / (2.0 * h as f64);
            assert!((fd - gp[i] as f64).abs() < 2e-3, "param {i}: {fd} vs {}", gp[i]);
        }
        for i in [0usize, 13, 35, 71] {
            let mut a = input.clone();
            let mut b = input.clone();
            a[i] += h;
            b[i] -= h;
            let fd = (loss(&params, &a) - loss(&params, &b)) / (2.0 * h as f64);
            assert!((fd - gx[i] as f64).abs() < 2e-3, "input {i}: {fd} vs {}", gx[i]);
        }
    }
}
