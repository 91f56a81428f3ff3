//! Layers with explicit forward/backward passes. Each layer caches what its
//! backward pass needs from the most recent forward call, so a layer
//! instance appears at most once per graph.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

use super::Tensor4;

/// Trainable parameter with its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Vec<f64>) -> Self {
        let grad = vec![0.0; value.len()];
        Param {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }
}

/// Common interface used by the networks and the gradient checker.
pub trait Layer {
    fn forward(&mut self, x: &Tensor4) -> Result<Tensor4>;
    /// Returns the input gradient and accumulates parameter gradients.
    fn backward(&mut self, gy: &Tensor4) -> Tensor4;
    fn params_mut(&mut self) -> Vec<&mut Param> {
        Vec::new()
    }
    /// Output `(C, H, W)` for an input `(C, H, W)`.
    fn out_shape(&self, input: [usize; 3]) -> Result<[usize; 3]>;
}

fn shape_err(kind: &str, expected: impl std::fmt::Debug, got: impl std::fmt::Debug) -> Error {
    Error::Shape(format!("{kind}: expected input {expected:?}, got {got:?}"))
}

/// `C = A(m x k) * B(k x n)` with explicit strides, accumulated into `C` when
/// `beta = 1`.
#[allow(clippy::too_many_arguments)]
#[inline]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (isize, isize),
    b: &[f64],
    (rsb, csb): (isize, isize),
    beta: f64,
    c: &mut [f64],
) {
    assert!(c.len() >= m * n);
    // SAFETY: the strides describe matrices lying within the slices; checked
    // by the callers' shape logic and the length assertions below.
    debug_assert!(a.len() >= m * k && b.len() >= k * n);
    unsafe {
        matrixmultiply::dgemm(
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

/// 2D convolution with zero padding.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub cin: usize,
    pub cout: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    /// `(cout, cin, k, k)`.
    pub weight: Param,
    pub bias: Param,
    input: Option<Tensor4>,
}

impl Conv2d {
    /// He-uniform weights (`U(-b, b)`, `b = sqrt(6 / fan_in)`), zero bias.
    pub fn new(name: &str, cin: usize, cout: usize, k: usize, stride: usize, pad: usize, rng: &mut impl Rng) -> Self {
        let fan_in = (cin * k * k) as f64;
        let b = (6.0 / fan_in).sqrt();
        let w = (0..cout * cin * k * k).map(|_| rng.random_range(-b..b)).collect();
        Conv2d {
            cin,
            cout,
            k,
            stride,
            pad,
            weight: Param::new(format!("{name}.weight"), w),
            bias: Param::new(format!("{name}.bias"), vec![0.0; cout]),
            input: None,
        }
    }

    fn out_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let (hp, wp) = (h + 2 * self.pad, w + 2 * self.pad);
        if hp < self.k || wp < self.k {
            return Err(Error::Shape(format!("conv{0}x{0}: input {h}x{w} too small", self.k)));
        }
        Ok(((hp - self.k) / self.stride + 1, (wp - self.k) / self.stride + 1))
    }

    fn im2col(&self, x: &[f64], h: usize, w: usize, ho: usize, wo: usize, col: &mut [f64]) {
        let (k, s, p) = (self.k, self.stride as isize, self.pad as isize);
        let hw = ho * wo;
        for ci in 0..self.cin {
            let xc = &x[ci * h * w..(ci + 1) * h * w];
            for ky in 0..k {
                for kx in 0..k {
                    let row = &mut col[((ci * k + ky) * k + kx) * hw..][..hw];
                    for oy in 0..ho {
                        let iy = oy as isize * s - p + ky as isize;
                        let out = &mut row[oy * wo..(oy + 1) * wo];
                        if iy < 0 || iy >= h as isize {
                            out.iter_mut().for_each(|v| *v = 0.0);
                            continue;
                        }
                        let xr = &xc[iy as usize * w..(iy as usize + 1) * w];
                        for (ox, v) in out.iter_mut().enumerate() {
                            let ix = ox as isize * s - p + kx as isize;
                            *v = if ix >= 0 && ix < w as isize { xr[ix as usize] } else { 0.0 };
                        }
                    }
                }
            }
        }
    }

    fn col2im(&self, col: &[f64], h: usize, w: usize, ho: usize, wo: usize, gx: &mut [f64]) {
        let (k, s, p) = (self.k, self.stride as isize, self.pad as isize);
        let hw = ho * wo;
        for ci in 0..self.cin {
            let gc = &mut gx[ci * h * w..(ci + 1) * h * w];
            for ky in 0..k {
                for kx in 0..k {
                    let row = &col[((ci * k + ky) * k + kx) * hw..][..hw];
                    for oy in 0..ho {
                        let iy = oy as isize * s - p + ky as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let gr = &mut gc[iy as usize * w..(iy as usize + 1) * w];
                        for ox in 0..wo {
                            let ix = ox as isize * s - p + kx as isize;
                            if ix >= 0 && ix < w as isize {
                                gr[ix as usize] += row[oy * wo + ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

impl Layer for Conv2d {
    fn forward(&mut self, x: &Tensor4) -> Result<Tensor4> {
        if x.c != self.cin {
            return Err(shape_err("conv", (self.cin, "H", "W"), x.chw()));
        }
        let (ho, wo) = self.out_hw(x.h, x.w)?;
        let kk = self.cin * self.k * self.k;
        let mut y = Tensor4::zeros(x.n, self.cout, ho, wo);
        let ylen = y.sample_len();
        y.data.par_chunks_mut(ylen).enumerate().for_each(|(i, ys)| {
            let mut col = vec![0.0; kk * ho * wo];
            self.im2col(x.sample(i), x.h, x.w, ho, wo, &mut col);
            for (co, chunk) in ys.chunks_mut(ho * wo).enumerate() {
                chunk.iter_mut().for_each(|v| *v = self.bias.value[co]);
            }
            gemm(
                self.cout,
                kk,
                ho * wo,
                &self.weight.value,
                (kk as isize, 1),
                &col,
                ((ho * wo) as isize, 1),
                1.0,
                ys,
            );
        });
        self.input = Some(x.clone());
        Ok(y)
    }

    fn backward(&mut self, gy: &Tensor4) -> Tensor4 {
        let x = self.input.as_ref().expect("conv backward before forward");
        let (ho, wo) = (gy.h, gy.w);
        let kk = self.cin * self.k * self.k;
        let hw = ho * wo;
        let parts: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..x.n)
            .into_par_iter()
            .map(|i| {
                let mut col = vec![0.0; kk * hw];
                self.im2col(x.sample(i), x.h, x.w, ho, wo, &mut col);
                let g = gy.sample(i);
                let mut gw = vec![0.0; self.cout * kk];
                // gW = gY (cout x hw) * col^T (hw x kk)
                gemm(self.cout, hw, kk, g, (hw as isize, 1), &col, (1, hw as isize), 0.0, &mut gw);
                let gb: Vec<f64> = g.chunks(hw).map(|c| c.iter().sum()).collect();
                // gcol = W^T (kk x cout) * gY (cout x hw)
                let mut gcol = vec![0.0; kk * hw];
                gemm(kk, self.cout, hw, &self.weight.value, (1, kk as isize), g, (hw as isize, 1), 0.0, &mut gcol);
                let mut gx = vec![0.0; x.sample_len()];
                self.col2im(&gcol, x.h, x.w, ho, wo, &mut gx);
                (gw, gb, gx)
            })
            .collect();
        let mut gx = x.zeros_like();
        for (i, (gw, gb, gxi)) in parts.into_iter().enumerate() {
            for (a, b) in self.weight.grad.iter_mut().zip(&gw) {
                *a += b;
            }
            for (a, b) in self.bias.grad.iter_mut().zip(&gb) {
                *a += b;
            }
            gx.sample_mut(i).copy_from_slice(&gxi);
        }
        gx
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }

    fn out_shape(&self, input: [usize; 3]) -> Result<[usize; 3]> {
        if input[0] != self.cin {
            return Err(shape_err("conv", (self.cin, "H", "W"), input));
        }
        let (h, w) = self.out_hw(input[1], input[2])?;
        Ok([self.cout, h, w])
    }
}

/// Per-channel batch normalization with running statistics.
#[derive(Debug, Clone)]
pub struct BatchNorm2d {
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
    pub training: bool,
    cache: Option<(Tensor4, Vec<f64>)>,
}

impl BatchNorm2d {
    pub fn new(name: &str, c: usize) -> Self {
        BatchNorm2d {
            gamma: Param::new(format!("{name}.gamma"), vec![1.0; c]),
            beta: Param::new(format!("{name}.beta"), vec![0.0; c]),
            running_mean: vec![0.0; c],
            running_var: vec![1.0; c],
            momentum: 0.1,
            eps: 1e-5,
            training: true,
            cache: None,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.value.len()
    }
}

impl Layer for BatchNorm2d {
    fn forward(&mut self, x: &Tensor4) -> Result<Tensor4> {
        let c = self.channels();
        if x.c != c {
            return Err(shape_err("batchnorm", (c, "H", "W"), x.chw()));
        }
        let plane = x.plane();
        let m = (x.n * plane) as f64;
        let mut xhat = x.zeros_like();
        let mut inv_std = vec![0.0; c];
        for ch in 0..c {
            let idx = |n: usize| (n * c + ch) * plane;
            let (mean, var) = if self.training {
                let mut s = 0.0;
                for n in 0..x.n {
                    s += x.data[idx(n)..idx(n) + plane].iter().sum::<f64>();
                }
                let mean = s / m;
                let mut v = 0.0;
                for n in 0..x.n {
                    v += x.data[idx(n)..idx(n) + plane].iter().map(|a| (a - mean).powi(2)).sum::<f64>();
                }
                let var = v / m;
                let unbiased = if m > 1.0 { v / (m - 1.0) } else { var };
                self.running_mean[ch] = (1.0 - self.momentum) * self.running_mean[ch] + self.momentum * mean;
                self.running_var[ch] = (1.0 - self.momentum) * self.running_var[ch] + self.momentum * unbiased;
                (mean, var)
            } else {
                (self.running_mean[ch], self.running_var[ch])
            };
            let is = 1.0 / (var + self.eps).sqrt();
            inv_std[ch] = is;
            for n in 0..x.n {
                for p in idx(n)..idx(n) + plane {
                    xhat.data[p] = (x.data[p] - mean) * is;
                }
            }
        }
        let mut y = xhat.clone();
        for n in 0..x.n {
            for ch in 0..c {
                let o = (n * c + ch) * plane;
                let (g, b) = (self.gamma.value[ch], self.beta.value[ch]);
                y.data[o..o + plane].iter_mut().for_each(|v| *v = g * *v + b);
            }
        }
        self.cache = Some((xhat, inv_std));
        Ok(y)
    }

    fn backward(&mut self, gy: &Tensor4) -> Tensor4 {
        let (xhat, inv_std) = self.cache.as_ref().expect("batchnorm backward before forward");
        let c = self.channels();
        let plane = gy.plane();
        let m = (gy.n * plane) as f64;
        let mut gx = gy.zeros_like();
        for ch in 0..c {
            let (mut sg, mut sgx) = (0.0, 0.0);
            for n in 0..gy.n {
                let o = (n * c + ch) * plane;
                for p in o..o + plane {
                    sg += gy.data[p];
                    sgx += gy.data[p] * xhat.data[p];
                }
            }
            self.beta.grad[ch] += sg;
            self.gamma.grad[ch] += sgx;
            let k = self.gamma.value[ch] * inv_std[ch];
            for n in 0..gy.n {
                let o = (n * c + ch) * plane;
                for p in o..o + plane {
                    gx.data[p] = if self.training {
                        k * (gy.data[p] - sg / m - xhat.data[p] * sgx / m)
                    } else {
                        k * gy.data[p]
                    };
                }
            }
        }
        gx
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.gamma, &mut self.beta]
    }

    fn out_shape(&self, input: [usize; 3]) -> Result<[usize; 3]> {
        if input[0] != self.channels() {
            return Err(shape_err("batchnorm", (self.channels(), "H", "W"), input));
        }
        Ok(input)
    }
}

/// Rectified linear unit; the derivative at 0 is taken as 0.
#[derive(Debug, Clone, Default)]
pub struct Relu {
    active: Vec<bool>,
}

impl Layer for Relu {
    fn forward(&mut self, x: &Tensor4) -> Result<Tensor4> {
        self.active = x.data.iter().map(|&v| v > 0.0).collect();
        let mut y = x.clone();
        y.data.iter_mut().for_each(|v| *v = v.max(0.0));
        Ok(y)
    }

    fn backward(&mut self, gy: &Tensor4) -> Tensor4 {
        let mut gx = gy.clone();
        for (g, &a) in gx.data.iter_mut().zip(&self.active) {
            if !a {
                *g = 0.0;
            }
        }
        gx
    }

    fn out_shape(&self, input: [usize; 3]) -> Result<[usize; 3]> {
        Ok(input)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Sigmoid {
    out: Vec<f64>,
}

impl Layer for Sigmoid {
    fn forward(&mut self, x: &Tensor4) -> Result<Tensor4> {
        let mut y = x.clone();
        y.data.iter_mut().for_each(|v| *v = 1.0 / (1.0 + (-*v).exp()));
        self.out = y.data.clone();
        Ok(y)
    }

    fn backward(&mut self, gy: &Tensor4) -> Tensor4 {
        let mut gx = gy.clone();
        for (g, &s) in gx.data.iter_mut().zip(&self.out) {
            *g *= s * (1.0 - s);
        }
        gx
    }

    fn out_shape(&self, input: [usize; 3]) -> Result<[usize; 3]> {
        Ok(input)
    }
}

/// Two-tap linear interpolation weights for doubling a length-`n` axis with
/// half-pixel alignment: output `o` reads source `(o + 0.5) / 2 - 0.5`,
/// clamped to the valid range.
fn up_taps(n: usize) -> Vec<(usize, usize, f64)> {
    (0..2 * n)
        .map(|o| {
            let s = ((o as f64 + 0.5) * 0.5 - 0.5).clamp(0.0, (n - 1) as f64);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(n - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

/// Bilinear 2x upsampling.
#[derive(Debug, Clone, Default)]
pub struct Upsample2x {
    in_shape: [usize; 4],
}

impl Upsample2x {
    pub fn apply(x: &Tensor4) -> Tensor4 {
        let (ty, tx) = (up_taps(x.h), up_taps(x.w));
        let (ho, wo) = (2 * x.h, 2 * x.w);
        let mut y = Tensor4::zeros(x.n, x.c, ho, wo);
        let mut tmp = vec![0.0; x.h * wo];
        for (src, dst) in x.data.chunks(x.plane()).zip(y.data.chunks_mut(ho * wo)) {
            for r in 0..x.h {
                for (o, &(a, b, t)) in tx.iter().enumerate() {
                    tmp[r * wo + o] = (1.0 - t) * src[r * x.w + a] + t * src[r * x.w + b];
                }
            }
            for (o, &(a, b, t)) in ty.iter().enumerate() {
                for c in 0..wo {
                    dst[o * wo + c] = (1.0 - t) * tmp[a * wo + c] + t * tmp[b * wo + c];
                }
            }
        }
        y
    }

    pub fn apply_transpose(gy: &Tensor4) -> Tensor4 {
        let (h, w) = (gy.h / 2, gy.w / 2);
        let (ty, tx) = (up_taps(h), up_taps(w));
        let mut gx = Tensor4::zeros(gy.n, gy.c, h, w);
        let mut tmp = vec![0.0; h * gy.w];
        for (src, dst) in gy.data.chunks(gy.plane()).zip(gx.data.chunks_mut(h * w)) {
            tmp.iter_mut().for_each(|v| *v = 0.0);
            for (o, &(a, b, t)) in ty.iter().enumerate() {
                for c in 0..gy.w {
                    tmp[a * gy.w + c] += (1.0 - t) * src[o * gy.w + c];
                    tmp[b * gy.w + c] += t * src[o * gy.w + c];
                }
            }
            for r in 0..h {
                for (o, &(a, b, t)) in tx.iter().enumerate() {
                    dst[r * w + a] += (1.0 - t) * tmp[r * gy.w + o];
                    dst[r * w + b] += t * tmp[r * gy.w + o];
                }
            }
        }
        gx
    }
}

impl Layer for Upsample2x {
    fn forward(&mut self, x: &Tensor4) -> Result<Tensor4> {
        self.in_shape = x.shape();
        Ok(Upsample2x::apply(x))
    }

    fn backward(&mut self, gy: &Tensor4) -> Tensor4 {
        Upsample2x::apply_transpose(gy)
    }

    fn out_shape(&self, input: [usize; 3]) -> Result<[usize; 3]> {
        Ok([input[0], 2 * input[1], 2 * input[2]])
    }
}

/// Channel concatenation.
pub fn concat(parts: &[&Tensor4]) -> Result<Tensor4> {
    let first = parts.first().ok_or_else(|| Error::Shape("concat of nothing".into()))?;
    for p in parts {
        if (p.n, p.h, p.w) != (first.n, first.h, first.w) {
            return Err(shape_err("concat", (first.n, "C", first.h, first.w), p.shape()));
        }
    }
    let c: usize = parts.iter().map(|p| p.c).sum();
    let mut y = Tensor4::zeros(first.n, c, first.h, first.w);
    let mut off = 0;
    for n in 0..first.n {
        for p in parts {
            let s = p.sample(n);
            y.data[off..off + s.len()].copy_from_slice(s);
            off += s.len();
        }
    }
    Ok(y)
}

/// Splits a concatenated gradient back into parts with `channels` each.
pub fn split(gy: &Tensor4, channels: &[usize]) -> Vec<Tensor4> {
    let mut out: Vec<Tensor4> = channels.iter().map(|&c| Tensor4::zeros(gy.n, c, gy.h, gy.w)).collect();
    let mut off = 0;
    for n in 0..gy.n {
        for t in out.iter_mut() {
            let len = t.sample_len();
            t.sample_mut(n).copy_from_slice(&gy.data[off..off + len]);
            off += len;
        }
    }
    out
}

/// Conv, batch norm, ReLU.
#[derive(Debug, Clone)]
pub struct ConvBnRelu {
    pub conv: Conv2d,
    pub bn: BatchNorm2d,
    relu: Relu,
}

impl ConvBnRelu {
    pub fn new(name: &str, cin: usize, cout: usize, stride: usize, rng: &mut impl Rng) -> Self {
        ConvBnRelu {
            conv: Conv2d::new(&format!("{name}.conv"), cin, cout, 3, stride, 1, rng),
            bn: BatchNorm2d::new(&format!("{name}.bn"), cout),
            relu: Relu::default(),
        }
    }
}

impl Layer for ConvBnRelu {
    fn forward(&mut self, x: &Tensor4) -> Result<Tensor4> {
        let y = self.conv.forward(x)?;
        let y = self.bn.forward(&y)?;
        self.relu.forward(&y)
    }

    fn backward(&mut self, gy: &Tensor4) -> Tensor4 {
        let g = self.relu.backward(gy);
        let g = self.bn.backward(&g);
        self.conv.backward(&g)
    }

    /// The conv bias stays at zero: batch norm cancels any per-channel shift.
    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = vec![&mut self.conv.weight];
        p.extend(self.bn.params_mut());
        p
    }

    fn out_shape(&self, input: [usize; 3]) -> Result<[usize; 3]> {
        self.bn.out_shape(self.conv.out_shape(input)?)
    }
}

/// Bilinear 2x upsample followed by conv, batch norm, ReLU.
#[derive(Debug, Clone)]
pub struct UpBlock {
    up: Upsample2x,
    pub block: ConvBnRelu,
}

impl UpBlock {
    pub fn new(name: &str, cin: usize, cout: usize, rng: &mut impl Rng) -> Self {
        UpBlock {
            up: Upsample2x::default(),
            block: ConvBnRelu::new(name, cin, cout, 1, rng),
        }
    }
}

impl Layer for UpBlock {
    fn forward(&mut self, x: &Tensor4) -> Result<Tensor4> {
        let u = self.up.forward(x)?;
        self.block.forward(&u)
    }

    fn backward(&mut self, gy: &Tensor4) -> Tensor4 {
        let g = self.block.backward(gy);
        self.up.backward(&g)
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.block.params_mut()
    }

    fn out_shape(&self, input: [usize; 3]) -> Result<[usize; 3]> {
        self.block.out_shape(self.up.out_shape(input)?)
    }
}

/// 3x3 conv to three channels followed by a sigmoid.
#[derive(Debug, Clone)]
pub struct UvHead {
    pub conv: Conv2d,
    sigmoid: Sigmoid,
}

impl UvHead {
    pub fn new(name: &str, cin: usize, rng: &mut impl Rng) -> Self {
        UvHead {
            conv: Conv2d::new(&format!("{name}.conv"), cin, 3, 3, 1, 1, rng),
            sigmoid: Sigmoid::default(),
        }
    }
}

impl Layer for UvHead {
    fn forward(&mut self, x: &Tensor4) -> Result<Tensor4> {
        let y = self.conv.forward(x)?;
        self.sigmoid.forward(&y)
    }

    fn backward(&mut self, gy: &Tensor4) -> Tensor4 {
        let g = self.sigmoid.backward(gy);
        self.conv.backward(&g)
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.conv.params_mut()
    }

    fn out_shape(&self, input: [usize; 3]) -> Result<[usize; 3]> {
        self.conv.out_shape(input)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rand_tensor(n: usize, c: usize, h: usize, w: usize, seed: u64) -> Tensor4 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Tensor4::from_vec(n, c, h, w, (0..n * c * h * w).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn identity_kernel() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut conv = Conv2d::new("c", 2, 2, 3, 1, 1, &mut rng);
        conv.weight.value.iter_mut().for_each(|w| *w = 0.0);
        for c in 0..2 {
            conv.weight.value[((c * 2 + c) * 3 + 1) * 3 + 1] = 1.0;
        }
        let x = rand_tensor(2, 2, 5, 4, 1);
        assert_eq!(conv.forward(&x).unwrap(), x);
    }

    #[test]
    fn stride_two_halves() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let conv = Conv2d::new("c", 3, 8, 3, 2, 1, &mut rng);
        assert_eq!(conv.out_shape([3, 256, 256]).unwrap(), [8, 128, 128]);
        assert!(conv.out_shape([4, 8, 8]).is_err());
    }

    #[test]
    fn relu_of_negative() {
        let mut r = Relu::default();
        let x = Tensor4::from_vec(1, 1, 1, 3, vec![-1.0, -0.5, -2.0]).unwrap();
        assert!(r.forward(&x).unwrap().data.iter().all(|&v| v == 0.0));
        let g = r.backward(&Tensor4::from_vec(1, 1, 1, 3, vec![1.0; 3]).unwrap());
        assert!(g.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn upsample_of_constant() {
        let x = Tensor4::from_vec(1, 1, 3, 3, vec![0.25; 9]).unwrap();
        let y = Upsample2x::apply(&x);
        assert_eq!(y.shape(), [1, 1, 6, 6]);
        assert!(y.data.iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn upsample_transpose_is_adjoint() {
        let x = rand_tensor(2, 2, 3, 5, 3);
        let g = rand_tensor(2, 2, 6, 10, 4);
        let lhs: f64 = Upsample2x::apply(&x).data.iter().zip(&g.data).map(|(a, b)| a * b).sum();
        let rhs: f64 = Upsample2x::apply_transpose(&g).data.iter().zip(&x.data).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn concat_split_round_trip() {
        let a = rand_tensor(2, 1, 3, 3, 5);
        let b = rand_tensor(2, 3, 3, 3, 6);
        let y = concat(&[&a, &b]).unwrap();
        let parts = split(&y, &[1, 3]);
        assert_eq!(parts[0], a);
        assert_eq!(parts[1], b);
    }

    #[test]
    fn batchnorm_eval_uses_running_stats() {
        let mut bn = BatchNorm2d::new("bn", 2);
        bn.training = false;
        bn.running_mean = vec![1.0, -1.0];
        bn.running_var = vec![4.0, 1.0];
        bn.eps = 0.0;
        let x = Tensor4::from_vec(1, 2, 1, 1, vec![3.0, 0.0]).unwrap();
        assert_eq!(bn.forward(&x).unwrap().data, vec![1.0, 1.0]);
    }
}
