use crate::error::{Error, Result};

/// Dense `(N, C, H, W)` tensor, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Self {
        Tensor4 {
            n,
            c,
            h,
            w,
            data: vec![0.0; n * c * h * w],
        }
    }

    pub fn from_vec(n: usize, c: usize, h: usize, w: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || c == 0 || h == 0 || w == 0 {
            return Err(Error::Shape(format!("tensor dims must be positive, got ({n},{c},{h},{w})")));
        }
        if data.len() != n * c * h * w {
            return Err(Error::Shape(format!(
                "{} values do not fill ({n},{c},{h},{w})",
                data.len()
            )));
        }
        Ok(Tensor4 { n, c, h, w, data })
    }

    pub fn zeros_like(&self) -> Self {
        Tensor4::zeros(self.n, self.c, self.h, self.w)
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.n, self.c, self.h, self.w]
    }

    /// `(C, H, W)` of one sample.
    pub fn chw(&self) -> [usize; 3] {
        [self.c, self.h, self.w]
    }

    #[inline]
    pub fn plane(&self) -> usize {
        self.h * self.w
    }

    #[inline]
    pub fn sample_len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let s = self.sample_len();
        &self.data[i * s..(i + 1) * s]
    }

    pub fn sample_mut(&mut self, i: usize) -> &mut [f64] {
        let s = self.sample_len();
        &mut self.data[i * s..(i + 1) * s]
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, y: usize, x: usize) -> f64 {
        self.data[((n * self.c + c) * self.h + y) * self.w + x]
    }

    pub fn add_assign(&mut self, other: &Tensor4) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Stacks single samples `(1, C, H, W)` or raw per-sample slices.
    pub fn stack(samples: &[&[f64]], c: usize, h: usize, w: usize) -> Result<Self> {
        let mut data = Vec::with_capacity(samples.len() * c * h * w);
        for s in samples {
            if s.len() != c * h * w {
                return Err(Error::Shape(format!("sample of {} values is not ({c},{h},{w})", s.len())));
            }
            data.extend_from_slice(s);
        }
        Tensor4::from_vec(samples.len(), c, h, w, data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
