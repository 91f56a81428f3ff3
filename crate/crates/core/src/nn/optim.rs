use crate::error::{Error, Result};

use super::layers::Param;

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Applies one update at learning rate `lr`. Fails without touching
    /// anything if a gradient is not finite.
    pub fn update(&mut self, params: &mut [&mut Param], lr: f64) -> Result<()> {
        if let Some(p) = params.iter().find(|p| p.grad.iter().any(|g| !g.is_finite())) {
            return Err(Error::NonFinite(format!("gradient of {}", p.name)));
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.value.len()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() || self.m.iter().zip(params.iter()).any(|(m, p)| m.len() != p.value.len()) {
            return Err(Error::Shape("optimizer state does not match parameters".into()));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.value.len() {
                let g = p.grad[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                p.value[i] -= lr * mh / (vh.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// `base * 0.5 * (1 + cos(pi * step / total))`, constant when `total == 0`.
pub fn cosine_lr(base: f64, step: usize, total: usize) -> f64 {
    if total == 0 {
        return base;
    }
    let t = (step.min(total)) as f64 / total as f64;
    base * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = Param::new("w", vec![1.0, -2.0]);
        let mut adam = Adam::new(0.1);
        adam.update(&mut [&mut p], 0.1).unwrap();
        assert_eq!(p.value, vec![1.0, -2.0]);
    }

    #[test]
    fn quadratic_converges() {
        // minimize (w - 3)^2
        let mut p = Param::new("w", vec![0.0]);
        let mut adam = Adam::new(1e-2);
        for _ in 0..2000 {
            p.grad[0] = 2.0 * (p.value[0] - 3.0);
            adam.update(&mut [&mut p], 1e-2).unwrap();
        }
        assert!((p.value[0] - 3.0).abs() < 1e-6, "{}", p.value[0]);
    }

    #[test]
    fn nan_gradient_aborts() {
        let mut p = Param::new("w", vec![0.0]);
        p.grad[0] = f64::NAN;
        assert!(matches!(Adam::new(1e-3).update(&mut [&mut p], 1e-3), Err(Error::NonFinite(_))));
        assert_eq!(p.value[0], 0.0);
    }

    #[test]
    fn cosine_endpoints() {
        assert_eq!(cosine_lr(1.0, 0, 10), 1.0);
        assert!(cosine_lr(1.0, 10, 10).abs() < 1e-15);
        assert!((cosine_lr(1.0, 5, 10) - 0.5).abs() < 1e-15);
    }
}
