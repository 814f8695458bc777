use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct AdamState<T: Real> {
    pub config: AdamConfig,
    t: u64,
    m: Vec<T>,
    v: Vec<T>,
}

impl<T: Real> AdamState<T> {
    pub fn new(n_params: usize, config: AdamConfig) -> Self {
        Self {
            config,
            t: 0,
            m: vec![T::zero(); n_params],
            v: vec![T::zero(); n_params],
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn step(&mut self, params: &mut [T], grad: &[T]) -> Result<()> {
        for len in [params.len(), grad.len()] {
            if len != self.m.len() {
                return Err(Error::ShapeMismatch {
                    expected: self.m.len(),
                    actual: len,
                });
            }
        }
        self.t += 1;
        let one = T::one();
        let b1 = T::lit(self.config.beta1);
        let b2 = T::lit(self.config.beta2);
        let lr = T::lit(self.config.lr);
        let eps = T::lit(self.config.eps);
        let t = i32::try_from(self.t).unwrap_or(i32::MAX);
        let bc1 = one - b1.powi(t);
        let bc2 = one - b2.powi(t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = b1 * self.m[i] + (one - b1) * g;
            self.v[i] = b2 * self.v[i] + (one - b2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

/// Scale `grad` in place so its Euclidean norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm<T: Real>(grad: &mut [T], max_norm: T) -> T {
    let norm = grad.iter().fold(T::zero(), |acc, g| acc + *g * *g).sqrt();
    if norm > max_norm && norm > T::zero() {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut st = AdamState::<f64>::new(3, AdamConfig::default());
        let mut p = vec![1.0, -2.0, 3.0];
        st.step(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
        assert_eq!(st.steps_taken(), 1);
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        let cfg = AdamConfig::default();
        let mut st = AdamState::<f64>::new(3, cfg);
        let g = [2.5, -0.01, 1e-9];
        let mut p = vec![0.0; 3];
        st.step(&mut p, &g).unwrap();
        for (pi, gi) in p.iter().zip(g) {
            // bias-corrected first step: lr * g / (|g| + eps)
            let want = -cfg.lr * gi / (gi.abs() + cfg.eps);
            assert!((pi - want).abs() < 1e-18, "{pi} vs {want}");
        }
        assert!((p[0] + cfg.lr).abs() < 1e-11);
    }

    #[test]
    fn quadratic_descends_monotonically() {
        let mut st = AdamState::<f64>::new(
            1,
            AdamConfig {
                lr: 0.1,
                ..AdamConfig::default()
            },
        );
        let mut x = vec![1.0];
        let mut prev = 1.0;
        for _ in 0..2 {
            let g = [2.0 * x[0]];
            st.step(&mut x, &g).unwrap();
            assert!(x[0] * x[0] < prev);
            prev = x[0] * x[0];
        }
        assert!((x[0] - 0.8).abs() < 1e-3);
    }

    #[test]
    fn shape_mismatch() {
        let mut st = AdamState::<f64>::new(2, AdamConfig::default());
        assert!(st.step(&mut [0.0; 3], &[0.0; 3]).is_err());
        assert!(st.step(&mut [0.0; 2], &[0.0; 1]).is_err());
        assert_eq!(st.steps_taken(), 0);
    }

    #[test]
    fn clipping() {
        let mut g = vec![3e3f64, 4e3];
        let n = clip_global_norm(&mut g, 1e3);
        assert_eq!(n, 5e3);
        assert!((g[0] - 600.0).abs() < 1e-9 && (g[1] - 800.0).abs() < 1e-9);
        let mut small = vec![1.0, 1.0];
        clip_global_norm(&mut small, 1e3);
        assert_eq!(small, vec![1.0, 1.0]);
    }
}
