use crate::error::{Error, Result};
use crate::math::tensor::{ParamSet, Tensor};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig<T> {
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
    /// Decoupled weight decay; `0` disables it.
    pub weight_decay: T,
    /// Global L2 clip threshold; `0` disables clipping.
    pub grad_clip_norm: T,
}

impl<T: Scalar> Default for AdamConfig<T> {
    fn default() -> Self {
        Self {
            learning_rate: T::of(1e-3),
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            epsilon: T::of(1e-8),
            weight_decay: T::zero(),
            grad_clip_norm: T::zero(),
        }
    }
}

/// Adam moments for a parameter collection.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig<T>,
    pub step_count: u64,
    pub first_moment: Vec<Tensor<T>>,
    pub second_moment: Vec<Tensor<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new<P: ParamSet<T>>(config: AdamConfig<T>, params: &P) -> Self {
        let zeros: Vec<Tensor<T>> = params
            .tensors()
            .iter()
            .map(|t| Tensor::zeros(t.shape()))
            .collect();
        Self {
            config,
            step_count: 0,
            first_moment: zeros.clone(),
            second_moment: zeros,
        }
    }

    /// Clip, decay, then apply one bias-corrected Adam update.
    pub fn step<P: ParamSet<T>>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let grads = grads.tensors();
        let mut params = params.tensors_mut();
        if grads.len() != params.len() || grads.len() != self.first_moment.len() {
            return Err(Error::InvalidArgument(format!(
                "adam: {} params, {} grads, {} moments",
                params.len(),
                grads.len(),
                self.first_moment.len()
            )));
        }
        for (p, g) in params.iter().zip(&grads) {
            if !p.same_shape(g) {
                return Err(Error::InvalidArgument(format!(
                    "adam: param {:?} vs grad {:?}",
                    p.shape(),
                    g.shape()
                )));
            }
            if !g.all_finite() {
                return Err(Error::NonFiniteGradient);
            }
        }

        let c = self.config;
        let scale = clip_scale(&grads, c.grad_clip_norm);
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = T::one() - c.beta1.powi(t);
        let bc2 = T::one() - c.beta2.powi(t);
        let decay = c.learning_rate * c.weight_decay;

        for (k, (p, g)) in params.iter_mut().zip(&grads).enumerate() {
            let m = self.first_moment[k].data_mut();
            let v = self.second_moment[k].data_mut();
            for (i, (pv, &gv)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                let gv = gv * scale;
                if c.weight_decay > T::zero() {
                    *pv -= decay * *pv;
                }
                m[i] = c.beta1 * m[i] + (T::one() - c.beta1) * gv;
                v[i] = c.beta2 * v[i] + (T::one() - c.beta2) * gv * gv;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                *pv -= c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
            }
        }
        Ok(())
    }
}

/// Global L2 norm over every tensor in the collection.
pub fn global_norm<T: Scalar>(grads: &[&Tensor<T>]) -> T {
    grads.iter().map(|g| g.norm_sq()).sum::<T>().sqrt()
}

/// Factor that brings the global norm down to `max_norm` (1 if already within, or clipping off).
pub fn clip_scale<T: Scalar>(grads: &[&Tensor<T>], max_norm: T) -> T {
    if max_norm <= T::zero() {
        return T::one();
    }
    let norm = global_norm(grads);
    if norm > max_norm {
        max_norm / norm
    } else {
        T::one()
    }
}

/// Functional form of [`AdamState::step`].
pub fn adam_step<T: Scalar, P: ParamSet<T>>(
    state: &mut AdamState<T>,
    params: &mut P,
    grads: &P,
) -> Result<()> {
    state.step(params, grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Vec<Tensor<f64>> {
        vec![Tensor::vector(vec![v])]
    }

    #[test]
    fn zero_grads_leave_params() {
        let mut p = vec![Tensor::vector(vec![1.0, -2.0, 3.0])];
        let g = vec![Tensor::zeros(&[3])];
        let mut st = AdamState::new(AdamConfig::default(), &p);
        st.step(&mut p, &g).unwrap();
        assert_eq!(p[0].data(), &[1.0, -2.0, 3.0]);
        assert_eq!(st.step_count, 1);
    }

    #[test]
    fn hand_stepped_oracle() {
        // tests/oracles: python scalar Adam, theta=0.5, g=0.2 then g=-0.4
        let mut p = scalar(0.5);
        let mut st = AdamState::new(AdamConfig::default(), &p);
        st.step(&mut p, &scalar(0.2)).unwrap();
        assert!((p[0].data()[0] - 0.499_000_000_05).abs() < 1e-15);
        st.step(&mut p, &scalar(-0.4)).unwrap();
        assert!((p[0].data()[0] - 0.499_366_103_565_460_35).abs() < 1e-15);

        let cfg = AdamConfig {
            weight_decay: 0.1,
            ..AdamConfig::default()
        };
        let mut p = scalar(0.5);
        let mut st = AdamState::new(cfg, &p);
        st.step(&mut p, &scalar(0.2)).unwrap();
        assert!((p[0].data()[0] - 0.498_950_000_05).abs() < 1e-15);
    }

    #[test]
    fn clipping_contract() {
        let g = [Tensor::vector(vec![6.0, 8.0])];
        let refs: Vec<&Tensor<f64>> = g.iter().collect();
        assert_eq!(global_norm(&refs), 10.0);
        let s = clip_scale(&refs, 1.0);
        let clipped: Vec<f64> = g[0].data().iter().map(|v| v * s).collect();
        let n = (clipped[0].powi(2) + clipped[1].powi(2)).sqrt();
        assert!((n - 1.0).abs() < 1e-9);
        assert_eq!(clip_scale(&refs, 0.0), 1.0);
        assert_eq!(clip_scale(&refs, 20.0), 1.0);
    }

    #[test]
    fn nan_gradient_rejected() {
        let mut p = scalar(1.0);
        let mut st = AdamState::new(AdamConfig::default(), &p);
        assert!(matches!(
            st.step(&mut p, &scalar(f64::NAN)),
            Err(Error::NonFiniteGradient)
        ));
        assert_eq!(st.step_count, 0);
    }

    #[test]
    fn deterministic_bitwise() {
        let p0 = vec![Tensor::vector(vec![0.3, -0.7]), Tensor::vector(vec![1.1])];
        let g = vec![Tensor::vector(vec![0.01, 2.5]), Tensor::vector(vec![-0.3])];
        let cfg = AdamConfig {
            weight_decay: 1e-4,
            grad_clip_norm: 1.0,
            ..AdamConfig::default()
        };
        let run = || {
            let mut p = p0.clone();
            let mut st = AdamState::new(cfg, &p);
            for _ in 0..5 {
                st.step(&mut p, &g).unwrap();
            }
            (p, st)
        };
        let (a, sa) = run();
        let (b, sb) = run();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
    }
}
