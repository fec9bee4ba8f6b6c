use crate::error::{Error, Result};
use crate::math::tensor::Tensor;
use crate::rng::Rng;
use crate::scalar::Scalar;

/// Xavier/Glorot uniform weights, shape `fan_out x fan_in`, entries on
/// `[-a, a]` with `a = sqrt(6 / (fan_in + fan_out))`. Draw order is row-major.
pub fn xavier_uniform<T: Scalar>(fan_in: usize, fan_out: usize, rng: &mut Rng) -> Result<Tensor<T>> {
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::InvalidArgument(format!(
            "xavier init needs positive dims, got {fan_in}x{fan_out}"
        )));
    }
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| T::of(rng.uniform_range(-a, a)))
        .collect();
    Tensor::from_vec(&[fan_out, fan_in], data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_for_square_three() {
        let mut rng = Rng::new(1);
        let w: Tensor<f64> = xavier_uniform(3, 3, &mut rng).unwrap();
        assert_eq!(w.shape(), &[3, 3]);
        assert!(w.data().iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn deterministic_per_seed() {
        let a: Tensor<f64> = xavier_uniform(5, 7, &mut Rng::new(42)).unwrap();
        let b: Tensor<f64> = xavier_uniform(5, 7, &mut Rng::new(42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn statistics_for_hundred_square() {
        let mut rng = Rng::new(42);
        let w: Tensor<f64> = xavier_uniform(100, 100, &mut rng).unwrap();
        let a = (6.0f64 / 200.0).sqrt();
        let mean = w.data().iter().sum::<f64>() / w.len() as f64;
        let max = w.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(mean.abs() < 0.02);
        assert!(max <= a);
    }

    #[test]
    fn zero_dim_rejected() {
        assert!(xavier_uniform::<f64>(0, 3, &mut Rng::new(0)).is_err());
    }
}
