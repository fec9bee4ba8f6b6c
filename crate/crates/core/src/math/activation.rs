use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Exact GELU: `x * Phi(x)` with `Phi(x) = (1 + erf(x / sqrt 2)) / 2`.
#[inline]
pub fn gelu<T: Scalar>(x: T) -> T {
    x * normal_cdf(x)
}

/// Derivative of [`gelu`]: `Phi(x) + x phi(x)`.
#[inline]
pub fn gelu_grad<T: Scalar>(x: T) -> T {
    normal_cdf(x) + x * normal_pdf(x)
}

/// GELU value and derivative sharing one `erf` evaluation.
#[inline]
pub fn gelu_with_grad<T: Scalar>(x: T) -> (T, T) {
    let cdf = normal_cdf(x);
    (x * cdf, cdf + x * normal_pdf(x))
}

#[inline]
fn normal_cdf<T: Scalar>(x: T) -> T {
    T::of(0.5) * (T::one() + (x * T::of(std::f64::consts::FRAC_1_SQRT_2)).erf())
}

#[inline]
fn normal_pdf<T: Scalar>(x: T) -> T {
    // 1 / sqrt(2 pi)
    T::of(0.398_942_280_401_432_7) * (-T::of(0.5) * x * x).exp()
}

#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax<T: Scalar>(v: &[T]) -> Result<Vec<T>> {
    if v.is_empty() {
        return Err(Error::EmptySoftmax);
    }
    let mut out = v.to_vec();
    softmax_in_place(&mut out);
    Ok(out)
}

/// Softmax over a non-empty slice, in place.
pub fn softmax_in_place<T: Scalar>(v: &mut [T]) {
    let max = v.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// `log(sum(exp(v)))`, stable.
pub fn log_sum_exp<T: Scalar>(v: &[T]) -> T {
    let max = v.iter().copied().fold(T::neg_infinity(), T::max);
    let s: T = v.iter().map(|&x| (x - max).exp()).sum();
    max + s.ln()
}

/// Index of the largest element, lowest index on ties.
pub fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gelu_fixed_points() {
        assert_eq!(gelu(0.0f64), 0.0);
        assert!((gelu(10.0f64) - 10.0).abs() < 1e-9);
        // 0.5 * (1 + erf(1/sqrt 2)) evaluated with mpmath at 50 digits.
        assert!((gelu(1.0f64) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((gelu(-1.0f64) + 0.158_655_253_931_457_05).abs() < 1e-15);
    }

    #[test]
    fn gelu_grad_matches_central_difference() {
        for &x in &[-3.0f64, -1.2, -0.1, 0.0, 0.4, 2.5] {
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((gelu_grad(x) - fd).abs() < 1e-8, "x={x}");
            assert_eq!(gelu_with_grad(x), (gelu(x), gelu_grad(x)));
        }
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[0.0f64; 4]).unwrap(), vec![0.25; 4]);
        assert_eq!(softmax(&[3.7f64]).unwrap(), vec![1.0]);
        let a = softmax(&[1000.0f64, 1000.5]).unwrap();
        let b = softmax(&[0.0f64, 0.5]).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!(matches!(softmax::<f64>(&[]), Err(Error::EmptySoftmax)));
    }

    #[test]
    fn argmax_ties_take_lowest_index() {
        assert_eq!(argmax(&[1.0f64, 1.0, 0.0]), 0);
        assert_eq!(argmax(&[0.0f64, 2.0, 2.0]), 1);
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one_and_is_shift_invariant(
            v in proptest::collection::vec(-50.0f64..50.0, 1..12),
            c in -100.0f64..100.0,
        ) {
            let p = softmax(&v).unwrap();
            let s: f64 = p.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            let q = softmax(&shifted).unwrap();
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            prop_assert_eq!(argmax(&p), argmax(&v));
        }
    }
}
