//! Central finite differences, used as the oracle for every hand-written backward pass.

use crate::error::{Error, Result};
use crate::math::tensor::ParamSet;
use crate::rng::Rng;
use crate::scalar::Scalar;

/// `(L(theta + eps e_k) - L(theta - eps e_k)) / (2 eps)` for every coordinate `k`.
///
/// The gradient is returned in the same structure as `params`.
pub fn finite_diff_grad<T, P, F>(mut loss_fn: F, params: &P, eps: T) -> Result<P>
where
    T: Scalar,
    P: ParamSet<T> + Clone,
    F: FnMut(&P) -> Result<T>,
{
    if !(eps > T::zero()) {
        return Err(Error::InvalidArgument("finite difference eps must be > 0".into()));
    }
    let mut probe = params.clone();
    let mut grad = params.clone();
    grad.zero_();
    let shapes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
    for (ti, &len) in shapes.iter().enumerate() {
        for i in 0..len {
            let g = probe_coordinate(&mut loss_fn, params, &mut probe, ti, i, eps)?;
            grad.tensors_mut()[ti].data_mut()[i] = g;
        }
    }
    Ok(grad)
}

/// Central differences at selected `(tensor, element)` coordinates only.
pub fn finite_diff_at<T, P, F>(mut loss_fn: F, params: &P, eps: T, coords: &[(usize, usize)]) -> Result<Vec<T>>
where
    T: Scalar,
    P: ParamSet<T> + Clone,
    F: FnMut(&P) -> Result<T>,
{
    if !(eps > T::zero()) {
        return Err(Error::InvalidArgument("finite difference eps must be > 0".into()));
    }
    let mut probe = params.clone();
    coords
        .iter()
        .map(|&(ti, i)| probe_coordinate(&mut loss_fn, params, &mut probe, ti, i, eps))
        .collect()
}

fn probe_coordinate<T, P, F>(loss_fn: &mut F, params: &P, probe: &mut P, ti: usize, i: usize, eps: T) -> Result<T>
where
    T: Scalar,
    P: ParamSet<T>,
    F: FnMut(&P) -> Result<T>,
{
    let orig = params.tensors()[ti].data()[i];
    probe.tensors_mut()[ti].data_mut()[i] = orig + eps;
    let up = loss_fn(probe)?;
    probe.tensors_mut()[ti].data_mut()[i] = orig - eps;
    let down = loss_fn(probe)?;
    probe.tensors_mut()[ti].data_mut()[i] = orig;
    if !up.is_finite() || !down.is_finite() {
        return Err(Error::NonFiniteLoss(format!(
            "finite-difference probe at tensor {ti} index {i}"
        )));
    }
    Ok((up - down) / (eps + eps))
}

/// Up to `per_tensor` distinct coordinates from every tensor, drawn with `rng`.
pub fn sample_coords<T: Scalar, P: ParamSet<T>>(params: &P, per_tensor: usize, rng: &mut Rng) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (ti, t) in params.tensors().iter().enumerate() {
        let all: Vec<usize> = (0..t.len()).collect();
        let mut picked = rng.sample_without_replacement(&all, per_tensor.min(t.len()));
        picked.sort_unstable();
        out.extend(picked.into_iter().map(|i| (ti, i)));
    }
    out
}

/// Compares `analytic` against finite differences taken at `coords`.
pub fn compare_at<T: Scalar, P: ParamSet<T>>(
    analytic: &P,
    numeric: &[T],
    coords: &[(usize, usize)],
    floor: f64,
) -> GradComparison {
    let tensors = analytic.tensors();
    let a: Vec<T> = coords.iter().map(|&(ti, i)| tensors[ti].data()[i]).collect();
    compare_slices(&a, numeric, floor)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradComparison {
    /// Largest `|a - b| / max(|a|, |b|, floor)` over all coordinates.
    pub max_rel: f64,
    pub max_abs: f64,
    /// Flat index of the coordinate with the largest relative error.
    pub worst: usize,
    pub compared: usize,
}

/// Compares two gradients coordinate-wise. `floor` keeps near-zero coordinates
/// from dominating the relative error.
pub fn max_relative_error<T: Scalar, P: ParamSet<T>>(a: &P, b: &P, floor: f64) -> GradComparison {
    let fa = a.flatten();
    let fb = b.flatten();
    assert_eq!(fa.len(), fb.len(), "gradient structures differ");
    compare_slices(&fa, &fb, floor)
}

fn compare_slices<T: Scalar>(fa: &[T], fb: &[T], floor: f64) -> GradComparison {
    let mut out = GradComparison {
        max_rel: 0.0,
        max_abs: 0.0,
        worst: 0,
        compared: fa.len(),
    };
    for (i, (&x, &y)) in fa.iter().zip(fb).enumerate() {
        let (x, y) = (x.to64(), y.to64());
        let abs = (x - y).abs();
        let rel = abs / x.abs().max(y.abs()).max(floor);
        if rel > out.max_rel || rel.is_nan() {
            out.max_rel = rel;
            out.worst = i;
        }
        out.max_abs = out.max_abs.max(abs);
    }
    out
}
