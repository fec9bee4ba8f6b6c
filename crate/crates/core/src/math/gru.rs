use crate::error::{check_dim, Result};
use crate::math::activation::sigmoid;
use crate::math::init::xavier_uniform;
use crate::math::tensor::{matvec_add, matvec_t_add, outer_add, ParamSet, Tensor};
use crate::rng::Rng;
use crate::scalar::Scalar;

/// Gated recurrent unit.
///
/// ```text
/// z  = sigmoid(W_z m + U_z h + b_z)
/// r  = sigmoid(W_r m + U_r h + b_r)
/// h~ = tanh(W_h m + U_h (r * h) + b_h)
/// h' = (1 - z) * h + z * h~
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams<T> {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w_z: Tensor<T>,
    pub u_z: Tensor<T>,
    pub b_z: Tensor<T>,
    pub w_r: Tensor<T>,
    pub u_r: Tensor<T>,
    pub b_r: Tensor<T>,
    pub w_h: Tensor<T>,
    pub u_h: Tensor<T>,
    pub b_h: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct GruCache<T> {
    m: Vec<T>,
    h_prev: Vec<T>,
    z: Vec<T>,
    r: Vec<T>,
    cand: Vec<T>,
}

impl<T: Scalar> GruParams<T> {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let w = || Tensor::zeros(&[hidden_dim, input_dim]);
        let u = || Tensor::zeros(&[hidden_dim, hidden_dim]);
        let b = || Tensor::zeros(&[hidden_dim]);
        Self {
            input_dim,
            hidden_dim,
            w_z: w(),
            u_z: u(),
            b_z: b(),
            w_r: w(),
            u_r: u(),
            b_r: b(),
            w_h: w(),
            u_h: u(),
            b_h: b(),
        }
    }

    pub fn xavier(input_dim: usize, hidden_dim: usize, rng: &mut Rng) -> Result<Self> {
        let mut p = Self::zeros(input_dim, hidden_dim);
        p.w_z = xavier_uniform(input_dim, hidden_dim, rng)?;
        p.u_z = xavier_uniform(hidden_dim, hidden_dim, rng)?;
        p.w_r = xavier_uniform(input_dim, hidden_dim, rng)?;
        p.u_r = xavier_uniform(hidden_dim, hidden_dim, rng)?;
        p.w_h = xavier_uniform(input_dim, hidden_dim, rng)?;
        p.u_h = xavier_uniform(hidden_dim, hidden_dim, rng)?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let (i, h) = (self.input_dim, self.hidden_dim);
        for w in [&self.w_z, &self.w_r, &self.w_h] {
            check_dim("gru input weight", h * i, w.len())?;
        }
        for u in [&self.u_z, &self.u_r, &self.u_h] {
            check_dim("gru recurrent weight", h * h, u.len())?;
        }
        for b in [&self.b_z, &self.b_r, &self.b_h] {
            check_dim("gru bias", h, b.len())?;
        }
        Ok(())
    }

    pub fn step(&self, m: &[T], h_prev: &[T]) -> Result<Vec<T>> {
        Ok(self.forward_cached(m, h_prev)?.0)
    }

    pub fn forward_cached(&self, m: &[T], h_prev: &[T]) -> Result<(Vec<T>, GruCache<T>)> {
        check_dim("gru input", self.input_dim, m.len())?;
        check_dim("gru hidden", self.hidden_dim, h_prev.len())?;
        let hd = self.hidden_dim;
        let gate = |w: &Tensor<T>, u: &Tensor<T>, b: &Tensor<T>, hv: &[T]| {
            let mut a = b.data().to_vec();
            matvec_add(w, m, &mut a);
            matvec_add(u, hv, &mut a);
            a
        };
        let mut z = gate(&self.w_z, &self.u_z, &self.b_z, h_prev);
        z.iter_mut().for_each(|v| *v = sigmoid(*v));
        let mut r = gate(&self.w_r, &self.u_r, &self.b_r, h_prev);
        r.iter_mut().for_each(|v| *v = sigmoid(*v));
        let rh: Vec<T> = r.iter().zip(h_prev).map(|(&a, &b)| a * b).collect();
        let mut cand = gate(&self.w_h, &self.u_h, &self.b_h, &rh);
        cand.iter_mut().for_each(|v| *v = v.tanh());
        let mut out = vec![T::zero(); hd];
        for k in 0..hd {
            out[k] = (T::one() - z[k]) * h_prev[k] + z[k] * cand[k];
        }
        let cache = GruCache {
            m: m.to_vec(),
            h_prev: h_prev.to_vec(),
            z,
            r,
            cand,
        };
        Ok((out, cache))
    }

    /// Accumulates parameter gradients and returns `(dL/dm, dL/dh_prev)`.
    pub fn backward(&self, c: &GruCache<T>, dh: &[T], grads: &mut Self) -> (Vec<T>, Vec<T>) {
        let hd = self.hidden_dim;
        let one = T::one();
        let mut dm = vec![T::zero(); self.input_dim];
        let mut dh_prev = vec![T::zero(); hd];
        let mut dz_pre = vec![T::zero(); hd];
        let mut dcand_pre = vec![T::zero(); hd];
        for k in 0..hd {
            let dz = dh[k] * (c.cand[k] - c.h_prev[k]);
            dz_pre[k] = dz * c.z[k] * (one - c.z[k]);
            dcand_pre[k] = dh[k] * c.z[k] * (one - c.cand[k] * c.cand[k]);
            dh_prev[k] = dh[k] * (one - c.z[k]);
        }
        let rh: Vec<T> = c.r.iter().zip(&c.h_prev).map(|(&a, &b)| a * b).collect();
        outer_add(&mut grads.w_h, &dcand_pre, &c.m);
        outer_add(&mut grads.u_h, &dcand_pre, &rh);
        add_into(grads.b_h.data_mut(), &dcand_pre);
        matvec_t_add(&self.w_h, &dcand_pre, &mut dm);
        let mut drh = vec![T::zero(); hd];
        matvec_t_add(&self.u_h, &dcand_pre, &mut drh);
        let mut dr_pre = vec![T::zero(); hd];
        for k in 0..hd {
            dr_pre[k] = drh[k] * c.h_prev[k] * c.r[k] * (one - c.r[k]);
            dh_prev[k] += drh[k] * c.r[k];
        }
        for (pre, w, u, gw, gu, gb) in [
            (&dz_pre, &self.w_z, &self.u_z, &mut grads.w_z, &mut grads.u_z, &mut grads.b_z),
            (&dr_pre, &self.w_r, &self.u_r, &mut grads.w_r, &mut grads.u_r, &mut grads.b_r),
        ] {
            outer_add(gw, pre, &c.m);
            outer_add(gu, pre, &c.h_prev);
            add_into(gb.data_mut(), pre);
            matvec_t_add(w, pre, &mut dm);
            matvec_t_add(u, pre, &mut dh_prev);
        }
        (dm, dh_prev)
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_dim, self.hidden_dim)
    }
}

fn add_into<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

impl<T: Scalar> ParamSet<T> for GruParams<T> {
    fn tensors(&self) -> Vec<&Tensor<T>> {
        vec![
            &self.w_z, &self.u_z, &self.b_z, &self.w_r, &self.u_r, &self.b_r, &self.w_h,
            &self.u_h, &self.b_h,
        ]
    }
    fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![
            &mut self.w_z,
            &mut self.u_z,
            &mut self.b_z,
            &mut self.w_r,
            &mut self.u_r,
            &mut self.b_r,
            &mut self.w_h,
            &mut self.u_h,
            &mut self.b_h,
        ]
    }
}

/// One GRU update `h' = GRU(m, h_prev)`.
pub fn gru_step<T: Scalar>(p: &GruParams<T>, m: &[T], h_prev: &[T]) -> Result<Vec<T>> {
    p.step(m, h_prev)
}
