use crate::error::{check_dim, Error, Result};
use crate::math::activation::{gelu, gelu_with_grad};
use crate::math::init::xavier_uniform;
use crate::math::tensor::{matvec, matvec_t_add, outer_add, ParamSet, Tensor};
use crate::rng::Rng;
use crate::scalar::Scalar;

/// Fully connected layer: `y = W x + b`, `W` is `fan_out x fan_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> Linear<T> {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[fan_out, fan_in]),
            bias: Tensor::zeros(&[fan_out]),
        }
    }

    pub fn xavier(fan_in: usize, fan_out: usize, rng: &mut Rng) -> Result<Self> {
        Ok(Self {
            weight: xavier_uniform(fan_in, fan_out, rng)?,
            bias: Tensor::zeros(&[fan_out]),
        })
    }

    pub fn fan_in(&self) -> usize {
        self.weight.cols()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward_into(&self, x: &[T], out: &mut [T]) {
        matvec(&self.weight, x, out);
        for (o, &b) in out.iter_mut().zip(self.bias.data()) {
            *o += b;
        }
    }
}

/// Multilayer perceptron with GELU between layers and a linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams<T> {
    pub layers: Vec<Linear<T>>,
}

/// Activations recorded by [`MlpParams::forward_cached`].
#[derive(Debug, Clone)]
pub struct MlpCache<T> {
    /// `acts[0]` is the input; `acts[k]` the post-GELU output of hidden layer `k`.
    acts: Vec<Vec<T>>,
    /// GELU derivative at each hidden pre-activation.
    dgelu: Vec<Vec<T>>,
}

impl<T: Scalar> MlpParams<T> {
    /// Zero network with layer widths `dims[0] -> dims[1] -> ... -> dims[n]`.
    pub fn zeros(dims: &[usize]) -> Self {
        Self {
            layers: dims.windows(2).map(|w| Linear::zeros(w[0], w[1])).collect(),
        }
    }

    /// Xavier-uniform weights, zero biases.
    pub fn xavier(dims: &[usize], rng: &mut Rng) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidArgument("mlp needs at least one layer".into()));
        }
        let layers = dims
            .windows(2)
            .map(|w| Linear::xavier(w[0], w[1], rng))
            .collect::<Result<_>>()?;
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<Linear<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("mlp needs at least one layer".into()));
        }
        for (k, l) in layers.iter().enumerate() {
            check_dim("mlp bias", l.fan_out(), l.bias.len())?;
            if k > 0 {
                check_dim("mlp layer chain", layers[k - 1].fan_out(), l.fan_in())?;
            }
        }
        Ok(Self { layers })
    }

    pub fn fan_in(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn fan_out(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out()
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        check_dim("mlp input", self.fan_in(), x.len())?;
        let mut cur = x.to_vec();
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let mut out = vec![T::zero(); layer.fan_out()];
            layer.forward_into(&cur, &mut out);
            if k < last {
                out.iter_mut().for_each(|v| *v = gelu(*v));
            }
            cur = out;
        }
        Ok(cur)
    }

    pub fn forward_cached(&self, x: &[T]) -> Result<(Vec<T>, MlpCache<T>)> {
        check_dim("mlp input", self.fan_in(), x.len())?;
        let last = self.layers.len() - 1;
        let mut acts = Vec::with_capacity(self.layers.len());
        let mut dgelu = Vec::with_capacity(last);
        acts.push(x.to_vec());
        for (k, layer) in self.layers.iter().enumerate() {
            let mut out = vec![T::zero(); layer.fan_out()];
            layer.forward_into(&acts[k], &mut out);
            if k == last {
                return Ok((out, MlpCache { acts, dgelu }));
            }
            let mut d = vec![T::zero(); out.len()];
            for (o, dv) in out.iter_mut().zip(d.iter_mut()) {
                let (g, gg) = gelu_with_grad(*o);
                *o = g;
                *dv = gg;
            }
            acts.push(out);
            dgelu.push(d);
        }
        unreachable!("mlp has at least one layer")
    }

    /// Accumulates parameter gradients into `grads` and returns `dL/dx`.
    pub fn backward(&self, cache: &MlpCache<T>, dy: &[T], grads: &mut Self) -> Vec<T> {
        let mut delta = dy.to_vec();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let g = &mut grads.layers[k];
            outer_add(&mut g.weight, &delta, &cache.acts[k]);
            for (b, &d) in g.bias.data_mut().iter_mut().zip(&delta) {
                *b += d;
            }
            let mut dx = vec![T::zero(); layer.fan_in()];
            matvec_t_add(&layer.weight, &delta, &mut dx);
            if k > 0 {
                for (v, &dg) in dx.iter_mut().zip(&cache.dgelu[k - 1]) {
                    *v *= dg;
                }
            }
            delta = dx;
        }
        delta
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Linear::zeros(l.fan_in(), l.fan_out()))
                .collect(),
        }
    }
}

impl<T: Scalar> ParamSet<T> for MlpParams<T> {
    fn tensors(&self) -> Vec<&Tensor<T>> {
        self.layers
            .iter()
            .flat_map(|l| [&l.weight, &l.bias])
            .collect()
    }
    fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }
}

/// `W_L(... GELU(W_1 x + b_1) ...) + b_L`.
pub fn mlp_forward<T: Scalar>(p: &MlpParams<T>, x: &[T]) -> Result<Vec<T>> {
    p.forward(x)
}
