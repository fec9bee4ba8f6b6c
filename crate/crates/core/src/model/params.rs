use crate::error::{check_dim, Error, Result};
use crate::math::{xavier_uniform, GruParams, MlpParams, ParamSet, Tensor};
use crate::model::config::{ModelConfig, UpdateProfile};
use crate::rng::Rng;
use crate::scalar::Scalar;

/// Every learnable weight of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub attn_local: MlpParams<T>,
    pub attn_long: MlpParams<T>,
    pub msg: MlpParams<T>,
    pub gru: GruParams<T>,
    /// `C -> C -> C` residual refinement (residual profile).
    pub refine: Option<MlpParams<T>>,
    /// `C x H` linear state projection without bias (projection profile).
    pub state_head: Option<Tensor<T>>,
    /// `H -> H -> 2` fire-logit head (projection profile).
    pub act_head: Option<MlpParams<T>>,
}

fn dims(config: &ModelConfig) -> ([usize; 3], [usize; 3], usize, usize) {
    let s = config.ext_dim;
    (
        [2 * s, config.attention_hidden, config.attention_out],
        [config.interaction_dim(), config.msg_hidden, config.msg_out()],
        config.message_dim(),
        config.hidden_dim(),
    )
}

impl<T: Scalar> ModelParams<T> {
    pub fn zeros(config: &ModelConfig) -> Self {
        let (attn, msg, m, h) = dims(config);
        let c = config.state_dim;
        let (refine, state_head, act_head) = match config.profile {
            UpdateProfile::ResidualRefine => (Some(MlpParams::zeros(&[c, c, c])), None, None),
            UpdateProfile::ProjectionHeads => (
                None,
                Some(Tensor::zeros(&[c, h])),
                Some(MlpParams::zeros(&[h, h, 2])),
            ),
        };
        Self {
            attn_local: MlpParams::zeros(&attn),
            attn_long: MlpParams::zeros(&attn),
            msg: MlpParams::zeros(&msg),
            gru: GruParams::zeros(m, h),
            refine,
            state_head,
            act_head,
        }
    }

    /// Xavier-uniform weights and zero biases, drawn in field order.
    pub fn xavier(config: &ModelConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let (attn, msg, m, h) = dims(config);
        let c = config.state_dim;
        let attn_local = MlpParams::xavier(&attn, rng)?;
        let attn_long = MlpParams::xavier(&attn, rng)?;
        let msg = MlpParams::xavier(&msg, rng)?;
        let gru = GruParams::xavier(m, h, rng)?;
        let (refine, state_head, act_head) = match config.profile {
            UpdateProfile::ResidualRefine => (Some(MlpParams::xavier(&[c, c, c], rng)?), None, None),
            UpdateProfile::ProjectionHeads => (
                None,
                Some(xavier_uniform(h, c, rng)?),
                Some(MlpParams::xavier(&[h, h, 2], rng)?),
            ),
        };
        Ok(Self {
            attn_local,
            attn_long,
            msg,
            gru,
            refine,
            state_head,
            act_head,
        })
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.zero_();
        z
    }

    /// Checks every tensor against the shapes `config` implies.
    pub fn check(&self, config: &ModelConfig) -> Result<()> {
        let expect = Self::zeros(config);
        let a = self.named_tensors();
        let b = expect.named_tensors();
        check_dim("parameter tensor count", b.len(), a.len())?;
        for ((name, t), (ename, e)) in a.iter().zip(&b) {
            if name != ename || t.shape() != e.shape() {
                return Err(Error::InvalidArgument(format!(
                    "parameter `{name}` {:?} does not match `{ename}` {:?}",
                    t.shape(),
                    e.shape()
                )));
            }
        }
        Ok(())
    }

    /// Stable tensor names in [`ParamSet`] enumeration order.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor<T>)> {
        let names = self.tensor_names();
        names.into_iter().zip(self.tensors()).collect()
    }

    pub fn tensor_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        let mlp = |prefix: &str, p: &MlpParams<T>, names: &mut Vec<String>| {
            for k in 0..p.layers.len() {
                names.push(format!("{prefix}.{k}.weight"));
                names.push(format!("{prefix}.{k}.bias"));
            }
        };
        mlp("attn_local", &self.attn_local, &mut names);
        mlp("attn_long", &self.attn_long, &mut names);
        mlp("msg", &self.msg, &mut names);
        for g in ["w_z", "u_z", "b_z", "w_r", "u_r", "b_r", "w_h", "u_h", "b_h"] {
            names.push(format!("gru.{g}"));
        }
        if let Some(r) = &self.refine {
            mlp("refine", r, &mut names);
        }
        if self.state_head.is_some() {
            names.push("state_head.weight".into());
        }
        if let Some(a) = &self.act_head {
            mlp("act_head", a, &mut names);
        }
        names
    }
}

impl<T: Scalar> ParamSet<T> for ModelParams<T> {
    fn tensors(&self) -> Vec<&Tensor<T>> {
        let mut v = self.attn_local.tensors();
        v.extend(self.attn_long.tensors());
        v.extend(self.msg.tensors());
        v.extend(self.gru.tensors());
        if let Some(r) = &self.refine {
            v.extend(r.tensors());
        }
        if let Some(s) = &self.state_head {
            v.push(s);
        }
        if let Some(a) = &self.act_head {
            v.extend(a.tensors());
        }
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut v = self.attn_local.tensors_mut();
        v.extend(self.attn_long.tensors_mut());
        v.extend(self.msg.tensors_mut());
        v.extend(self.gru.tensors_mut());
        if let Some(r) = &mut self.refine {
            v.extend(r.tensors_mut());
        }
        if let Some(s) = &mut self.state_head {
            v.push(s);
        }
        if let Some(a) = &mut self.act_head {
            v.extend(a.tensors_mut());
        }
        v
    }
}
