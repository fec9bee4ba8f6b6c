use crate::error::{check_dim, Error, Result};
use crate::math::activation::argmax;
use crate::math::gru::GruCache;
use crate::math::mlp::MlpCache;
use crate::math::tensor::{matvec, matvec_t_add, outer_add};
use crate::math::{MlpParams, Tensor};
use crate::model::attention::{attn_backward, attn_forward, AttnBatch, Neighborhood};
use crate::model::config::{CompositionMode, ModelConfig, UpdateProfile};
use crate::model::field::{extended_states, CellField};
use crate::model::params::ModelParams;
use crate::scalar::Scalar;
use crate::topology::CellGraph;

/// `z_i` from self, local aggregate and long-range aggregate.
///
/// `l` is `None` when the cell has no long-range domain, which for
/// `LocalPlusLrSum` leaves `n` untouched and for `LocalLrConcat` writes zeros.
pub fn compose_interaction<T: Scalar>(mode: CompositionMode, s: &[T], n: &[T], l: Option<&[T]>) -> Result<Vec<T>> {
    check_dim("interaction local block", s.len(), n.len())?;
    if let Some(l) = l {
        check_dim("interaction long-range block", s.len(), l.len())?;
    }
    let mut z = Vec::with_capacity(mode.blocks() * s.len());
    z.extend_from_slice(s);
    match mode {
        CompositionMode::LocalOnly => z.extend_from_slice(n),
        CompositionMode::LocalPlusLrSum => match l {
            Some(l) => z.extend(n.iter().zip(l).map(|(&a, &b)| a + b)),
            None => z.extend_from_slice(n),
        },
        CompositionMode::LocalLrConcat => {
            z.extend_from_slice(n);
            match l {
                Some(l) => z.extend_from_slice(l),
                None => z.extend(std::iter::repeat(T::zero()).take(s.len())),
            }
        }
    }
    Ok(z)
}

/// `m_i = f_msg(z_i)`, followed by `[o; u]` in the control profile.
pub fn message_input<T: Scalar>(
    msg: &MlpParams<T>,
    config: &ModelConfig,
    z: &[T],
    obs: Option<&[T]>,
    action: Option<&[T]>,
) -> Result<Vec<T>> {
    let mut m = msg.forward(z)?;
    append_context(config, &mut m, obs, action)?;
    Ok(m)
}

fn append_context<T: Scalar>(config: &ModelConfig, m: &mut Vec<T>, obs: Option<&[T]>, action: Option<&[T]>) -> Result<()> {
    match config.profile {
        UpdateProfile::ResidualRefine => Ok(()),
        UpdateProfile::ProjectionHeads => {
            let o = obs.ok_or_else(|| Error::InvalidArgument("control profile needs an observation".into()))?;
            let u = action.ok_or_else(|| Error::InvalidArgument("control profile needs the previous action".into()))?;
            check_dim("observation", config.obs_dim(), o.len())?;
            check_dim("previous action", config.action_dim(), u.len())?;
            m.extend_from_slice(o);
            m.extend_from_slice(u);
            Ok(())
        }
    }
}

/// Result of one synchronous update.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput<T> {
    pub field: CellField<T>,
    /// `N x 2` per-cell `(noop, fire)` logits (projection profile).
    pub logits: Option<Tensor<T>>,
}

/// Everything needed to differentiate one step.
#[derive(Debug, Clone)]
pub struct StepCache<T> {
    ext: Tensor<T>,
    local: AttnBatch<T>,
    long: Option<AttnBatch<T>>,
    msg: Vec<MlpCache<T>>,
    gru: Vec<GruCache<T>>,
    head: Vec<MlpCache<T>>,
    hidden: Tensor<T>,
}

/// Upstream gradients with respect to a step's outputs.
#[derive(Debug, Clone)]
pub struct StepGrad<T> {
    pub states: Tensor<T>,
    pub hidden: Tensor<T>,
    pub logits: Option<Tensor<T>>,
}

impl<T: Scalar> StepGrad<T> {
    pub fn zeros(config: &ModelConfig, n: usize) -> Self {
        Self {
            states: Tensor::zeros(&[n, config.state_dim]),
            hidden: Tensor::zeros(&[n, config.hidden_dim()]),
            logits: None,
        }
    }
}

/// One synchronous BraiNCA update of every cell.
pub fn nca_step<T: Scalar>(
    params: &ModelParams<T>,
    config: &ModelConfig,
    field: &CellField<T>,
    graph: &CellGraph,
    obs: Option<&[T]>,
    action: Option<&[T]>,
) -> Result<StepOutput<T>> {
    Ok(nca_step_cached(params, config, field, graph, obs, action)?.0)
}

pub fn nca_step_cached<T: Scalar>(
    params: &ModelParams<T>,
    config: &ModelConfig,
    field: &CellField<T>,
    graph: &CellGraph,
    obs: Option<&[T]>,
    action: Option<&[T]>,
) -> Result<(StepOutput<T>, StepCache<T>)> {
    let n = graph.len();
    field.check(config, n)?;
    let s = config.ext_dim;
    let ext = extended_states(config, field);
    let padding = config.boundary_padding.then_some(&graph.local_padding[..]);
    let local = attn_forward(
        &params.attn_local,
        &ext,
        &graph.local,
        padding,
        config.include_self,
        Neighborhood::Local,
    )?;
    let long = if config.composition.uses_long_range() {
        Some(attn_forward(
            &params.attn_long,
            &ext,
            &graph.long_range,
            None,
            config.include_self,
            Neighborhood::LongRange,
        )?)
    } else {
        None
    };

    let hd = config.hidden_dim();
    let mut out = field.clone();
    let mut hidden = Tensor::zeros(&[n, hd]);
    let mut logits = match config.profile {
        UpdateProfile::ProjectionHeads => Some(Tensor::zeros(&[n, 2])),
        UpdateProfile::ResidualRefine => None,
    };
    let mut msg_caches = Vec::with_capacity(n);
    let mut gru_caches = Vec::with_capacity(n);
    let mut head_caches = Vec::with_capacity(n);
    for i in 0..n {
        let l = long
            .as_ref()
            .filter(|b| !b.domain(i).is_empty())
            .map(|b| b.agg.row(i));
        let z = compose_interaction(config.composition, ext.row(i), local.agg.row(i), l)?;
        debug_assert_eq!(z.len(), config.interaction_dim());
        let (mut m, mc) = params.msg.forward_cached(&z)?;
        append_context(config, &mut m, obs, action)?;
        let (h, gc) = params.gru.forward_cached(&m, field.hidden.row(i))?;
        match config.profile {
            UpdateProfile::ResidualRefine => {
                let refine = params.refine.as_ref().ok_or_else(|| missing("refine"))?;
                let (r, rc) = refine.forward_cached(&h)?;
                for ((c, &hv), &rv) in out.states.row_mut(i).iter_mut().zip(&h).zip(&r) {
                    *c = hv + rv;
                }
                head_caches.push(rc);
            }
            UpdateProfile::ProjectionHeads => {
                let w = params.state_head.as_ref().ok_or_else(|| missing("state_head"))?;
                let act = params.act_head.as_ref().ok_or_else(|| missing("act_head"))?;
                matvec(w, &h, out.states.row_mut(i));
                let (lg, ac) = act.forward_cached(&h)?;
                out.prev_activation[i] = T::of(argmax(&lg) as f64);
                if let Some(t) = logits.as_mut() {
                    t.row_mut(i).copy_from_slice(&lg);
                }
                head_caches.push(ac);
            }
        }
        hidden.row_mut(i).copy_from_slice(&h);
        msg_caches.push(mc);
        gru_caches.push(gc);
    }
    debug_assert_eq!(s, ext.cols());
    out.hidden = hidden.clone();
    let cache = StepCache {
        ext,
        local,
        long,
        msg: msg_caches,
        gru: gru_caches,
        head: head_caches,
        hidden,
    };
    Ok((StepOutput { field: out, logits }, cache))
}

fn missing(name: &str) -> Error {
    Error::InvalidArgument(format!("profile requires the `{name}` head"))
}

/// Backpropagates `grad` through one step, accumulating parameter gradients
/// into `grads`. Returns the gradient with respect to the input field's
/// states and hidden states.
pub fn nca_step_backward<T: Scalar>(
    params: &ModelParams<T>,
    config: &ModelConfig,
    cache: &StepCache<T>,
    grad: &StepGrad<T>,
    grads: &mut ModelParams<T>,
) -> Result<StepGrad<T>> {
    let n = cache.ext.rows();
    let s = config.ext_dim;
    let c = config.state_dim;
    let hd = config.hidden_dim();
    let msg_out = config.msg_out();
    check_dim("state gradient", n * c, grad.states.len())?;
    check_dim("hidden gradient", n * hd, grad.hidden.len())?;

    let mut d_ext = Tensor::zeros(&[n, s]);
    let mut d_local = Tensor::zeros(&[n, s]);
    let mut d_long = Tensor::zeros(&[n, s]);
    let mut d_hidden_prev = Tensor::zeros(&[n, hd]);
    let mut dh = vec![T::zero(); hd];
    for i in 0..n {
        dh.copy_from_slice(grad.hidden.row(i));
        let dc = grad.states.row(i);
        match config.profile {
            UpdateProfile::ResidualRefine => {
                let refine = params.refine.as_ref().ok_or_else(|| missing("refine"))?;
                let g = grads.refine.as_mut().ok_or_else(|| missing("refine"))?;
                let dr = refine.backward(&cache.head[i], dc, g);
                for ((d, &a), &b) in dh.iter_mut().zip(dc).zip(&dr) {
                    *d += a + b;
                }
            }
            UpdateProfile::ProjectionHeads => {
                let w = params.state_head.as_ref().ok_or_else(|| missing("state_head"))?;
                let gw = grads.state_head.as_mut().ok_or_else(|| missing("state_head"))?;
                outer_add(gw, dc, cache.hidden.row(i));
                matvec_t_add(w, dc, &mut dh);
                if let Some(dl) = &grad.logits {
                    let act = params.act_head.as_ref().ok_or_else(|| missing("act_head"))?;
                    let ga = grads.act_head.as_mut().ok_or_else(|| missing("act_head"))?;
                    let dha = act.backward(&cache.head[i], dl.row(i), ga);
                    for (d, &a) in dh.iter_mut().zip(&dha) {
                        *d += a;
                    }
                }
            }
        }
        let (dm, dhp) = params.gru.backward(&cache.gru[i], &dh, &mut grads.gru);
        d_hidden_prev.row_mut(i).copy_from_slice(&dhp);
        let dz = params.msg.backward(&cache.msg[i], &dm[..msg_out], &mut grads.msg);
        for (d, &g) in d_ext.row_mut(i).iter_mut().zip(&dz[..s]) {
            *d += g;
        }
        d_local.row_mut(i).copy_from_slice(&dz[s..2 * s]);
        let has_long = cache.long.as_ref().is_some_and(|b| !b.domain(i).is_empty());
        if has_long {
            let src = match config.composition {
                CompositionMode::LocalLrConcat => &dz[2 * s..3 * s],
                _ => &dz[s..2 * s],
            };
            d_long.row_mut(i).copy_from_slice(src);
        }
    }
    attn_backward(&params.attn_local, &cache.ext, &cache.local, &d_local, &mut grads.attn_local, &mut d_ext);
    if let Some(long) = &cache.long {
        attn_backward(&params.attn_long, &cache.ext, long, &d_long, &mut grads.attn_long, &mut d_ext);
    }
    let mut d_states = Tensor::zeros(&[n, c]);
    for i in 0..n {
        d_states.row_mut(i).copy_from_slice(&d_ext.row(i)[..c]);
    }
    Ok(StepGrad {
        states: d_states,
        hidden: d_hidden_prev,
        logits: None,
    })
}

impl<T: Scalar> StepCache<T> {
    /// Normalized local attention weights of cell `i`, in domain order. Index
    /// `N` marks a virtual zero-state neighbor.
    pub fn local_weights(&self, i: usize) -> (&[usize], &[T]) {
        (self.local.domain(i), self.local.weights(i))
    }

    /// Long-range attention weights of cell `i`; empty when it has no domain.
    pub fn long_weights(&self, i: usize) -> (&[usize], &[T]) {
        match &self.long {
            Some(b) => (b.domain(i), b.weights(i)),
            None => (&[], &[]),
        }
    }

    /// Long-range aggregate of cell `i` (zero when unused).
    pub fn long_aggregate(&self, i: usize) -> Vec<T> {
        match &self.long {
            Some(b) => b.agg.row(i).to_vec(),
            None => vec![T::zero(); self.ext.cols()],
        }
    }

    pub fn local_aggregate(&self, i: usize) -> &[T] {
        self.local.agg.row(i)
    }
}
