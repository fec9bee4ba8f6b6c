use crate::error::{check_dim, Error, Result};
use crate::math::activation::{gelu_with_grad, softmax, softmax_in_place};
use crate::math::tensor::{matvec_cols, matvec_t_cols_add, outer_cols_add};
use crate::math::{MlpParams, Tensor};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighborhood {
    Local,
    LongRange,
}

/// Cells cell `i` attends over: `{i} ∪ list` when `include_self`.
///
/// A long-range domain is empty when the list is, so the aggregate falls back
/// to the zero vector instead of attending to the cell alone.
pub fn attention_domain(i: usize, list: &[usize], include_self: bool, kind: Neighborhood) -> Vec<usize> {
    if kind == Neighborhood::LongRange && list.is_empty() {
        return Vec::new();
    }
    let mut d = Vec::with_capacity(list.len() + 1);
    if include_self {
        d.push(i);
    }
    d.extend_from_slice(list);
    d
}

/// Normalized attention weights of cell `i` over `domain`, scored pairwise by
/// `params` on `[s_i; s_j]`.
pub fn attention_weights<T: Scalar>(
    params: &MlpParams<T>,
    s_all: &Tensor<T>,
    domain: &[usize],
    i: usize,
) -> Result<Vec<T>> {
    check_dim("attention input", 2 * s_all.cols(), params.fan_in())?;
    check_dim("attention output", 1, params.fan_out())?;
    let mut scores = Vec::with_capacity(domain.len());
    let mut pair = Vec::with_capacity(2 * s_all.cols());
    for &j in domain {
        pair.clear();
        pair.extend_from_slice(s_all.row(i));
        pair.extend_from_slice(s_all.row(j));
        scores.push(params.forward(&pair)?[0]);
    }
    softmax(&scores)
}

/// `sum_j alpha_ij * values_j` over `domain`; zero for an empty domain.
pub fn attention_aggregate<T: Scalar>(
    params: &MlpParams<T>,
    s_all: &Tensor<T>,
    values: &Tensor<T>,
    domain: &[usize],
    i: usize,
) -> Result<Vec<T>> {
    let mut out = vec![T::zero(); values.cols()];
    if domain.is_empty() {
        return Ok(out);
    }
    let w = attention_weights(params, s_all, domain, i)?;
    for (&j, &a) in domain.iter().zip(&w) {
        for (o, &v) in out.iter_mut().zip(values.row(j)) {
            *o += a * v;
        }
    }
    Ok(out)
}

/// Attention over all cells for one neighborhood, with everything the backward
/// pass needs. Values are the extended states themselves. Member index `N`
/// stands for a virtual neighbor whose extended state is zero.
#[derive(Debug, Clone)]
pub(crate) struct AttnBatch<T> {
    /// Domain of cell `i` is `members[offsets[i]..offsets[i + 1]]`.
    pub offsets: Vec<usize>,
    pub members: Vec<usize>,
    pub alpha: Vec<T>,
    /// Post-GELU hidden activations per pair, `pairs x hidden`.
    hid: Vec<T>,
    dgelu: Vec<T>,
    /// `N x S` aggregates.
    pub agg: Tensor<T>,
}

impl<T: Scalar> AttnBatch<T> {
    pub fn domain(&self, i: usize) -> &[usize] {
        &self.members[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn weights(&self, i: usize) -> &[T] {
        &self.alpha[self.offsets[i]..self.offsets[i + 1]]
    }
}

/// Splits the first attention layer into the `s_i` and `s_j` halves:
/// `pre_ij = (W_a s_i + b) + W_b s_j`.
pub(crate) fn attn_forward<T: Scalar>(
    params: &MlpParams<T>,
    ext: &Tensor<T>,
    lists: &[Vec<usize>],
    padding: Option<&[usize]>,
    include_self: bool,
    kind: Neighborhood,
) -> Result<AttnBatch<T>> {
    let n = ext.rows();
    let s = ext.cols();
    if params.layers.len() != 2 || params.fan_out() != 1 {
        return Err(Error::InvalidArgument(
            "attention network must be two layers with scalar output".into(),
        ));
    }
    check_dim("attention input", 2 * s, params.fan_in())?;
    check_dim("attention lists", n, lists.len())?;
    if let Some(pad) = padding {
        check_dim("attention padding", n, pad.len())?;
    }
    let l1 = &params.layers[0];
    let l2 = &params.layers[1];
    let ha = l1.fan_out();
    let w2 = l2.weight.data();
    let b2 = l2.bias.data()[0];

    let mut offsets = Vec::with_capacity(n + 1);
    let mut members = Vec::new();
    offsets.push(0);
    for (i, list) in lists.iter().enumerate() {
        members.extend(attention_domain(i, list, include_self, kind));
        if let Some(pad) = padding {
            members.extend(std::iter::repeat(n).take(pad[i]));
        }
        offsets.push(members.len());
    }
    let pairs = members.len();
    let mut agg = Tensor::zeros(&[n, s]);
    if pairs == 0 {
        return Ok(AttnBatch {
            offsets,
            members,
            alpha: Vec::new(),
            hid: Vec::new(),
            dgelu: Vec::new(),
            agg,
        });
    }

    let mut p = vec![T::zero(); n * ha];
    let mut q = vec![T::zero(); (n + 1) * ha];
    for i in 0..n {
        let pi = &mut p[i * ha..(i + 1) * ha];
        matvec_cols(&l1.weight, 0, ext.row(i), pi);
        for (v, &b) in pi.iter_mut().zip(l1.bias.data()) {
            *v += b;
        }
        matvec_cols(&l1.weight, s, ext.row(i), &mut q[i * ha..(i + 1) * ha]);
    }

    let mut hid = vec![T::zero(); pairs * ha];
    let mut dgelu = vec![T::zero(); pairs * ha];
    let mut alpha = vec![T::zero(); pairs];
    for i in 0..n {
        let (lo, hi) = (offsets[i], offsets[i + 1]);
        if lo == hi {
            continue;
        }
        let pi = &p[i * ha..(i + 1) * ha];
        for k in lo..hi {
            let j = members[k];
            let qj = &q[j * ha..(j + 1) * ha];
            let hk = &mut hid[k * ha..(k + 1) * ha];
            let dk = &mut dgelu[k * ha..(k + 1) * ha];
            let mut score = b2;
            for u in 0..ha {
                let (g, dg) = gelu_with_grad(pi[u] + qj[u]);
                hk[u] = g;
                dk[u] = dg;
                score += w2[u] * g;
            }
            alpha[k] = score;
        }
        softmax_in_place(&mut alpha[lo..hi]);
        let out = agg.row_mut(i);
        for k in lo..hi {
            if members[k] == n {
                continue;
            }
            let a = alpha[k];
            for (o, &v) in out.iter_mut().zip(ext.row(members[k])) {
                *o += a * v;
            }
        }
    }
    Ok(AttnBatch {
        offsets,
        members,
        alpha,
        hid,
        dgelu,
        agg,
    })
}

/// Backpropagates `d_agg` (`N x S`) into `grads` and `d_ext`.
pub(crate) fn attn_backward<T: Scalar>(
    params: &MlpParams<T>,
    ext: &Tensor<T>,
    batch: &AttnBatch<T>,
    d_agg: &Tensor<T>,
    grads: &mut MlpParams<T>,
    d_ext: &mut Tensor<T>,
) {
    if batch.members.is_empty() {
        return;
    }
    let n = ext.rows();
    let s = ext.cols();
    let l1 = &params.layers[0];
    let ha = l1.fan_out();
    let w2 = params.layers[1].weight.data();
    let mut dp = vec![T::zero(); n * ha];
    let mut dq = vec![T::zero(); (n + 1) * ha];
    let mut dw2 = vec![T::zero(); ha];
    let mut db2 = T::zero();
    let mut dalpha = Vec::new();

    for i in 0..n {
        let (lo, hi) = (batch.offsets[i], batch.offsets[i + 1]);
        if lo == hi {
            continue;
        }
        let dn = d_agg.row(i);
        dalpha.clear();
        let mut mix = T::zero();
        for k in lo..hi {
            let j = batch.members[k];
            if j == n {
                dalpha.push(T::zero());
                continue;
            }
            let a = batch.alpha[k];
            let da = dn.iter().zip(ext.row(j)).map(|(&g, &v)| g * v).sum::<T>();
            dalpha.push(da);
            mix += a * da;
            for (d, &g) in d_ext.row_mut(j).iter_mut().zip(dn) {
                *d += a * g;
            }
        }
        for k in lo..hi {
            let dscore = batch.alpha[k] * (dalpha[k - lo] - mix);
            if dscore == T::zero() {
                continue;
            }
            let j = batch.members[k];
            db2 += dscore;
            let hk = &batch.hid[k * ha..(k + 1) * ha];
            let dk = &batch.dgelu[k * ha..(k + 1) * ha];
            for u in 0..ha {
                dw2[u] += dscore * hk[u];
                let dpre = dscore * w2[u] * dk[u];
                dp[i * ha + u] += dpre;
                dq[j * ha + u] += dpre;
            }
        }
    }

    let g1 = &mut grads.layers[0];
    for i in 0..n {
        let dpi = &dp[i * ha..(i + 1) * ha];
        let dqi = &dq[i * ha..(i + 1) * ha];
        outer_cols_add(&mut g1.weight, 0, dpi, ext.row(i));
        outer_cols_add(&mut g1.weight, s, dqi, ext.row(i));
        for (b, &d) in g1.bias.data_mut().iter_mut().zip(dpi) {
            *b += d;
        }
        let de = d_ext.row_mut(i);
        matvec_t_cols_add(&l1.weight, 0, dpi, de);
        matvec_t_cols_add(&l1.weight, s, dqi, de);
    }
    let g2 = &mut grads.layers[1];
    for (g, &d) in g2.weight.data_mut().iter_mut().zip(&dw2) {
        *g += d;
    }
    g2.bias.data_mut()[0] += db2;
}
