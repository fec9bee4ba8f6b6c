use crate::error::{check_dim, Result};
use crate::math::Tensor;
use crate::model::config::{ModelConfig, UpdateProfile};
use crate::scalar::Scalar;
use crate::topology::CellGraph;

/// Per-cell dynamic state of one NCA.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField<T> {
    /// `N x C` carried cell states.
    pub states: Tensor<T>,
    /// `N x H` GRU hidden states.
    pub hidden: Tensor<T>,
    /// Previous binary activation per cell (control profile only; zeros otherwise).
    pub prev_activation: Vec<T>,
    /// `N x 2` normalized grid coordinates, fixed for a run.
    pub positions: Tensor<T>,
}

impl<T: Scalar> CellField<T> {
    /// All-zero states, hidden and activations over the cells of `graph`.
    pub fn zeros(config: &ModelConfig, graph: &CellGraph) -> Self {
        let n = graph.len();
        let positions = graph
            .positions
            .iter()
            .flat_map(|p| [T::of(p[0]), T::of(p[1])])
            .collect();
        Self {
            states: Tensor::zeros(&[n, config.state_dim]),
            hidden: Tensor::zeros(&[n, config.hidden_dim()]),
            prev_activation: vec![T::zero(); n],
            positions: Tensor::from_vec(&[n, 2], positions).expect("two coordinates per cell"),
        }
    }

    pub fn len(&self) -> usize {
        self.states.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn check(&self, config: &ModelConfig, n: usize) -> Result<()> {
        check_dim("field states", n * config.state_dim, self.states.len())?;
        check_dim("field hidden", n * config.hidden_dim(), self.hidden.len())?;
        check_dim("field activations", n, self.prev_activation.len())?;
        check_dim("field positions", n * 2, self.positions.len())
    }

    /// Resets everything except positions.
    pub fn reset(&mut self) {
        self.states.fill(T::zero());
        self.hidden.fill(T::zero());
        self.prev_activation.iter_mut().for_each(|v| *v = T::zero());
    }

    /// Relabels cells: row `old` moves to row `perm[old]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let permute = |t: &Tensor<T>| {
            let mut out = Tensor::zeros(t.shape());
            for (old, &new) in perm.iter().enumerate() {
                out.row_mut(new).copy_from_slice(t.row(old));
            }
            out
        };
        let mut act = vec![T::zero(); perm.len()];
        for (old, &new) in perm.iter().enumerate() {
            act[new] = self.prev_activation[old];
        }
        Self {
            states: permute(&self.states),
            hidden: permute(&self.hidden),
            prev_activation: act,
            positions: permute(&self.positions),
        }
    }
}

/// `s_i = c_i` (residual profile) or `s_i = [c_i; l_i; rho_i]` (projection profile).
pub fn extended_state<T: Scalar>(config: &ModelConfig, field: &CellField<T>, i: usize) -> Vec<T> {
    let mut s = Vec::with_capacity(config.ext_dim);
    s.extend_from_slice(field.states.row(i));
    if config.profile == UpdateProfile::ProjectionHeads {
        s.push(field.prev_activation[i]);
        s.extend_from_slice(field.positions.row(i));
    }
    s
}

/// Extended states of every cell as an `N x S` matrix.
pub fn extended_states<T: Scalar>(config: &ModelConfig, field: &CellField<T>) -> Tensor<T> {
    let n = field.len();
    let mut data = Vec::with_capacity(n * config.ext_dim);
    for i in 0..n {
        data.extend(extended_state(config, field, i));
    }
    Tensor::from_vec(&[n, config.ext_dim], data).expect("extended state width")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::CompositionMode;
    use crate::topology::{build_grid, Topology};

    fn graph(n: usize) -> CellGraph {
        Topology::moore(build_grid(n, n, None).unwrap(), 1)
            .unwrap()
            .compact()
            .unwrap()
    }

    #[test]
    fn morph_extended_state_is_cell_state() {
        let cfg = ModelConfig::morph(CompositionMode::LocalOnly);
        let mut f = CellField::<f64>::zeros(&cfg, &graph(3));
        assert_eq!(extended_state(&cfg, &f, 4), vec![0.0; 9]);
        f.states.row_mut(4)[2] = 1.5;
        assert_eq!(extended_state(&cfg, &f, 4)[2], 1.5);
    }

    #[test]
    fn lander_extended_state_layout() {
        let cfg = ModelConfig::lander();
        let mut f = CellField::<f64>::zeros(&cfg, &graph(16));
        f.prev_activation[255] = 1.0;
        let s = extended_state(&cfg, &f, 255);
        assert_eq!(s.len(), 15);
        assert_eq!(&s[12..], &[1.0, 1.0, 1.0]);
        let s0 = extended_state(&cfg, &f, 0);
        assert_eq!(&s0[12..], &[0.0, 0.0, 0.0]);
        let s15 = extended_state(&cfg, &f, 15);
        assert_eq!(&s15[13..], &[0.0, 1.0]);
        assert_eq!(extended_states(&cfg, &f).row(255), &s[..]);
    }

    #[test]
    fn permutation_moves_rows() {
        let cfg = ModelConfig::lander();
        let mut f = CellField::<f64>::zeros(&cfg, &graph(2));
        f.states.row_mut(0)[0] = 7.0;
        f.prev_activation[0] = 1.0;
        let p = f.permuted(&[2, 0, 3, 1]);
        assert_eq!(p.states.row(2)[0], 7.0);
        assert_eq!(p.prev_activation[2], 1.0);
        assert_eq!(p.positions.row(2), f.positions.row(0));
        p.check(&cfg, 4).unwrap();
    }
}
