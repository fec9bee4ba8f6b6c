use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How self, local aggregate `n` and long-range aggregate `l` form `z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompositionMode {
    /// `z = [s; n]`
    LocalOnly,
    /// `z = [s; n + l]`
    LocalPlusLrSum,
    /// `z = [s; n; l]`
    LocalLrConcat,
}

impl CompositionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CompositionMode::LocalOnly => "local_only",
            CompositionMode::LocalPlusLrSum => "local_plus_lr_sum",
            CompositionMode::LocalLrConcat => "local_lr_concat",
        }
    }

    /// Number of `S`-wide blocks in `z`.
    pub fn blocks(self) -> usize {
        match self {
            CompositionMode::LocalLrConcat => 3,
            _ => 2,
        }
    }

    pub fn uses_long_range(self) -> bool {
        self != CompositionMode::LocalOnly
    }
}

impl fmt::Display for CompositionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CompositionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "local_only" => Ok(CompositionMode::LocalOnly),
            "local_plus_lr_sum" => Ok(CompositionMode::LocalPlusLrSum),
            "local_lr_concat" => Ok(CompositionMode::LocalLrConcat),
            _ => Err(Error::InvalidArgument(format!("unknown composition mode `{s}`"))),
        }
    }
}

/// What happens after the GRU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateProfile {
    /// `c' = h' + refine(h')`, requires `H = C`.
    ResidualRefine,
    /// `c' = W_C h'` and per-cell fire logits `act(h')`.
    ProjectionHeads,
}

impl UpdateProfile {
    pub fn as_str(self) -> &'static str {
        match self {
            UpdateProfile::ResidualRefine => "residual_refine",
            UpdateProfile::ProjectionHeads => "projection_heads",
        }
    }
}

impl fmt::Display for UpdateProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for UpdateProfile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "residual_refine" => Ok(UpdateProfile::ResidualRefine),
            "projection_heads" => Ok(UpdateProfile::ProjectionHeads),
            _ => Err(Error::InvalidArgument(format!("unknown update profile `{s}`"))),
        }
    }
}

/// Observation width appended to the message in the control profile.
pub const OBS_DIM: usize = 8;
/// One-hot previous-action width appended to the message in the control profile.
pub const ACTION_DIM: usize = 4;

/// Shape of one model.
///
/// Derived widths: `z = blocks * S`; message output is `C` for
/// `ResidualRefine` and `|z|` for `ProjectionHeads`; `m = msg_out + obs + action`;
/// GRU hidden `H = |m|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub state_dim: usize,
    pub ext_dim: usize,
    pub attention_hidden: usize,
    pub attention_out: usize,
    pub msg_hidden: usize,
    pub composition: CompositionMode,
    pub include_self: bool,
    /// Count the graph's virtual zero-state neighbors in the local domain.
    pub boundary_padding: bool,
    pub profile: UpdateProfile,
}

impl ModelConfig {
    /// Pattern-formation profile: `s = c`, `C = S = 9`.
    pub fn morph(composition: CompositionMode) -> Self {
        Self {
            state_dim: 9,
            ext_dim: 9,
            attention_hidden: 64,
            attention_out: 1,
            msg_hidden: 64,
            composition,
            include_self: true,
            boundary_padding: true,
            profile: UpdateProfile::ResidualRefine,
        }
    }

    /// Control profile: `s = [c; prev activation; position]`, `C = 12`, `S = 15`.
    pub fn lander() -> Self {
        Self {
            state_dim: 12,
            ext_dim: 15,
            attention_hidden: 64,
            attention_out: 1,
            msg_hidden: 64,
            composition: CompositionMode::LocalLrConcat,
            include_self: true,
            boundary_padding: false,
            profile: UpdateProfile::ProjectionHeads,
        }
    }

    pub fn interaction_dim(&self) -> usize {
        self.composition.blocks() * self.ext_dim
    }

    pub fn msg_out(&self) -> usize {
        match self.profile {
            UpdateProfile::ResidualRefine => self.state_dim,
            UpdateProfile::ProjectionHeads => self.interaction_dim(),
        }
    }

    pub fn obs_dim(&self) -> usize {
        match self.profile {
            UpdateProfile::ResidualRefine => 0,
            UpdateProfile::ProjectionHeads => OBS_DIM,
        }
    }

    pub fn action_dim(&self) -> usize {
        match self.profile {
            UpdateProfile::ResidualRefine => 0,
            UpdateProfile::ProjectionHeads => ACTION_DIM,
        }
    }

    pub fn message_dim(&self) -> usize {
        self.msg_out() + self.obs_dim() + self.action_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.message_dim()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.state_dim == 0 || self.attention_hidden == 0 || self.msg_hidden == 0 {
            return bad("model widths must be positive".into());
        }
        if self.attention_out != 1 {
            return bad(format!(
                "attention output must be scalar, got {}",
                self.attention_out
            ));
        }
        match self.profile {
            UpdateProfile::ResidualRefine => {
                if self.ext_dim != self.state_dim {
                    return bad("residual profile needs S = C".into());
                }
                if self.composition == CompositionMode::LocalLrConcat {
                    return bad("residual profile composes with local_only or local_plus_lr_sum".into());
                }
            }
            UpdateProfile::ProjectionHeads => {
                if self.ext_dim != self.state_dim + 3 {
                    return bad("projection profile needs S = C + 3".into());
                }
                if self.composition != CompositionMode::LocalLrConcat {
                    return bad("projection profile composes with local_lr_concat".into());
                }
            }
        }
        Ok(())
    }
}
