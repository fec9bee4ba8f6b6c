//! Binary parameter checkpoints.
//!
//! ```text
//! magic    8 bytes  "BRNCACKP"
//! version  u32 LE
//! digest   32 bytes SHA-256 of the run configuration
//! count    u32 LE   number of tensors
//! per tensor:
//!   name_len u32 LE, name (UTF-8), rank u32 LE, dims u64 LE * rank,
//!   data f64 LE * product(dims)
//! ```

use std::io::{Read, Write};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::math::{ParamSet, Tensor};
use crate::model::config::ModelConfig;
use crate::model::params::ModelParams;
use crate::scalar::Scalar;

pub const MAGIC: [u8; 8] = *b"BRNCACKP";
pub const VERSION: u32 = 1;
const MAX_NAME: u32 = 4096;
const MAX_RANK: u32 = 8;

/// SHA-256 of the canonical JSON encoding of `config`.
pub fn config_digest<S: Serialize>(config: &S) -> Result<[u8; 32]> {
    let json = serde_json::to_vec(config)?;
    Ok(Sha256::digest(&json).into())
}

pub fn digest_hex(digest: &[u8; 32]) -> String {
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub version: u32,
    pub digest: [u8; 32],
    pub tensors: Vec<(String, Tensor<f64>)>,
}

impl Checkpoint {
    pub fn from_params<T: Scalar>(params: &ModelParams<T>, digest: [u8; 32]) -> Self {
        Self {
            version: VERSION,
            digest,
            tensors: params
                .named_tensors()
                .into_iter()
                .map(|(n, t)| (n, t.cast()))
                .collect(),
        }
    }

    /// Rebuilds parameters for `config`, checking every name and shape.
    pub fn to_params<T: Scalar>(&self, config: &ModelConfig) -> Result<ModelParams<T>> {
        let mut params = ModelParams::<T>::zeros(config);
        let names = params.tensor_names();
        if names.len() != self.tensors.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                names.len(),
                self.tensors.len()
            )));
        }
        for ((name, dst), (got, src)) in names.iter().zip(params.tensors_mut()).zip(&self.tensors) {
            if name != got || dst.shape() != src.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor `{got}` {:?} does not match `{name}` {:?}",
                    src.shape(),
                    dst.shape()
                )));
            }
            *dst = src.cast();
        }
        Ok(params)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&MAGIC)?;
        w.write_all(&self.version.to_le_bytes())?;
        w.write_all(&self.digest)?;
        w.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for (name, t) in &self.tensors {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&(t.rank() as u32).to_le_bytes())?;
            for &d in t.shape() {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            for &v in t.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if magic != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let mut digest = [0u8; 32];
        r.read_exact(&mut digest)?;
        let count = read_u32(&mut r)?;
        let mut tensors = Vec::new();
        for _ in 0..count {
            let len = read_u32(&mut r)?;
            if len > MAX_NAME {
                return Err(Error::Checkpoint(format!("tensor name length {len}")));
            }
            let mut name = vec![0u8; len as usize];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name).map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?;
            let rank = read_u32(&mut r)?;
            if rank > MAX_RANK {
                return Err(Error::Checkpoint(format!("tensor `{name}` has rank {rank}")));
            }
            let mut shape = Vec::with_capacity(rank as usize);
            for _ in 0..rank {
                let mut b = [0u8; 8];
                r.read_exact(&mut b)?;
                shape.push(usize::try_from(u64::from_le_bytes(b)).map_err(|_| Error::Checkpoint("dimension overflow".into()))?);
            }
            let n = shape
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .ok_or_else(|| Error::Checkpoint("tensor size overflow".into()))?;
            let mut data = Vec::with_capacity(n.min(1 << 24));
            for _ in 0..n {
                let mut b = [0u8; 8];
                r.read_exact(&mut b)?;
                data.push(f64::from_le_bytes(b));
            }
            tensors.push((name, Tensor::from_vec(&shape, data)?));
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok(Self { version, digest, tensors })
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn write_checkpoint<T: Scalar, W: Write>(w: W, params: &ModelParams<T>, digest: [u8; 32]) -> Result<()> {
    Checkpoint::from_params(params, digest).write_to(w)
}

pub fn read_checkpoint<R: Read>(r: R) -> Result<Checkpoint> {
    Checkpoint::read_from(r)
}
