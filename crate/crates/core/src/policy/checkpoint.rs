//! Binary checkpoint of a trained actor-critic pair.
//!
//! All integers are unsigned little-endian, all reals little-endian IEEE-754
//! binary64. Layout:
//!
//! | bytes  | field                                          |
//! |--------|------------------------------------------------|
//! | 8      | magic `RLRCCKPT`                               |
//! | 4      | format version, currently 1                    |
//! | 8      | training iteration                             |
//! | 4      | observation dimension `n`                      |
//! | 8n     | observation offsets                            |
//! | 8n     | observation scales                             |
//! | 4      | action dimension `k`                           |
//! | 8k     | action scales (physical value of a unit action) |
//! | 8k     | policy log standard deviations                 |
//! | ...    | policy network block                           |
//! | ...    | value network block                            |
//!
//! A network block is a `u32` count `L` of layer sizes, `L` `u32` sizes, then
//! the flat parameters: for each layer the `out x in` row-major weights
//! followed by the `out` biases.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::policy::gaussian::GaussianPolicy;
use crate::policy::mlp::{param_count, Mlp};

pub const MAGIC: &[u8; 8] = b"RLRCCKPT";
pub const FORMAT_VERSION: u32 = 1;
const MAX_DIM: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub policy: GaussianPolicy,
    pub value: Mlp,
    pub iteration: u64,
}

fn put_u32(buf: &mut Vec<u8>, v: usize) {
    buf.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_f64s(buf: &mut Vec<u8>, vs: &[f64]) {
    for v in vs {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

fn put_net(buf: &mut Vec<u8>, net: &Mlp) {
    put_u32(buf, net.sizes().len());
    for &s in net.sizes() {
        put_u32(buf, s);
    }
    put_f64s(buf, net.params());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Checkpoint(format!("truncated at byte {} (need {n} more)", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn dim(&mut self, what: &str) -> Result<usize> {
        let n = self.u32()?;
        if n == 0 || n > MAX_DIM {
            return Err(Error::Checkpoint(format!("implausible {what} {n}")));
        }
        Ok(n)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("size overflow".into()))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn net(&mut self) -> Result<Mlp> {
        let n_sizes = self.dim("layer count")?;
        let sizes = (0..n_sizes).map(|_| self.dim("layer size")).collect::<Result<Vec<_>>>()?;
        if sizes.len() < 2 {
            return Err(Error::Checkpoint("network needs at least two layers".into()));
        }
        let params = self.f64s(param_count(&sizes))?;
        Mlp::from_params(&sizes, params).map_err(|e| Error::Checkpoint(e.to_string()))
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let p = &self.policy;
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        buf.extend_from_slice(&self.iteration.to_le_bytes());
        put_u32(&mut buf, p.obs_offset.len());
        put_f64s(&mut buf, &p.obs_offset);
        put_f64s(&mut buf, &p.obs_scale);
        put_u32(&mut buf, p.action_scale.len());
        put_f64s(&mut buf, &p.action_scale);
        put_f64s(&mut buf, &p.log_std);
        put_net(&mut buf, &p.net);
        put_net(&mut buf, &self.value);
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("bad magic; not a checkpoint file".into()));
        }
        let version = r.u32()? as u32;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version} (expected {FORMAT_VERSION})"
            )));
        }
        let iteration = r.u64()?;
        let n = r.dim("observation dimension")?;
        let obs_offset = r.f64s(n)?;
        let obs_scale = r.f64s(n)?;
        let k = r.dim("action dimension")?;
        let action_scale = r.f64s(k)?;
        let log_std = r.f64s(k)?;
        let net = r.net()?;
        let value = r.net()?;
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        if value.input_dim() != n || value.output_dim() != 1 {
            return Err(Error::Checkpoint("value network shape does not match".into()));
        }
        let policy = GaussianPolicy::new(net, log_std, obs_offset, obs_scale, action_scale)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        Ok(Self {
            policy,
            value,
            iteration,
        })
    }

    /// Writes to a sibling temporary file and renames it into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&self.to_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}
