//! Versioned binary checkpoint layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes  "WPAIRMLP"
//! version    u32      = 1
//! seed       u64      initialization seed
//! n_widths   u32
//! widths     u32 x n_widths     [d, h_1, ..., h_L, 1]
//! n_params   u64
//! params     f64 x n_params     per layer: row-major weights, then bias
//! ```

use std::io::{Read, Write};

use super::Mlp;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"WPAIRMLP";
pub const CHECKPOINT_VERSION: u32 = 1;

fn read_exact<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| Error::Checkpoint(format!("truncated: {e}")))?;
    Ok(buf)
}

impl<T: Scalar> Mlp<T> {
    pub fn write_checkpoint(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&(self.widths.len() as u32).to_le_bytes())?;
        for &wd in &self.widths {
            w.write_all(&(wd as u32).to_le_bytes())?;
        }
        let params = self.params();
        w.write_all(&(params.len() as u64).to_le_bytes())?;
        for p in params {
            w.write_all(&p.as_f64().to_le_bytes())?;
        }
        Ok(())
    }

    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        let mut v = Vec::new();
        self.write_checkpoint(&mut v).expect("writing to a Vec cannot fail");
        v
    }

    pub fn read_checkpoint(r: &mut impl Read) -> Result<Self> {
        if &read_exact::<8>(r)? != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = u32::from_le_bytes(read_exact(r)?);
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let seed = u64::from_le_bytes(read_exact(r)?);
        let n_widths = u32::from_le_bytes(read_exact(r)?) as usize;
        if n_widths > 1024 {
            return Err(Error::Checkpoint("implausible layer count".into()));
        }
        let mut widths = Vec::with_capacity(n_widths);
        for _ in 0..n_widths {
            widths.push(u32::from_le_bytes(read_exact(r)?) as usize);
        }
        let n_params = u64::from_le_bytes(read_exact(r)?) as usize;
        let expected: usize = widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        if n_params != expected {
            return Err(Error::Checkpoint(format!("header declares {n_params} parameters, widths imply {expected}")));
        }
        let mut params = Vec::with_capacity(n_params);
        for _ in 0..n_params {
            params.push(T::of(f64::from_le_bytes(read_exact(r)?)));
        }
        Mlp::from_parts(widths, seed, &params)
    }
}
