//! Binary checkpoint format for MPS states.
//!
//! Layout, all integers and floats little endian:
//!
//! ```text
//! magic        8 bytes   "MPSCKPT1"
//! version      u32       currently 1
//! n            u64       number of sites
//! center       u64       orthogonality center
//! chi_cap      u64
//! cutoff       f64
//! cum_trunc    f64
//! created_unix u64       save time, seconds since the epoch
//! dims         n × (χ_left u64, χ_right u64)
//! payload      per site, row-major (χl, 2, χr): (re f64, im f64) pairs
//! checksum     u64       FNV-1a over every preceding byte
//! ```

use super::Mps;
use crate::error::{CoreError, Result};
use crate::C64;
use ndarray::Array3;
use std::path::Path;

const MAGIC: &[u8; 8] = b"MPSCKPT1";
const VERSION: u32 = 1;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn save_checkpoint(mps: &Mps, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(mps.n() as u64).to_le_bytes());
    buf.extend_from_slice(&(mps.center as u64).to_le_bytes());
    buf.extend_from_slice(&(mps.chi_cap as u64).to_le_bytes());
    buf.extend_from_slice(&mps.cutoff.to_le_bytes());
    buf.extend_from_slice(&mps.cum_trunc.to_le_bytes());
    let created = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    buf.extend_from_slice(&created.to_le_bytes());
    for t in &mps.tensors {
        let (a, _, c) = t.dim();
        buf.extend_from_slice(&(a as u64).to_le_bytes());
        buf.extend_from_slice(&(c as u64).to_le_bytes());
    }
    for t in &mps.tensors {
        for v in t.iter() {
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
    }
    let sum = fnv1a(&buf);
    buf.extend_from_slice(&sum.to_le_bytes());
    std::fs::write(path, &buf)?;
    Ok(())
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(CoreError::Invalid("checkpoint truncated".into()));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn load_checkpoint(path: &Path) -> Result<Mps> {
    let data = std::fs::read(path)?;
    if data.len() < MAGIC.len() + 8 {
        return Err(CoreError::Invalid("checkpoint truncated".into()));
    }
    let (body, tail) = data.split_at(data.len() - 8);
    let want = u64::from_le_bytes(tail.try_into().unwrap());
    let got = fnv1a(body);
    if want != got {
        return Err(CoreError::Invalid(format!(
            "checkpoint checksum mismatch ({got:016x} != {want:016x})"
        )));
    }
    let mut r = Reader { data: body, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(CoreError::Invalid("not a checkpoint file".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CoreError::Invalid(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let n = r.u64()? as usize;
    let center = r.u64()? as usize;
    let chi_cap = r.u64()? as usize;
    let cutoff = r.f64()?;
    let cum_trunc = r.f64()?;
    let _created = r.u64()?;
    if n == 0 || center >= n {
        return Err(CoreError::Invalid(format!(
            "checkpoint shape invalid: n = {n}, center = {center}"
        )));
    }
    let mut dims = Vec::with_capacity(n);
    for _ in 0..n {
        let a = r.u64()? as usize;
        let c = r.u64()? as usize;
        dims.push((a, c));
    }
    if dims[0].0 != 1 || dims[n - 1].1 != 1 {
        return Err(CoreError::Invalid("checkpoint boundary bonds must be 1".into()));
    }
    for i in 0..n - 1 {
        if dims[i].1 != dims[i + 1].0 {
            return Err(CoreError::Invalid(format!(
                "checkpoint bond mismatch between sites {i} and {}",
                i + 1
            )));
        }
    }
    let mut tensors = Vec::with_capacity(n);
    for &(a, c) in &dims {
        let count = a * 2 * c;
        let mut vals = Vec::with_capacity(count);
        for _ in 0..count {
            let re = r.f64()?;
            let im = r.f64()?;
            vals.push(C64::new(re, im));
        }
        tensors.push(Array3::from_shape_vec((a, 2, c), vals).unwrap());
    }
    if r.pos != body.len() {
        return Err(CoreError::Invalid("checkpoint has trailing bytes".into()));
    }
    Ok(Mps { tensors, center, cutoff, chi_cap, cum_trunc })
}
