//! Binary checkpoint layout, all integers and floats little-endian:
//!
//! ```text
//! magic "QNETCKPT" | version u32 | arch hash u64 | step u64
//! lr start f64 | lr end f64 | lr steps u64 | beta1 f64 | beta2 f64 | eps f64
//! tensor count u32 | per tensor: name len u16, name, rank u8, dims u64.., offset u64
//! value count u64 | parameters f64.. | first moments f64.. | second moments f64..
//! sha256 of everything above
//! ```

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::nn::adam::{LrSchedule, OptimizerState};
use crate::nn::qnet::{ArchConfig, ParamSpec, QNetwork};
use crate::nn::NnError;
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 8] = b"QNETCKPT";
pub const FORMAT_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

pub fn encode_checkpoint<T: Scalar>(net: &QNetwork<T>, opt: &OptimizerState<T>) -> Vec<u8> {
    let n = net.param_count();
    let mut out = Vec::with_capacity(3 * n * 8 + 1024);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&net.arch().hash().to_le_bytes());
    out.extend_from_slice(&opt.step.to_le_bytes());
    out.extend_from_slice(&opt.schedule.start.to_le_bytes());
    out.extend_from_slice(&opt.schedule.end.to_le_bytes());
    out.extend_from_slice(&opt.schedule.total_steps.to_le_bytes());
    for x in [opt.beta1, opt.beta2, opt.eps] {
        out.extend_from_slice(&x.to_le_bytes());
    }
    let specs = net.param_specs();
    out.extend_from_slice(&(specs.len() as u32).to_le_bytes());
    for s in specs {
        out.extend_from_slice(&(s.name.len() as u16).to_le_bytes());
        out.extend_from_slice(s.name.as_bytes());
        out.push(s.shape.len() as u8);
        for &d in &s.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        out.extend_from_slice(&(s.offset as u64).to_le_bytes());
    }
    out.extend_from_slice(&(n as u64).to_le_bytes());
    for buf in [net.params(), &opt.m, &opt.v] {
        for &x in buf {
            out.extend_from_slice(&x.as_f64().to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| NnError::Malformed("unexpected end of checkpoint".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, NnError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, NnError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, NnError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, NnError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Decode a checkpoint written for `arch`.
pub fn decode_checkpoint<T: Scalar>(bytes: &[u8], arch: &ArchConfig) -> Result<(QNetwork<T>, OptimizerState<T>), NnError> {
    if bytes.len() < DIGEST_LEN {
        return Err(NnError::ChecksumMismatch);
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(NnError::ChecksumMismatch);
    }
    let mut r = Reader { bytes: body, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(NnError::Malformed("not a network checkpoint".into()));
    }
    let version = r.u32()?;
    let arch_hash = r.u64()?;
    if version != FORMAT_VERSION || arch_hash != arch.hash() {
        return Err(NnError::VersionMismatch {
            version,
            arch_hash,
            expected_version: FORMAT_VERSION,
            expected_arch_hash: arch.hash(),
        });
    }
    let step = r.u64()?;
    let schedule = LrSchedule {
        start: r.f64()?,
        end: r.f64()?,
        total_steps: r.u64()?,
    };
    let (beta1, beta2, eps) = (r.f64()?, r.f64()?, r.f64()?);

    let mut net = QNetwork::<T>::zeros(*arch);
    let count = r.u32()? as usize;
    let mut specs = Vec::with_capacity(count);
    for _ in 0..count {
        let len = r.u16()? as usize;
        let name = String::from_utf8(r.take(len)?.to_vec()).map_err(|_| NnError::Malformed("tensor name".into()))?;
        let rank = r.u8()? as usize;
        let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        let offset = r.u64()? as usize;
        specs.push(ParamSpec { name, shape, offset });
    }
    if specs != net.param_specs() {
        return Err(NnError::Malformed("tensor manifest does not match the architecture".into()));
    }
    let n = r.u64()? as usize;
    if n != net.param_count() {
        return Err(NnError::ShapeMismatch {
            expected: net.param_count(),
            got: n,
        });
    }
    let read_vec = |r: &mut Reader| -> Result<Vec<T>, NnError> {
        (0..n).map(|_| r.f64().map(T::lit)).collect()
    };
    let params = read_vec(&mut r)?;
    let m = read_vec(&mut r)?;
    let v = read_vec(&mut r)?;
    if r.pos != body.len() {
        return Err(NnError::Malformed("trailing bytes".into()));
    }
    net.set_params(&params)?;
    let opt = OptimizerState {
        m,
        v,
        step,
        schedule,
        beta1,
        beta2,
        eps,
    };
    Ok((net, opt))
}

pub fn save_weights<T: Scalar, P: AsRef<Path>>(path: P, net: &QNetwork<T>, opt: &OptimizerState<T>) -> Result<(), NnError> {
    fs::write(path, encode_checkpoint(net, opt))?;
    Ok(())
}

pub fn load_weights<T: Scalar, P: AsRef<Path>>(path: P, arch: &ArchConfig) -> Result<(QNetwork<T>, OptimizerState<T>), NnError> {
    let bytes = fs::read(path)?;
    decode_checkpoint(&bytes, arch)
}
