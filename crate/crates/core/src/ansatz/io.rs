// Copyright 2026 The rydgate Authors
// SPDX-License-Identifier: Apache-2.0

//! Weights file: little-endian binary container plus a JSON sidecar.
//!
//! ```text
//! magic        8 bytes  "RYDGNET\0"
//! version      u32
//! gate_k       u32
//! interval     f64 lo, f64 hi
//! arch         u32 × 4   (m_L^T, m_N^T, m_L^C, m_N^C)
//! n_knots      u32
//! delta_bound  f64
//! t_bound      f64
//! correction   u8
//! theta_center f64
//! N_T, N_C     u32 n_layers, then per layer:
//!              u32 n_in, u32 n_out, u8 activation, f64 × n_in·n_out, f64 × n_out
//! crc32        u32 over every preceding byte
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Activation, Arch, ChainedNetwork, Interval, Layer, Mlp, NetConfig};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 8] = *b"RYDGNET\0";
pub const FORMAT_VERSION: u32 = 1;

/// Human-readable description written next to each weights file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetManifest {
    pub format_version: u32,
    pub gate_k: usize,
    pub interval: Interval,
    pub arch: Arch,
    pub n_knots: usize,
    pub delta_bound: f64,
    pub t_bound: f64,
    pub correction_head: bool,
    pub theta_center: f64,
    pub params_t: usize,
    pub params_c: usize,
    pub crc32: u32,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn mlp(&mut self, m: &Mlp) {
        self.u32(m.layers().len());
        for l in m.layers() {
            self.u32(l.n_in());
            self.u32(l.n_out());
            self.u8(l.activation().code());
            l.weights().iter().chain(l.bias()).for_each(|&v| self.f64(v));
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Format("truncated payload".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
    fn mlp(&mut self) -> Result<Mlp> {
        let n_layers = self.u32()?;
        let mut layers = Vec::with_capacity(n_layers.min(1024));
        for _ in 0..n_layers {
            let n_in = self.u32()?;
            let n_out = self.u32()?;
            let code = self.u8()?;
            let act = Activation::from_code(code).ok_or_else(|| Error::Format(format!("activation code {code}")))?;
            let count = n_in.checked_mul(n_out).ok_or_else(|| Error::Format("layer size overflows".into()))?;
            if count.saturating_mul(8) > self.buf.len() {
                return Err(Error::Format("layer larger than the file".into()));
            }
            let w = self.f64s(count)?;
            let b = self.f64s(n_out)?;
            layers.push(Layer::new(w, b, act).map_err(|e| Error::Format(e.to_string()))?);
        }
        Mlp::from_layers(layers).map_err(|e| Error::Format(e.to_string()))
    }
}

impl ChainedNetwork {
    pub fn to_bytes(&self) -> Vec<u8> {
        let c = self.config();
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(&MAGIC);
        w.u32(FORMAT_VERSION as usize);
        w.u32(c.gate_k);
        w.f64(c.interval.lo);
        w.f64(c.interval.hi);
        let (a, b, d, e) = c.arch.as_tuple();
        [a, b, d, e].into_iter().for_each(|v| w.u32(v));
        w.u32(c.n_knots);
        w.f64(c.delta_bound);
        w.f64(c.t_bound);
        w.u8(u8::from(c.correction_head));
        w.f64(self.theta_center());
        w.mlp(self.n_t());
        w.mlp(self.n_c());
        let crc = crc32fast::hash(&w.0);
        w.0.extend_from_slice(&crc.to_le_bytes());
        w.0
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        if buf.len() < MAGIC.len() + 8 || buf[..MAGIC.len()] != MAGIC {
            return Err(Error::Format("not a rydgate weights file (bad magic)".into()));
        }
        let mut r = Reader { buf, pos: MAGIC.len() };
        let version = r.u32()? as u32;
        if version != FORMAT_VERSION {
            return Err(Error::VersionMismatch { found: version, expected: FORMAT_VERSION });
        }
        let (body, tail) = buf.split_at(buf.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        if crc32fast::hash(body) != stored {
            return Err(Error::Format("checksum mismatch (corrupt payload)".into()));
        }
        let mut r = Reader { buf: body, pos: r.pos };
        let gate_k = r.u32()?;
        let (lo, hi) = (r.f64()?, r.f64()?);
        let arch = Arch::new(r.u32()?, r.u32()?, r.u32()?, r.u32()?);
        let n_knots = r.u32()?;
        let delta_bound = r.f64()?;
        let t_bound = r.f64()?;
        let correction_head = match r.u8()? {
            0 => false,
            1 => true,
            v => return Err(Error::Format(format!("correction flag {v}"))),
        };
        let theta_center = r.f64()?;
        let n_t = r.mlp()?;
        let n_c = r.mlp()?;
        if r.pos != body.len() {
            return Err(Error::Format(format!("{} trailing bytes", body.len() - r.pos)));
        }
        let interval = Interval::new(lo, hi).map_err(|e| Error::Format(e.to_string()))?;
        let config = NetConfig { gate_k, arch, interval, n_knots, delta_bound, t_bound, correction_head };
        ChainedNetwork::from_parts(config, n_t, n_c, theta_center).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn manifest(&self) -> NetManifest {
        let c = self.config();
        let bytes = self.to_bytes();
        let crc = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().expect("4 bytes"));
        NetManifest {
            format_version: FORMAT_VERSION,
            gate_k: c.gate_k,
            interval: c.interval,
            arch: c.arch,
            n_knots: c.n_knots,
            delta_bound: c.delta_bound,
            t_bound: c.t_bound,
            correction_head: c.correction_head,
            theta_center: self.theta_center(),
            params_t: self.n_t().n_params(),
            params_c: self.n_c().n_params(),
            crc32: crc,
        }
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes `path` and its `.json` sidecar, each atomically.
pub fn write_weights(path: &Path, net: &ChainedNetwork) -> Result<()> {
    write_atomic(path, &net.to_bytes())?;
    let manifest = serde_json::to_vec_pretty(&net.manifest())?;
    write_atomic(&sidecar(path), &manifest)
}

pub fn read_weights(path: &Path) -> Result<ChainedNetwork> {
    ChainedNetwork::from_bytes(&fs::read(path)?)
}
