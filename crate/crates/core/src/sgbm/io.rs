//! On-disk instance container.
//!
//! Layout (all integers and doubles little-endian):
//!
//! ```text
//! magic   4 bytes  "SGBM"
//! version u16      currently 1
//! n       u32
//! k       u32
//! d       u16
//! kind    u8       0 = O(d), 1 = SO(d)
//! form    u8       0 = raw rates, 1 = logarithmic rates
//! seed    u64
//! rate_a  f64      p (raw) or alpha (logarithmic)
//! rate_b  f64      q (raw) or beta (logarithmic)
//! labels  n * u32
//! blocks  n * d*d * f64   ground-truth rotations, row-major
//! edges   u64 count, then per edge: i u32, j u32, d*d * f64 row-major
//! ```
//!
//! Doubles are written by bit pattern, so write-then-read reproduces the
//! instance exactly. A small JSON sidecar with the header fields is written
//! next to the binary file for quick inspection.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{GroundTruth, Rates, SgbmParams};
use crate::blockmat::{GroupKind, GroupStack, Mat, ObservationMatrix, OrthoBlock};
use crate::error::{Error, Result};

const MAGIC: [u8; 4] = *b"SGBM";
const VERSION: u16 = 1;

/// Header fields mirrored into the JSON sidecar.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub group: String,
    pub rate_form: String,
    pub rate_a: f64,
    pub rate_b: f64,
    pub seed: u64,
    pub edge_count: usize,
}

/// Path of the JSON sidecar written next to an instance file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".json");
    PathBuf::from(os)
}

struct Sink<W: Write> {
    w: W,
}

impl<W: Write> Sink<W> {
    fn u16(&mut self, v: u16) -> Result<()> {
        Ok(self.w.write_all(&v.to_le_bytes())?)
    }
    fn u32(&mut self, v: u32) -> Result<()> {
        Ok(self.w.write_all(&v.to_le_bytes())?)
    }
    fn u64(&mut self, v: u64) -> Result<()> {
        Ok(self.w.write_all(&v.to_le_bytes())?)
    }
    fn f64(&mut self, v: f64) -> Result<()> {
        Ok(self.w.write_all(&v.to_le_bytes())?)
    }
    fn u8(&mut self, v: u8) -> Result<()> {
        Ok(self.w.write_all(&[v])?)
    }
    fn mat(&mut self, m: &Mat) -> Result<()> {
        for &x in m.data() {
            self.f64(x)?;
        }
        Ok(())
    }
}

struct Source<R: Read> {
    r: R,
}

impl<R: Read> Source<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.r.read_exact(&mut buf)?;
        Ok(buf)
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.bytes()?))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }
    fn mat(&mut self, d: usize) -> Result<Mat> {
        let mut m = Mat::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = self.f64()?;
            }
        }
        Ok(m)
    }
}

/// Write an instance and its JSON sidecar.
pub fn write_instance(path: &Path, truth: &GroundTruth, obs: &ObservationMatrix) -> Result<()> {
    let params = &truth.params;
    let (form, a, b) = match params.rates {
        Rates::Raw { p, q } => (0u8, p, q),
        Rates::Logarithmic { alpha, beta } => (1u8, alpha, beta),
    };

    let file = File::create(path)?;
    let mut s = Sink { w: BufWriter::new(file) };
    s.w.write_all(&MAGIC)?;
    s.u16(VERSION)?;
    s.u32(params.n as u32)?;
    s.u32(params.k as u32)?;
    s.u16(params.d() as u16)?;
    s.u8(if params.kind.is_special() { 1 } else { 0 })?;
    s.u8(form)?;
    s.u64(truth.seed)?;
    s.f64(a)?;
    s.f64(b)?;
    for &l in &truth.labels {
        s.u32(l)?;
    }
    for block in truth.rotations.iter() {
        s.mat(block.mat())?;
    }
    s.u64(obs.edge_count() as u64)?;
    for e in obs.edges() {
        s.u32(e.i)?;
        s.u32(e.j)?;
        s.mat(&e.block)?;
    }
    s.w.flush()?;

    let meta = InstanceMeta {
        n: params.n,
        k: params.k,
        d: params.d(),
        group: if params.kind.is_special() { "so".into() } else { "o".into() },
        rate_form: if form == 0 { "raw".into() } else { "logarithmic".into() },
        rate_a: a,
        rate_b: b,
        seed: truth.seed,
        edge_count: obs.edge_count(),
    };
    let json = serde_json::to_string_pretty(&meta)?;
    std::fs::write(sidecar_path(path), json)?;
    Ok(())
}

/// Read an instance written by [`write_instance`].
pub fn read_instance(path: &Path) -> Result<(GroundTruth, ObservationMatrix)> {
    let file = File::open(path)?;
    let mut s = Source { r: BufReader::new(file) };

    let magic: [u8; 4] = s.bytes()?;
    if magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, not an instance file")));
    }
    let version = s.u16()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported container version {version}")));
    }
    let n = s.u32()? as usize;
    let k = s.u32()? as usize;
    let d = s.u16()? as usize;
    let kind = match s.u8()? {
        0 => GroupKind::Orthogonal(d),
        1 => GroupKind::SpecialOrthogonal(d),
        other => return Err(Error::Format(format!("unknown group tag {other}"))),
    };
    let form = s.u8()?;
    let seed = s.u64()?;
    let a = s.f64()?;
    let b = s.f64()?;
    let rates = match form {
        0 => Rates::Raw { p: a, q: b },
        1 => Rates::Logarithmic { alpha: a, beta: b },
        other => return Err(Error::Format(format!("unknown rate form {other}"))),
    };
    let params = SgbmParams::new(n, k, kind, rates)?;

    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let l = s.u32()?;
        if l as usize >= k {
            return Err(Error::Format(format!("label {l} out of range for K={k}")));
        }
        labels.push(l);
    }
    let mut blocks = Vec::with_capacity(n);
    for _ in 0..n {
        blocks.push(OrthoBlock::from_validated(s.mat(d)?, kind)?);
    }
    let edge_count = s.u64()? as usize;
    let mut edges = Vec::with_capacity(edge_count);
    for _ in 0..edge_count {
        let i = s.u32()?;
        let j = s.u32()?;
        edges.push((i, j, s.mat(d)?));
    }
    let obs = ObservationMatrix::from_edges(n, d, edges)?;
    let truth = GroundTruth { params, labels, rotations: GroupStack::new(blocks)?, seed };
    Ok((truth, obs))
}
