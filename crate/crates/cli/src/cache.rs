//! On-disk cache of the model-independent operators of one grid.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic    8 bytes  "JSQPSOPS"
//! version  u32
//! n        u32
//! r1       f64
//! checksum 32 bytes SHA-256 of the payload
//! payload  u32 operator count, then per operator:
//!          u32 name length, name bytes, u64 entry count,
//!          entries sorted by (row, col): u32 row, u32 col, f64 re, f64 im
//! ```

use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};

use jsqps::contour::GridSpec;
use jsqps::operators::OperatorSet;
use jsqps::sparse;
use log::{info, warn};
use num_complex::Complex64 as C64;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::failure::{AtStage, Failure};

pub const MAGIC: &[u8; 8] = b"JSQPSOPS";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 4 + 8 + 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CacheStatus {
    Hit,
    Built,
    /// An entry existed but was stale or damaged and has been replaced.
    Rebuilt,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CacheHeader {
    pub version: u32,
    pub n: u32,
    pub r1: f64,
    pub checksum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatorSummary {
    pub name: String,
    pub nnz: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CacheReport {
    pub path: PathBuf,
    pub header: CacheHeader,
    pub operators: Vec<OperatorSummary>,
}

/// Why a cache file cannot be used.
#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("not an operator cache")]
    BadMagic,
    #[error("format version {0}, expected {FORMAT_VERSION}")]
    Version(u32),
    #[error("cache is for n = {n}, r1 = {r1}")]
    Grid { n: u32, r1: f64 },
    #[error("checksum mismatch")]
    Checksum,
    #[error("truncated or malformed payload")]
    Malformed,
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn cache_path(dir: &Path, spec: &GridSpec) -> PathBuf {
    dir.join(format!("ops-n{}-r1-{:016x}.bin", spec.n, spec.r1.to_bits()))
}

pub fn encode(ops: &OperatorSet) -> Vec<u8> {
    let mut payload = Vec::new();
    let named = ops.named();
    payload.extend((named.len() as u32).to_le_bytes());
    for (name, op) in named {
        payload.extend((name.len() as u32).to_le_bytes());
        payload.extend(name.as_bytes());
        let mut entries = sparse::triplets(&op.mat);
        entries.sort_by_key(|&(r, c, _)| (r, c));
        payload.extend((entries.len() as u64).to_le_bytes());
        for (r, c, v) in entries {
            payload.extend((r as u32).to_le_bytes());
            payload.extend((c as u32).to_le_bytes());
            payload.extend(v.re.to_le_bytes());
            payload.extend(v.im.to_le_bytes());
        }
    }
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend(MAGIC);
    out.extend(FORMAT_VERSION.to_le_bytes());
    out.extend((ops.spec.n as u32).to_le_bytes());
    out.extend(ops.spec.r1.to_le_bytes());
    out.extend(Sha256::digest(&payload));
    out.extend(payload);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], CacheError> {
        let mut buf = [0u8; N];
        self.bytes.read_exact(&mut buf).map_err(|_| CacheError::Malformed)?;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<u32, CacheError> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn u64(&mut self) -> Result<u64, CacheError> {
        Ok(u64::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64, CacheError> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

pub fn decode_header(bytes: &[u8]) -> Result<CacheHeader, CacheError> {
    let mut rd = Reader { bytes };
    if &rd.take::<8>()? != MAGIC {
        return Err(CacheError::BadMagic);
    }
    let version = rd.u32()?;
    if version != FORMAT_VERSION {
        return Err(CacheError::Version(version));
    }
    let n = rd.u32()?;
    let r1 = rd.f64()?;
    let checksum: [u8; 32] = rd.take()?;
    Ok(CacheHeader {
        version,
        n,
        r1,
        checksum: checksum.iter().map(|b| format!("{b:02x}")).collect(),
    })
}

type Parts = Vec<(String, sparse::SpMat)>;

pub fn decode(bytes: &[u8], spec: &GridSpec) -> Result<Parts, CacheError> {
    let header = decode_header(bytes)?;
    if header.n as usize != spec.n || header.r1.to_bits() != spec.r1.to_bits() {
        return Err(CacheError::Grid {
            n: header.n,
            r1: header.r1,
        });
    }
    let payload = &bytes[HEADER_LEN..];
    let digest: String = Sha256::digest(payload).iter().map(|b| format!("{b:02x}")).collect();
    if digest != header.checksum {
        return Err(CacheError::Checksum);
    }
    let dim = spec.n * spec.n;
    let mut rd = Reader { bytes: payload };
    let count = rd.u32()?;
    let mut parts = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let len = rd.u32()? as usize;
        if rd.bytes.len() < len {
            return Err(CacheError::Malformed);
        }
        let name = String::from_utf8(rd.bytes[..len].to_vec()).map_err(|_| CacheError::Malformed)?;
        rd.bytes = &rd.bytes[len..];
        let nnz = rd.u64()? as usize;
        if rd.bytes.len() < nnz * 24 {
            return Err(CacheError::Malformed);
        }
        let mut entries = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            let (r, c) = (rd.u32()? as usize, rd.u32()? as usize);
            let v = C64::new(rd.f64()?, rd.f64()?);
            if r >= dim || c >= dim {
                return Err(CacheError::Malformed);
            }
            entries.push((r, c, v));
        }
        parts.push((name, sparse::from_triplets(dim, dim, &entries)));
    }
    if !rd.bytes.is_empty() {
        return Err(CacheError::Malformed);
    }
    Ok(parts)
}

pub fn save(dir: &Path, ops: &OperatorSet) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir).at("cache")?;
    let path = cache_path(dir, &ops.spec);
    // write then rename so readers never see half a file
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, encode(ops)).at("cache")?;
    fs::rename(&tmp, &path).at("cache")?;
    Ok(path)
}

pub fn load(path: &Path, spec: &GridSpec) -> Result<OperatorSet, CacheError> {
    let bytes = fs::read(path)?;
    let parts = decode(&bytes, spec)?;
    OperatorSet::from_parts(*spec, parts).map_err(|_| CacheError::Malformed)
}

/// Operators for `spec`, read from `dir` when a valid entry exists and
/// built and stored otherwise.
pub fn load_or_build(dir: &Path, spec: &GridSpec) -> Result<(OperatorSet, CacheStatus), Failure> {
    let path = cache_path(dir, spec);
    let status = if path.exists() {
        match load(&path, spec) {
            Ok(ops) => {
                info!("operators loaded from {}", path.display());
                return Ok((ops, CacheStatus::Hit));
            }
            Err(e) => {
                warn!("rebuilding {}: {e}", path.display());
                CacheStatus::Rebuilt
            }
        }
    } else {
        CacheStatus::Built
    };
    let ops = OperatorSet::build(spec).at("operators")?;
    save(dir, &ops)?;
    Ok((ops, status))
}

pub fn inspect(path: &Path) -> Result<CacheReport, Failure> {
    let bytes = fs::read(path).at("cache")?;
    let bad = |e: CacheError| Failure {
        stage: "cache",
        module: "cli",
        message: format!("{}: {e}", path.display()),
    };
    let header = decode_header(&bytes).map_err(bad)?;
    let spec = GridSpec::new(header.n as usize, header.r1).at("cache")?;
    let parts = decode(&bytes, &spec).map_err(bad)?;
    Ok(CacheReport {
        path: path.to_path_buf(),
        header,
        operators: parts
            .iter()
            .map(|(name, m)| OperatorSummary {
                name: name.clone(),
                nnz: m.compute_nnz(),
            })
            .collect(),
    })
}
