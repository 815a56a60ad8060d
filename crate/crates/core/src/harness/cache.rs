//! Reference solutions persisted on disk.
//!
//! File layout (little-endian):
//!
//! ```text
//! magic "NLSR0001"
//! f64 a, f64 b, u64 N, f64 tau_e, f64 T, u32 scheme id, f64 beta, f64 sigma,
//! u32 potential id, u32 oversample q
//! 2N x f64: (re, im) pairs in canonical mode order l = -N/2 .. N/2-1
//! ```
//!
//! Files are named after a digest of the header and the initial-data key, and
//! are committed by renaming a fully written temporary file.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::integrators::{evolve, Scheme, SchemeRun};
use crate::physics::{InitialData, Nonlinearity, Potential};
use crate::spectral::{Grid, SpectralField};

pub const CACHE_MAGIC: &[u8; 8] = b"NLSR0001";
pub const HEADER_LEN: usize = 8 + 8 + 8 + 8 + 8 + 8 + 4 + 8 + 8 + 4 + 4;
pub const CACHE_DIR_ENV: &str = "NLSE_CACHE_DIR";
pub const DEFAULT_CACHE_DIR: &str = ".nlse-cache";

/// `$NLSE_CACHE_DIR`, or `.nlse-cache` in the working directory.
pub fn cache_dir() -> PathBuf {
    std::env::var_os(CACHE_DIR_ENV).map_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR), PathBuf::from)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CacheHeader {
    pub a: f64,
    pub b: f64,
    pub n: u64,
    pub tau_e: f64,
    pub final_time: f64,
    pub scheme: Scheme,
    pub beta: f64,
    pub sigma: f64,
    pub potential_id: u32,
    pub oversample_q: u32,
}

impl CacheHeader {
    fn write_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(CACHE_MAGIC);
        out.extend_from_slice(&self.a.to_le_bytes());
        out.extend_from_slice(&self.b.to_le_bytes());
        out.extend_from_slice(&self.n.to_le_bytes());
        out.extend_from_slice(&self.tau_e.to_le_bytes());
        out.extend_from_slice(&self.final_time.to_le_bytes());
        out.extend_from_slice(&self.scheme.id().to_le_bytes());
        out.extend_from_slice(&self.beta.to_le_bytes());
        out.extend_from_slice(&self.sigma.to_le_bytes());
        out.extend_from_slice(&self.potential_id.to_le_bytes());
        out.extend_from_slice(&self.oversample_q.to_le_bytes());
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.a, self.b, self.n as usize)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl Reader<'_> {
    fn take<const K: usize>(&mut self) -> [u8; K] {
        let (head, rest) = self.bytes.split_at(K);
        self.bytes = rest;
        head.try_into().unwrap()
    }

    fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.take())
    }

    fn u64(&mut self) -> u64 {
        u64::from_le_bytes(self.take())
    }

    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }
}

pub fn encode(header: &CacheHeader, coeffs: &[Complex64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * coeffs.len());
    header.write_to(&mut out);
    for c in coeffs {
        out.extend_from_slice(&c.re.to_le_bytes());
        out.extend_from_slice(&c.im.to_le_bytes());
    }
    out
}

/// Parse a cache file image; any structural problem is reported as a reason string.
pub fn decode(bytes: &[u8]) -> std::result::Result<(CacheHeader, Vec<Complex64>), String> {
    if bytes.len() < HEADER_LEN {
        return Err(format!("truncated header ({} bytes)", bytes.len()));
    }
    if &bytes[..8] != CACHE_MAGIC {
        return Err("bad magic".into());
    }
    let mut r = Reader { bytes: &bytes[8..] };
    let a = r.f64();
    let b = r.f64();
    let n = r.u64();
    let tau_e = r.f64();
    let final_time = r.f64();
    let scheme_id = r.u32();
    let beta = r.f64();
    let sigma = r.f64();
    let potential_id = r.u32();
    let oversample_q = r.u32();
    let scheme = Scheme::from_id(scheme_id).ok_or_else(|| format!("unknown scheme id {scheme_id}"))?;
    let expected = (n as usize)
        .checked_mul(16)
        .and_then(|p| p.checked_add(HEADER_LEN))
        .ok_or("mode count overflows")?;
    if bytes.len() != expected {
        return Err(format!("payload length {} does not match N = {n}", bytes.len() - HEADER_LEN));
    }
    let coeffs = (0..n as usize).map(|_| Complex64::new(r.f64(), r.f64())).collect();
    let header =
        CacheHeader { a, b, n, tau_e, final_time, scheme, beta, sigma, potential_id, oversample_q };
    Ok((header, coeffs))
}

/// A reference solution at the final time together with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceCache {
    pub path: PathBuf,
    pub header: CacheHeader,
    pub field: SpectralField,
}

pub fn read_cache(path: &Path) -> Result<ReferenceCache> {
    let bytes = std::fs::read(path)?;
    let cache_err = |reason: String| Error::Cache { path: path.to_path_buf(), reason };
    let (header, coeffs) = decode(&bytes).map_err(cache_err)?;
    let grid = header.grid().map_err(|e| cache_err(e.to_string()))?;
    let field = SpectralField::new(grid, coeffs).map_err(|e| cache_err(e.to_string()))?;
    Ok(ReferenceCache { path: path.to_path_buf(), header, field })
}

/// Write via a temporary file in the same directory and rename it into place.
pub fn write_cache_atomic(path: &Path, header: &CacheHeader, field: &SpectralField) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(&encode(header, field.coeffs()))?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// What to compute: an STFS run at reference resolution.
#[derive(Debug, Clone)]
pub struct ReferenceRequest {
    pub grid: Grid,
    pub tau_e: f64,
    pub final_time: f64,
    pub potential: Potential,
    pub nonlinearity: Nonlinearity,
    pub initial: InitialData,
    pub oversample_q: usize,
}

impl ReferenceRequest {
    pub fn header(&self) -> CacheHeader {
        CacheHeader {
            a: self.grid.a(),
            b: self.grid.b(),
            n: self.grid.size() as u64,
            tau_e: self.tau_e,
            final_time: self.final_time,
            scheme: Scheme::Stfs,
            beta: self.nonlinearity.beta(),
            sigma: self.nonlinearity.sigma(),
            potential_id: self.potential.id(),
            oversample_q: self.oversample_q as u32,
        }
    }

    pub fn scheme_run(&self) -> SchemeRun {
        SchemeRun {
            scheme: Scheme::Stfs,
            tau: self.tau_e,
            final_time: self.final_time,
            grid: self.grid,
            potential: self.potential.clone(),
            nonlinearity: self.nonlinearity,
            initial: self.initial.clone(),
            oversample_q: self.oversample_q,
        }
    }

    /// `<initial>-<potential>-<digest>.nlsr`.
    pub fn file_name(&self) -> Result<String> {
        if matches!(self.potential, Potential::CustomSamples(_))
            || matches!(self.initial, InitialData::CustomClosure(_))
        {
            return Err(Error::invalid("custom potentials and initial data cannot be cached"));
        }
        let mut bytes = Vec::new();
        self.header().write_to(&mut bytes);
        bytes.extend_from_slice(self.initial.key().as_bytes());
        let digest = Sha256::digest(&bytes);
        Ok(format!(
            "{}-{}-{}.nlsr",
            self.initial.key(),
            self.potential.key(),
            &hex::encode(digest)[..16]
        ))
    }
}

fn key_lock(path: &Path) -> Arc<Mutex<()>> {
    static LOCKS: OnceLock<Mutex<HashMap<PathBuf, Arc<Mutex<()>>>>> = OnceLock::new();
    let mut map = LOCKS.get_or_init(Default::default).lock().unwrap_or_else(|e| e.into_inner());
    map.entry(path.to_path_buf()).or_default().clone()
}

/// Load the reference for `req` from `dir`, computing and storing it on a miss.
///
/// A present but unreadable or mismatching file is an [`Error::Cache`]; delete
/// it (or call [`recompute_reference`]) to rebuild.
pub fn compute_reference(req: &ReferenceRequest, dir: &Path) -> Result<ReferenceCache> {
    let path = dir.join(req.file_name()?);
    let lock = key_lock(&path);
    let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
    if path.exists() {
        let cached = read_cache(&path)?;
        if cached.header != req.header() {
            return Err(Error::Cache {
                path,
                reason: "header does not match the requested reference".into(),
            });
        }
        return Ok(cached);
    }
    build(req, path)
}

/// Compute the reference unconditionally and overwrite any cached file.
pub fn recompute_reference(req: &ReferenceRequest, dir: &Path) -> Result<ReferenceCache> {
    let path = dir.join(req.file_name()?);
    let lock = key_lock(&path);
    let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
    build(req, path)
}

fn build(req: &ReferenceRequest, path: PathBuf) -> Result<ReferenceCache> {
    let traj = evolve(&req.scheme_run(), &[])?;
    let field = traj.final_field().clone();
    let header = req.header();
    write_cache_atomic(&path, &header, &field)?;
    Ok(ReferenceCache { path, header, field })
}
