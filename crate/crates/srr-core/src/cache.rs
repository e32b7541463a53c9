//! Binary persistence of designed inverse filterbanks.
//!
//! File layout (all multi-byte values little-endian):
//!
//! ```text
//! magic       4 bytes  "MRFB"
//! version     u16      currently 1
//! d           u16
//! tap_radius  u16
//! alpha_t     f64
//! eps         f64      ridge applied to infinite-weight systems
//! count       u16      number of weight records
//! per record:
//!   lambda1   f64      +Inf encodes the infinite sentinel
//!   residual  f64
//!   taps      d^2 * d^2 * (2r+1)^2 f64
//!             nested order: output coset, input coset, row, col
//! spec_hash   u64      fingerprint of the full design configuration
//! ```
//!
//! The trailing hash covers the kernels and weight set, which are not stored
//! in the file; a mismatch against the current engine configuration is
//! reported as a stale cache.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::design::{DesignRecord, DesignSpec, InverseFilterbankCache};
use crate::error::{Result, SrrError};
use crate::kernel::Kernel2D;
use crate::polyphase::{Lambda1, PolyphaseMatrix};

const MAGIC: &[u8; 4] = b"MRFB";
const VERSION: u16 = 1;

pub fn cache_store(path: &Path, cache: &InverseFilterbankCache) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(cache.d as u16).to_le_bytes())?;
    w.write_all(&(cache.tap_radius as u16).to_le_bytes())?;
    w.write_all(&cache.alpha_t.to_le_bytes())?;
    w.write_all(&cache.ridge_eps.to_le_bytes())?;
    w.write_all(&(cache.records.len() as u16).to_le_bytes())?;
    let r = cache.tap_radius as i32;
    let n = cache.d * cache.d;
    for rec in &cache.records {
        let lambda = match rec.lambda1 {
            Lambda1::Finite(v) => v,
            Lambda1::Infinite => f64::INFINITY,
        };
        w.write_all(&lambda.to_le_bytes())?;
        w.write_all(&rec.residual.to_le_bytes())?;
        for i in 0..n {
            for j in 0..n {
                let k = rec.inverse.entry(i, j);
                for dr in -r..=r {
                    for dc in -r..=r {
                        w.write_all(&k.tap_at_offset(dr, dc).to_le_bytes())?;
                    }
                }
            }
        }
    }
    w.write_all(&cache.spec_hash.to_le_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn cache_load(path: &Path, expected: &DesignSpec) -> Result<InverseFilterbankCache> {
    let mut rd = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    read_exact(&mut rd, &mut magic)?;
    if &magic != MAGIC {
        return Err(SrrError::Parse("bad magic bytes".into()));
    }
    let version = read_u16(&mut rd)?;
    if version != VERSION {
        return Err(SrrError::Parse(format!("unsupported cache version {version}")));
    }
    let d = read_u16(&mut rd)? as usize;
    let tap_radius = read_u16(&mut rd)? as usize;
    let alpha_t = read_f64(&mut rd)?;
    let ridge_eps = read_f64(&mut rd)?;
    let count = read_u16(&mut rd)? as usize;
    if d == 0 || tap_radius == 0 {
        return Err(SrrError::Parse("invalid header".into()));
    }
    let n = d * d;
    let side = 2 * tap_radius + 1;
    let rc = tap_radius as i32;
    let mut records = Vec::with_capacity(count);
    for _ in 0..count {
        let lambda = read_f64(&mut rd)?;
        let lambda1 = if lambda.is_infinite() { Lambda1::Infinite } else { Lambda1::Finite(lambda) };
        let residual = read_f64(&mut rd)?;
        let mut inverse = PolyphaseMatrix::zeros(d);
        for i in 0..n {
            for j in 0..n {
                let mut taps = vec![0.0; side * side];
                for t in taps.iter_mut() {
                    *t = read_f64(&mut rd)?;
                }
                let k = Kernel2D::new(side, side, (rc, rc), taps)?;
                inverse.set_entry(i, j, k.trimmed());
            }
        }
        records.push(DesignRecord { lambda1, inverse, residual });
    }
    let spec_hash = read_u64(&mut rd)?;

    let cache =
        InverseFilterbankCache { d, tap_radius, alpha_t, ridge_eps, spec_hash, records };
    verify_against(&cache, expected)?;
    Ok(cache)
}

fn verify_against(cache: &InverseFilterbankCache, expected: &DesignSpec) -> Result<()> {
    if cache.d != expected.d
        || cache.tap_radius != expected.tap_radius
        || cache.alpha_t != expected.alpha_t
        || cache.ridge_eps != expected.ridge_eps
        || cache.spec_hash != expected.hash()
    {
        return Err(SrrError::StaleCache(
            "cached design does not match the current engine configuration; rerun the design step"
                .into(),
        ));
    }
    Ok(())
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| SrrError::Parse("unexpected end of cache file".into()))
}

fn read_u16<R: Read>(r: &mut R) -> Result<u16> {
    let mut b = [0u8; 2];
    read_exact(r, &mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{build_cache, DEFAULT_RIDGE_EPS};

    fn small_spec() -> DesignSpec {
        DesignSpec {
            tap_radius: 2,
            lambda1_values: vec![Lambda1::Infinite, Lambda1::Finite(1.0)],
            alpha_t: 0.015,
            h: Kernel2D::uniform(3),
            s: Kernel2D::scaled_laplacian(),
            d: 2,
            ridge_eps: DEFAULT_RIDGE_EPS,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let spec = small_spec();
        let cache = build_cache(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fbank.mrfb");
        cache_store(&path, &cache).unwrap();
        let loaded = cache_load(&path, &spec).unwrap();
        assert_eq!(loaded.records.len(), cache.records.len());
        for (a, b) in loaded.records.iter().zip(&cache.records) {
            assert_eq!(a.lambda1, b.lambda1);
            assert_eq!(a.residual.to_bits(), b.residual.to_bits());
            for i in 0..4 {
                for j in 0..4 {
                    let ka = a.inverse.entry(i, j);
                    let kb = b.inverse.entry(i, j);
                    for (dr, dc, v) in kb.offsets() {
                        assert_eq!(v.to_bits(), ka.tap_at_offset(dr, dc).to_bits());
                    }
                }
            }
        }
    }

    #[test]
    fn altered_alpha_t_is_stale() {
        let spec = small_spec();
        let cache = build_cache(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fbank.mrfb");
        cache_store(&path, &cache).unwrap();
        let mut other = small_spec();
        other.alpha_t = 0.02;
        match cache_load(&path, &other) {
            Err(SrrError::StaleCache(_)) => {}
            other => panic!("expected stale-cache error, got {other:?}"),
        }
    }

    #[test]
    fn altered_kernel_is_stale() {
        let spec = small_spec();
        let cache = build_cache(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fbank.mrfb");
        cache_store(&path, &cache).unwrap();
        let mut other = small_spec();
        other.h = Kernel2D::uniform(5);
        assert!(matches!(cache_load(&path, &other), Err(SrrError::StaleCache(_))));
    }

    #[test]
    fn truncated_file_is_parse_error() {
        let spec = small_spec();
        let cache = build_cache(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fbank.mrfb");
        cache_store(&path, &cache).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(cache_load(&path, &spec), Err(SrrError::Parse(_))));
    }

    #[test]
    fn bad_magic_is_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fbank.mrfb");
        std::fs::write(&path, b"NOPE0000").unwrap();
        assert!(matches!(cache_load(&path, &small_spec()), Err(SrrError::Parse(_))));
    }
}
