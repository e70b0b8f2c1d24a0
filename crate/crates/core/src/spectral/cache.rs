//! On-disk cache of pairwise spectral distances within one dataset.
//!
//! Pair selection and loss weighting reread the same distances every batch, so a
//! dataset's symmetric distance matrix is computed once and cached keyed by the
//! dataset digest. Binary layout: `SGCACHE1` magic, digest, n, k, then the lower
//! triangle (diagonal included) as little-endian f64.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{spectral_distance, SpectralSignature, SIGNATURE_LEN};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"SGCACHE1";

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceCache {
    digest: u64,
    n: usize,
    k: usize,
    triangle: Vec<f64>,
}

impl DistanceCache {
    /// Compute all pairwise distances among `signatures`.
    pub fn build(signatures: &[SpectralSignature], digest: u64) -> Self {
        let n = signatures.len();
        let mut triangle = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in 0..=i {
                triangle.push(spectral_distance(&signatures[i], &signatures[j]));
            }
        }
        DistanceCache {
            digest,
            n,
            k: SIGNATURE_LEN,
            triangle,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn digest(&self) -> u64 {
        self.digest
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        self.triangle[hi * (hi + 1) / 2 + lo]
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&self.digest.to_le_bytes())?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        w.write_all(&(self.k as u64).to_le_bytes())?;
        for v in &self.triangle {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Cache(format!(
                "{} is not a distance cache",
                path.display()
            )));
        }
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf)?;
        let digest = u64::from_le_bytes(buf);
        r.read_exact(&mut buf)?;
        let n = u64::from_le_bytes(buf) as usize;
        r.read_exact(&mut buf)?;
        let k = u64::from_le_bytes(buf) as usize;
        let len = n * (n + 1) / 2;
        let mut triangle = Vec::with_capacity(len);
        for _ in 0..len {
            r.read_exact(&mut buf)?;
            triangle.push(f64::from_le_bytes(buf));
        }
        Ok(DistanceCache {
            digest,
            n,
            k,
            triangle,
        })
    }

    /// Load the cache if `path` holds one with the expected digest, otherwise
    /// build it from `signatures` and save it.
    pub fn load_or_build(
        path: &Path,
        digest: u64,
        signatures: &[SpectralSignature],
    ) -> Result<Self> {
        if path.exists() {
            if let Ok(cache) = Self::load(path) {
                if cache.digest == digest && cache.n == signatures.len() {
                    return Ok(cache);
                }
            }
        }
        let cache = Self::build(signatures, digest);
        cache.save(path)?;
        Ok(cache)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(values: &[f64]) -> SpectralSignature {
        let mut v = [0.0; SIGNATURE_LEN];
        v[..values.len()].copy_from_slice(values);
        SpectralSignature {
            values: v,
            node_count: SIGNATURE_LEN,
        }
    }

    #[test]
    fn symmetric_lookup() {
        let sigs = vec![sig(&[0.0, 0.1]), sig(&[0.0, 0.4]), sig(&[0.0, 0.2, 0.5])];
        let cache = DistanceCache::build(&sigs, 42);
        for i in 0..3 {
            assert_eq!(cache.get(i, i), 0.0);
            for j in 0..3 {
                assert_eq!(cache.get(i, j), cache.get(j, i));
            }
        }
        assert!((cache.get(0, 1) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sigma.bin");
        let sigs = vec![sig(&[0.0, 0.1]), sig(&[0.0, 0.25])];
        let cache = DistanceCache::build(&sigs, 7);
        cache.save(&path).unwrap();
        let loaded = DistanceCache::load(&path).unwrap();
        assert_eq!(cache, loaded);
    }

    #[test]
    fn load_or_build_rejects_stale_digest() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sigma.bin");
        let sigs = vec![sig(&[0.0, 0.1]), sig(&[0.0, 0.25])];
        DistanceCache::build(&sigs, 1).save(&path).unwrap();
        let rebuilt = DistanceCache::load_or_build(&path, 2, &sigs).unwrap();
        assert_eq!(rebuilt.digest(), 2);
        assert_eq!(DistanceCache::load(&path).unwrap().digest(), 2);
    }
}
