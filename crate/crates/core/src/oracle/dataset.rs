//! Labeled dataset generation and the JSON manifest format.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::Path;

use super::{ArchRecord, Oracle, DIGEST_WL_ITERATIONS};
use crate::cg::{fnv1a, wl_hash};
use crate::error::{Error, Result};
use crate::lowering::{random_cell, random_nb201_cell, CellSpec, Dialect, MacroConfig, Nb201Op};
use crate::rng::substream;

/// Draw `count` unique labeled architectures (deduplicated by WL digest).
pub fn generate_dataset(
    dialect: Dialect,
    count: usize,
    seed: u64,
    oracle: &Oracle,
    macro_config: &MacroConfig,
) -> Result<Vec<ArchRecord>> {
    generate_dataset_with_vocab(dialect, count, seed, oracle, macro_config, None)
}

/// Like [`generate_dataset`], optionally restricting `nb201` sampling to a label
/// subset (the zeroize-free space used for exhaustive experiments).
pub fn generate_dataset_with_vocab(
    dialect: Dialect,
    count: usize,
    seed: u64,
    oracle: &Oracle,
    macro_config: &MacroConfig,
    nb201_vocab: Option<&[Nb201Op]>,
) -> Result<Vec<ArchRecord>> {
    if dialect == Dialect::Nb201 {
        let labels = nb201_vocab.map(|v| v.len()).unwrap_or(5);
        let space = labels.pow(6);
        if count > space {
            return Err(Error::SpaceExhausted {
                requested: count,
                found: space,
            });
        }
    }
    let mut rng = substream(seed, &format!("dataset-{dialect}"));
    let mut seen = BTreeSet::new();
    let mut records = Vec::with_capacity(count);
    let max_attempts = 200 * count + 10_000;
    let mut attempts = 0;
    while records.len() < count {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::SpaceExhausted {
                requested: count,
                found: records.len(),
            });
        }
        let spec = match (dialect, nb201_vocab) {
            (Dialect::Nb201, Some(vocab)) => {
                CellSpec::Nb201(random_nb201_cell(vocab, &mut rng))
            }
            _ => random_cell(dialect, &mut rng),
        };
        let mut record = match ArchRecord::from_spec(spec, macro_config) {
            Ok(r) => r,
            Err(Error::DegenerateCell) => continue,
            Err(e) => return Err(e),
        };
        if !seen.insert(record.digest) {
            continue;
        }
        record.accuracy = Some(oracle.accuracy(&record.cg)?);
        records.push(record);
    }
    Ok(records)
}

/// Digest identifying a dataset's content (drives the distance-cache key).
pub fn dataset_digest(oracle_seed: u64, dialect: Dialect, records: &[ArchRecord]) -> u64 {
    let mut bytes = Vec::with_capacity(records.len() * 8 + 16);
    bytes.extend_from_slice(&oracle_seed.to_le_bytes());
    bytes.extend_from_slice(dialect.tag().as_bytes());
    for r in records {
        bytes.extend_from_slice(&r.digest.to_le_bytes());
    }
    fnv1a(&bytes)
}

#[derive(Serialize, Deserialize)]
struct ManifestRecord {
    spec: String,
    digest: String,
    accuracy: f64,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    version: String,
    oracle_seed: u64,
    dialect: String,
    records: Vec<ManifestRecord>,
}

/// Write a dataset manifest: oracle seed, dialect, spec text, digest and label per
/// record.
pub fn save_manifest(
    path: &Path,
    oracle_seed: u64,
    dialect: Dialect,
    records: &[ArchRecord],
) -> Result<()> {
    let manifest = Manifest {
        version: "1".to_string(),
        oracle_seed,
        dialect: dialect.tag().to_string(),
        records: records
            .iter()
            .map(|r| ManifestRecord {
                spec: r.spec.to_string(),
                digest: format!("{:016x}", r.digest),
                accuracy: r.accuracy.expect("generated records are labeled"),
            })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Read a manifest back, re-lowering each spec and verifying its digest.
pub fn load_manifest(path: &Path, macro_config: &MacroConfig) -> Result<(u64, Dialect, Vec<ArchRecord>)> {
    let text = std::fs::read_to_string(path)?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    if manifest.version != "1" {
        return Err(Error::Version(manifest.version));
    }
    let dialect: Dialect = manifest.dialect.parse()?;
    let mut records = Vec::with_capacity(manifest.records.len());
    for entry in &manifest.records {
        let spec: CellSpec = entry.spec.parse()?;
        let mut record = ArchRecord::from_spec(spec, macro_config)?;
        let digest = u64::from_str_radix(&entry.digest, 16)
            .map_err(|_| Error::Parse(format!("bad digest `{}`", entry.digest)))?;
        if digest != record.digest {
            return Err(Error::Parse(format!(
                "manifest digest {} does not match re-lowered graph {:016x}",
                entry.digest, record.digest
            )));
        }
        debug_assert_eq!(record.digest, wl_hash(&record.cg, DIGEST_WL_ITERATIONS).unwrap());
        record.accuracy = Some(entry.accuracy);
        records.push(record);
    }
    Ok((manifest.oracle_seed, dialect, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::OracleConfig;

    #[test]
    fn generation_is_reproducible() {
        let oracle = Oracle::new(OracleConfig::with_seed(7));
        let cfg = MacroConfig::default();
        let a = generate_dataset(Dialect::Nb201, 40, 7, &oracle, &cfg).unwrap();
        let b = generate_dataset(Dialect::Nb201, 40, 7, &oracle, &cfg).unwrap();
        assert_eq!(a.len(), 40);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.spec, y.spec);
            assert_eq!(x.digest, y.digest);
            assert_eq!(x.accuracy, y.accuracy);
        }
        let digests: BTreeSet<u64> = a.iter().map(|r| r.digest).collect();
        assert_eq!(digests.len(), 40, "deduplicated");
    }

    #[test]
    fn oversized_request_is_space_exhausted() {
        let oracle = Oracle::new(OracleConfig::with_seed(7));
        let cfg = MacroConfig::default();
        assert!(matches!(
            generate_dataset(Dialect::Nb201, 20_000, 7, &oracle, &cfg),
            Err(Error::SpaceExhausted { .. })
        ));
        // a single-label vocabulary has exactly one cell
        let err = generate_dataset_with_vocab(
            Dialect::Nb201,
            5,
            7,
            &oracle,
            &cfg,
            Some(&[Nb201Op::Skip]),
        );
        assert!(matches!(err, Err(Error::SpaceExhausted { requested: 5, found: 1 })));
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.json");
        let oracle = Oracle::new(OracleConfig::with_seed(3));
        let cfg = MacroConfig::default();
        let records = generate_dataset(Dialect::Nb101, 10, 5, &oracle, &cfg).unwrap();
        save_manifest(&path, 3, Dialect::Nb101, &records).unwrap();
        let (seed, dialect, loaded) = load_manifest(&path, &cfg).unwrap();
        assert_eq!(seed, 3);
        assert_eq!(dialect, Dialect::Nb101);
        assert_eq!(loaded.len(), records.len());
        for (a, b) in records.iter().zip(&loaded) {
            assert_eq!(a.digest, b.digest);
            assert_eq!(a.accuracy, b.accuracy);
        }
    }

    #[test]
    fn label_distribution_is_not_degenerate() {
        let oracle = Oracle::new(OracleConfig::with_seed(7));
        let cfg = MacroConfig::default();
        let records = generate_dataset(Dialect::Nb201, 300, 11, &oracle, &cfg).unwrap();
        let labels: Vec<f64> = records.iter().map(|r| r.accuracy.unwrap()).collect();
        let mean = labels.iter().sum::<f64>() / labels.len() as f64;
        let var = labels.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / labels.len() as f64;
        assert!(var.sqrt() > 0.005, "std {}", var.sqrt());
    }
}
