//! Deterministic synthetic benchmark oracle.
//!
//! Stands in for tabular ground truth: a fixed seed draws feature weights once,
//! and every graph's "accuracy" is a logistic read-out of isomorphism-invariant
//! graph features (operator histogram, size, degree, spectral signature). Scores
//! depend on the spectral signature on purpose, so spectrally-informed pretraining
//! genuinely carries label information, and per-family logit offsets simulate the
//! distribution shift that fine-tuning has to absorb.

mod dataset;

pub use dataset::{dataset_digest, generate_dataset, generate_dataset_with_vocab, load_manifest, save_manifest};

use std::collections::BTreeSet;

use crate::cg::{validate, wl_hash, ComputationGraph, OP_KIND_COUNT};
use crate::error::{Error, Result};
use crate::lowering::{build_network, CellSpec, Dialect, MacroConfig};
use crate::rng::{range_f64, substream};
use crate::spectral::{signature, SIGNATURE_LEN};

/// WL refinement depth used for architecture digests throughout search and
/// dataset deduplication.
pub const DIGEST_WL_ITERATIONS: usize = 3;

pub const PHI_DIM: usize = OP_KIND_COUNT + 3 + SIGNATURE_LEN;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub seed: u64,
    pub lo: f64,
    pub hi: f64,
    /// Standard deviation of deterministic per-graph label jitter; zero by default.
    pub noise: f64,
}

impl OracleConfig {
    pub fn with_seed(seed: u64) -> Self {
        OracleConfig {
            seed,
            lo: 0.85,
            hi: 0.95,
            noise: 0.0,
        }
    }
}

/// The scoring function. Fully determined by its config's seed.
#[derive(Debug, Clone)]
pub struct Oracle {
    pub config: OracleConfig,
    weights: Vec<f64>,
    family_bias: [f64; 3],
}

/// Reference point subtracted from features before the logistic read-out, chosen
/// near desk-scale feature means so scores spread over the range instead of
/// saturating.
const PHI_CENTER_SIZE: [f64; 3] = [4.2, 4.5, 2.2];
const HIST_WEIGHT_RANGE: f64 = 3.0;
const SIZE_WEIGHT_RANGE: f64 = 0.6;
const DEGREE_WEIGHT_RANGE: f64 = 1.0;
const SPECTRAL_WEIGHT_RANGE: f64 = 2.0;
const FAMILY_BIAS_RANGE: f64 = 0.75;

impl Oracle {
    pub fn new(config: OracleConfig) -> Self {
        let mut rng = substream(config.seed, "oracle-weights");
        let mut weights = Vec::with_capacity(PHI_DIM);
        for _ in 0..OP_KIND_COUNT {
            weights.push(range_f64(&mut rng, -HIST_WEIGHT_RANGE, HIST_WEIGHT_RANGE));
        }
        for _ in 0..2 {
            weights.push(range_f64(&mut rng, -SIZE_WEIGHT_RANGE, SIZE_WEIGHT_RANGE));
        }
        weights.push(range_f64(&mut rng, -DEGREE_WEIGHT_RANGE, DEGREE_WEIGHT_RANGE));
        for _ in 0..SIGNATURE_LEN {
            weights.push(range_f64(&mut rng, -SPECTRAL_WEIGHT_RANGE, SPECTRAL_WEIGHT_RANGE));
        }
        let mut bias_rng = substream(config.seed, "oracle-family-bias");
        let mut family_bias = [0.0; 3];
        for slot in family_bias.iter_mut() {
            *slot = range_f64(&mut bias_rng, -FAMILY_BIAS_RANGE, FAMILY_BIAS_RANGE);
        }
        Oracle {
            config,
            weights,
            family_bias,
        }
    }

    /// Isomorphism-invariant feature vector: normalized operator histogram,
    /// log sizes, mean degree, spectral signature.
    pub fn phi(&self, g: &ComputationGraph) -> Result<Vec<f64>> {
        let n = g.nodes.len() as f64;
        let mut phi = vec![0.0; PHI_DIM];
        for node in &g.nodes {
            phi[node.kind.index()] += 1.0 / n;
        }
        phi[OP_KIND_COUNT] = (1.0 + n).ln() - PHI_CENTER_SIZE[0];
        phi[OP_KIND_COUNT + 1] = (1.0 + g.edges.len() as f64).ln() - PHI_CENTER_SIZE[1];
        phi[OP_KIND_COUNT + 2] =
            2.0 * g.undirected_edge_count() as f64 / n - PHI_CENTER_SIZE[2];
        let sig = signature(g)?;
        phi[OP_KIND_COUNT + 3..].copy_from_slice(&sig.values);
        Ok(phi)
    }

    /// Deterministic synthetic accuracy in (lo, hi).
    pub fn accuracy(&self, g: &ComputationGraph) -> Result<f64> {
        let report = validate(g);
        if !report.ok() {
            return Err(Error::InvalidGraph(report));
        }
        let phi = self.phi(g)?;
        let mut logit: f64 = phi.iter().zip(&self.weights).map(|(p, w)| p * w).sum();
        if let Some(dialect) = g.family.as_deref().and_then(|f| f.parse::<Dialect>().ok()) {
            logit += self.family_bias[dialect as usize];
        }
        let mut score = self.config.lo
            + (self.config.hi - self.config.lo) / (1.0 + (-logit).exp());
        if self.config.noise > 0.0 {
            let digest = wl_hash(g, DIGEST_WL_ITERATIONS)?;
            let mut rng = substream(self.config.seed ^ digest, "oracle-noise");
            score += self.config.noise * crate::rng::normal_f64(&mut rng);
            score = score.clamp(0.0, 1.0);
        }
        Ok(score)
    }
}

/// A symbolic cell together with its lowered graph and (optionally) its label.
#[derive(Debug, Clone)]
pub struct ArchRecord {
    pub spec: CellSpec,
    pub cg: ComputationGraph,
    pub family: Dialect,
    pub digest: u64,
    pub accuracy: Option<f64>,
}

impl ArchRecord {
    /// Lower a cell spec and compute its digest. Fails on degenerate cells.
    pub fn from_spec(spec: CellSpec, macro_config: &MacroConfig) -> Result<Self> {
        let cg = build_network(&spec, macro_config)?;
        let digest = wl_hash(&cg, DIGEST_WL_ITERATIONS)?;
        Ok(ArchRecord {
            family: spec.dialect(),
            spec,
            cg,
            digest,
        accuracy: None,
        })
    }
}

/// Set of unique architectures whose ground truth has been requested.
#[derive(Debug, Clone, Default)]
pub struct QueryLedger {
    seen: BTreeSet<u64>,
}

impl QueryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn unique_queries(&self) -> usize {
        self.seen.len()
    }

    pub fn contains(&self, digest: u64) -> bool {
        self.seen.contains(&digest)
    }

    /// Record a query; returns true when the architecture was not seen before.
    pub fn charge(&mut self, digest: u64) -> bool {
        self.seen.insert(digest)
    }
}

/// Query the oracle for a record's ground truth, charging the ledger only for
/// architectures not queried before.
pub fn query(oracle: &Oracle, record: &mut ArchRecord, ledger: &mut QueryLedger) -> Result<f64> {
    let score = oracle.accuracy(&record.cg)?;
    record.accuracy = Some(score);
    ledger.charge(record.digest);
    Ok(score)
}
