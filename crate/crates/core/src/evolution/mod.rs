//! Evolutionary search: single-point crossover, per-dialect 1-edit mutations,
//! estimator-guided ranking of an offspring surplus, and a strict unique-query
//! budget ledger.

mod operators;
mod search;

pub use operators::{crossover, mutate, mutate_with_vocab, CrossoverOutcome};
pub use search::{ea_search, rank, IterationStat, SearchLogRow, SearchState};

use crate::cg::fnv1a;
use crate::error::Result;
use crate::lowering::{Dialect, Nb201Op};
use crate::oracle::{ArchRecord, Oracle};

/// Which scoring arm drives candidate ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Random,
    ClPredictor,
    OracleDirect,
}

/// Ranks offspring candidates. Estimation is read-only and must be deterministic;
/// it never touches the query ledger.
pub trait Estimator {
    fn estimate(&self, record: &ArchRecord) -> Result<f64>;
    fn name(&self) -> &'static str;
}

/// Seed-keyed hash scores: a reproducible random permutation of any candidate set.
pub struct RandomEstimator {
    pub seed: u64,
}

impl Estimator for RandomEstimator {
    fn estimate(&self, record: &ArchRecord) -> Result<f64> {
        let mut bytes = [0u8; 16];
        bytes[..8].copy_from_slice(&self.seed.to_le_bytes());
        bytes[8..].copy_from_slice(&record.digest.to_le_bytes());
        Ok(fnv1a(&bytes) as f64 / u64::MAX as f64)
    }

    fn name(&self) -> &'static str {
        "random"
    }
}

/// Ranks by true oracle accuracy (the estimation upper bound; queries are still
/// the only thing the ledger counts).
pub struct OracleEstimator<'a> {
    pub oracle: &'a Oracle,
}

impl Estimator for OracleEstimator<'_> {
    fn estimate(&self, record: &ArchRecord) -> Result<f64> {
        self.oracle.accuracy(&record.cg)
    }

    fn name(&self) -> &'static str {
        "oracle_direct"
    }
}

impl Estimator for crate::train::ClPredictor {
    fn estimate(&self, record: &ArchRecord) -> Result<f64> {
        self.estimate_graph(&record.cg)
    }

    fn name(&self) -> &'static str {
        "cl_predictor"
    }
}

/// Which preset row to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetKind {
    Random,
    Cl,
}

/// Search hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EAConfig {
    pub top_k: usize,
    /// queries per iteration (B)
    pub queries_per_iteration: usize,
    pub initial_population: usize,
    pub iterations: usize,
    /// offspring generated per iteration, as a multiple of B
    pub offspring_factor: usize,
    /// restrict nb201 sampling and mutation to this label subset
    pub nb201_vocab: Option<Vec<Nb201Op>>,
}

impl EAConfig {
    /// The per-dialect hyperparameter presets (k, B, |P_init|, T).
    pub fn preset(dialect: Dialect, kind: PresetKind) -> Self {
        let (top_k, b, p_init, t) = match (dialect, kind) {
            (Dialect::Nb101, PresetKind::Random) => (20, 100, 100, 6),
            (Dialect::Nb101, PresetKind::Cl) => (20, 100, 50, 6),
            (Dialect::Nb201, PresetKind::Random) => (10, 20, 10, 4),
            (Dialect::Nb201, PresetKind::Cl) => (10, 10, 10, 5),
            (Dialect::Nb301, PresetKind::Random) => (20, 100, 100, 7),
            (Dialect::Nb301, PresetKind::Cl) => (20, 100, 50, 7),
        };
        EAConfig {
            top_k,
            queries_per_iteration: b,
            initial_population: p_init,
            iterations: t,
            offspring_factor: 10,
            nb201_vocab: None,
        }
    }

    /// Total unique queries the search consumes when offspring never run short:
    /// the initial population plus B per iteration (pre-charged fine-tune labels
    /// come on top).
    pub fn expected_queries(&self) -> usize {
        self.initial_population + self.iterations * self.queries_per_iteration
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_budgets_match_the_table() {
        let r101 = EAConfig::preset(Dialect::Nb101, PresetKind::Random);
        assert_eq!(
            (r101.top_k, r101.queries_per_iteration, r101.initial_population, r101.iterations),
            (20, 100, 100, 6)
        );
        assert_eq!(r101.expected_queries(), 700);
        let r301 = EAConfig::preset(Dialect::Nb301, PresetKind::Random);
        assert_eq!(r301.expected_queries(), 800);
        let c201 = EAConfig::preset(Dialect::Nb201, PresetKind::Cl);
        assert_eq!(
            (c201.top_k, c201.queries_per_iteration, c201.initial_population, c201.iterations),
            (10, 10, 10, 5)
        );
        // 40 fine-tune labels + 10 + 5*10
        assert_eq!(c201.expected_queries() + crate::train::finetune_size(Dialect::Nb201), 100);
        let c101 = EAConfig::preset(Dialect::Nb101, PresetKind::Cl);
        assert_eq!(c101.expected_queries() + crate::train::finetune_size(Dialect::Nb101), 700);
        let c301 = EAConfig::preset(Dialect::Nb301, PresetKind::Cl);
        assert_eq!(c301.expected_queries() + crate::train::finetune_size(Dialect::Nb301), 800);
    }

    #[test]
    fn random_estimator_is_reproducible() {
        use crate::lowering::{random_cell, MacroConfig};
        use crate::rng::seeded;
        let mut rng = seeded(3);
        let record = loop {
            let spec = random_cell(Dialect::Nb201, &mut rng);
            if let Ok(r) = ArchRecord::from_spec(spec, &MacroConfig::default()) {
                break r;
            }
        };
        let a = RandomEstimator { seed: 9 };
        let b = RandomEstimator { seed: 9 };
        assert_eq!(a.estimate(&record).unwrap(), b.estimate(&record).unwrap());
        let c = RandomEstimator { seed: 10 };
        assert_ne!(a.estimate(&record).unwrap(), c.estimate(&record).unwrap());
    }
}
