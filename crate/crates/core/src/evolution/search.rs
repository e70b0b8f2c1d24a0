//! The search loop: per iteration, breed an offspring surplus from the current
//! top-k, rank it with the estimator, query ground truth for the best B, and grow
//! the population. The ledger counts unique architectures only, and every queried
//! candidate is guaranteed fresh by deduplication against it.

use std::collections::BTreeSet;

use super::{CrossoverOutcome, EAConfig, Estimator};
use crate::error::{Error, Result};
use crate::lowering::{random_cell, random_nb201_cell, CellSpec, Dialect, MacroConfig};
use crate::oracle::{query, ArchRecord, Oracle, QueryLedger};
use crate::rng::{coin, sample_indices, substream, ChaCha8Rng};

/// One queried candidate, for the search log.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchLogRow {
    pub iteration: usize,
    pub digest: u64,
    pub estimated: f64,
    pub actual: f64,
    pub cumulative_queries: usize,
}

/// Per-iteration summary.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationStat {
    pub iteration: usize,
    pub best_accuracy: f64,
    pub best_digest: u64,
    pub cumulative_queries: usize,
    /// how many of the requested offspring could not be produced fresh
    pub offspring_shortfall: usize,
}

/// Full search outcome: labeled population, ledger, history, per-query log.
pub struct SearchState {
    pub population: Vec<ArchRecord>,
    pub ledger: QueryLedger,
    pub history: Vec<IterationStat>,
    pub log: Vec<SearchLogRow>,
    pub crossover_fallbacks: usize,
}

impl SearchState {
    pub fn best(&self) -> &ArchRecord {
        self.population
            .iter()
            .max_by(|a, b| {
                let (x, y) = (a.accuracy.unwrap(), b.accuracy.unwrap());
                x.partial_cmp(&y)
                    .unwrap()
                    .then(b.digest.cmp(&a.digest))
            })
            .expect("population is never empty")
    }
}

/// Sort candidates by estimated score, best first, ties broken by digest so the
/// order is deterministic.
pub fn rank(
    candidates: Vec<ArchRecord>,
    estimator: &dyn Estimator,
) -> Result<Vec<(ArchRecord, f64)>> {
    let mut scored = Vec::with_capacity(candidates.len());
    for record in candidates {
        let score = estimator.estimate(&record)?;
        scored.push((record, score));
    }
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("estimates are finite")
            .then(a.0.digest.cmp(&b.0.digest))
    });
    Ok(scored)
}

fn sample_spec(config: &EAConfig, dialect: Dialect, rng: &mut ChaCha8Rng) -> CellSpec {
    match (&config.nb201_vocab, dialect) {
        (Some(vocab), Dialect::Nb201) => CellSpec::Nb201(random_nb201_cell(vocab, rng)),
        _ => random_cell(dialect, rng),
    }
}

fn top_k(population: &[ArchRecord], k: usize) -> Vec<&ArchRecord> {
    let mut sorted: Vec<&ArchRecord> = population.iter().collect();
    sorted.sort_by(|a, b| {
        let (x, y) = (a.accuracy.unwrap(), b.accuracy.unwrap());
        y.partial_cmp(&x).unwrap().then(a.digest.cmp(&b.digest))
    });
    sorted.truncate(k);
    sorted
}

/// Run the evolutionary search. `precharged` digests (the predictor's fine-tune
/// set) are charged to the ledger before the first query, matching a budget
/// accounting that counts fine-tuning labels as queries.
pub fn ea_search(
    config: &EAConfig,
    dialect: Dialect,
    estimator: &dyn Estimator,
    oracle: &Oracle,
    macro_config: &MacroConfig,
    seed: u64,
    precharged: &[u64],
) -> Result<SearchState> {
    let mut rng = substream(seed, "ea-search");
    let mut ledger = QueryLedger::new();
    for &digest in precharged {
        ledger.charge(digest);
    }

    let mut population: Vec<ArchRecord> = Vec::new();
    let mut log = Vec::new();
    let mut history = Vec::new();
    let mut crossover_fallbacks = 0usize;

    // initial population: unique and disjoint from anything already charged
    let init_attempt_cap = 1000 * config.initial_population + 10_000;
    let mut attempts = 0;
    while population.len() < config.initial_population {
        attempts += 1;
        if attempts > init_attempt_cap {
            return Err(Error::SpaceExhausted {
                requested: config.initial_population,
                found: population.len(),
            });
        }
        let spec = sample_spec(config, dialect, &mut rng);
        let mut record = match ArchRecord::from_spec(spec, macro_config) {
            Ok(r) => r,
            Err(Error::DegenerateCell) => continue,
            Err(e) => return Err(e),
        };
        if ledger.contains(record.digest) {
            continue;
        }
        query(oracle, &mut record, &mut ledger)?;
        population.push(record);
    }

    for iteration in 1..=config.iterations {
        let parents = top_k(&population, config.top_k);
        let target = config.offspring_factor * config.queries_per_iteration;
        let mut offspring: Vec<ArchRecord> = Vec::with_capacity(target);
        let mut fresh: BTreeSet<u64> = BTreeSet::new();
        let attempt_cap = 50 * target;
        let mut attempts = 0;
        while offspring.len() < target && attempts < attempt_cap {
            attempts += 1;
            let child_spec = if parents.len() >= 2 {
                let picked = sample_indices(&mut rng, parents.len(), 2);
                let outcome: CrossoverOutcome =
                    super::crossover(&parents[picked[0]].spec, &parents[picked[1]].spec, &mut rng)?;
                if outcome.fallback {
                    crossover_fallbacks += 1;
                }
                outcome.child
            } else {
                parents[0].spec.clone()
            };
            // one or two extra edits, evenly likely, to diversify the pool
            let edits = if coin(&mut rng) { 1 } else { 2 };
            let mutated = match super::mutate_with_vocab(
                &child_spec,
                edits,
                &mut rng,
                config.nb201_vocab.as_deref(),
            ) {
                Ok(m) => m,
                Err(Error::MutationExhausted { .. }) => continue,
                Err(e) => return Err(e),
            };
            let record = match ArchRecord::from_spec(mutated, macro_config) {
                Ok(r) => r,
                Err(Error::DegenerateCell) => continue,
                Err(e) => return Err(e),
            };
            if ledger.contains(record.digest) || !fresh.insert(record.digest) {
                continue;
            }
            offspring.push(record);
        }
        let offspring_shortfall = target.saturating_sub(offspring.len());

        let ranked = rank(offspring, estimator)?;
        for (mut record, estimated) in ranked
            .into_iter()
            .take(config.queries_per_iteration)
        {
            let actual = query(oracle, &mut record, &mut ledger)?;
            log.push(SearchLogRow {
                iteration,
                digest: record.digest,
                estimated,
                actual,
                cumulative_queries: ledger.unique_queries(),
            });
            population.push(record);
        }

        let best = top_k(&population, 1)[0];
        history.push(IterationStat {
            iteration,
            best_accuracy: best.accuracy.unwrap(),
            best_digest: best.digest,
            cumulative_queries: ledger.unique_queries(),
            offspring_shortfall,
        });
    }

    Ok(SearchState {
        population,
        ledger,
        history,
        log,
        crossover_fallbacks,
    })
}
