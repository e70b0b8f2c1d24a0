//! Pipeline stages and their on-disk artifacts.
//!
//! Stage commands operate inside one output directory. `manifest.json` in that
//! directory records the producing config digest and seed; a stage refuses to run
//! into a directory whose manifest carries a different digest unless forced.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use cgpredict::encoder::{Encoder, EncoderConfig};
use cgpredict::evolution::{
    ea_search, EAConfig, Estimator, PresetKind, RandomEstimator, SearchState,
};
use cgpredict::lowering::{Dialect, MacroConfig};
use cgpredict::oracle::{
    generate_dataset, load_manifest, save_manifest, Oracle, OracleConfig,
};
use cgpredict::spectral::DistanceCache;
use cgpredict::tensor::{load_checkpoint, save_checkpoint, ParamStore};
use cgpredict::train::{
    embed_records, pretrain, srcc, train_head, ClPredictor, EpochMetric, PreparedDataset,
};

use crate::config::RunConfig;

#[derive(Serialize, Deserialize)]
struct RunManifest {
    config_digest: String,
    seed: u64,
    artifacts: Vec<String>,
}

pub struct Workspace {
    pub out: PathBuf,
    pub config: RunConfig,
    pub force: bool,
}

impl Workspace {
    pub fn new(out: PathBuf, config: RunConfig, force: bool) -> Result<Self> {
        fs::create_dir_all(&out)?;
        let ws = Workspace { out, config, force };
        ws.check_manifest()?;
        Ok(ws)
    }

    fn manifest_path(&self) -> PathBuf {
        self.out.join("manifest.json")
    }

    fn digest_hex(&self) -> String {
        format!("{:016x}", self.config.digest())
    }

    fn check_manifest(&self) -> Result<()> {
        let path = self.manifest_path();
        if !path.exists() {
            return Ok(());
        }
        let manifest: RunManifest = serde_json::from_str(&fs::read_to_string(&path)?)
            .with_context(|| format!("reading {}", path.display()))?;
        if manifest.config_digest != self.digest_hex() && !self.force {
            bail!(
                "{} was produced by config digest {} (current {}); pass --force to overwrite",
                self.out.display(),
                manifest.config_digest,
                self.digest_hex()
            );
        }
        Ok(())
    }

    fn record_artifacts(&self, new_artifacts: &[&str]) -> Result<()> {
        let path = self.manifest_path();
        let mut artifacts: Vec<String> = if path.exists() {
            serde_json::from_str::<RunManifest>(&fs::read_to_string(&path)?)
                .map(|m| {
                    if m.config_digest == self.digest_hex() {
                        m.artifacts
                    } else {
                        Vec::new()
                    }
                })
                .unwrap_or_default()
        } else {
            Vec::new()
        };
        for a in new_artifacts {
            if !artifacts.iter().any(|x| x == a) {
                artifacts.push(a.to_string());
            }
        }
        artifacts.sort();
        let manifest = RunManifest {
            config_digest: self.digest_hex(),
            seed: self.config.seed,
            artifacts,
        };
        fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    fn oracle(&self) -> Oracle {
        Oracle::new(OracleConfig::with_seed(self.config.oracle_seed))
    }

    fn macro_config(&self) -> MacroConfig {
        MacroConfig::default()
    }

    fn encoder(&self) -> Result<Encoder> {
        let config = match &self.config.encoder_config {
            Some(path) => EncoderConfig::load(Path::new(path))?,
            None => EncoderConfig {
                seed: self.config.seed,
                ..EncoderConfig::default()
            },
        };
        Ok(Encoder::new(config))
    }

    fn dataset_path(&self, dialect: Dialect) -> PathBuf {
        self.out.join(format!("data_{dialect}.json"))
    }

    fn sigma_path(&self, dialect: Dialect) -> PathBuf {
        self.out.join(format!("sigma_{dialect}.bin"))
    }

    fn load_dataset(&self, path: &Path) -> Result<PreparedDataset> {
        let (oracle_seed, dialect, records) = load_manifest(path, &self.macro_config())?;
        if oracle_seed != self.config.oracle_seed {
            bail!(
                "{} was generated with oracle seed {oracle_seed}, config says {}",
                path.display(),
                self.config.oracle_seed
            );
        }
        Ok(PreparedDataset::new(dialect, records, oracle_seed)?)
    }

    /// Generate the pipeline datasets: a pool per family, plus fine-tune and
    /// held-out evaluation splits of the target family, all disjoint; then the
    /// per-family spectral distance caches.
    pub fn gen(&self) -> Result<()> {
        let oracle = self.oracle();
        let macro_config = self.macro_config();
        let mut artifacts: Vec<String> = Vec::new();
        for dialect in Dialect::ALL {
            let pool = self.config.dataset_size(dialect);
            let extra = if dialect == self.config.target {
                self.config.finetune_count + self.config.eval_size
            } else {
                0
            };
            let records =
                generate_dataset(dialect, pool + extra, self.config.seed, &oracle, &macro_config)?;
            let (pool_records, rest) = records.split_at(pool);
            save_manifest(
                &self.dataset_path(dialect),
                self.config.oracle_seed,
                dialect,
                pool_records,
            )?;
            artifacts.push(format!("data_{dialect}.json"));
            if dialect == self.config.target {
                let (ft, eval) = rest.split_at(self.config.finetune_count);
                save_manifest(
                    &self.out.join("finetune.json"),
                    self.config.oracle_seed,
                    dialect,
                    ft,
                )?;
                save_manifest(
                    &self.out.join("eval.json"),
                    self.config.oracle_seed,
                    dialect,
                    eval,
                )?;
                artifacts.push("finetune.json".into());
                artifacts.push("eval.json".into());
            }
            // distance cache over the pool, keyed by the dataset digest
            let prepared = PreparedDataset::new(
                dialect,
                pool_records.to_vec(),
                self.config.oracle_seed,
            )?;
            DistanceCache::load_or_build(
                &self.sigma_path(dialect),
                prepared.digest,
                &prepared.signatures,
            )?;
            artifacts.push(format!("sigma_{dialect}.bin"));
        }
        let refs: Vec<&str> = artifacts.iter().map(|s| s.as_str()).collect();
        self.record_artifacts(&refs)?;
        Ok(())
    }

    fn load_families(&self) -> Result<Vec<PreparedDataset>> {
        Dialect::ALL
            .iter()
            .map(|&d| self.load_dataset(&self.dataset_path(d)))
            .collect()
    }

    pub fn pretrain(&self) -> Result<()> {
        let encoder = self.encoder()?;
        let families = self.load_families()?;
        let caches: Result<Vec<DistanceCache>> = families
            .iter()
            .map(|f| {
                DistanceCache::load_or_build(
                    &self.sigma_path(f.dialect),
                    f.digest,
                    &f.signatures,
                )
                .map_err(anyhow::Error::from)
            })
            .collect();
        let family_refs: Vec<&PreparedDataset> = families.iter().collect();
        let outcome = pretrain(&encoder, &family_refs, &caches?, &self.config.train)?;
        if !outcome.trend_ok {
            eprintln!("warning: pretraining loss did not decrease across epochs");
        }
        save_checkpoint(
            &outcome.params,
            encoder.config.digest(),
            &self.out.join("encoder.ckpt"),
        )?;
        write_metrics(&self.out.join("pretrain_metrics.csv"), &outcome.metrics)?;
        self.record_artifacts(&["encoder.ckpt", "pretrain_metrics.csv"])?;
        println!(
            "pretrained on {} graphs, final epoch loss {}",
            families.iter().map(|f| f.len()).sum::<usize>(),
            outcome.metrics.last().map(|m| m.loss).unwrap_or(f64::NAN)
        );
        Ok(())
    }

    fn load_encoder_params(&self) -> Result<ParamStore> {
        let encoder = self.encoder()?;
        let (params, digest) = load_checkpoint(&self.out.join("encoder.ckpt"))?;
        if digest != encoder.config.digest() {
            bail!("encoder checkpoint was produced by a different architecture config");
        }
        Ok(params)
    }

    /// Train the prediction head on the labeled source families (frozen encoder).
    pub fn train(&self) -> Result<()> {
        let encoder = self.encoder()?;
        let params = self.load_encoder_params()?;
        let sources: Result<Vec<PreparedDataset>> = self
            .config
            .source_dialects()
            .into_iter()
            .map(|d| self.load_dataset(&self.dataset_path(d)))
            .collect();
        let sources = sources?;
        let refs: Vec<&PreparedDataset> = sources.iter().collect();
        let embeddings = embed_records(&encoder, &params, &refs)?;
        let labels: Vec<f64> = sources.iter().flat_map(|s| s.labels()).collect();
        let mut head = encoder.init_pred_head();
        let metrics = train_head(
            &encoder,
            &mut head,
            &embeddings,
            &labels,
            self.config.train.regressor_epochs,
            self.config.train.lr,
            self.config.train.batch_size,
            self.config.train.seed,
            "regressor",
        )?;
        save_checkpoint(&head, encoder.config.digest(), &self.out.join("head.ckpt"))?;
        write_metrics(&self.out.join("train_metrics.csv"), &metrics)?;
        self.record_artifacts(&["head.ckpt", "train_metrics.csv"])?;
        println!(
            "regressor trained on {} labeled source graphs",
            embeddings.len()
        );
        Ok(())
    }

    /// Fine-tune the head on the small labeled target split (encoder frozen).
    pub fn finetune(&self) -> Result<()> {
        let encoder = self.encoder()?;
        let params = self.load_encoder_params()?;
        let (mut head, digest) = load_checkpoint(&self.out.join("head.ckpt"))?;
        if digest != encoder.config.digest() {
            bail!("head checkpoint was produced by a different architecture config");
        }
        let target = self.load_dataset(&self.out.join("finetune.json"))?;
        let refs = [&target];
        let embeddings = embed_records(&encoder, &params, &refs)?;
        let metrics = train_head(
            &encoder,
            &mut head,
            &embeddings,
            &target.labels(),
            self.config.train.finetune_epochs,
            self.config.train.finetune_lr,
            self.config.train.batch_size,
            self.config.train.seed,
            "finetune",
        )?;
        save_checkpoint(
            &head,
            encoder.config.digest(),
            &self.out.join("head_finetuned.ckpt"),
        )?;
        write_metrics(&self.out.join("finetune_metrics.csv"), &metrics)?;
        self.record_artifacts(&["head_finetuned.ckpt", "finetune_metrics.csv"])?;
        println!("fine-tuned on {} target graphs", target.len());
        Ok(())
    }

    fn predictor(&self) -> Result<ClPredictor> {
        let encoder = self.encoder()?;
        let params = self.load_encoder_params()?;
        let (head, digest) = load_checkpoint(&self.out.join("head_finetuned.ckpt"))?;
        if digest != encoder.config.digest() {
            bail!("fine-tuned head was produced by a different architecture config");
        }
        Ok(ClPredictor {
            encoder,
            params,
            head,
        })
    }

    /// Evaluate rank correlation on the held-out target split; writes
    /// per-architecture predictions and returns the coefficient.
    pub fn eval(&self) -> Result<f64> {
        let predictor = self.predictor()?;
        let eval = self.load_dataset(&self.out.join("eval.json"))?;
        let mut predictions = Vec::with_capacity(eval.len());
        for pg in &eval.prepared {
            predictions.push(
                predictor
                    .encoder
                    .predict(&predictor.params, &predictor.head, pg)?,
            );
        }
        let truths = eval.labels();
        let rho = srcc(&predictions, &truths);
        let mut csv = String::from("digest,prediction,truth\n");
        for (record, (p, t)) in eval.records.iter().zip(predictions.iter().zip(&truths)) {
            csv.push_str(&format!("{:016x},{p},{t}\n", record.digest));
        }
        fs::write(self.out.join("eval.csv"), csv)?;
        self.record_artifacts(&["eval.csv"])?;
        println!("srcc = {rho:.6}");
        Ok(rho)
    }

    /// Run the evolutionary search preset and write its log and report.
    pub fn search(&self) -> Result<SearchState> {
        let dialect = self.config.search_dialect;
        let oracle = self.oracle();
        let macro_config = self.macro_config();
        let (state, estimator_name, ea) = match self.config.search_preset.as_str() {
            "random" => {
                let ea = EAConfig::preset(dialect, PresetKind::Random);
                let estimator = RandomEstimator {
                    seed: self.config.search_seed,
                };
                let state = ea_search(
                    &ea,
                    dialect,
                    &estimator,
                    &oracle,
                    &macro_config,
                    self.config.search_seed,
                    &[],
                )?;
                (state, estimator.name(), ea)
            }
            "cl" => {
                if dialect != self.config.target {
                    bail!(
                        "the cl preset searches the fine-tuned target family ({}), not {dialect}",
                        self.config.target
                    );
                }
                let ea = EAConfig::preset(dialect, PresetKind::Cl);
                let predictor = self.predictor()?;
                let finetune = self.load_dataset(&self.out.join("finetune.json"))?;
                let precharged: Vec<u64> = finetune.records.iter().map(|r| r.digest).collect();
                let state = ea_search(
                    &ea,
                    dialect,
                    &predictor,
                    &oracle,
                    &macro_config,
                    self.config.search_seed,
                    &precharged,
                )?;
                (state, predictor.name(), ea)
            }
            other => bail!("unknown preset `{other}`"),
        };
        write_search_log(&self.out.join("search_log.csv"), &state)?;
        let report = search_report(dialect, estimator_name, &ea, &state);
        fs::write(self.out.join("search_report.txt"), report)?;
        self.record_artifacts(&["search_log.csv", "search_report.txt"])?;
        println!(
            "search done: best accuracy {} with {} unique queries",
            state.best().accuracy.unwrap(),
            state.ledger.unique_queries()
        );
        Ok(state)
    }

    /// The full pipeline from one config and seed.
    pub fn repro(&self) -> Result<()> {
        self.gen()?;
        self.pretrain()?;
        self.train()?;
        self.finetune()?;
        let rho = self.eval()?;
        let state = self.search()?;
        let summary = format!(
            "target,{}\ncl-fine-tune srcc,{rho}\nsearch dialect,{}\nsearch preset,{}\nsearch unique queries,{}\nsearch best accuracy,{}\n",
            self.config.target,
            self.config.search_dialect,
            self.config.search_preset,
            state.ledger.unique_queries(),
            state.best().accuracy.unwrap(),
        );
        fs::write(self.out.join("summary.txt"), summary)?;
        self.record_artifacts(&["summary.txt"])?;
        Ok(())
    }
}

pub fn write_metrics(path: &Path, metrics: &[EpochMetric]) -> Result<()> {
    let mut csv = String::from("epoch,loss,srcc\n");
    for m in metrics {
        let srcc_field = m.srcc.map(|v| v.to_string()).unwrap_or_default();
        csv.push_str(&format!("{},{},{}\n", m.epoch, m.loss, srcc_field));
    }
    fs::write(path, csv)?;
    Ok(())
}

fn write_search_log(path: &Path, state: &SearchState) -> Result<()> {
    let mut csv = String::from("iteration,candidate_digest,estimated_score,true_score,cumulative_queries\n");
    for row in &state.log {
        csv.push_str(&format!(
            "{},{:016x},{},{},{}\n",
            row.iteration, row.digest, row.estimated, row.actual, row.cumulative_queries
        ));
    }
    fs::write(path, csv)?;
    Ok(())
}

fn search_report(
    dialect: Dialect,
    estimator: &str,
    ea: &EAConfig,
    state: &SearchState,
) -> String {
    let best = state.best();
    let mut report = format!(
        "dialect: {dialect}\nestimator: {estimator}\nk={} B={} P_init={} T={}\nunique queries: {}\nbest accuracy: {}\nbest spec: {}\n",
        ea.top_k,
        ea.queries_per_iteration,
        ea.initial_population,
        ea.iterations,
        state.ledger.unique_queries(),
        best.accuracy.unwrap(),
        best.spec,
    );
    report.push_str("iteration,best_accuracy,cumulative_queries\n");
    for h in &state.history {
        report.push_str(&format!(
            "{},{},{}\n",
            h.iteration, h.best_accuracy, h.cumulative_queries
        ));
    }
    report
}

/// Direct SRCC over a two-column CSV (`prediction,truth`, optional header).
pub fn eval_pairs_file(path: &Path) -> Result<f64> {
    let text = fs::read_to_string(path)?;
    let mut predictions = Vec::new();
    let mut truths = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let a = fields.next().unwrap_or("");
        let b = fields
            .next()
            .ok_or_else(|| anyhow!("{}:{}: expected two columns", path.display(), lineno + 1))?;
        match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
            (Ok(p), Ok(t)) => {
                predictions.push(p);
                truths.push(t);
            }
            _ if lineno == 0 => continue, // header
            _ => bail!("{}:{}: expected numeric columns", path.display(), lineno + 1),
        }
    }
    if predictions.len() < 2 {
        bail!("{} holds fewer than two numeric rows", path.display());
    }
    Ok(srcc(&predictions, &truths))
}
