//! Flat key=value experiment configuration.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use cgpredict::lowering::Dialect;
use cgpredict::train::{default_target_sample_size, finetune_size, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    /// optional encoder architecture file (JSON); default architecture otherwise
    pub encoder_config: Option<String>,
    pub oracle_seed: u64,
    pub target: Dialect,
    /// unlabeled/pretraining pool sizes per family
    pub n_nb101: usize,
    pub n_nb201: usize,
    pub n_nb301: usize,
    pub finetune_count: usize,
    pub eval_size: usize,
    pub train: TrainConfig,
    pub search_dialect: Dialect,
    pub search_preset: String,
    pub search_seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let target = Dialect::Nb301;
        RunConfig {
            seed: 7,
            encoder_config: None,
            oracle_seed: 7,
            target,
            n_nb101: 2000,
            n_nb201: 2000,
            n_nb301: default_target_sample_size(target),
            finetune_count: finetune_size(target),
            eval_size: 500,
            train: TrainConfig::default(),
            search_dialect: Dialect::Nb201,
            search_preset: "random".to_string(),
            search_seed: 0,
        }
    }
}

impl RunConfig {
    pub fn dataset_size(&self, dialect: Dialect) -> usize {
        match dialect {
            Dialect::Nb101 => self.n_nb101,
            Dialect::Nb201 => self.n_nb201,
            Dialect::Nb301 => self.n_nb301,
        }
    }

    pub fn source_dialects(&self) -> Vec<Dialect> {
        Dialect::ALL.iter().copied().filter(|d| *d != self.target).collect()
    }

    /// Parse the flat `key = value` format (one pair per line, `#` comments).
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut pairs = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("{}:{}: expected key = value", path.display(), lineno + 1);
            };
            pairs.insert(key.trim().to_string(), value.trim().to_string());
        }
        Self::from_pairs(pairs)
    }

    fn from_pairs(pairs: BTreeMap<String, String>) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut target_explicit_sizes = BTreeMap::new();
        let mut finetune_explicit = false;
        for (key, value) in &pairs {
            match key.as_str() {
                "seed" => cfg.seed = value.parse()?,
                "oracle_seed" => cfg.oracle_seed = value.parse()?,
                "target" => cfg.target = value.parse().map_err(anyhow::Error::from)?,
                "n_nb101" => {
                    target_explicit_sizes.insert(Dialect::Nb101, value.parse::<usize>()?);
                }
                "n_nb201" => {
                    target_explicit_sizes.insert(Dialect::Nb201, value.parse::<usize>()?);
                }
                "n_nb301" => {
                    target_explicit_sizes.insert(Dialect::Nb301, value.parse::<usize>()?);
                }
                "finetune_count" => {
                    cfg.finetune_count = value.parse()?;
                    finetune_explicit = true;
                }
                "eval_size" => cfg.eval_size = value.parse()?,
                "batch_size" => cfg.train.batch_size = value.parse()?,
                "pretrain_epochs" => cfg.train.pretrain_epochs = value.parse()?,
                "regressor_epochs" => cfg.train.regressor_epochs = value.parse()?,
                "finetune_epochs" => cfg.train.finetune_epochs = value.parse()?,
                "baseline_epochs" => cfg.train.baseline_epochs = value.parse()?,
                "lr" => cfg.train.lr = value.parse()?,
                "finetune_lr" => cfg.train.finetune_lr = value.parse()?,
                "pool_size" => cfg.train.pool_size = value.parse()?,
                "search_dialect" => {
                    cfg.search_dialect = value.parse().map_err(anyhow::Error::from)?
                }
                "search_preset" => cfg.search_preset = value.clone(),
                "encoder_config" => cfg.encoder_config = Some(value.clone()),
                "search_seed" => cfg.search_seed = value.parse()?,
                other => bail!("unknown config key `{other}`"),
            }
        }
        if !finetune_explicit {
            cfg.finetune_count = finetune_size(cfg.target);
        }
        for (dialect, n) in target_explicit_sizes {
            match dialect {
                Dialect::Nb101 => cfg.n_nb101 = n,
                Dialect::Nb201 => cfg.n_nb201 = n,
                Dialect::Nb301 => cfg.n_nb301 = n,
            }
        }
        cfg.train.seed = cfg.seed;
        if !matches!(cfg.search_preset.as_str(), "random" | "cl") {
            bail!("search_preset must be `random` or `cl`");
        }
        Ok(cfg)
    }

    /// Canonical serialization, hashed into the digest every artifact embeds.
    pub fn canonical(&self) -> String {
        format!(
            "seed={} oracle_seed={} target={} n101={} n201={} n301={} ft={} eval={} \
             batch={} pre_ep={} reg_ep={} ft_ep={} base_ep={} lr={} ft_lr={} pool={} \
             search={}:{} search_seed={} enc={}",
            self.seed,
            self.oracle_seed,
            self.target,
            self.n_nb101,
            self.n_nb201,
            self.n_nb301,
            self.finetune_count,
            self.eval_size,
            self.train.batch_size,
            self.train.pretrain_epochs,
            self.train.regressor_epochs,
            self.train.finetune_epochs,
            self.train.baseline_epochs,
            self.train.lr,
            self.train.finetune_lr,
            self.train.pool_size,
            self.search_dialect,
            self.search_preset,
            self.search_seed,
            self.encoder_config.as_deref().unwrap_or("default"),
        )
    }

    pub fn digest(&self) -> u64 {
        // FNV-1a over the canonical form
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.canonical().as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.train.seed = seed;
        self
    }
}
