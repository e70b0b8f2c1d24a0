//! The training pipeline: unsupervised contrastive pretraining on unlabeled
//! graphs, supervised regression on labeled source families, and head-only
//! fine-tuning on a small labeled target set. The GNN baseline trains end-to-end
//! and is fine-tuned the same head-only way.

use crate::encoder::{prepare, Encoder, PreparedGraph};
use crate::error::{Error, Result};
use crate::lowering::Dialect;
use crate::oracle::{dataset_digest, ArchRecord};
use crate::rng::{shuffle, substream};
use crate::spectral::{signature, DistanceCache, SpectralSignature};
use crate::tensor::{AdamConfig, ParamStore, Tape, Tensor};
use crate::train::positive::{nearest_neighbors, select_positive};
use crate::train::{cl_loss_on_tape, srcc, ClBatch};

/// Labeled fine-tuning budget per target dialect.
pub fn finetune_size(dialect: Dialect) -> usize {
    match dialect {
        Dialect::Nb201 => 40,
        _ => 50,
    }
}

/// Default sample counts when a dialect is the prediction target.
pub fn default_target_sample_size(dialect: Dialect) -> usize {
    match dialect {
        Dialect::Nb101 => 5000,
        Dialect::Nb201 => 4096,
        Dialect::Nb301 => 1000,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub pretrain_epochs: usize,
    pub regressor_epochs: usize,
    pub finetune_epochs: usize,
    pub baseline_epochs: usize,
    pub lr: f64,
    pub finetune_lr: f64,
    /// nearest-neighbor pool size for positive selection
    pub pool_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        // contrastive pretraining wants large batches; desk-scale configs
        // typically dial this down to 64
        TrainConfig {
            batch_size: 256,
            pretrain_epochs: 2,
            regressor_epochs: 20,
            finetune_epochs: 150,
            baseline_epochs: 3,
            lr: 1e-3,
            finetune_lr: 2e-4,
            pool_size: 5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn check(&self) -> Result<()> {
        if self.batch_size < 4 {
            return Err(Error::Config("batch size must be at least 4".into()));
        }
        if self.pool_size < 1 {
            return Err(Error::Config("positive pool size must be at least 1".into()));
        }
        Ok(())
    }
}

/// One metrics row: epoch number, mean loss, optional rank correlation.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetric {
    pub epoch: usize,
    pub loss: f64,
    pub srcc: Option<f64>,
}

/// A dataset with everything the pipeline needs precomputed: prepared graphs for
/// the encoder and spectral signatures for distances.
pub struct PreparedDataset {
    pub dialect: Dialect,
    pub records: Vec<ArchRecord>,
    pub prepared: Vec<PreparedGraph>,
    pub signatures: Vec<SpectralSignature>,
    pub digest: u64,
}

impl PreparedDataset {
    pub fn new(dialect: Dialect, records: Vec<ArchRecord>, oracle_seed: u64) -> Result<Self> {
        let mut prepared = Vec::with_capacity(records.len());
        let mut signatures = Vec::with_capacity(records.len());
        for r in &records {
            prepared.push(prepare(&r.cg)?);
            signatures.push(signature(&r.cg)?);
        }
        let digest = dataset_digest(oracle_seed, dialect, &records);
        Ok(PreparedDataset {
            dialect,
            records,
            prepared,
            signatures,
            digest,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labels(&self) -> Vec<f64> {
        self.records
            .iter()
            .map(|r| r.accuracy.expect("labeled dataset"))
            .collect()
    }

    pub fn distance_cache(&self) -> DistanceCache {
        DistanceCache::build(&self.signatures, self.digest)
    }
}

/// Result of contrastive pretraining.
pub struct PretrainOutcome {
    pub params: ParamStore,
    pub metrics: Vec<EpochMetric>,
    /// anchors skipped because their batch held no same-family positive
    pub skipped_anchors: usize,
    pub excluded_families: Vec<Dialect>,
    /// final-epoch mean loss strictly below first-epoch mean loss
    pub trend_ok: bool,
}

/// Unsupervised contrastive pretraining over the union of (unlabeled) families.
/// Each anchor is paired with a near neighbor by spectral distance; batches mix
/// families and the weighted loss treats same-family members as positives.
pub fn pretrain(
    encoder: &Encoder,
    families: &[&PreparedDataset],
    caches: &[DistanceCache],
    config: &TrainConfig,
) -> Result<PretrainOutcome> {
    config.check()?;
    assert_eq!(families.len(), caches.len());
    let mut params = encoder.init_params();
    let adam = AdamConfig::with_lr(config.lr);

    let mut excluded_families = Vec::new();
    let mut anchors: Vec<(usize, usize)> = Vec::new();
    let mut pools: Vec<Vec<Vec<usize>>> = Vec::new();
    for (fi, ds) in families.iter().enumerate() {
        if ds.len() < 2 {
            excluded_families.push(ds.dialect);
            pools.push(Vec::new());
            continue;
        }
        pools.push(
            (0..ds.len())
                .map(|i| nearest_neighbors(&caches[fi], i, config.pool_size))
                .collect(),
        );
        anchors.extend((0..ds.len()).map(|i| (fi, i)));
    }
    if anchors.is_empty() {
        return Err(Error::Config("no family has at least two members".into()));
    }

    let mut rng = substream(config.seed, "pretrain");
    let anchors_per_batch = (config.batch_size / 2).max(2);
    let mut metrics = Vec::with_capacity(config.pretrain_epochs);
    let mut skipped_anchors = 0;

    for epoch in 0..config.pretrain_epochs {
        shuffle(&mut anchors, &mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in anchors.chunks(anchors_per_batch) {
            if chunk.len() < 2 {
                continue;
            }
            let mut items: Vec<(usize, usize)> = Vec::with_capacity(chunk.len() * 2);
            let mut partner = Vec::with_capacity(chunk.len() * 2);
            for &(fi, i) in chunk {
                let p = select_positive(&pools[fi][i], &mut rng);
                partner.push(items.len() + 1);
                partner.push(items.len());
                items.push((fi, i));
                items.push((fi, p));
            }
            let batch = ClBatch {
                sigma: batch_sigma(&items, caches),
                partner,
                items,
            };

            let mut tape = Tape::new();
            let mut h_ids = Vec::with_capacity(batch.len());
            for &(fi, idx) in &batch.items {
                h_ids.push(encoder.encode_on_tape(&mut tape, &params, &families[fi].prepared[idx])?);
            }
            let stacked = tape.stack_rows(&h_ids)?;
            let z = encoder.project_on_tape(&mut tape, &params, stacked)?;
            let family_ids = batch.family_ids();
            let sigma = &batch.sigma;
            let (loss_id, skipped) =
                cl_loss_on_tape(&mut tape, z, &family_ids, |a, b| sigma[a][b])?;
            skipped_anchors += skipped;
            let mean_loss = tape.scale(loss_id, 1.0 / batch.len() as f64);
            epoch_loss += tape.value(mean_loss).scalar_value();
            batches += 1;

            params.zero_grads();
            tape.backward(mean_loss, &mut params)?;
            params.adam_step(&adam);
        }
        metrics.push(EpochMetric {
            epoch,
            loss: epoch_loss / batches.max(1) as f64,
            srcc: None,
        });
    }

    let trend_ok = match (metrics.first(), metrics.last()) {
        (Some(first), Some(last)) if metrics.len() > 1 => last.loss < first.loss,
        _ => true,
    };
    Ok(PretrainOutcome {
        params,
        metrics,
        skipped_anchors,
        excluded_families,
        trend_ok,
    })
}

fn batch_sigma(items: &[(usize, usize)], caches: &[DistanceCache]) -> Vec<Vec<f64>> {
    let n = items.len();
    let mut sigma = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in 0..n {
            let (fa, ia) = items[a];
            let (fb, ib) = items[b];
            if fa == fb {
                sigma[a][b] = caches[fa].get(ia, ib);
            }
        }
    }
    sigma
}

/// Graph embeddings of every record, in order, under frozen encoder parameters.
pub fn embed_records(
    encoder: &Encoder,
    params: &ParamStore,
    datasets: &[&PreparedDataset],
) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    for ds in datasets {
        for pg in &ds.prepared {
            out.push(encoder.encode(params, pg)?);
        }
    }
    Ok(out)
}

/// Mean and population standard deviation of a label set, written into a store as
/// `norm.mean` / `norm.std`; the raw MLP regresses standardized targets and
/// inference maps back. Accuracy labels sit in a narrow band, so standardization
/// is what makes the residual structure optimizable at all.
pub(crate) fn set_label_normalization(store: &mut ParamStore, labels: &[f64]) -> (f64, f64) {
    let n = labels.len() as f64;
    let mean = labels.iter().sum::<f64>() / n;
    let var = labels.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
    store.insert("norm.mean", Tensor::scalar(mean));
    store.insert("norm.std", Tensor::scalar(std));
    (mean, std)
}

/// Squared-error training of the prediction head on fixed embeddings. Targets are
/// standardized against this label set; returns one metrics row per epoch (mean
/// batch MSE in standardized units).
pub fn train_head(
    encoder: &Encoder,
    head: &mut ParamStore,
    embeddings: &[Vec<f64>],
    labels: &[f64],
    epochs: usize,
    lr: f64,
    batch_size: usize,
    seed: u64,
    stream: &str,
) -> Result<Vec<EpochMetric>> {
    assert_eq!(embeddings.len(), labels.len());
    let (mean, std) = set_label_normalization(head, labels);
    let adam = AdamConfig::with_lr(lr);
    let mut rng = substream(seed, stream);
    let mut order: Vec<usize> = (0..embeddings.len()).collect();
    let mut metrics = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        shuffle(&mut order, &mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(batch_size.max(1)) {
            let rows: Vec<Vec<f64>> = chunk.iter().map(|&i| embeddings[i].clone()).collect();
            let ys: Vec<f64> = chunk.iter().map(|&i| (labels[i] - mean) / std).collect();
            let mut tape = Tape::new();
            let h = tape.constant(Tensor::from_rows(rows));
            let pred = encoder.predict_on_tape(&mut tape, head, h)?;
            let target = tape.constant(Tensor::from_vec(ys.len(), 1, ys));
            let err = tape.sub(pred, target)?;
            let sq = tape.mul(err, err)?;
            let sum = tape.sum_all(sq);
            let loss = tape.scale(sum, 1.0 / chunk.len() as f64);
            epoch_loss += tape.value(loss).scalar_value();
            batches += 1;
            head.zero_grads();
            tape.backward(loss, head)?;
            head.adam_step(&adam);
        }
        metrics.push(EpochMetric {
            epoch,
            loss: epoch_loss / batches.max(1) as f64,
            srcc: None,
        });
    }
    Ok(metrics)
}

/// End-to-end training of the GNN baseline; with `head_only` the encoder layers
/// are frozen and only `head.*` parameters move (the fine-tuning regime).
pub fn train_baseline(
    encoder: &Encoder,
    store: &mut ParamStore,
    graphs: &[&PreparedGraph],
    labels: &[f64],
    epochs: usize,
    lr: f64,
    batch_size: usize,
    seed: u64,
    stream: &str,
    head_only: bool,
) -> Result<Vec<EpochMetric>> {
    assert_eq!(graphs.len(), labels.len());
    let (mean, std) = set_label_normalization(store, labels);
    let adam = AdamConfig::with_lr(lr);
    let mut rng = substream(seed, stream);
    let mut order: Vec<usize> = (0..graphs.len()).collect();
    let mut metrics = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        shuffle(&mut order, &mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(batch_size.max(1)) {
            let mut tape = Tape::new();
            let mut pooled_ids = Vec::with_capacity(chunk.len());
            for &i in chunk {
                pooled_ids.push(encoder.baseline_encode_on_tape(&mut tape, store, graphs[i])?);
            }
            let stacked = tape.stack_rows(&pooled_ids)?;
            let pred = encoder.baseline_predict_on_tape(&mut tape, store, stacked)?;
            let ys: Vec<f64> = chunk.iter().map(|&i| (labels[i] - mean) / std).collect();
            let target = tape.constant(Tensor::from_vec(ys.len(), 1, ys));
            let err = tape.sub(pred, target)?;
            let sq = tape.mul(err, err)?;
            let sum = tape.sum_all(sq);
            let loss = tape.scale(sum, 1.0 / chunk.len() as f64);
            epoch_loss += tape.value(loss).scalar_value();
            batches += 1;
            store.zero_grads();
            tape.backward(loss, store)?;
            if head_only {
                store.adam_step_filtered(&adam, |name| name.starts_with("head."));
            } else {
                store.adam_step(&adam);
            }
        }
        metrics.push(EpochMetric {
            epoch,
            loss: epoch_loss / batches.max(1) as f64,
            srcc: None,
        });
    }
    Ok(metrics)
}

/// A trained contrastive predictor: frozen encoder plus prediction head.
pub struct ClPredictor {
    pub encoder: Encoder,
    pub params: ParamStore,
    pub head: ParamStore,
}

impl ClPredictor {
    pub fn estimate_graph(&self, cg: &crate::cg::ComputationGraph) -> Result<f64> {
        let pg = prepare(cg)?;
        self.encoder.predict(&self.params, &self.head, &pg)
    }

    /// Predictions followed by rank correlation against the dataset's labels.
    pub fn evaluate(&self, dataset: &PreparedDataset) -> Result<f64> {
        let mut predictions = Vec::with_capacity(dataset.len());
        for pg in &dataset.prepared {
            predictions.push(self.encoder.predict(&self.params, &self.head, pg)?);
        }
        Ok(srcc(&predictions, &dataset.labels()))
    }
}
