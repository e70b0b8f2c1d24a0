//! Contrastive losses, positive-pair selection, the pretrain/regress/fine-tune
//! pipeline and rank-correlation evaluation.

mod loss;
mod pipeline;
mod positive;
mod srcc;

pub use loss::{
    agreement, alpha_weights, cl_loss, cl_loss_on_tape, simclr_loss, supcon_loss,
    ALPHA_TEMPERATURE, SIM_TEMPERATURE,
};
pub use pipeline::{
    default_target_sample_size, embed_records, finetune_size, pretrain, train_head,
    train_baseline, ClPredictor, EpochMetric, PretrainOutcome, PreparedDataset, TrainConfig,
};
pub use positive::{nearest_neighbors, select_positive};
pub use srcc::srcc;

/// One contrastive batch: members as (family, index-within-family) pairs, the
/// anchor-to-partner map, and pairwise spectral distances among members.
#[derive(Debug, Clone)]
pub struct ClBatch {
    pub items: Vec<(usize, usize)>,
    pub partner: Vec<usize>,
    pub sigma: Vec<Vec<f64>>,
}

impl ClBatch {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn family_ids(&self) -> Vec<usize> {
        self.items.iter().map(|(f, _)| *f).collect()
    }
}
