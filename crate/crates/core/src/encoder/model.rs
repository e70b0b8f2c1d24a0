//! The graph encoder and its heads.
//!
//! Two branches read the embedded node features: a stack of mean-aggregation GNN
//! layers for local structure and a small multi-head self-attention stack (with
//! residual connections) for global structure. Mean-pooling each branch and
//! concatenating gives the graph embedding `h`; a projection head maps `h` to the
//! unit sphere for the contrastive loss and a separate MLP head regresses accuracy.

use serde::{Deserialize, Serialize};

use super::{PreparedGraph, NODE_FEATURE_DIM};
use crate::cg::fnv1a;
use crate::error::{Error, Result};
use crate::rng::{range_f64, substream};
use crate::tensor::{ParamStore, Tape, Tensor, ValueId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub feature_dim: usize,
    /// node feature size inside both branches
    pub hidden: usize,
    pub gnn_layers: usize,
    pub attn_layers: usize,
    pub attn_heads: usize,
    /// graph embedding size (the two pooled branches concatenated)
    pub embedding_dim: usize,
    pub proj_hidden: usize,
    pub proj_hidden_layers: usize,
    /// contrastive projection output size
    pub proj_dim: usize,
    pub pred_hidden: usize,
    pub pred_hidden_layers: usize,
    pub baseline_gnn_layers: usize,
    pub baseline_hidden_layers: usize,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            feature_dim: NODE_FEATURE_DIM,
            hidden: 64,
            gnn_layers: 4,
            attn_layers: 2,
            attn_heads: 2,
            embedding_dim: 128,
            proj_hidden: 128,
            proj_hidden_layers: 4,
            proj_dim: 64,
            pred_hidden: 200,
            pred_hidden_layers: 4,
            baseline_gnn_layers: 4,
            baseline_hidden_layers: 4,
            seed: 0,
        }
    }
}

impl EncoderConfig {
    pub fn head_dim(&self) -> usize {
        self.hidden / self.attn_heads
    }

    /// Read an architecture config file (JSON; absent fields take defaults).
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Digest of the architecture configuration; changes iff the config changes.
    pub fn digest(&self) -> u64 {
        let canonical = format!(
            "feat={} hidden={} gnn={} attn={}x{} emb={} proj={}x{}->{} pred={}x{} base={}x{} seed={}",
            self.feature_dim,
            self.hidden,
            self.gnn_layers,
            self.attn_layers,
            self.attn_heads,
            self.embedding_dim,
            self.proj_hidden,
            self.proj_hidden_layers,
            self.proj_dim,
            self.pred_hidden,
            self.pred_hidden_layers,
            self.baseline_gnn_layers,
            self.baseline_hidden_layers,
            self.seed,
        );
        fnv1a(canonical.as_bytes())
    }
}

pub struct Encoder {
    pub config: EncoderConfig,
}

fn init_tensor(seed: u64, name: &str, rows: usize, cols: usize, fan_in: usize) -> Tensor {
    let mut rng = substream(seed, name);
    let bound = 1.0 / (fan_in as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| range_f64(&mut rng, -bound, bound))
        .collect();
    Tensor::from_vec(rows, cols, data)
}

fn insert_linear(store: &mut ParamStore, seed: u64, prefix: &str, fan_in: usize, fan_out: usize) {
    store.insert(
        &format!("{prefix}.w"),
        init_tensor(seed, &format!("{prefix}.w"), fan_in, fan_out, fan_in),
    );
    store.insert(
        &format!("{prefix}.b"),
        init_tensor(seed, &format!("{prefix}.b"), 1, fan_out, fan_in),
    );
}

impl Encoder {
    pub fn new(config: EncoderConfig) -> Self {
        Encoder { config }
    }

    /// Encoder parameters: embedding, GNN branch, attention branch, projection head.
    pub fn init_params(&self) -> ParamStore {
        let c = &self.config;
        let mut store = ParamStore::new();
        insert_linear(&mut store, c.seed, "embed", c.feature_dim, c.hidden);
        for layer in 0..c.gnn_layers {
            store.insert(
                &format!("gnn.{layer}.self"),
                init_tensor(c.seed, &format!("gnn.{layer}.self"), c.hidden, c.hidden, c.hidden),
            );
            store.insert(
                &format!("gnn.{layer}.neigh"),
                init_tensor(c.seed, &format!("gnn.{layer}.neigh"), c.hidden, c.hidden, c.hidden),
            );
            store.insert(
                &format!("gnn.{layer}.b"),
                init_tensor(c.seed, &format!("gnn.{layer}.b"), 1, c.hidden, c.hidden),
            );
        }
        let hd = c.head_dim();
        for layer in 0..c.attn_layers {
            for head in 0..c.attn_heads {
                for mat in ["q", "k", "v"] {
                    let name = format!("attn.{layer}.h{head}.{mat}");
                    store.insert(&name, init_tensor(c.seed, &name, c.hidden, hd, c.hidden));
                }
                let name = format!("attn.{layer}.h{head}.o");
                store.insert(&name, init_tensor(c.seed, &name, hd, c.hidden, hd));
            }
        }
        let mut dim = c.embedding_dim;
        for layer in 0..c.proj_hidden_layers {
            insert_linear(&mut store, c.seed, &format!("proj.{layer}"), dim, c.proj_hidden);
            dim = c.proj_hidden;
        }
        insert_linear(
            &mut store,
            c.seed,
            &format!("proj.{}", c.proj_hidden_layers),
            dim,
            c.proj_dim,
        );
        store
    }

    /// Prediction head parameters (trained separately from the encoder).
    pub fn init_pred_head(&self) -> ParamStore {
        let c = &self.config;
        let mut store = ParamStore::new();
        let mut dim = c.embedding_dim;
        for layer in 0..c.pred_hidden_layers {
            insert_linear(&mut store, c.seed, &format!("pred.{layer}"), dim, c.pred_hidden);
            dim = c.pred_hidden;
        }
        insert_linear(&mut store, c.seed, &format!("pred.{}", c.pred_hidden_layers), dim, 1);
        store
    }

    /// Baseline parameters: GNN-only encoder plus its own MLP head, trained
    /// end-to-end as the comparison arm.
    pub fn init_baseline(&self) -> ParamStore {
        let c = &self.config;
        let mut store = ParamStore::new();
        insert_linear(&mut store, c.seed, "embed", c.feature_dim, c.hidden);
        for layer in 0..c.baseline_gnn_layers {
            store.insert(
                &format!("gnn.{layer}.self"),
                init_tensor(c.seed, &format!("gnn.{layer}.self"), c.hidden, c.hidden, c.hidden),
            );
            store.insert(
                &format!("gnn.{layer}.neigh"),
                init_tensor(c.seed, &format!("gnn.{layer}.neigh"), c.hidden, c.hidden, c.hidden),
            );
            store.insert(
                &format!("gnn.{layer}.b"),
                init_tensor(c.seed, &format!("gnn.{layer}.b"), 1, c.hidden, c.hidden),
            );
        }
        let mut dim = c.hidden;
        for layer in 0..c.baseline_hidden_layers {
            insert_linear(&mut store, c.seed, &format!("head.{layer}"), dim, c.pred_hidden);
            dim = c.pred_hidden;
        }
        insert_linear(&mut store, c.seed, &format!("head.{}", c.baseline_hidden_layers), dim, 1);
        store
    }

    fn embed_nodes(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        pg: &PreparedGraph,
    ) -> Result<ValueId> {
        let x = tape.constant(pg.features.clone());
        let w = tape.param(store, "embed.w")?;
        let b = tape.param(store, "embed.b")?;
        let xw = tape.matmul(x, w)?;
        tape.add_row(xw, b)
    }

    fn gnn_stack(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        pg: &PreparedGraph,
        mut x: ValueId,
        layers: usize,
    ) -> Result<ValueId> {
        for layer in 0..layers {
            let w_self = tape.param(store, &format!("gnn.{layer}.self"))?;
            let w_neigh = tape.param(store, &format!("gnn.{layer}.neigh"))?;
            let b = tape.param(store, &format!("gnn.{layer}.b"))?;
            let gathered = tape.gather_rows(x, &pg.edge_src)?;
            let neigh = tape.scatter_mean_rows(gathered, &pg.edge_dst, pg.node_count)?;
            let own = tape.matmul(x, w_self)?;
            let agg = tape.matmul(neigh, w_neigh)?;
            let sum = tape.add(own, agg)?;
            let biased = tape.add_row(sum, b)?;
            x = tape.relu(biased);
        }
        Ok(x)
    }

    fn attention_stack(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        mut x: ValueId,
    ) -> Result<ValueId> {
        let c = &self.config;
        let scale = 1.0 / (c.head_dim() as f64).sqrt();
        for layer in 0..c.attn_layers {
            let mut combined: Option<ValueId> = None;
            for head in 0..c.attn_heads {
                let wq = tape.param(store, &format!("attn.{layer}.h{head}.q"))?;
                let wk = tape.param(store, &format!("attn.{layer}.h{head}.k"))?;
                let wv = tape.param(store, &format!("attn.{layer}.h{head}.v"))?;
                let wo = tape.param(store, &format!("attn.{layer}.h{head}.o"))?;
                let q = tape.matmul(x, wq)?;
                let k = tape.matmul(x, wk)?;
                let v = tape.matmul(x, wv)?;
                let scores = tape.matmul_nt(q, k)?;
                let scaled = tape.scale(scores, scale);
                let weights = tape.softmax_rows(scaled);
                let mixed = tape.matmul(weights, v)?;
                let out = tape.matmul(mixed, wo)?;
                combined = Some(match combined {
                    None => out,
                    Some(acc) => tape.add(acc, out)?,
                });
            }
            // residual connection keeps depth from washing out node identity
            x = tape.add(x, combined.expect("at least one attention head"))?;
        }
        Ok(x)
    }

    /// Graph embedding `h` (1 x embedding_dim): pooled GNN branch concatenated with
    /// the pooled attention branch.
    pub fn encode_on_tape(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        pg: &PreparedGraph,
    ) -> Result<ValueId> {
        let embedded = self.embed_nodes(tape, store, pg)?;
        let local = self.gnn_stack(tape, store, pg, embedded, self.config.gnn_layers)?;
        let pooled_local = tape.mean_rows(local);
        let global = self.attention_stack(tape, store, embedded)?;
        let pooled_global = tape.mean_rows(global);
        tape.concat_cols(pooled_local, pooled_global)
    }

    /// Projection to the unit sphere (row-wise; accepts stacked embeddings).
    pub fn project_on_tape(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        h: ValueId,
    ) -> Result<ValueId> {
        let mut x = h;
        for layer in 0..=self.config.proj_hidden_layers {
            let w = tape.param(store, &format!("proj.{layer}.w"))?;
            let b = tape.param(store, &format!("proj.{layer}.b"))?;
            let lin = tape.matmul(x, w)?;
            x = tape.add_row(lin, b)?;
            if layer < self.config.proj_hidden_layers {
                x = tape.relu(x);
            }
        }
        Ok(tape.l2_normalize_rows(x))
    }

    /// Accuracy prediction from graph embeddings (row-wise; returns n x 1).
    pub fn predict_on_tape(
        &self,
        tape: &mut Tape,
        head: &ParamStore,
        h: ValueId,
    ) -> Result<ValueId> {
        let mut x = h;
        for layer in 0..=self.config.pred_hidden_layers {
            let w = tape.param(head, &format!("pred.{layer}.w"))?;
            let b = tape.param(head, &format!("pred.{layer}.b"))?;
            let lin = tape.matmul(x, w)?;
            x = tape.add_row(lin, b)?;
            if layer < self.config.pred_hidden_layers {
                x = tape.relu(x);
            }
        }
        Ok(x)
    }

    /// Baseline: GNN-only embedding (1 x hidden).
    pub fn baseline_encode_on_tape(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        pg: &PreparedGraph,
    ) -> Result<ValueId> {
        let embedded = self.embed_nodes(tape, store, pg)?;
        let local = self.gnn_stack(tape, store, pg, embedded, self.config.baseline_gnn_layers)?;
        Ok(tape.mean_rows(local))
    }

    /// Baseline prediction head (row-wise on pooled baseline embeddings).
    pub fn baseline_predict_on_tape(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        pooled: ValueId,
    ) -> Result<ValueId> {
        let mut x = pooled;
        for layer in 0..=self.config.baseline_hidden_layers {
            let w = tape.param(store, &format!("head.{layer}.w"))?;
            let b = tape.param(store, &format!("head.{layer}.b"))?;
            let lin = tape.matmul(x, w)?;
            x = tape.add_row(lin, b)?;
            if layer < self.config.baseline_hidden_layers {
                x = tape.relu(x);
            }
        }
        Ok(x)
    }

    /// Convenience inference: graph embedding as a plain vector.
    pub fn encode(&self, store: &ParamStore, pg: &PreparedGraph) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let h = self.encode_on_tape(&mut tape, store, pg)?;
        Ok(tape.value(h).data().to_vec())
    }

    /// Map a raw head output back to accuracy units when the store carries label
    /// normalization constants (written by head training).
    fn denormalize(store: &ParamStore, raw: f64) -> f64 {
        match (store.value("norm.mean"), store.value("norm.std")) {
            (Ok(mean), Ok(std)) => mean.scalar_value() + std.scalar_value() * raw,
            _ => raw,
        }
    }

    /// Convenience inference: predicted accuracy from a precomputed embedding.
    pub fn predict_from_embedding(&self, head: &ParamStore, h: &[f64]) -> Result<f64> {
        let mut tape = Tape::new();
        let hv = tape.constant(Tensor::from_vec(1, h.len(), h.to_vec()));
        let out = self.predict_on_tape(&mut tape, head, hv)?;
        Ok(Self::denormalize(head, tape.value(out).scalar_value()))
    }

    /// Convenience inference: full predict pipeline for one graph.
    pub fn predict(
        &self,
        store: &ParamStore,
        head: &ParamStore,
        pg: &PreparedGraph,
    ) -> Result<f64> {
        let h = self.encode(store, pg)?;
        self.predict_from_embedding(head, &h)
    }

    /// Convenience inference: baseline prediction for one graph.
    pub fn baseline_predict(&self, store: &ParamStore, pg: &PreparedGraph) -> Result<f64> {
        let mut tape = Tape::new();
        let pooled = self.baseline_encode_on_tape(&mut tape, store, pg)?;
        let out = self.baseline_predict_on_tape(&mut tape, store, pooled)?;
        Ok(Self::denormalize(store, tape.value(out).scalar_value()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cg::ComputationGraph;
    use crate::encoder::prepare;
    use crate::lowering::{build_network, random_cell, CellSpec, Dialect, MacroConfig, Nb201Cell, Nb201Op};
    use crate::rng::seeded;

    fn network(seed: u64) -> ComputationGraph {
        let mut rng = seeded(seed);
        loop {
            let spec = random_cell(Dialect::Nb201, &mut rng);
            if let Ok(g) = build_network(&spec, &MacroConfig::default()) {
                return g;
            }
        }
    }

    fn permuted(g: &ComputationGraph, seed: u64) -> ComputationGraph {
        let n = g.nodes.len();
        let mut perm: Vec<usize> = (0..n).collect();
        crate::rng::shuffle(&mut perm, &mut seeded(seed));
        let mut nodes: Vec<_> = g
            .nodes
            .iter()
            .cloned()
            .map(|mut nd| {
                nd.id = perm[nd.id];
                nd
            })
            .collect();
        nodes.sort_by_key(|nd| nd.id);
        let edges = g.edges.iter().map(|&(s, d)| (perm[s], perm[d])).collect();
        ComputationGraph {
            nodes,
            edges,
            family: g.family.clone(),
        }
    }

    #[test]
    fn expected_parameter_counts() {
        let enc = Encoder::new(EncoderConfig::default());
        assert_eq!(enc.init_params().total_parameters(), 142_784);
        assert_eq!(enc.init_pred_head().total_parameters(), 146_601);
    }

    #[test]
    fn config_digest_tracks_architecture() {
        let a = EncoderConfig::default();
        let mut b = EncoderConfig::default();
        assert_eq!(a.digest(), b.digest());
        b.gnn_layers = 6;
        assert_ne!(a.digest(), b.digest());
    }

    #[test]
    fn config_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("encoder.json");
        let cfg = EncoderConfig {
            baseline_gnn_layers: 6,
            seed: 99,
            ..EncoderConfig::default()
        };
        cfg.save(&path).unwrap();
        let back = EncoderConfig::load(&path).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.digest(), back.digest());
        // partial files fall back to defaults for absent fields
        std::fs::write(&path, "{\"gnn_layers\": 6}").unwrap();
        let partial = EncoderConfig::load(&path).unwrap();
        assert_eq!(partial.gnn_layers, 6);
        assert_eq!(partial.hidden, EncoderConfig::default().hidden);
    }

    #[test]
    fn identity_weights_reduce_to_feature_mean() {
        // W_self = I, W_neigh = 0, b = 0, attention V/O = 0: both pooled branches
        // equal the mean embedded feature row (features kept non-negative so ReLU
        // is the identity).
        let enc = Encoder::new(EncoderConfig::default());
        let mut store = enc.init_params();
        let c = &enc.config;
        let mut eye = Tensor::zeros(c.hidden, c.hidden);
        for i in 0..c.hidden {
            eye.set(i, i, 1.0);
        }
        for layer in 0..c.gnn_layers {
            store.insert(&format!("gnn.{layer}.self"), eye.clone());
            store.insert(&format!("gnn.{layer}.neigh"), Tensor::zeros(c.hidden, c.hidden));
            store.insert(&format!("gnn.{layer}.b"), Tensor::zeros(1, c.hidden));
        }
        for layer in 0..c.attn_layers {
            for head in 0..c.attn_heads {
                store.insert(
                    &format!("attn.{layer}.h{head}.v"),
                    Tensor::zeros(c.hidden, c.head_dim()),
                );
                store.insert(
                    &format!("attn.{layer}.h{head}.o"),
                    Tensor::zeros(c.head_dim(), c.hidden),
                );
            }
        }
        // non-negative embedding of non-negative features
        let mut embed_rng = seeded(5);
        let w = Tensor::from_vec(
            c.feature_dim,
            c.hidden,
            (0..c.feature_dim * c.hidden)
                .map(|_| crate::rng::unit_f64(&mut embed_rng) * 0.1)
                .collect(),
        );
        store.insert("embed.w", w.clone());
        store.insert("embed.b", Tensor::zeros(1, c.hidden));

        let g = crate::cg::testutil::relu_chain(crate::cg::Shape::new(8, 8, 4));
        let mut pg = prepare(&g).unwrap();
        // clear the (negative-capable) positional block to keep features >= 0
        let base = crate::cg::OP_KIND_COUNT + crate::encoder::NUMERIC_FEATURES + 1;
        for i in 0..pg.features.rows() {
            for j in base..pg.features.cols() {
                pg.features.set(i, j, pg.features.at(i, j).max(0.0));
            }
        }
        let embedded = crate::tensor::Tensor::from_rows(
            (0..pg.features.rows())
                .map(|i| {
                    (0..c.hidden)
                        .map(|j| {
                            (0..c.feature_dim)
                                .map(|k| pg.features.at(i, k) * w.at(k, j))
                                .sum::<f64>()
                        })
                        .collect()
                })
                .collect(),
        );
        let mut expected = vec![0.0; c.hidden];
        for i in 0..embedded.rows() {
            for j in 0..c.hidden {
                expected[j] += embedded.at(i, j) / embedded.rows() as f64;
            }
        }
        let h = enc.encode(&store, &pg).unwrap();
        for j in 0..c.hidden {
            assert!((h[j] - expected[j]).abs() < 1e-12, "gnn branch");
            assert!((h[c.hidden + j] - expected[j]).abs() < 1e-12, "attention branch");
        }
    }

    #[test]
    fn encoding_is_permutation_invariant() {
        let enc = Encoder::new(EncoderConfig::default());
        let store = enc.init_params();
        for seed in 0..3 {
            let g = network(seed);
            let h1 = enc.encode(&store, &prepare(&g).unwrap()).unwrap();
            let h2 = enc
                .encode(&store, &prepare(&permuted(&g, seed + 50)).unwrap())
                .unwrap();
            for (a, b) in h1.iter().zip(&h2) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn projection_is_unit_norm() {
        let enc = Encoder::new(EncoderConfig::default());
        let store = enc.init_params();
        let g = network(11);
        let pg = prepare(&g).unwrap();
        let mut tape = Tape::new();
        let h = enc.encode_on_tape(&mut tape, &store, &pg).unwrap();
        let z = enc.project_on_tape(&mut tape, &store, h).unwrap();
        let norm: f64 = tape.value(z).data().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_bias_projection_is_positively_homogeneous() {
        let enc = Encoder::new(EncoderConfig::default());
        let mut store = enc.init_params();
        let c = enc.config.clone();
        for layer in 0..=c.proj_hidden_layers {
            let cols = store.value(&format!("proj.{layer}.b")).unwrap().cols();
            store.insert(&format!("proj.{layer}.b"), Tensor::zeros(1, cols));
        }
        let h: Vec<f64> = (0..c.embedding_dim).map(|i| (i as f64 * 0.37).sin()).collect();
        let run = |scale: f64, store: &ParamStore| {
            let mut tape = Tape::new();
            let hv = tape.constant(Tensor::from_vec(
                1,
                c.embedding_dim,
                h.iter().map(|v| v * scale).collect(),
            ));
            let z = enc.project_on_tape(&mut tape, store, hv).unwrap();
            tape.value(z).data().to_vec()
        };
        let z1 = run(1.0, &store);
        let z2 = run(2.0, &store);
        for (a, b) in z1.iter().zip(&z2) {
            assert!((a - b).abs() < 1e-12, "unit projections of collinear inputs match");
        }
    }

    #[test]
    fn zero_initialized_head_predicts_zero() {
        let enc = Encoder::new(EncoderConfig::default());
        let mut head = enc.init_pred_head();
        for name in head.names().map(str::to_string).collect::<Vec<_>>() {
            let (r, cdim) = head.value(&name).unwrap().shape();
            head.insert(&name, Tensor::zeros(r, cdim));
        }
        let h = vec![0.3; enc.config.embedding_dim];
        assert_eq!(enc.predict_from_embedding(&head, &h).unwrap(), 0.0);
    }

    #[test]
    fn uniform_nb201_cells_encode_differently() {
        let enc = Encoder::new(EncoderConfig::default());
        let store = enc.init_params();
        let cfg = MacroConfig::default();
        let a = build_network(
            &CellSpec::Nb201(Nb201Cell { edge_ops: [Nb201Op::Conv3x3; 6] }),
            &cfg,
        )
        .unwrap();
        let b = build_network(
            &CellSpec::Nb201(Nb201Cell { edge_ops: [Nb201Op::AvgPool3x3; 6] }),
            &cfg,
        )
        .unwrap();
        let ha = enc.encode(&store, &prepare(&a).unwrap()).unwrap();
        let hb = enc.encode(&store, &prepare(&b).unwrap()).unwrap();
        assert!(ha.iter().zip(&hb).any(|(x, y)| (x - y).abs() > 1e-6));
    }
}
