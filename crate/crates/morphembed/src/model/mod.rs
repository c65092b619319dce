//! The recurrent language model over expected embeddings, the additive
//! baseline, the variational training objective, and the training loop.

pub mod checkpoint;
pub mod diagnostics;
pub mod recurrence;
pub mod train;
pub mod window;

pub use checkpoint::Checkpoint;
pub use train::{train, train_with_warm_start, EpochLog, TrainedModel};
pub use window::{corpus_nll, elbo, forward_window, NllReport, ProviderSpec, RecState};

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::numerics::graph::{ParamId, ParamSet};
use crate::numerics::tensor::Tensor;
use crate::prior::INIT_RANGE;
use crate::segment::SegmentationTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecurrenceKind {
    Rnn,
    Lstm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Latent Bernoulli embeddings: the input table holds variational
    /// logits and the morpheme table parameterizes the prior.
    Varembed,
    /// Deterministic embeddings: word vector plus the sum of its morpheme
    /// vectors, trained on plain likelihood.
    Additive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub k: usize,
    pub h: usize,
    pub v_w: usize,
    pub v_m: usize,
}

/// Training hyperparameters. Defaults follow the reference setup:
/// k = h = 128, 15 epochs, RMSProp at lr 0.01 decaying 0.97 per epoch with
/// halving on dev plateau, clipping at 1, minibatches of 25 stripes.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub k: usize,
    pub h: usize,
    pub epochs: usize,
    pub lr: f64,
    pub lr_decay: f64,
    pub clip: f64,
    pub batch_size: usize,
    pub bptt: usize,
    pub plateau_threshold: f64,
    pub rho: f64,
    pub eps: f64,
    pub recurrence: RecurrenceKind,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            k: 128,
            h: 128,
            epochs: 15,
            lr: 0.01,
            lr_decay: 0.97,
            clip: 1.0,
            batch_size: 25,
            bptt: 35,
            plateau_threshold: 1e-3,
            rho: 0.9,
            eps: 1e-8,
            recurrence: RecurrenceKind::Lstm,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("k", self.k as f64),
            ("h", self.h as f64),
            ("epochs", self.epochs as f64),
            ("lr", self.lr),
            ("lr_decay", self.lr_decay),
            ("clip", self.clip),
            ("batch_size", self.batch_size as f64),
            ("bptt", self.bptt as f64),
            ("plateau_threshold", self.plateau_threshold),
            ("rho", self.rho),
            ("eps", self.eps),
        ];
        for (name, v) in positive {
            if v.is_nan() || v <= 0.0 {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.rho >= 1.0 {
            return Err(Error::Config("rho must be in (0,1)".into()));
        }
        Ok(())
    }
}

/// Parameter-id layout of the recurrence function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecParams {
    Rnn {
        w_in: ParamId,
        w_rec: ParamId,
        bias: ParamId,
    },
    Lstm {
        // gate order: input, forget, output, candidate
        w: [ParamId; 4],
        u: [ParamId; 4],
        b: [ParamId; 4],
    },
}

/// All trainable tensors of one model plus their roles.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub kind: ModelKind,
    pub recurrence: RecurrenceKind,
    pub dims: ModelDims,
    pub set: ParamSet,
    /// Varembed: variational logits (v_w x k). Additive: word vectors.
    pub input_table: ParamId,
    /// Varembed: morpheme embeddings u (v_m x k). Additive: morpheme vectors.
    pub morph_table: ParamId,
    /// Output embeddings V (v_w x h).
    pub output: ParamId,
    pub rec: RecParams,
    /// Word-id -> morpheme ids, shared with the segmentation table.
    pub morph_lists: Vec<Vec<usize>>,
}

impl ModelParams {
    /// Initialize a model: matrices uniform in [-0.08, 0.08], biases zero.
    /// Draw order is the parameter-set order, so a fixed seed gives a
    /// bitwise-identical model.
    pub fn init(
        kind: ModelKind,
        recurrence: RecurrenceKind,
        dims: ModelDims,
        seg: &SegmentationTable,
        seed: u64,
    ) -> Self {
        assert_eq!(seg.morpheme_count(), dims.v_m);
        assert_eq!(seg.word_count(), dims.v_w);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let dist = Uniform::new_inclusive(-INIT_RANGE, INIT_RANGE);
        let mut set = ParamSet::new();
        let mut mat = |set: &mut ParamSet, name: &str, r: usize, c: usize| {
            let data = (0..r * c).map(|_| dist.sample(&mut rng)).collect();
            set.add(name, Tensor::from_vec(r, c, data))
        };
        let input_table = mat(&mut set, "input_table", dims.v_w, dims.k);
        let morph_table = mat(&mut set, "morph_table", dims.v_m, dims.k);
        let output = mat(&mut set, "output_v", dims.v_w, dims.h);
        let rec = match recurrence {
            RecurrenceKind::Rnn => RecParams::Rnn {
                w_in: mat(&mut set, "rnn_w_in", dims.k, dims.h),
                w_rec: mat(&mut set, "rnn_w_rec", dims.h, dims.h),
                bias: set.add("rnn_bias", Tensor::zeros(1, dims.h)),
            },
            RecurrenceKind::Lstm => {
                let gates = ["i", "f", "o", "g"];
                let w = gates.map(|g| mat(&mut set, &format!("lstm_w_{g}"), dims.k, dims.h));
                let u = gates.map(|g| mat(&mut set, &format!("lstm_u_{g}"), dims.h, dims.h));
                let b = gates.map(|g| set.add(&format!("lstm_b_{g}"), Tensor::zeros(1, dims.h)));
                RecParams::Lstm { w, u, b }
            }
        };
        ModelParams {
            kind,
            recurrence,
            dims,
            set,
            input_table,
            morph_table,
            output,
            rec,
            morph_lists: seg.analyses().to_vec(),
        }
    }

    /// Number of stored parameter values.
    pub fn parameter_count(&self) -> u64 {
        self.set.total_values() as u64
    }
}

/// Exact parameter count at given dimensions: word-level input table (k*v_w),
/// morpheme-level table (k*v_m), output table (h*v_w), and the recurrence.
/// The two model kinds have matching table shapes, so their counts are equal
/// at matched dimensions.
pub fn count_parameters(_kind: ModelKind, recurrence: RecurrenceKind, dims: ModelDims) -> u64 {
    let tables = (dims.k * dims.v_w + dims.k * dims.v_m + dims.h * dims.v_w) as u64;
    let gate = (dims.k * dims.h + dims.h * dims.h + dims.h) as u64;
    let rec = match recurrence {
        RecurrenceKind::Rnn => gate,
        RecurrenceKind::Lstm => 4 * gate,
    };
    tables + rec
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_vocab;
    use crate::segment::mdl_segment;

    #[test]
    fn analytic_count_matches_materialized_model() {
        let vocab = build_vocab(&["walk", "walked", "talks", "talked"], 100).unwrap();
        let seg = mdl_segment(&vocab).unwrap();
        let dims = ModelDims {
            k: 3,
            h: 5,
            v_w: vocab.size(),
            v_m: seg.morpheme_count(),
        };
        for kind in [ModelKind::Varembed, ModelKind::Additive] {
            for rec in [RecurrenceKind::Rnn, RecurrenceKind::Lstm] {
                let model = ModelParams::init(kind, rec, dims, &seg, 7);
                assert_eq!(model.parameter_count(), count_parameters(kind, rec, dims));
            }
        }
    }

    #[test]
    fn hand_counted_small_rnn() {
        // v_w=10, v_m=4, k=h=2: tables 10*2 + 4*2 + 10*2 = 48; rnn 2*2+2*2+2 = 10
        let dims = ModelDims {
            k: 2,
            h: 2,
            v_w: 10,
            v_m: 4,
        };
        assert_eq!(
            count_parameters(ModelKind::Varembed, RecurrenceKind::Rnn, dims),
            58
        );
    }

    #[test]
    fn kinds_have_equal_counts_at_matched_dims() {
        let dims = ModelDims {
            k: 17,
            h: 9,
            v_w: 1234,
            v_m: 77,
        };
        for rec in [RecurrenceKind::Rnn, RecurrenceKind::Lstm] {
            assert_eq!(
                count_parameters(ModelKind::Varembed, rec, dims),
                count_parameters(ModelKind::Additive, rec, dims)
            );
        }
    }

    #[test]
    fn same_seed_same_model() {
        let vocab = build_vocab(&["walk", "walked"], 100).unwrap();
        let seg = mdl_segment(&vocab).unwrap();
        let dims = ModelDims {
            k: 4,
            h: 4,
            v_w: vocab.size(),
            v_m: seg.morpheme_count(),
        };
        let a = ModelParams::init(ModelKind::Varembed, RecurrenceKind::Lstm, dims, &seg, 42);
        let b = ModelParams::init(ModelKind::Varembed, RecurrenceKind::Lstm, dims, &seg, 42);
        assert_eq!(a, b);
        let c = ModelParams::init(ModelKind::Varembed, RecurrenceKind::Lstm, dims, &seg, 43);
        assert_ne!(a, c);
    }

    #[test]
    fn config_validation() {
        let mut cfg = TrainConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.lr = 0.0;
        assert!(cfg.validate().is_err());
        cfg.lr = 0.01;
        cfg.rho = 1.0;
        assert!(cfg.validate().is_err());
    }
}
