//! Minibatch RMSProp training of both model kinds.
//!
//! The varembed objective per window is the window NLL plus the window's
//! share of the full KL term (share = window predictions / epoch
//! predictions, so one epoch accounts the KL exactly once). The additive
//! baseline trains on plain NLL. Gradients are clipped by global norm
//! normalized by minibatch size; the learning rate decays per epoch and is
//! halved when the dev objective stalls.

use std::time::Instant;

use crate::corpus::{iterate_batches, BatchPlan, TokenStream, Vocabulary};
use crate::error::{Error, Result};
use crate::numerics::graph::Graph;
use crate::numerics::optim::{clip_global_norm, RmsProp};
use crate::segment::SegmentationTable;
use crate::variational::VariationalState;

use super::window::{build_window_graph, corpus_nll, elbo, ProviderSpec, RecState};
use super::{ModelDims, ModelKind, ModelParams, TrainConfig};

/// One line of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub dev_objective: f64,
    pub lr: f64,
    pub wallclock: f64,
}

#[derive(Debug)]
pub struct TrainedModel {
    pub model: ModelParams,
    pub optimizer: RmsProp,
    pub epochs_run: usize,
    pub log: Vec<EpochLog>,
}

/// Dev-set objective: the full variational bound for varembed, negative NLL
/// for the additive baseline (higher is better for both).
pub fn dev_objective(
    model: &ModelParams,
    seg: &SegmentationTable,
    dev: &TokenStream,
    plan: &BatchPlan,
) -> Result<f64> {
    match model.kind {
        ModelKind::Varembed => elbo(dev, model, seg, plan, 1.0),
        ModelKind::Additive => {
            let report = corpus_nll(dev, &ProviderSpec::Additive, model, plan)?;
            Ok(-report.nll)
        }
    }
}

pub fn train(
    cfg: &TrainConfig,
    vocab: &Vocabulary,
    seg: &SegmentationTable,
    train_stream: &TokenStream,
    dev_stream: &TokenStream,
    kind: ModelKind,
) -> Result<TrainedModel> {
    train_with_warm_start(cfg, vocab, seg, train_stream, dev_stream, kind, None)
}

/// Like [`train`], optionally warm-starting the input table from external
/// real-valued word vectors: the varembed kind maps them per coordinate
/// into logit range (see [`VariationalState::from_external_vectors`]), the
/// additive kind copies them verbatim as initial word vectors.
pub fn train_with_warm_start(
    cfg: &TrainConfig,
    vocab: &Vocabulary,
    seg: &SegmentationTable,
    train_stream: &TokenStream,
    dev_stream: &TokenStream,
    kind: ModelKind,
    warm_start: Option<&crate::table::EmbeddingTable>,
) -> Result<TrainedModel> {
    cfg.validate()?;
    if train_stream.is_empty() || dev_stream.is_empty() {
        return Err(Error::EmptyInput("empty training or dev stream".into()));
    }
    let dims = ModelDims {
        k: cfg.k,
        h: cfg.h,
        v_w: vocab.size(),
        v_m: seg.morpheme_count(),
    };
    let mut model = ModelParams::init(kind, cfg.recurrence, dims, seg, cfg.seed);
    if let Some(table) = warm_start {
        if table.k() != cfg.k {
            return Err(Error::Shape(format!(
                "warm-start vectors have width {}, model k is {}",
                table.k(),
                cfg.k
            )));
        }
        match kind {
            ModelKind::Varembed => {
                let lookup = |w: &str| table.get(w).map(|r| r.to_vec());
                let state = VariationalState::from_external_vectors(vocab, cfg.k, &lookup)?;
                *model.set.get_mut(model.input_table) = state.logits().clone();
            }
            ModelKind::Additive => {
                let words = model.set.get_mut(model.input_table);
                for id in 0..vocab.size() {
                    if let Some(row) = table.get(vocab.surface(id)) {
                        words.row_mut(id).copy_from_slice(row);
                    }
                }
            }
        }
    }
    let mut optimizer = RmsProp::new(&model.set, cfg.lr, cfg.rho, cfg.eps);

    let plan = BatchPlan {
        batch_size: cfg.batch_size,
        bptt_length: cfg.bptt,
        drop_remainder: false,
    };
    let dev_plan = BatchPlan {
        batch_size: 1,
        bptt_length: cfg.bptt,
        drop_remainder: false,
    };
    let windows = iterate_batches(train_stream, &plan)?;
    let total_predictions: usize = windows.iter().map(|w| w.predictions()).sum();

    let provider = ProviderSpec::for_model(&model);
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best_objective = f64::NEG_INFINITY;
    let started = Instant::now();

    for epoch in 1..=cfg.epochs {
        let mut state = RecState::zeros(plan.batch_size, cfg.h, cfg.recurrence);
        for (step, window) in windows.iter().enumerate() {
            let kl_scale = match kind {
                ModelKind::Varembed => Some(window.predictions() as f64 / total_predictions as f64),
                ModelKind::Additive => None,
            };
            let mut graph = Graph::new(&model.set);
            let out = build_window_graph(&mut graph, &model, &provider, window, &state, kl_scale)?;
            let loss = graph.value(out.loss).item();
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "loss {loss} at epoch {epoch} step {step}"
                )));
            }
            let mut grads = graph.backward(out.loss)?;
            clip_global_norm(&mut grads, cfg.clip, plan.batch_size);
            state = RecState {
                h: graph.value(out.final_h).clone(),
                c: out.final_c.map(|n| graph.value(n).clone()),
            };
            drop(graph);
            optimizer
                .step(&mut model.set, &grads)
                .map_err(|e| Error::NonFinite(format!("epoch {epoch} step {step}: {e}")))?;
        }

        let objective = dev_objective(&model, seg, dev_stream, &dev_plan)?;
        log.push(EpochLog {
            epoch,
            dev_objective: objective,
            lr: optimizer.lr,
            wallclock: started.elapsed().as_secs_f64(),
        });

        optimizer.scale_lr(cfg.lr_decay);
        if epoch > 1 {
            let rel = (objective - best_objective) / best_objective.abs().max(1e-12);
            if rel < cfg.plateau_threshold {
                optimizer.scale_lr(0.5);
            }
        }
        best_objective = best_objective.max(objective);
    }

    Ok(TrainedModel {
        model,
        optimizer,
        epochs_run: cfg.epochs,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocab, encode};
    use crate::model::window::forward_window;
    use crate::model::RecurrenceKind;
    use crate::segment::mdl_segment;

    fn cycle_corpus(n: usize) -> Vec<String> {
        (0..n)
            .map(|i| if i % 2 == 0 { "a" } else { "b" }.to_string())
            .collect()
    }

    fn tiny_config(epochs: usize) -> TrainConfig {
        TrainConfig {
            k: 4,
            h: 4,
            epochs,
            lr: 0.05,
            batch_size: 2,
            bptt: 5,
            recurrence: RecurrenceKind::Lstm,
            seed: 3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn lr_decays_per_epoch_without_plateau() {
        // on a learnable corpus the first epochs improve, so only the 0.97
        // decay applies; check the logged lr of epoch 3 is lr*0.97^2
        let toks = cycle_corpus(120);
        let vocab = build_vocab(&toks, 10).unwrap();
        let seg = mdl_segment(&vocab).unwrap();
        let stream = encode(&toks, &vocab);
        let mut cfg = tiny_config(3);
        cfg.lr = 0.01;
        let trained = train(&cfg, &vocab, &seg, &stream, &stream, ModelKind::Varembed).unwrap();
        let lr3 = trained.log[2].lr;
        assert!(
            (lr3 - 0.01 * 0.97 * 0.97).abs() < 1e-15,
            "lr after two decays: {lr3}"
        );
    }

    #[test]
    fn training_is_bitwise_reproducible() {
        let toks = cycle_corpus(60);
        let vocab = build_vocab(&toks, 10).unwrap();
        let seg = mdl_segment(&vocab).unwrap();
        let stream = encode(&toks, &vocab);
        let cfg = tiny_config(3);
        let a = train(&cfg, &vocab, &seg, &stream, &stream, ModelKind::Varembed).unwrap();
        let b = train(&cfg, &vocab, &seg, &stream, &stream, ModelKind::Varembed).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.optimizer, b.optimizer);
    }

    #[test]
    fn two_word_cycle_learns_alternation() {
        let toks = cycle_corpus(80);
        let vocab = build_vocab(&toks, 10).unwrap();
        let seg = mdl_segment(&vocab).unwrap();
        let stream = encode(&toks, &vocab);
        let mut cfg = tiny_config(60);
        cfg.batch_size = 1;
        cfg.bptt = 8;
        let trained = train(&cfg, &vocab, &seg, &stream, &stream, ModelKind::Varembed).unwrap();
        // P(b | a) should exceed P(a | a)
        let a = vocab.id("a").unwrap();
        let b = vocab.id("b").unwrap();
        let window = crate::corpus::Window {
            inputs: vec![vec![a]],
            targets: vec![vec![b]],
        };
        let state = RecState::zeros(1, cfg.h, cfg.recurrence);
        let fwd =
            forward_window(&window, &ProviderSpec::Variational, &trained.model, &state).unwrap();
        let lp = &fwd.log_probs[0];
        assert!(
            lp.at(0, b) > lp.at(0, a),
            "P(b|a)={} vs P(a|a)={}",
            lp.at(0, b).exp(),
            lp.at(0, a).exp()
        );
    }

    #[test]
    fn deterministic_corpus_drives_perplexity_toward_one() {
        let toks = cycle_corpus(80);
        let vocab = build_vocab(&toks, 10).unwrap();
        let seg = mdl_segment(&vocab).unwrap();
        let stream = encode(&toks, &vocab);
        let mut cfg = tiny_config(150);
        cfg.batch_size = 1;
        cfg.bptt = 8;
        cfg.lr = 0.05;
        let trained = train(&cfg, &vocab, &seg, &stream, &stream, ModelKind::Additive).unwrap();
        let plan = BatchPlan::new(1, 8).unwrap();
        let report = corpus_nll(&stream, &ProviderSpec::Additive, &trained.model, &plan).unwrap();
        // the alternating corpus is almost deterministic; only the first
        // prediction and the eos transitions carry real uncertainty
        assert!(
            report.perplexity() < 1.35,
            "perplexity {}",
            report.perplexity()
        );
    }

    #[test]
    fn kl_shares_sum_to_full_elbo_at_fixed_parameters() {
        // sum over windows of (window NLL + share*KL) must equal
        // corpus NLL + KL when shares sum to 1
        let toks = cycle_corpus(50);
        let vocab = build_vocab(&toks, 10).unwrap();
        let seg = mdl_segment(&vocab).unwrap();
        let stream = encode(&toks, &vocab);
        let cfg = tiny_config(1);
        let trained = train(&cfg, &vocab, &seg, &stream, &stream, ModelKind::Varembed).unwrap();
        let model = &trained.model;
        let plan = BatchPlan {
            batch_size: 2,
            bptt_length: 5,
            drop_remainder: false,
        };
        let windows = iterate_batches(&stream, &plan).unwrap();
        let total: usize = windows.iter().map(|w| w.predictions()).sum();
        let mut state = RecState::zeros(2, cfg.h, cfg.recurrence);
        let mut objective_sum = 0.0;
        for w in &windows {
            let share = w.predictions() as f64 / total as f64;
            let mut graph = Graph::new(&model.set);
            let out = build_window_graph(
                &mut graph,
                model,
                &ProviderSpec::Variational,
                w,
                &state,
                Some(share),
            )
            .unwrap();
            objective_sum += graph.value(out.loss).item();
            state = RecState {
                h: graph.value(out.final_h).clone(),
                c: out.final_c.map(|n| graph.value(n).clone()),
            };
        }
        let full_elbo = elbo(&stream, model, &seg, &plan, 1.0).unwrap();
        assert!(
            (objective_sum - (-full_elbo)).abs() < 1e-8,
            "{objective_sum} vs {}",
            -full_elbo
        );
    }
}
