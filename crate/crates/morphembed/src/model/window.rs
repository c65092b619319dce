//! Forward pass over truncated-BPTT windows: embedding lookup through the
//! recurrence to per-position log-probabilities, window negative
//! log-likelihood, and the variational objective.

use crate::corpus::{iterate_batches, BatchPlan, TokenStream, Window};
use crate::error::{Error, Result};
use crate::numerics::graph::{Graph, NodeId};
use crate::numerics::tensor::Tensor;
use crate::prior::MorphemeEmbeddings;
use crate::segment::SegmentationTable;
use crate::variational::{kl_total, VariationalState};

use super::{ModelKind, ModelParams, RecurrenceKind};

/// Where window embeddings come from.
#[derive(Debug, Clone, Copy)]
pub enum ProviderSpec<'a> {
    /// Expected embeddings: sigmoid of the model's variational logit rows.
    Variational,
    /// Word vector plus the sum of the word's morpheme vectors.
    Additive,
    /// A fixed external table with one row per vocabulary word.
    Fixed(&'a Tensor),
}

impl<'a> ProviderSpec<'a> {
    pub fn for_model(model: &ModelParams) -> ProviderSpec<'static> {
        match model.kind {
            ModelKind::Varembed => ProviderSpec::Variational,
            ModelKind::Additive => ProviderSpec::Additive,
        }
    }
}

/// Recurrent state carried across windows within a stripe.
#[derive(Debug, Clone, PartialEq)]
pub struct RecState {
    pub h: Tensor,
    pub c: Option<Tensor>,
}

impl RecState {
    pub fn zeros(batch: usize, hidden: usize, recurrence: RecurrenceKind) -> Self {
        RecState {
            h: Tensor::zeros(batch, hidden),
            c: match recurrence {
                RecurrenceKind::Rnn => None,
                RecurrenceKind::Lstm => Some(Tensor::zeros(batch, hidden)),
            },
        }
    }
}

pub(crate) struct WindowGraphOut {
    pub loss: NodeId,
    pub nll: NodeId,
    pub log_probs: Vec<NodeId>,
    pub final_h: NodeId,
    pub final_c: Option<NodeId>,
}

fn embed_position(
    g: &mut Graph,
    model: &ModelParams,
    provider: &ProviderSpec,
    ids: &[usize],
) -> Result<NodeId> {
    match provider {
        ProviderSpec::Variational => {
            let table = g.param(model.input_table);
            let rows = g.gather_rows(table, ids.to_vec())?;
            Ok(g.sigmoid(rows))
        }
        ProviderSpec::Additive => {
            let words = g.param(model.input_table);
            let morphs = g.param(model.morph_table);
            let word_rows = g.gather_rows(words, ids.to_vec())?;
            let lists: Vec<Vec<usize>> = ids
                .iter()
                .map(|&id| {
                    model
                        .morph_lists
                        .get(id)
                        .cloned()
                        .ok_or(Error::UnknownWordId(id))
                })
                .collect::<Result<_>>()?;
            let morph_sums = g.gather_sum_rows(morphs, lists)?;
            g.add(word_rows, morph_sums)
        }
        ProviderSpec::Fixed(table) => {
            let mut rows = Tensor::zeros(ids.len(), table.cols());
            for (r, &id) in ids.iter().enumerate() {
                if id >= table.rows() {
                    return Err(Error::UnknownWordId(id));
                }
                rows.row_mut(r).copy_from_slice(table.row(id));
            }
            Ok(g.constant(rows))
        }
    }
}

/// Assemble the graph for one window. When `kl_scale` is set, the loss adds
/// that multiple of the full vocabulary KL term to the window NLL; windows
/// of an epoch scale it by their share of predictions so one epoch accounts
/// the KL exactly once.
pub(crate) fn build_window_graph(
    g: &mut Graph,
    model: &ModelParams,
    provider: &ProviderSpec,
    window: &Window,
    state: &RecState,
    kl_scale: Option<f64>,
) -> Result<WindowGraphOut> {
    if window.inputs.is_empty() || window.inputs[0].is_empty() {
        return Err(Error::EmptyInput("empty window".into()));
    }
    let width = window.width();
    let batch = window.inputs.len();
    let mut h = g.constant(state.h.clone());
    let mut c = state.c.as_ref().map(|c| g.constant(c.clone()));
    let v_param = g.param(model.output);
    let mut log_probs = Vec::with_capacity(width);
    let mut nll_parts = Vec::with_capacity(width);
    for t in 0..width {
        let ids: Vec<usize> = (0..batch).map(|s| window.inputs[s][t]).collect();
        let targets: Vec<usize> = (0..batch).map(|s| window.targets[s][t]).collect();
        let emb = embed_position(g, model, provider, &ids)?;
        let (h_next, c_next) = model.step_graph(g, emb, h, c)?;
        h = h_next;
        c = c_next;
        let scores = g.matmul_nt(h, v_param)?;
        let lp = g.log_softmax_rows(scores);
        log_probs.push(lp);
        nll_parts.push(g.pick_neg_sum(lp, targets)?);
    }
    let nll = g.add_scalars(nll_parts)?;
    let loss = match kl_scale {
        Some(scale) => {
            let logits = g.param(model.input_table);
            let u = g.param(model.morph_table);
            let prior = g.gather_sum_rows(u, model.morph_lists.clone())?;
            let kl_mat = g.bernoulli_kl(logits, prior)?;
            let kl = g.sum_all(kl_mat);
            let scaled = g.scale(kl, scale);
            g.add_scalars(vec![nll, scaled])?
        }
        None => nll,
    };
    Ok(WindowGraphOut {
        loss,
        nll,
        log_probs,
        final_h: h,
        final_c: c,
    })
}

/// Forward results for one window.
#[derive(Debug, Clone)]
pub struct WindowForward {
    /// Per position: a (batch x v_w) matrix of log-probabilities for the
    /// next token.
    pub log_probs: Vec<Tensor>,
    pub state: RecState,
    /// Negative log-likelihood of the window's targets.
    pub nll: f64,
}

/// Run the model forward over one window without differentiation.
pub fn forward_window(
    window: &Window,
    provider: &ProviderSpec,
    model: &ModelParams,
    state: &RecState,
) -> Result<WindowForward> {
    let mut g = Graph::new(&model.set);
    let out = build_window_graph(&mut g, model, provider, window, state, None)?;
    Ok(WindowForward {
        log_probs: out.log_probs.iter().map(|&n| g.value(n).clone()).collect(),
        state: RecState {
            h: g.value(out.final_h).clone(),
            c: out.final_c.map(|n| g.value(n).clone()),
        },
        nll: g.value(out.nll).item(),
    })
}

/// Corpus negative log-likelihood and perplexity.
#[derive(Debug, Clone, Copy)]
pub struct NllReport {
    pub nll: f64,
    pub predictions: usize,
}

impl NllReport {
    pub fn perplexity(&self) -> f64 {
        (self.nll / self.predictions as f64).exp()
    }
}

/// Negative summed log-probability over every window of the stream,
/// recurrent state carried within stripes.
pub fn corpus_nll(
    stream: &TokenStream,
    provider: &ProviderSpec,
    model: &ModelParams,
    plan: &BatchPlan,
) -> Result<NllReport> {
    let windows = iterate_batches(stream, plan)?;
    let mut state = RecState::zeros(plan.batch_size, model.dims.h, model.recurrence);
    let mut nll = 0.0;
    let mut predictions = 0;
    for w in &windows {
        let fwd = forward_window(w, provider, model, &state)?;
        nll += fwd.nll;
        predictions += w.predictions();
        state = fwd.state;
    }
    Ok(NllReport { nll, predictions })
}

/// Variational lower bound on the stream: expected log-likelihood via the
/// expected embeddings minus `kl_scale` times the full KL term.
pub fn elbo(
    stream: &TokenStream,
    model: &ModelParams,
    seg: &SegmentationTable,
    plan: &BatchPlan,
    kl_scale: f64,
) -> Result<f64> {
    if model.kind != ModelKind::Varembed {
        return Err(Error::Config(
            "elbo is defined for the varembed model".into(),
        ));
    }
    if !(kl_scale > 0.0 && kl_scale <= 1.0) {
        return Err(Error::Config(format!("kl_scale {kl_scale} outside (0,1]")));
    }
    let report = corpus_nll(stream, &ProviderSpec::Variational, model, plan)?;
    let state = VariationalState::from_tensor(model.set.get(model.input_table).clone());
    let u = MorphemeEmbeddings::from_tensor(model.set.get(model.morph_table).clone());
    let kl = kl_total(&state, seg, &u)?;
    Ok(-report.nll - kl_scale * kl)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_vocab;
    use crate::model::{ModelDims, ModelKind, RecurrenceKind};
    use crate::segment::mdl_segment;

    fn toy() -> (crate::corpus::Vocabulary, SegmentationTable, ModelParams) {
        let vocab = build_vocab(&["aa", "ab", "ba", "bb"], 100).unwrap();
        let seg = mdl_segment(&vocab).unwrap();
        let dims = ModelDims {
            k: 3,
            h: 4,
            v_w: vocab.size(),
            v_m: seg.morpheme_count(),
        };
        let model = ModelParams::init(ModelKind::Varembed, RecurrenceKind::Lstm, dims, &seg, 11);
        (vocab, seg, model)
    }

    fn window_of(inputs: Vec<Vec<usize>>, targets: Vec<Vec<usize>>) -> Window {
        Window { inputs, targets }
    }

    #[test]
    fn zero_output_matrix_gives_uniform_predictions() {
        let (_vocab, _seg, mut model) = toy();
        for v in model.set.get_mut(model.output).data_mut() {
            *v = 0.0;
        }
        let w = window_of(vec![vec![0, 1, 2]], vec![vec![1, 2, 3]]);
        let state = RecState::zeros(1, model.dims.h, model.recurrence);
        let fwd = forward_window(&w, &ProviderSpec::Variational, &model, &state).unwrap();
        let v_w = model.dims.v_w as f64;
        assert!((fwd.nll - 3.0 * v_w.ln()).abs() < 1e-12);
        for lp in &fwd.log_probs {
            for &v in lp.data() {
                assert!((v - (-v_w.ln())).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn log_probs_exponentiate_to_a_distribution() {
        let (_vocab, _seg, model) = toy();
        let w = window_of(vec![vec![0, 2], vec![3, 1]], vec![vec![2, 3], vec![1, 0]]);
        let state = RecState::zeros(2, model.dims.h, model.recurrence);
        let fwd = forward_window(&w, &ProviderSpec::Variational, &model, &state).unwrap();
        for lp in &fwd.log_probs {
            for r in 0..lp.rows() {
                let sum: f64 = lp.row(r).iter().map(|v| v.exp()).sum();
                assert!((sum - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn window_of_length_one_predicts_from_initial_state() {
        let (_vocab, _seg, model) = toy();
        let w = window_of(vec![vec![2]], vec![vec![3]]);
        let state = RecState::zeros(1, model.dims.h, model.recurrence);
        let fwd = forward_window(&w, &ProviderSpec::Variational, &model, &state).unwrap();
        assert_eq!(fwd.log_probs.len(), 1);
        assert!(fwd.nll > 0.0);
    }

    #[test]
    fn corpus_nll_uniform_case_is_exact() {
        let (_vocab, _seg, mut model) = toy();
        for v in model.set.get_mut(model.output).data_mut() {
            *v = 0.0;
        }
        let stream = TokenStream::from_raw((0..13).map(|i| i % 4).collect());
        let plan = BatchPlan::new(2, 3).unwrap();
        let report = corpus_nll(&stream, &ProviderSpec::Variational, &model, &plan).unwrap();
        let expect = report.predictions as f64 * (model.dims.v_w as f64).ln();
        assert!((report.nll - expect).abs() < 1e-10);
        // perplexity under the uniform model is the vocabulary size
        assert!((report.perplexity() - model.dims.v_w as f64).abs() < 1e-9);
    }

    #[test]
    fn elbo_equals_negative_nll_when_variational_matches_prior() {
        let (_vocab, seg, mut model) = toy();
        // set variational logits to the prior logit sums
        let lists = model.morph_lists.clone();
        let u = model.set.get(model.morph_table).clone();
        let logits = model.set.get_mut(model.input_table);
        for (w, list) in lists.iter().enumerate() {
            for kcol in 0..logits.cols() {
                let s: f64 = list.iter().map(|&m| u.at(m, kcol)).sum();
                logits.set(w, kcol, s);
            }
        }
        let stream = TokenStream::from_raw((0..10).map(|i| i % 4).collect());
        let plan = BatchPlan::new(1, 4).unwrap();
        let report = corpus_nll(&stream, &ProviderSpec::Variational, &model, &plan).unwrap();
        let bound = elbo(&stream, &model, &seg, &plan, 1.0).unwrap();
        assert!((bound + report.nll).abs() < 1e-12);
    }

    #[test]
    fn elbo_never_exceeds_likelihood_term() {
        let (_vocab, seg, model) = toy();
        let stream = TokenStream::from_raw((0..10).map(|i| i % 4).collect());
        let plan = BatchPlan::new(1, 4).unwrap();
        let report = corpus_nll(&stream, &ProviderSpec::Variational, &model, &plan).unwrap();
        let bound = elbo(&stream, &model, &seg, &plan, 1.0).unwrap();
        assert!(bound <= -report.nll + 1e-12);
    }

    #[test]
    fn additive_and_fixed_providers_run() {
        let vocab = build_vocab(&["aa", "ab", "ba", "bb"], 100).unwrap();
        let seg = mdl_segment(&vocab).unwrap();
        let dims = ModelDims {
            k: 3,
            h: 4,
            v_w: vocab.size(),
            v_m: seg.morpheme_count(),
        };
        let model = ModelParams::init(ModelKind::Additive, RecurrenceKind::Rnn, dims, &seg, 5);
        let w = window_of(vec![vec![0, 1]], vec![vec![1, 2]]);
        let state = RecState::zeros(1, model.dims.h, model.recurrence);
        let add = forward_window(&w, &ProviderSpec::Additive, &model, &state).unwrap();
        assert!(add.nll.is_finite());
        let table = Tensor::zeros(dims.v_w, dims.k);
        let fixed = forward_window(&w, &ProviderSpec::Fixed(&table), &model, &state).unwrap();
        assert!(fixed.nll.is_finite());
    }
}
