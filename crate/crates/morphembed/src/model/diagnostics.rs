//! Finite-difference verification of the full minibatch objective on a
//! synthetic toy instance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::corpus::{iterate_batches, BatchPlan, TokenStream, Vocabulary};
use crate::error::Result;
use crate::numerics::gradcheck::{grad_check, GradCheckReport};
use crate::numerics::graph::Graph;
use crate::segment::SegmentationTable;

use super::window::{build_window_graph, ProviderSpec, RecState};
use super::{ModelDims, ModelKind, ModelParams, RecurrenceKind};

/// Toy instance dimensions; defaults are k=h=4, v_w=6, v_m=3.
#[derive(Debug, Clone, Copy)]
pub struct ToyDims {
    pub k: usize,
    pub h: usize,
    pub v_w: usize,
    pub v_m: usize,
}

impl Default for ToyDims {
    fn default() -> Self {
        ToyDims {
            k: 4,
            h: 4,
            v_w: 6,
            v_m: 3,
        }
    }
}

/// A synthetic vocabulary and segmentation table at the requested sizes.
/// Morpheme lists cycle through the lexicon so every morpheme is shared by
/// several words.
pub fn toy_instance(dims: ToyDims) -> Result<(Vocabulary, SegmentationTable)> {
    assert!(dims.v_w >= 3 && dims.v_m >= 1);
    let mut words = vec![
        crate::corpus::UNK.to_string(),
        crate::corpus::NUM.to_string(),
    ];
    for i in 0..dims.v_w - 2 {
        words.push(format!("w{i}"));
    }
    let counts = vec![1u64; dims.v_w];
    let vocab = Vocabulary::from_parts(words, counts)?;
    let morphemes: Vec<String> = (0..dims.v_m).map(|i| format!("m{i}")).collect();
    let per_word: Vec<Vec<usize>> = (0..dims.v_w)
        .map(|w| {
            // between 1 and 3 morphemes, deterministic pattern
            let n = 1 + (w % 3).min(dims.v_m - 1);
            (0..n).map(|j| (w + j) % dims.v_m).collect()
        })
        .collect();
    let seg = SegmentationTable::from_parts(morphemes, per_word)?;
    Ok((vocab, seg))
}

/// Check the analytic gradients of one full minibatch objective (window NLL
/// plus the KL share for the varembed kind) against central differences.
/// Returns one report per parameter tensor.
pub fn objective_gradcheck(
    kind: ModelKind,
    recurrence: RecurrenceKind,
    dims: ToyDims,
    step: f64,
    seed: u64,
) -> Result<Vec<GradCheckReport>> {
    let (_vocab, seg) = toy_instance(dims)?;
    let model_dims = ModelDims {
        k: dims.k,
        h: dims.h,
        v_w: dims.v_w,
        v_m: dims.v_m,
    };
    let mut model = ModelParams::init(kind, recurrence, model_dims, &seg, seed);
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
    let tokens: Vec<usize> = (0..26).map(|_| rng.gen_range(0..dims.v_w)).collect();
    let stream = TokenStream::new(tokens, &_vocab)?;
    let plan = BatchPlan {
        batch_size: 2,
        bptt_length: 3,
        drop_remainder: false,
    };
    let windows = iterate_batches(&stream, &plan)?;
    let window = windows[1].clone();
    // a nonzero initial state exercises the state inputs too
    let mut state = RecState::zeros(plan.batch_size, dims.h, recurrence);
    for v in state.h.data_mut() {
        *v = rng.gen_range(-0.5..0.5);
    }
    if let Some(c) = &mut state.c {
        for v in c.data_mut() {
            *v = rng.gen_range(-0.5..0.5);
        }
    }
    let kl_scale = match kind {
        ModelKind::Varembed => Some(0.37),
        ModelKind::Additive => None,
    };

    let provider = ProviderSpec::for_model(&model);
    let mut g = Graph::new(&model.set);
    let out = build_window_graph(&mut g, &model, &provider, &window, &state, kl_scale)?;
    let analytic = g.backward(out.loss)?;
    drop(g);

    let window2 = window.clone();
    let state2 = state.clone();
    let morph_lists = model.morph_lists.clone();
    let (kind2, rec2, dims2) = (model.kind, model.recurrence, model.dims);
    let (it, mt, ot, rec_ids) = (
        model.input_table,
        model.morph_table,
        model.output,
        model.rec,
    );
    let mut eval = move |set: &crate::numerics::graph::ParamSet| -> f64 {
        let probe = ModelParams {
            kind: kind2,
            recurrence: rec2,
            dims: dims2,
            set: set.clone(),
            input_table: it,
            morph_table: mt,
            output: ot,
            rec: rec_ids,
            morph_lists: morph_lists.clone(),
        };
        let provider = ProviderSpec::for_model(&probe);
        let mut g = Graph::new(&probe.set);
        let out = build_window_graph(&mut g, &probe, &provider, &window2, &state2, kl_scale)
            .expect("probe graph");
        g.value(out.loss).item()
    };
    Ok(grad_check(
        &mut eval,
        &mut model.set,
        &analytic,
        step,
        usize::MAX,
        seed,
    ))
}
