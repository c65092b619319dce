//! Command-line entry point: vocabulary building, segmentation, training,
//! export, imputation, and evaluation, driven by a `key = value` config
//! file with flag overrides.

pub mod config;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::corpus::{
    build_vocab, encode, normalize_token, read_corpus_tokens, write_atomic, Vocabulary,
};
use crate::error::{Error, Result};
use crate::eval::{
    binomial_test, eval_wordsim, qvec, tagger_accuracy, tagger_train, QvecOracle,
    SimilarityDataset, TaggedCorpus, TaggerConfig, WordsimMode,
};
use crate::model::diagnostics::{objective_gradcheck, ToyDims};
use crate::model::{Checkpoint, ModelKind, RecurrenceKind};
use crate::numerics::gradcheck::max_error;
use crate::numerics::tensor::{sigmoid_scalar, Tensor};
use crate::prior::{impute_oov, MorphemeEmbeddings};
use crate::segment::{load_segmentations, mdl_segment};
use crate::table::{
    checkpoint_embedder, export_table, EmbeddingTable, FixedEmbedder, NoImputeEmbedder,
    WordEmbedder,
};

use config::{parse_model_kind, parse_recurrence, RunConfig};

#[derive(Parser)]
#[command(
    name = "morphembed",
    version,
    about = "Latent Bernoulli word embeddings with a morphological prior"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a vocabulary from a corpus file.
    BuildVocab {
        #[arg(long)]
        corpus: PathBuf,
        /// Keep this many most-frequent types plus the reserved tokens.
        #[arg(long, default_value_t = 50_000)]
        max_size: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Produce or validate morphological segmentations for a vocabulary.
    Segment {
        #[arg(long)]
        vocab: PathBuf,
        /// Import this segmentation file instead of running the built-in
        /// MDL segmenter.
        #[arg(long)]
        segmentations: Option<PathBuf>,
        /// Accept imported entries whose morphs do not concatenate to the
        /// word.
        #[arg(long)]
        permissive: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model and write a checkpoint plus a training log.
    Train(TrainArgs),
    /// Export embeddings from a checkpoint.
    Export {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum)]
        which: ExportWhich,
        #[arg(long)]
        out: PathBuf,
    },
    /// Impute prior expected embeddings for arbitrary surface forms.
    Impute {
        #[arg(long)]
        checkpoint: PathBuf,
        /// One surface form per line.
        #[arg(long)]
        words: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate embeddings on a task.
    Eval {
        #[command(subcommand)]
        task: EvalTask,
    },
    /// Check the analytic gradients of the training objective against
    /// central finite differences on a toy instance.
    Gradcheck {
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long, default_value_t = 4)]
        h: usize,
        #[arg(long, default_value_t = 6)]
        v_w: usize,
        #[arg(long, default_value_t = 3)]
        v_m: usize,
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
        #[arg(long, default_value_t = 1e-4)]
        bound: f64,
        #[arg(long, default_value_t = 17)]
        seed: u64,
    },
}

#[derive(Args)]
struct TrainArgs {
    /// `key = value` config file; flags below override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    dev: Option<PathBuf>,
    #[arg(long)]
    segmentations: Option<PathBuf>,
    #[arg(long)]
    permissive_segmentations: bool,
    /// Embedding-table file used to warm-start the input table.
    #[arg(long)]
    init_vectors: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// varembed or additive.
    #[arg(long)]
    model: Option<String>,
    /// lstm or rnn.
    #[arg(long)]
    recurrence: Option<String>,
    #[arg(long)]
    max_vocab: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    h: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    bptt: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    lr_decay: Option<f64>,
    #[arg(long)]
    clip: Option<f64>,
    #[arg(long)]
    plateau_threshold: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExportWhich {
    /// Variational logits per word (varembed).
    Logits,
    /// Morphology-only word embeddings: sigmoid of summed morpheme rows for
    /// varembed, plain morpheme sums for additive.
    PriorExpected,
    /// Composed word embeddings of the additive baseline.
    Additive,
    /// The raw morpheme embedding matrix.
    Morphemes,
}

#[derive(Subcommand)]
enum EvalTask {
    /// Spearman correlation against a human word-similarity dataset.
    Wordsim {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = WordsimModeArg::All)]
        mode: WordsimModeArg,
    },
    /// Alignment with a lexical semantic feature oracle.
    Qvec {
        #[arg(long)]
        oracle: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Use morphology-only embeddings from the checkpoint.
        #[arg(long)]
        morphemes_only: bool,
    },
    /// Window-based POS tagging accuracy.
    Pos {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Train a second tagger from this checkpoint and report the
        /// two-tailed binomial test on discordant test tokens.
        #[arg(long)]
        compare: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = OovArg::Impute)]
        oov: OovArg,
        #[arg(long, default_value_t = 625)]
        hidden: usize,
        #[arg(long, default_value_t = 20)]
        tagger_epochs: usize,
        #[arg(long, default_value_t = 32)]
        tagger_batch: usize,
        #[arg(long, default_value_t = 0.01)]
        tagger_lr: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WordsimModeArg {
    All,
    InVocab,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OovArg {
    /// Impute out-of-vocabulary embeddings from morphology.
    Impute,
    /// Zero vectors for out-of-vocabulary words.
    Zero,
}

/// Run the CLI; returns the process exit code.
pub fn run<I: IntoIterator<Item = String>>(args: I) -> Result<i32> {
    if let Ok(threads) = std::env::var("MORPHEMBED_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            crate::numerics::set_threads(n);
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders --help/--version and usage errors itself
            let code = if e.use_stderr() { 2 } else { 0 };
            e.print().ok();
            return Ok(code);
        }
    };
    match cli.command {
        Command::BuildVocab {
            corpus,
            max_size,
            out,
        } => cmd_build_vocab(&corpus, max_size, &out),
        Command::Segment {
            vocab,
            segmentations,
            permissive,
            out,
        } => cmd_segment(&vocab, segmentations.as_deref(), permissive, &out),
        Command::Train(args) => cmd_train(args),
        Command::Export {
            checkpoint,
            which,
            out,
        } => cmd_export(&checkpoint, which, &out),
        Command::Impute {
            checkpoint,
            words,
            out,
        } => cmd_impute(&checkpoint, &words, &out),
        Command::Eval { task } => cmd_eval(task),
        Command::Gradcheck {
            k,
            h,
            v_w,
            v_m,
            step,
            bound,
            seed,
        } => cmd_gradcheck(ToyDims { k, h, v_w, v_m }, step, bound, seed),
    }
}

fn cmd_build_vocab(corpus: &Path, max_size: usize, out: &Path) -> Result<i32> {
    let tokens = read_corpus_tokens(corpus)?;
    let vocab = build_vocab(&tokens, max_size)?;
    vocab.save(out)?;
    println!(
        "vocabulary: {} types from {} tokens (cap {max_size} + 2 reserved) -> {}",
        vocab.size(),
        tokens.len(),
        out.display()
    );
    Ok(0)
}

fn cmd_segment(
    vocab_path: &Path,
    seg_file: Option<&Path>,
    permissive: bool,
    out: &Path,
) -> Result<i32> {
    let vocab = Vocabulary::load(vocab_path)?;
    let table = match seg_file {
        Some(path) => load_segmentations(path, &vocab, permissive)?,
        None => mdl_segment(&vocab)?,
    };
    table.save(&vocab, out)?;
    let dl = crate::segment::description_length(&vocab, &table);
    println!(
        "segmentations: {} words, {} morphemes, description length {dl:.2} -> {}",
        table.word_count(),
        table.morpheme_count(),
        out.display()
    );
    Ok(0)
}

fn merged_config(args: &TrainArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        cfg.apply_file(path)?;
    }
    if let Some(v) = &args.corpus {
        cfg.corpus = Some(v.clone());
    }
    if let Some(v) = &args.dev {
        cfg.dev = Some(v.clone());
    }
    if let Some(v) = &args.segmentations {
        cfg.segmentations = Some(v.clone());
    }
    if let Some(v) = &args.init_vectors {
        cfg.init_vectors = Some(v.clone());
    }
    if args.permissive_segmentations {
        cfg.permissive_segmentations = true;
    }
    if let Some(v) = &args.out_dir {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = &args.model {
        cfg.model = parse_model_kind(v)?;
    }
    if let Some(v) = &args.recurrence {
        cfg.train.recurrence = parse_recurrence(v)?;
    }
    if let Some(v) = args.max_vocab {
        cfg.max_vocab = v;
    }
    if let Some(v) = args.k {
        cfg.train.k = v;
    }
    if let Some(v) = args.h {
        cfg.train.h = v;
    }
    if let Some(v) = args.epochs {
        cfg.train.epochs = v;
    }
    if let Some(v) = args.batch_size {
        cfg.train.batch_size = v;
    }
    if let Some(v) = args.bptt {
        cfg.train.bptt = v;
    }
    if let Some(v) = args.lr {
        cfg.train.lr = v;
    }
    if let Some(v) = args.lr_decay {
        cfg.train.lr_decay = v;
    }
    if let Some(v) = args.clip {
        cfg.train.clip = v;
    }
    if let Some(v) = args.plateau_threshold {
        cfg.train.plateau_threshold = v;
    }
    if let Some(v) = args.seed {
        cfg.train.seed = v;
    }
    Ok(cfg)
}

fn cmd_train(args: TrainArgs) -> Result<i32> {
    let cfg = merged_config(&args)?;
    cfg.train.validate()?;
    let corpus_path = cfg
        .corpus
        .as_ref()
        .ok_or_else(|| Error::Config("train requires a corpus path".into()))?;
    let dev_path = cfg
        .dev
        .as_ref()
        .ok_or_else(|| Error::Config("train requires a dev path".into()))?;

    let train_tokens = read_corpus_tokens(corpus_path)?;
    let dev_tokens = read_corpus_tokens(dev_path)?;
    let vocab = build_vocab(&train_tokens, cfg.max_vocab)?;
    let seg = match &cfg.segmentations {
        Some(path) => load_segmentations(path, &vocab, cfg.permissive_segmentations)?,
        None => mdl_segment(&vocab)?,
    };
    let train_stream = encode(&train_tokens, &vocab);
    let dev_stream = encode(&dev_tokens, &vocab);

    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    vocab.save(&cfg.out_dir.join("vocab.tsv"))?;
    seg.save(&vocab, &cfg.out_dir.join("segmentations.tsv"))?;

    println!(
        "training {} ({:?}) on {} tokens, vocab {}, morphemes {}, seed {}",
        match cfg.model {
            ModelKind::Varembed => "varembed",
            ModelKind::Additive => "additive",
        },
        cfg.train.recurrence,
        train_stream.len(),
        vocab.size(),
        seg.morpheme_count(),
        cfg.train.seed
    );
    let warm_start = match &cfg.init_vectors {
        Some(path) => Some(EmbeddingTable::load(path)?),
        None => None,
    };
    let trained = crate::model::train_with_warm_start(
        &cfg.train,
        &vocab,
        &seg,
        &train_stream,
        &dev_stream,
        cfg.model,
        warm_start.as_ref(),
    )?;

    let mut log = format!("# seed {}\n", cfg.train.seed);
    for e in &trained.log {
        let line = format!(
            "{} {:.6} {:.6e} {:.3}",
            e.epoch, e.dev_objective, e.lr, e.wallclock
        );
        println!("{line}");
        log.push_str(&line);
        log.push('\n');
    }
    write_atomic(&cfg.out_dir.join("train.log"), log.as_bytes())?;

    let ck = Checkpoint {
        model: trained.model,
        vocab,
        seg,
        optimizer: trained.optimizer,
        epoch: trained.epochs_run as u32,
    };
    let ck_path = cfg.out_dir.join("model.memb");
    ck.save(&ck_path)?;
    println!("checkpoint -> {}", ck_path.display());
    Ok(0)
}

/// Word-level table of morphology-only embeddings: sigmoid of prior logit
/// sums for varembed, raw morpheme sums for additive.
fn prior_expected_table(ck: &Checkpoint) -> Result<EmbeddingTable> {
    let model = &ck.model;
    let k = model.dims.k;
    let u = model.set.get(model.morph_table);
    let mut data = Vec::with_capacity(ck.vocab.size() * k);
    for list in &model.morph_lists {
        let mut row = vec![0.0; k];
        for &m in list {
            for (acc, &v) in row.iter_mut().zip(u.row(m)) {
                *acc += v;
            }
        }
        if model.kind == ModelKind::Varembed {
            for v in &mut row {
                *v = sigmoid_scalar(*v);
            }
        }
        data.extend_from_slice(&row);
    }
    EmbeddingTable::new(
        ck.vocab.words().to_vec(),
        Tensor::from_vec(ck.vocab.size(), k, data),
    )
}

fn cmd_export(checkpoint: &Path, which: ExportWhich, out: &Path) -> Result<i32> {
    let ck = Checkpoint::load(checkpoint)?;
    match which {
        ExportWhich::Logits => {
            if ck.model.kind != ModelKind::Varembed {
                return Err(Error::UnsupportedMode(
                    "logits export requires a varembed checkpoint".into(),
                ));
            }
            let table = export_table(&ck.vocab, &*checkpoint_embedder(&ck))?;
            table.save(out)?;
        }
        ExportWhich::PriorExpected => {
            prior_expected_table(&ck)?.save(out)?;
        }
        ExportWhich::Additive => {
            if ck.model.kind != ModelKind::Additive {
                return Err(Error::UnsupportedMode(
                    "additive export requires an additive checkpoint".into(),
                ));
            }
            let table = export_table(&ck.vocab, &*checkpoint_embedder(&ck))?;
            table.save(out)?;
        }
        ExportWhich::Morphemes => {
            let u = MorphemeEmbeddings::from_tensor(ck.model.set.get(ck.model.morph_table).clone());
            u.save(&ck.seg, out)?;
        }
    }
    println!("exported -> {}", out.display());
    Ok(0)
}

fn cmd_impute(checkpoint: &Path, words: &Path, out: &Path) -> Result<i32> {
    let ck = Checkpoint::load(checkpoint)?;
    if ck.model.kind != ModelKind::Varembed {
        return Err(Error::UnsupportedMode(
            "prior imputation requires a varembed checkpoint".into(),
        ));
    }
    let u = MorphemeEmbeddings::from_tensor(ck.model.set.get(ck.model.morph_table).clone());
    let text = fs::read_to_string(words).map_err(|e| Error::io(words, e))?;
    let mut output = String::new();
    let mut n = 0usize;
    for raw in text.lines() {
        let word = raw.trim();
        if word.is_empty() {
            continue;
        }
        let word = normalize_token(word)?;
        let p = impute_oov(&word, &ck.vocab, &ck.seg, &u)?;
        output.push_str(&word);
        for v in &p.0 {
            output.push(' ');
            output.push_str(&format!("{v:.17e}"));
        }
        output.push('\n');
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyInput("no words to impute".into()));
    }
    write_atomic(out, output.as_bytes())?;
    println!("imputed {n} words -> {}", out.display());
    Ok(0)
}

enum EmbeddingSource {
    Checkpoint(Box<Checkpoint>),
    Table(EmbeddingTable),
}

fn load_source(checkpoint: Option<&Path>, embeddings: Option<&Path>) -> Result<EmbeddingSource> {
    match (checkpoint, embeddings) {
        (Some(ck), None) => Ok(EmbeddingSource::Checkpoint(Box::new(Checkpoint::load(ck)?))),
        (None, Some(table)) => Ok(EmbeddingSource::Table(EmbeddingTable::load(table)?)),
        _ => Err(Error::Config(
            "provide exactly one of --checkpoint or --embeddings".into(),
        )),
    }
}

fn cmd_eval(task: EvalTask) -> Result<i32> {
    match task {
        EvalTask::Wordsim {
            dataset,
            checkpoint,
            embeddings,
            mode,
        } => {
            let source = load_source(checkpoint.as_deref(), embeddings.as_deref())?;
            let dataset = SimilarityDataset::load(&dataset)?;
            let mode = match mode {
                WordsimModeArg::All => WordsimMode::All,
                WordsimModeArg::InVocab => WordsimMode::InVocab,
            };
            let report = match &source {
                EmbeddingSource::Checkpoint(ck) => {
                    eval_wordsim(&dataset, &*checkpoint_embedder(ck), mode)?
                }
                EmbeddingSource::Table(t) => eval_wordsim(&dataset, &FixedEmbedder(t), mode)?,
            };
            println!(
                "wordsim {}: rho_x100 {:.2} over {} pairs ({} skipped)",
                report.dataset, report.rho_x100, report.pairs_used, report.pairs_skipped
            );
        }
        EvalTask::Qvec {
            oracle,
            checkpoint,
            embeddings,
            morphemes_only,
        } => {
            let oracle = QvecOracle::load(&oracle)?;
            let source = load_source(checkpoint.as_deref(), embeddings.as_deref())?;
            let table = match &source {
                EmbeddingSource::Checkpoint(ck) => {
                    if morphemes_only {
                        prior_expected_table(ck)?
                    } else {
                        export_table(&ck.vocab, &*checkpoint_embedder(ck))?
                    }
                }
                EmbeddingSource::Table(t) => {
                    if morphemes_only {
                        return Err(Error::UnsupportedMode(
                            "--morphemes-only needs a checkpoint".into(),
                        ));
                    }
                    t.clone()
                }
            };
            let score = qvec(&table, &oracle)?;
            println!("qvec: {score:.2} over {} dimensions", table.k());
        }
        EvalTask::Pos {
            train,
            test,
            checkpoint,
            embeddings,
            compare,
            oov,
            hidden,
            tagger_epochs,
            tagger_batch,
            tagger_lr,
            seed,
        } => {
            let source = load_source(checkpoint.as_deref(), embeddings.as_deref())?;
            let train_corpus = TaggedCorpus::load(&train)?;
            let test_corpus = TaggedCorpus::load(&test)?;
            let cfg = TaggerConfig {
                hidden: [hidden, hidden],
                epochs: tagger_epochs,
                batch_size: tagger_batch,
                lr: tagger_lr,
                seed,
                ..TaggerConfig::default()
            };
            // frequencies for the error breakdown: embedding-corpus counts
            // when the checkpoint provides them, tagger-training counts
            // otherwise
            let train_counts = corpus_frequencies(&train_corpus);
            let run = |source: &EmbeddingSource| -> Result<Vec<Vec<usize>>> {
                let embedder: Box<dyn WordEmbedder> = match source {
                    EmbeddingSource::Checkpoint(ck) => match oov {
                        OovArg::Impute => checkpoint_embedder(ck),
                        OovArg::Zero => Box::new(NoImputeEmbedder {
                            inner: checkpoint_embedder(ck),
                            in_vocab: Box::new({
                                let vocab = ck.vocab.clone();
                                move |w: &str| vocab.contains(w)
                            }),
                        }),
                    },
                    EmbeddingSource::Table(t) => Box::new(FixedEmbedder(t)),
                };
                let tagger = tagger_train(&train_corpus, &*embedder, &cfg)?;
                let freq: Box<dyn Fn(&str) -> u64> = match source {
                    EmbeddingSource::Checkpoint(ck) => {
                        let vocab = ck.vocab.clone();
                        Box::new(move |w: &str| vocab.id(w).map(|i| vocab.count(i)).unwrap_or(0))
                    }
                    EmbeddingSource::Table(_) => {
                        let counts = train_counts.clone();
                        Box::new(move |w: &str| counts.get(w).copied().unwrap_or(0))
                    }
                };
                let report = tagger_accuracy(&tagger, &test_corpus, &*embedder, &*freq)?;
                println!(
                    "pos accuracy: {:.4} over {} tokens",
                    report.accuracy(),
                    report.tokens
                );
                for b in &report.buckets {
                    if b.tokens == 0 {
                        continue;
                    }
                    let hi = if b.hi == u64::MAX {
                        "inf".to_string()
                    } else {
                        b.hi.to_string()
                    };
                    println!(
                        "  freq {:>6}-{:<6} error rate {:.4} ({} tokens)",
                        b.lo,
                        hi,
                        b.error_rate(),
                        b.tokens
                    );
                }
                let mut predictions = Vec::new();
                for sentence in &test_corpus.sentences {
                    predictions.push(tagger.predict(sentence, &*embedder)?);
                }
                Ok(predictions)
            };
            let preds = run(&source)?;
            if let Some(other) = compare {
                let other = EmbeddingSource::Checkpoint(Box::new(Checkpoint::load(&other)?));
                println!("comparison tagger:");
                let preds2 = run(&other)?;
                let mut a_only = 0u64;
                let mut b_only = 0u64;
                for (s, (pa, pb)) in test_corpus.sentences.iter().zip(preds.iter().zip(&preds2)) {
                    for ((word_tag, &a), &b) in s.iter().zip(pa).zip(pb) {
                        let gold = word_tag.1;
                        match (a == gold, b == gold) {
                            (true, false) => a_only += 1,
                            (false, true) => b_only += 1,
                            _ => {}
                        }
                    }
                }
                match binomial_test(a_only, b_only) {
                    Ok(p) => println!(
                        "binomial test: {a_only} vs {b_only} discordant tokens, two-tailed p = {p:.5}"
                    ),
                    Err(_) => println!("binomial test: no discordant tokens"),
                }
            }
        }
    }
    Ok(0)
}

fn corpus_frequencies(corpus: &TaggedCorpus) -> HashMap<String, u64> {
    let mut counts: HashMap<String, u64> = HashMap::new();
    for s in &corpus.sentences {
        for (w, _) in s {
            if let Ok(n) = normalize_token(w) {
                *counts.entry(n).or_insert(0) += 1;
            }
        }
    }
    counts
}

fn cmd_gradcheck(dims: ToyDims, step: f64, bound: f64, seed: u64) -> Result<i32> {
    let mut worst: f64 = 0.0;
    for rec in [RecurrenceKind::Rnn, RecurrenceKind::Lstm] {
        let reports = objective_gradcheck(ModelKind::Varembed, rec, dims, step, seed)?;
        println!(
            "{rec:?} objective (k={} h={} v_w={} v_m={}):",
            dims.k, dims.h, dims.v_w, dims.v_m
        );
        for r in &reports {
            println!(
                "  {:<12} max relative error {:.3e} over {} coords",
                r.name, r.max_rel_error, r.coords_checked
            );
        }
        worst = worst.max(max_error(&reports));
    }
    if worst < bound {
        println!("gradcheck passed: max {worst:.3e} < {bound:.1e}");
        Ok(0)
    } else {
        println!("gradcheck FAILED: max {worst:.3e} >= {bound:.1e}");
        Ok(1)
    }
}
