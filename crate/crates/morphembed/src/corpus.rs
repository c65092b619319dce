//! Corpus ingestion, normalization, vocabulary construction, and
//! truncated-sequence minibatch iteration.
//!
//! Corpus files are UTF-8, whitespace-tokenized, one sentence per line. The
//! reader appends an end-of-sentence token per line and the stream is
//! otherwise treated as one continuous token sequence.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const UNK: &str = "<unk>";
pub const NUM: &str = "<num>";
pub const EOS: &str = "</s>";

/// Word/id bijection with occurrence counts and the reserved unknown and
/// number tokens at ids 0 and 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    ids: HashMap<String, usize>,
    counts: Vec<u64>,
    pub unk_id: usize,
    pub num_id: usize,
}

impl Vocabulary {
    pub fn size(&self) -> usize {
        self.words.len()
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.ids.get(word).copied()
    }

    /// Id for a normalized token, falling back to the unknown token.
    pub fn id_or_unk(&self, word: &str) -> usize {
        self.id(word).unwrap_or(self.unk_id)
    }

    pub fn surface(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn count(&self, id: usize) -> u64 {
        self.counts[id]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn contains(&self, word: &str) -> bool {
        self.ids.contains_key(word)
    }

    /// Rebuild a vocabulary from stored words and counts (checkpoint load).
    pub fn from_parts(words: Vec<String>, counts: Vec<u64>) -> Result<Self> {
        if words.len() != counts.len() {
            return Err(Error::Shape("words/counts length mismatch".into()));
        }
        let ids: HashMap<String, usize> = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        if ids.len() != words.len() {
            return Err(Error::Config("duplicate word in vocabulary".into()));
        }
        let unk_id = *ids
            .get(UNK)
            .ok_or_else(|| Error::Config(format!("missing {UNK} token")))?;
        let num_id = *ids
            .get(NUM)
            .ok_or_else(|| Error::Config(format!("missing {NUM} token")))?;
        Ok(Vocabulary {
            words,
            ids,
            counts,
            unk_id,
            num_id,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (w, c) in self.words.iter().zip(&self.counts) {
            out.push_str(w);
            out.push('\t');
            out.push_str(&c.to_string());
            out.push('\n');
        }
        write_atomic(path, out.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Parse the `word<TAB>count` format; `path` is for error messages only.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut words = Vec::new();
        let mut counts = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (w, c) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, i + 1, "expected word<TAB>count"))?;
            let c: u64 = c
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, i + 1, format!("bad count {c:?}")))?;
            words.push(w.to_string());
            counts.push(c);
        }
        let ids: HashMap<String, usize> = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        if ids.len() != words.len() {
            return Err(Error::parse(path, 0, "duplicate word in vocabulary file"));
        }
        let unk_id = *ids
            .get(UNK)
            .ok_or_else(|| Error::parse(path, 0, format!("missing {UNK} token")))?;
        let num_id = *ids
            .get(NUM)
            .ok_or_else(|| Error::parse(path, 0, format!("missing {NUM} token")))?;
        Ok(Vocabulary {
            words,
            ids,
            counts,
            unk_id,
            num_id,
        })
    }
}

/// Lowercase a token and map numeric tokens to the number marker. A token is
/// numeric iff it contains at least one digit and no alphabetic character.
pub fn normalize_token(raw: &str) -> Result<String> {
    if raw.is_empty() {
        return Err(Error::EmptyInput("empty token".into()));
    }
    let mut has_digit = false;
    let mut has_alpha = false;
    for c in raw.chars() {
        has_digit |= c.is_numeric();
        has_alpha |= c.is_alphabetic();
    }
    if has_digit && !has_alpha {
        return Ok(NUM.to_string());
    }
    Ok(raw.to_lowercase())
}

/// Build a vocabulary from already-normalized tokens: the `max_size` most
/// frequent types get ids after the two reserved tokens, ties broken by
/// first occurrence. Counts for types cut off accrue to the unknown token.
pub fn build_vocab<S: AsRef<str>>(tokens: &[S], max_size: usize) -> Result<Vocabulary> {
    if max_size == 0 {
        return Err(Error::Config("max_size must be >= 1".into()));
    }
    if tokens.is_empty() {
        return Err(Error::EmptyInput("empty corpus".into()));
    }
    let mut first_seen: HashMap<&str, usize> = HashMap::new();
    let mut freq: HashMap<&str, u64> = HashMap::new();
    let mut order = 0usize;
    let mut unk_count = 0u64;
    let mut num_count = 0u64;
    for t in tokens {
        let t = t.as_ref();
        match t {
            UNK => unk_count += 1,
            NUM => num_count += 1,
            _ => {
                *freq.entry(t).or_insert(0) += 1;
                first_seen.entry(t).or_insert_with(|| {
                    order += 1;
                    order
                });
            }
        }
    }
    let mut candidates: Vec<(&str, u64)> = freq.into_iter().collect();
    candidates.sort_by(|a, b| b.1.cmp(&a.1).then(first_seen[a.0].cmp(&first_seen[b.0])));

    let mut words = vec![UNK.to_string(), NUM.to_string()];
    let mut counts = vec![unk_count, num_count];
    for (w, c) in candidates.iter().take(max_size) {
        words.push(w.to_string());
        counts.push(*c);
    }
    // everything past the cutoff maps to the unknown token
    for (_, c) in candidates.iter().skip(max_size) {
        counts[0] += c;
    }
    let ids = words
        .iter()
        .enumerate()
        .map(|(i, w)| (w.clone(), i))
        .collect();
    Ok(Vocabulary {
        words,
        ids,
        counts,
        unk_id: 0,
        num_id: 1,
    })
}

/// A corpus encoded as vocabulary ids.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenStream {
    tokens: Vec<usize>,
}

impl TokenStream {
    /// Test constructor for callers that already hold validated ids.
    #[cfg(test)]
    pub(crate) fn from_raw(tokens: Vec<usize>) -> Self {
        TokenStream { tokens }
    }

    pub fn new(tokens: Vec<usize>, vocab: &Vocabulary) -> Result<Self> {
        if let Some(&t) = tokens.iter().find(|&&t| t >= vocab.size()) {
            return Err(Error::UnknownWordId(t));
        }
        Ok(TokenStream { tokens })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[usize] {
        &self.tokens
    }
}

/// Map normalized tokens to ids, unknown types to the unknown id.
pub fn encode<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> TokenStream {
    TokenStream {
        tokens: tokens.iter().map(|t| vocab.id_or_unk(t.as_ref())).collect(),
    }
}

/// Inverse of [`encode`] up to unknown-token replacement.
pub fn decode(stream: &TokenStream, vocab: &Vocabulary) -> Vec<String> {
    stream
        .tokens
        .iter()
        .map(|&t| vocab.surface(t).to_string())
        .collect()
}

/// Read a corpus file into normalized tokens, one end-of-sentence marker per
/// input line.
pub fn read_corpus_tokens(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    corpus_tokens_from_str(&text)
}

/// Normalize whitespace-tokenized text, one sentence per line.
pub fn corpus_tokens_from_str(text: &str) -> Result<Vec<String>> {
    let mut tokens = Vec::new();
    for line in text.lines() {
        let mut any = false;
        for raw in line.split_whitespace() {
            tokens.push(normalize_token(raw)?);
            any = true;
        }
        if any {
            tokens.push(EOS.to_string());
        }
    }
    Ok(tokens)
}

/// Minibatch layout for truncated backpropagation through time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchPlan {
    pub batch_size: usize,
    pub bptt_length: usize,
    pub drop_remainder: bool,
}

impl Default for BatchPlan {
    fn default() -> Self {
        BatchPlan {
            batch_size: 25,
            bptt_length: 35,
            drop_remainder: false,
        }
    }
}

impl BatchPlan {
    pub fn new(batch_size: usize, bptt_length: usize) -> Result<Self> {
        if batch_size == 0 || bptt_length == 0 {
            return Err(Error::Config(
                "batch_size and bptt_length must be >= 1".into(),
            ));
        }
        Ok(BatchPlan {
            batch_size,
            bptt_length,
            drop_remainder: false,
        })
    }
}

/// One truncated-BPTT window across all stripes: `inputs[s]` and
/// `targets[s]` hold the token ids for stripe `s`, targets shifted one
/// position ahead. Recurrent state carries across consecutive windows.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub inputs: Vec<Vec<usize>>,
    pub targets: Vec<Vec<usize>>,
}

impl Window {
    pub fn width(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn predictions(&self) -> usize {
        self.inputs.iter().map(Vec::len).sum()
    }
}

/// Split the stream into `batch_size` contiguous stripes and cut each stripe
/// into windows of `bptt_length` inputs whose targets are the next token.
/// The stream tail that does not fill every stripe, the final token of each
/// stripe (which has no target), and, with `drop_remainder`, any trailing
/// partial window are left out.
pub fn iterate_batches(stream: &TokenStream, plan: &BatchPlan) -> Result<Vec<Window>> {
    let n = stream.len();
    let b = plan.batch_size;
    if n == 0 {
        return Err(Error::EmptyInput("empty token stream".into()));
    }
    let stripe_len = n / b;
    if stripe_len < 2 {
        return Err(Error::Config(format!(
            "stream of {n} tokens is too short for {b} stripes"
        )));
    }
    if plan.drop_remainder && stripe_len < plan.bptt_length + 1 {
        return Err(Error::Config(format!(
            "stream of {n} tokens cannot fill a {b} x {} window",
            plan.bptt_length
        )));
    }
    let usable = stripe_len - 1; // last stripe token is only ever a target
    let toks = stream.tokens();
    let full_windows = usable / plan.bptt_length;
    let tail = usable % plan.bptt_length;
    let n_windows = if plan.drop_remainder || tail == 0 {
        full_windows
    } else {
        full_windows + 1
    };
    let mut windows = Vec::with_capacity(n_windows);
    for w in 0..n_windows {
        let start = w * plan.bptt_length;
        let len = plan.bptt_length.min(usable - start);
        let mut inputs = Vec::with_capacity(b);
        let mut targets = Vec::with_capacity(b);
        for s in 0..b {
            let base = s * stripe_len + start;
            inputs.push(toks[base..base + len].to_vec());
            targets.push(toks[base + 1..base + len + 1].to_vec());
        }
        windows.push(Window { inputs, targets });
    }
    Ok(windows)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name()
            .map(|s| s.to_string_lossy())
            .unwrap_or_default()
    ));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().ok();
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
