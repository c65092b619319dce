//! Morphological segmentations for every vocabulary word, either loaded
//! from a file or produced by a built-in recursive minimum-description-length
//! segmenter.
//!
//! The description-length model is a unigram morph code: the total cost is
//!
//! ```text
//!   cost = ln(C) * sum over lexicon morphs of (chars(m) + 1)     [lexicon]
//!        + T*ln(T) - sum over morphs of occ(m)*ln(occ(m))        [corpus]
//! ```
//!
//! where `C` is the character-set size over the segmented surface forms
//! (floored at 2), the `+1` pays for a morph-boundary marker, occurrences
//! are weighted by word counts, and `T` is the total morph-token count.
//! Splitting is greedy, recursive, binary, and accepts a split only when it
//! strictly reduces the total cost; recursion depth is capped so no word
//! exceeds [`MAX_MORPHEMES`] morphemes.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

pub const MAX_MORPHEMES: usize = 16;
// 2^4 leaves = 16 morphs
const MAX_SPLIT_DEPTH: usize = 4;
const IMPROVEMENT_EPS: f64 = 1e-9;

/// Reserved tokens (`<unk>`, `<num>`, `</s>`, ...) are never segmented.
pub fn is_reserved_token(word: &str) -> bool {
    word.len() >= 2 && word.starts_with('<') && word.ends_with('>')
}

/// Word-id -> ordered morpheme-id list, over a morpheme lexicon.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationTable {
    morphemes: Vec<String>,
    morph_ids: HashMap<String, usize>,
    per_word: Vec<Vec<usize>>,
}

impl SegmentationTable {
    fn from_analyses(vocab: &Vocabulary, analyses: Vec<Vec<String>>) -> Result<Self> {
        assert_eq!(analyses.len(), vocab.size());
        let mut morphemes: Vec<String> = Vec::new();
        let mut morph_ids: HashMap<String, usize> = HashMap::new();
        let mut per_word = Vec::with_capacity(analyses.len());
        for (wid, analysis) in analyses.into_iter().enumerate() {
            if analysis.is_empty() || analysis.len() > MAX_MORPHEMES {
                return Err(Error::TooManyMorphemes {
                    word: vocab.surface(wid).to_string(),
                    got: analysis.len(),
                    max: MAX_MORPHEMES,
                });
            }
            let mut ids = Vec::with_capacity(analysis.len());
            for m in analysis {
                let id = *morph_ids.entry(m.clone()).or_insert_with(|| {
                    morphemes.push(m);
                    morphemes.len() - 1
                });
                ids.push(id);
            }
            per_word.push(ids);
        }
        Ok(SegmentationTable {
            morphemes,
            morph_ids,
            per_word,
        })
    }

    /// Rebuild a table from stored morphemes and analyses (checkpoint load).
    pub fn from_parts(morphemes: Vec<String>, per_word: Vec<Vec<usize>>) -> Result<Self> {
        let morph_ids: HashMap<String, usize> = morphemes
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        if morph_ids.len() != morphemes.len() {
            return Err(Error::Config("duplicate morpheme".into()));
        }
        for (w, list) in per_word.iter().enumerate() {
            if list.is_empty() || list.len() > MAX_MORPHEMES {
                return Err(Error::TooManyMorphemes {
                    word: format!("#{w}"),
                    got: list.len(),
                    max: MAX_MORPHEMES,
                });
            }
            if let Some(&bad) = list.iter().find(|&&m| m >= morphemes.len()) {
                return Err(Error::Config(format!("morpheme id {bad} out of range")));
            }
        }
        Ok(SegmentationTable {
            morphemes,
            morph_ids,
            per_word,
        })
    }

    /// Number of distinct morphemes (v_m).
    pub fn morpheme_count(&self) -> usize {
        self.morphemes.len()
    }

    pub fn word_count(&self) -> usize {
        self.per_word.len()
    }

    pub fn morphemes(&self) -> &[String] {
        &self.morphemes
    }

    pub fn morpheme(&self, id: usize) -> &str {
        &self.morphemes[id]
    }

    pub fn morph_id(&self, morph: &str) -> Option<usize> {
        self.morph_ids.get(morph).copied()
    }

    /// Ordered morpheme ids of a word.
    pub fn morphs_of(&self, word_id: usize) -> Result<&[usize]> {
        self.per_word
            .get(word_id)
            .map(Vec::as_slice)
            .ok_or(Error::UnknownWordId(word_id))
    }

    pub fn analyses(&self) -> &[Vec<usize>] {
        &self.per_word
    }

    /// Write the table in the segmentation-file format, one vocabulary word
    /// per line.
    pub fn save(&self, vocab: &crate::corpus::Vocabulary, path: &Path) -> Result<()> {
        assert_eq!(vocab.size(), self.word_count());
        let mut out = String::new();
        for (wid, list) in self.per_word.iter().enumerate() {
            out.push_str(vocab.surface(wid));
            out.push('\t');
            for (i, &m) in list.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                out.push_str(&self.morphemes[m]);
            }
            out.push('\n');
        }
        crate::corpus::write_atomic(path, out.as_bytes())
    }

    /// Segment an arbitrary surface form into known morphemes, minimizing
    /// the number of segments (ties: longest leading morph first). Returns
    /// `None` when the string cannot be covered by the lexicon within
    /// [`MAX_MORPHEMES`] segments.
    pub fn segment_surface(&self, surface: &str) -> Option<Vec<usize>> {
        if surface.is_empty() {
            return None;
        }
        let chars: Vec<char> = surface.chars().collect();
        let n = chars.len();
        // dp[i]: fewest segments covering chars[..i] as (count, prev, morph);
        // scanning j upward prefers the longest final segment on ties.
        let mut dp: Vec<Option<(usize, usize, usize)>> = vec![None; n + 1];
        dp[0] = Some((0, 0, usize::MAX));
        for i in 1..=n {
            let mut best: Option<(usize, usize, usize)> = None;
            for j in 0..i {
                let prev_count = match dp[j] {
                    Some((c, _, _)) => c,
                    None => continue,
                };
                let piece: String = chars[j..i].iter().collect();
                if let Some(mid) = self.morph_id(&piece) {
                    let cand = (prev_count + 1, j, mid);
                    if best.map_or(true, |b| cand.0 < b.0) {
                        best = Some(cand);
                    }
                }
            }
            dp[i] = best;
        }
        let (count, _, _) = dp[n]?;
        if count > MAX_MORPHEMES {
            return None;
        }
        let mut ids = Vec::with_capacity(count);
        let mut i = n;
        while i > 0 {
            let (_, j, mid) = dp[i].unwrap();
            ids.push(mid);
            i = j;
        }
        ids.reverse();
        Some(ids)
    }
}

/// Analysis for the reserved tokens: each is its own single morpheme.
pub fn special_token_morphology(word: &str) -> Vec<String> {
    vec![word.to_string()]
}

/// Load segmentations from a `word<TAB>morph1 morph2 ...` file. Vocabulary
/// words absent from the file become monomorphemic; reserved tokens are
/// always atomic. Unless `permissive`, an entry whose morphs do not
/// concatenate to the word is rejected.
pub fn load_segmentations(
    path: &Path,
    vocab: &Vocabulary,
    permissive: bool,
) -> Result<SegmentationTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_segmentations(&text, vocab, permissive, path)
}

/// Parse the segmentation-file format; `path` is for error messages only.
pub fn parse_segmentations(
    text: &str,
    vocab: &Vocabulary,
    permissive: bool,
    path: &Path,
) -> Result<SegmentationTable> {
    let mut file_entries: HashMap<String, Vec<String>> = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (word, morphs) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, lineno, "expected word<TAB>morph1 morph2 ..."))?;
        if word.is_empty() {
            return Err(Error::parse(path, lineno, "empty word"));
        }
        let morphs: Vec<String> = morphs.split_whitespace().map(str::to_string).collect();
        if morphs.is_empty() {
            return Err(Error::parse(path, lineno, "no morphemes listed"));
        }
        if morphs.len() > MAX_MORPHEMES {
            return Err(Error::TooManyMorphemes {
                word: word.to_string(),
                got: morphs.len(),
                max: MAX_MORPHEMES,
            });
        }
        if !permissive {
            let concat: String = morphs.concat();
            if concat != word {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("morphemes {morphs:?} do not concatenate to {word:?}"),
                ));
            }
        }
        file_entries.insert(word.to_string(), morphs);
    }
    let analyses = vocab
        .words()
        .iter()
        .map(|w| {
            if is_reserved_token(w) {
                special_token_morphology(w)
            } else {
                file_entries
                    .get(w)
                    .cloned()
                    .unwrap_or_else(|| vec![w.clone()])
            }
        })
        .collect();
    SegmentationTable::from_analyses(vocab, analyses)
}

/// Incremental description-length state for the MDL segmenter.
struct MdlState {
    char_cost: f64,
    occ: HashMap<String, u64>,
    total: u64,
    sum_occ_ln_occ: f64,
    lexicon_chars: u64,
}

impl MdlState {
    fn new(char_cost: f64) -> Self {
        MdlState {
            char_cost,
            occ: HashMap::new(),
            total: 0,
            sum_occ_ln_occ: 0.0,
            lexicon_chars: 0,
        }
    }

    fn add(&mut self, morph: &str, count: u64) {
        let e = self.occ.entry(morph.to_string()).or_insert(0);
        let before = *e;
        *e += count;
        let after = *e;
        self.total += count;
        self.sum_occ_ln_occ += occ_ln_occ(after) - occ_ln_occ(before);
        if before == 0 {
            self.lexicon_chars += morph.chars().count() as u64 + 1;
        }
    }

    fn remove(&mut self, morph: &str, count: u64) {
        let e = self.occ.get_mut(morph).expect("removing unknown morph");
        let before = *e;
        *e -= count;
        let after = *e;
        self.total -= count;
        self.sum_occ_ln_occ += occ_ln_occ(after) - occ_ln_occ(before);
        if after == 0 {
            self.lexicon_chars -= morph.chars().count() as u64 + 1;
            self.occ.remove(morph);
        }
    }

    fn cost(&self) -> f64 {
        let corpus = if self.total == 0 {
            0.0
        } else {
            (self.total as f64) * (self.total as f64).ln() - self.sum_occ_ln_occ
        };
        self.char_cost * self.lexicon_chars as f64 + corpus
    }
}

fn occ_ln_occ(n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        (n as f64) * (n as f64).ln()
    }
}

/// Per-character code length for the vocabulary's surface forms.
pub fn char_cost_for(words: &[&str]) -> f64 {
    let charset: std::collections::HashSet<char> = words.iter().flat_map(|w| w.chars()).collect();
    (charset.len().max(2) as f64).ln()
}

/// Segment every non-reserved vocabulary word by greedy recursive MDL.
pub fn mdl_segment(vocab: &Vocabulary) -> Result<SegmentationTable> {
    let regular: Vec<usize> = (0..vocab.size())
        .filter(|&id| !is_reserved_token(vocab.surface(id)))
        .collect();
    let surfaces: Vec<&str> = regular.iter().map(|&id| vocab.surface(id)).collect();
    let mut state = MdlState::new(char_cost_for(&surfaces));

    let mut analyses: Vec<Vec<String>> = vec![Vec::new(); vocab.size()];
    let mut weights: Vec<u64> = vec![0; vocab.size()];
    for &id in &regular {
        let w = vocab.surface(id).to_string();
        let count = vocab.count(id).max(1);
        state.add(&w, count);
        analyses[id] = vec![w];
        weights[id] = count;
    }

    for _pass in 0..5 {
        let mut changed = false;
        for &id in &regular {
            let count = weights[id];
            let current = std::mem::take(&mut analyses[id]);
            for m in &current {
                state.remove(m, count);
            }
            let surface: Vec<char> = vocab.surface(id).chars().collect();
            let new = split_recursive(&surface, count, 0, &mut state);
            changed |= new != current;
            analyses[id] = new;
        }
        if !changed {
            break;
        }
    }

    for id in 0..vocab.size() {
        if analyses[id].is_empty() {
            analyses[id] = special_token_morphology(vocab.surface(id));
        }
    }
    SegmentationTable::from_analyses(vocab, analyses)
}

/// Find the best analysis of `chars` against the current state and commit
/// it (leaving its morphs added). Splits only on strict cost improvement.
fn split_recursive(chars: &[char], count: u64, depth: usize, state: &mut MdlState) -> Vec<String> {
    let whole: String = chars.iter().collect();
    if chars.len() < 2 || depth >= MAX_SPLIT_DEPTH {
        state.add(&whole, count);
        return vec![whole];
    }
    state.add(&whole, count);
    let whole_cost = state.cost();
    state.remove(&whole, count);

    let mut best: Option<(f64, usize)> = None;
    for i in 1..chars.len() {
        let left: String = chars[..i].iter().collect();
        let right: String = chars[i..].iter().collect();
        state.add(&left, count);
        state.add(&right, count);
        let cost = state.cost();
        state.remove(&left, count);
        state.remove(&right, count);
        if best.map_or(true, |(c, _)| cost < c) {
            best = Some((cost, i));
        }
    }
    match best {
        Some((cost, i)) if cost < whole_cost - IMPROVEMENT_EPS => {
            let mut out = split_recursive(&chars[..i], count, depth + 1, state);
            out.extend(split_recursive(&chars[i..], count, depth + 1, state));
            out
        }
        _ => {
            state.add(&whole, count);
            vec![whole]
        }
    }
}

/// Total description length of a full segmentation, recomputed from
/// scratch. Exposed so callers can report or compare costs.
pub fn description_length(vocab: &Vocabulary, table: &SegmentationTable) -> f64 {
    let regular: Vec<usize> = (0..vocab.size())
        .filter(|&id| !is_reserved_token(vocab.surface(id)))
        .collect();
    let surfaces: Vec<&str> = regular.iter().map(|&id| vocab.surface(id)).collect();
    let char_cost = char_cost_for(&surfaces);
    let mut occ: HashMap<usize, u64> = HashMap::new();
    for &id in &regular {
        let count = vocab.count(id).max(1);
        for &m in table.morphs_of(id).unwrap() {
            *occ.entry(m).or_insert(0) += count;
        }
    }
    let total: u64 = occ.values().sum();
    let mut corpus = if total == 0 {
        0.0
    } else {
        (total as f64) * (total as f64).ln()
    };
    let mut lex_chars = 0u64;
    let mut morph_ids: Vec<usize> = occ.keys().copied().collect();
    morph_ids.sort_unstable();
    for m in morph_ids {
        let n = occ[&m];
        corpus -= occ_ln_occ(n);
        lex_chars += table.morpheme(m).chars().count() as u64 + 1;
    }
    char_cost * lex_chars as f64 + corpus
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_vocab;
    use std::io::Write;

    fn vocab_of(tokens: &[&str]) -> Vocabulary {
        build_vocab(tokens, 1000).unwrap()
    }

    fn write_file(content: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("segs.tsv");
        let mut f = fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        (dir, path)
    }

    #[test]
    fn load_direct_parse_and_fallback() {
        let vocab = vocab_of(&["walked", "cat"]);
        let (_d, path) = write_file("walked\twalk ed\n");
        let table = load_segmentations(&path, &vocab, false).unwrap();
        let wid = vocab.id("walked").unwrap();
        let morphs: Vec<&str> = table
            .morphs_of(wid)
            .unwrap()
            .iter()
            .map(|&m| table.morpheme(m))
            .collect();
        assert_eq!(morphs, vec!["walk", "ed"]);
        // absent word is monomorphemic
        let cid = vocab.id("cat").unwrap();
        let cm = table.morphs_of(cid).unwrap();
        assert_eq!(cm.len(), 1);
        assert_eq!(table.morpheme(cm[0]), "cat");
        // coverage includes reserved tokens
        assert_eq!(table.word_count(), vocab.size());
    }

    #[test]
    fn load_rejects_too_many_morphemes() {
        let vocab = vocab_of(&["aaaaaaaaaaaaaaaaa"]);
        let morphs = vec!["a"; 17].join(" ");
        let (_d, path) = write_file(&format!("aaaaaaaaaaaaaaaaa\t{morphs}\n"));
        let err = load_segmentations(&path, &vocab, false).unwrap_err();
        assert!(err.to_string().contains("aaaaaaaaaaaaaaaaa"));
    }

    #[test]
    fn load_reports_malformed_line_number() {
        let vocab = vocab_of(&["walked"]);
        let (_d, path) = write_file("walked\twalk ed\nbroken-line-without-tab\n");
        let err = load_segmentations(&path, &vocab, false).unwrap_err();
        assert!(err.to_string().contains(":2:"), "{err}");
    }

    #[test]
    fn load_checks_concatenation_unless_permissive() {
        let vocab = vocab_of(&["walked"]);
        let (_d, path) = write_file("walked\twalk ing\n");
        assert!(load_segmentations(&path, &vocab, false).is_err());
        let table = load_segmentations(&path, &vocab, true).unwrap();
        let wid = vocab.id("walked").unwrap();
        assert_eq!(table.morphs_of(wid).unwrap().len(), 2);
    }

    #[test]
    fn special_tokens_are_atomic() {
        let vocab = vocab_of(&["cat"]);
        let table = mdl_segment(&vocab).unwrap();
        for tok in [crate::corpus::UNK, crate::corpus::NUM] {
            let id = vocab.id(tok).unwrap();
            let ms = table.morphs_of(id).unwrap();
            assert_eq!(ms.len(), 1);
            assert_eq!(table.morpheme(ms[0]), tok);
        }
        assert_eq!(special_token_morphology("<pad>"), vec!["<pad>"]);
    }

    #[test]
    fn lone_word_stays_whole() {
        let vocab = vocab_of(&["abc"]);
        let table = mdl_segment(&vocab).unwrap();
        let id = vocab.id("abc").unwrap();
        let ms = table.morphs_of(id).unwrap();
        assert_eq!(ms.len(), 1);
        assert_eq!(table.morpheme(ms[0]), "abc");
    }

    #[test]
    fn single_char_word_stays_whole() {
        let vocab = vocab_of(&["a", "b", "a"]);
        let table = mdl_segment(&vocab).unwrap();
        let id = vocab.id("a").unwrap();
        assert_eq!(table.morphs_of(id).unwrap().len(), 1);
    }

    #[test]
    fn shared_suffixes_reduce_description_length() {
        let vocab = vocab_of(&["walk", "walked", "walking", "talked", "talking"]);
        let table = mdl_segment(&vocab).unwrap();
        let segmented_cost = description_length(&vocab, &table);
        // unsegmented baseline via the monomorphemic table
        let (_d, empty) = write_file("");
        let mono = load_segmentations(&empty, &vocab, false).unwrap();
        let mono_cost = description_length(&vocab, &mono);
        assert!(
            segmented_cost <= mono_cost,
            "{segmented_cost} > {mono_cost}"
        );
        assert!(table.morph_id("ed").is_some(), "{:?}", table.morphemes());
        assert!(table.morph_id("ing").is_some(), "{:?}", table.morphemes());
    }

    #[test]
    fn segmenter_output_concatenates_to_surface() {
        let vocab = vocab_of(&[
            "walk",
            "walked",
            "walking",
            "talked",
            "talking",
            "retalking",
        ]);
        let table = mdl_segment(&vocab).unwrap();
        for id in 0..vocab.size() {
            let concat: String = table
                .morphs_of(id)
                .unwrap()
                .iter()
                .map(|&m| table.morpheme(m))
                .collect();
            assert_eq!(concat, vocab.surface(id));
            assert!(table.morphs_of(id).unwrap().len() <= MAX_MORPHEMES);
        }
    }

    #[test]
    fn resegmenting_is_idempotent() {
        let vocab = vocab_of(&["walk", "walked", "walking", "talked", "talking"]);
        let first = mdl_segment(&vocab).unwrap();
        let second = mdl_segment(&vocab).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn surface_dp_segmentation() {
        let vocab = vocab_of(&["walked"]);
        let (_d, path) = write_file("walked\twalk ed\n");
        let table = load_segmentations(&path, &vocab, false).unwrap();
        let segs = table.segment_surface("walked").unwrap();
        let names: Vec<&str> = segs.iter().map(|&m| table.morpheme(m)).collect();
        assert_eq!(names, vec!["walk", "ed"]);
        // "edwalk" is coverable, "xyz" is not
        assert!(table.segment_surface("edwalk").is_some());
        assert!(table.segment_surface("xyz").is_none());
        assert!(table.segment_surface("").is_none());
    }
}
