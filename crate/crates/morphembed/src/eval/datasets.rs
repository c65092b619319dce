//! Tagged-corpus loading for the POS evaluation.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Sentences of (word, tag-id) over a tagset.
#[derive(Debug, Clone)]
pub struct TaggedCorpus {
    pub sentences: Vec<Vec<(String, usize)>>,
    pub tags: Vec<String>,
}

impl TaggedCorpus {
    pub fn tokens(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    pub fn tag_id(&self, tag: &str) -> Option<usize> {
        self.tags.iter().position(|t| t == tag)
    }

    /// Load either accepted format, sniffing by the first data line: lines
    /// containing a tab are treated as two-column (`word<TAB>tag`, blank
    /// line between sentences), otherwise one sentence per line with
    /// `word_TAG` tokens.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let two_column = text
            .lines()
            .find(|l| !l.trim().is_empty())
            .map(|l| l.contains('\t'))
            .unwrap_or(false);
        if two_column {
            Self::parse_columns(&text, path)
        } else {
            Self::parse_inline(&text, path)
        }
    }

    /// One sentence per line, tokens as `word_TAG`; the tag follows the
    /// last underscore so words may contain underscores themselves.
    pub fn parse_inline(text: &str, path: &Path) -> Result<Self> {
        let mut builder = Builder::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut sentence = Vec::new();
            for token in line.split_whitespace() {
                let (word, tag) = token.rsplit_once('_').ok_or_else(|| {
                    Error::parse(path, i + 1, format!("token {token:?} has no _TAG"))
                })?;
                if word.is_empty() || tag.is_empty() {
                    return Err(Error::parse(path, i + 1, format!("bad token {token:?}")));
                }
                sentence.push((word.to_string(), builder.tag(tag)));
            }
            builder.push(sentence);
        }
        builder.finish()
    }

    /// `word<TAB>tag` per line, sentences separated by blank lines.
    pub fn parse_columns(text: &str, path: &Path) -> Result<Self> {
        let mut builder = Builder::default();
        let mut sentence = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                if !sentence.is_empty() {
                    builder.push(std::mem::take(&mut sentence));
                }
                continue;
            }
            let (word, tag) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, i + 1, "expected word<TAB>tag"))?;
            let tag = tag.trim();
            if word.is_empty() || tag.is_empty() {
                return Err(Error::parse(path, i + 1, "empty word or tag"));
            }
            sentence.push((word.to_string(), builder.tag(tag)));
        }
        if !sentence.is_empty() {
            builder.push(sentence);
        }
        builder.finish()
    }
}

#[derive(Default)]
struct Builder {
    sentences: Vec<Vec<(String, usize)>>,
    tags: Vec<String>,
    tag_ids: HashMap<String, usize>,
}

impl Builder {
    fn tag(&mut self, tag: &str) -> usize {
        match self.tag_ids.get(tag) {
            Some(&id) => id,
            None => {
                self.tags.push(tag.to_string());
                self.tag_ids.insert(tag.to_string(), self.tags.len() - 1);
                self.tags.len() - 1
            }
        }
    }

    fn push(&mut self, sentence: Vec<(String, usize)>) {
        self.sentences.push(sentence);
    }

    fn finish(self) -> Result<TaggedCorpus> {
        if self.sentences.is_empty() {
            return Err(Error::EmptyInput("no tagged sentences".into()));
        }
        Ok(TaggedCorpus {
            sentences: self.sentences,
            tags: self.tags,
        })
    }
}
