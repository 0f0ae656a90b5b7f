use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// An utterance id with its orthographic transcription.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledText {
    pub id: String,
    pub transcription: String,
}

impl LabeledText {
    pub fn new(id: impl Into<String>, transcription: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            transcription: transcription.into(),
        }
    }
}

/// Dense occurrence labels over the full query x item grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GoldLabelSet {
    query_ids: Vec<String>,
    item_ids: Vec<String>,
    query_index: BTreeMap<String, usize>,
    item_index: BTreeMap<String, usize>,
    labels: Vec<bool>,
    diagnostics: Vec<String>,
}

impl GoldLabelSet {
    fn empty(query_ids: Vec<String>, item_ids: Vec<String>) -> Result<Self> {
        let query_index = index_of(&query_ids, "query")?;
        let item_index = index_of(&item_ids, "item")?;
        let labels = vec![false; query_ids.len() * item_ids.len()];
        Ok(Self {
            query_ids,
            item_ids,
            query_index,
            item_index,
            labels,
            diagnostics: Vec::new(),
        })
    }

    /// Builds a label set from explicit `(query, item, label)` triples, which
    /// must cover every query x item pair exactly once.
    pub fn from_triples<'a, I>(triples: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str, bool)>,
    {
        let triples: Vec<_> = triples.into_iter().collect();
        let mut queries: Vec<String> = triples.iter().map(|t| String::from(t.0)).collect();
        let mut items: Vec<String> = triples.iter().map(|t| String::from(t.1)).collect();
        queries.sort();
        queries.dedup();
        items.sort();
        items.dedup();
        let mut set = Self::empty(queries, items)?;
        let mut seen = vec![false; set.labels.len()];
        for (q, i, label) in triples {
            let idx = set.query_index[q] * set.item_ids.len() + set.item_index[i];
            if seen[idx] {
                return Err(Error::Precondition(format!("duplicate gold pair ({q}, {i})")));
            }
            seen[idx] = true;
            set.labels[idx] = label;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            let n = set.item_ids.len();
            return Err(Error::Precondition(format!(
                "gold labels do not cover pair ({}, {}); {} of {} pairs missing",
                set.query_ids[missing / n],
                set.item_ids[missing % n],
                seen.iter().filter(|s| !**s).count(),
                seen.len()
            )));
        }
        Ok(set)
    }

    pub fn query_ids(&self) -> &[String] {
        &self.query_ids
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn query_position(&self, query: &str) -> Option<usize> {
        self.query_index.get(query).copied()
    }

    pub fn item_position(&self, item: &str) -> Option<usize> {
        self.item_index.get(item).copied()
    }

    pub fn label(&self, query: &str, item: &str) -> Option<bool> {
        let q = self.query_position(query)?;
        let i = self.item_position(item)?;
        Some(self.labels[q * self.item_ids.len() + i])
    }

    pub fn label_at(&self, query: usize, item: usize) -> bool {
        self.labels[query * self.item_ids.len() + item]
    }

    /// Number of items containing each query, in `query_ids` order.
    pub fn true_counts(&self) -> Vec<usize> {
        self.labels
            .chunks(self.item_ids.len().max(1))
            .map(|row| row.iter().filter(|l| **l).count())
            .take(self.query_ids.len())
            .collect()
    }

    pub fn total_true(&self) -> usize {
        self.labels.iter().filter(|l| **l).count()
    }

    /// Problems found while labelling (e.g. transcriptions that normalize to
    /// nothing).
    pub fn diagnostics(&self) -> &[String] {
        &self.diagnostics
    }
}

fn index_of(ids: &[String], role: &str) -> Result<BTreeMap<String, usize>> {
    let mut map = BTreeMap::new();
    for (i, id) in ids.iter().enumerate() {
        if map.insert(id.clone(), i).is_some() {
            return Err(Error::Precondition(format!("duplicate {role} id: {id}")));
        }
    }
    Ok(map)
}

fn is_combining_mark(c: char) -> bool {
    matches!(c as u32,
        0x0300..=0x036F | 0x1AB0..=0x1AFF | 0x1DC0..=0x1DFF | 0x20D0..=0x20FF | 0xFE20..=0xFE2F)
}

/// Case-folds, drops punctuation and symbols (anything that is not a letter,
/// digit, combining mark or whitespace), and splits on whitespace.
pub fn normalize_tokens(text: &str) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .filter(|&c| c.is_alphanumeric() || c.is_whitespace() || is_combining_mark(c))
        .flat_map(char::to_lowercase)
        .collect();
    cleaned.split_whitespace().map(String::from).collect()
}

fn contains_run(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// Labels a pair true when the query's token sequence occurs as a
/// contiguous whole-word run in the item's tokens.
pub fn make_gold(queries: &[LabeledText], items: &[LabeledText]) -> Result<GoldLabelSet> {
    let mut set = GoldLabelSet::empty(
        queries.iter().map(|q| q.id.clone()).collect(),
        items.iter().map(|i| i.id.clone()).collect(),
    )?;
    let item_tokens: Vec<Vec<String>> = items.iter().map(|i| normalize_tokens(&i.transcription)).collect();
    for (i, tokens) in item_tokens.iter().enumerate() {
        if tokens.is_empty() {
            set.diagnostics
                .push(format!("item {} has an empty transcription after normalization", items[i].id));
        }
    }
    let n = items.len();
    for (qi, q) in queries.iter().enumerate() {
        let needle = normalize_tokens(&q.transcription);
        if needle.is_empty() {
            set.diagnostics
                .push(format!("query {} has an empty transcription after normalization", q.id));
            continue;
        }
        for (ii, hay) in item_tokens.iter().enumerate() {
            set.labels[qi * n + ii] = contains_run(hay, &needle);
        }
    }
    Ok(set)
}
