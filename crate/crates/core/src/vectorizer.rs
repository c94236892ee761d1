//! N-gram TF-IDF vectorization of call sequences.
//!
//! A feature is a window of `n` consecutive call names joined by single
//! spaces. Raw counts are reweighted by
//!
//! ```text
//! idf(w) = ln((1 + |D|) / (1 + df(w)))
//! ```
//!
//! and every row is then scaled to unit Euclidean norm. Note there is no
//! `+1` after the logarithm, so an n-gram present in every training trace
//! receives weight zero and disappears from all vectors. [`IdfOptions`]
//! can switch the smoothed variant on for comparison.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::par::Exec;
use crate::sparse::{FeatureMatrix, SparseVector};
use crate::trace::{Label, SyscallTrace};

/// Inclusive range of n-gram lengths.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct NgramRange {
    pub min: usize,
    pub max: usize,
}

impl NgramRange {
    pub fn new(min: usize, max: usize) -> Result<Self> {
        if min == 0 {
            return Err(Error::config("ngram_min", "must be at least 1"));
        }
        if max < min {
            return Err(Error::config("ngram_max", format!("{max} < ngram_min {min}")));
        }
        Ok(NgramRange { min, max })
    }

    pub fn lengths(self) -> std::ops::RangeInclusive<usize> {
        self.min..=self.max
    }
}

impl Default for NgramRange {
    fn default() -> Self {
        NgramRange { min: 8, max: 10 }
    }
}

/// Contiguous windows of length `n`, space-joined. Empty when the sequence
/// is shorter than `n`.
pub fn extract_ngrams<S: AsRef<str>>(calls: &[S], n: usize) -> Vec<String> {
    if n == 0 || calls.len() < n {
        return Vec::new();
    }
    calls.windows(n).map(join_window).collect()
}

fn join_window<S: AsRef<str>>(w: &[S]) -> String {
    let len = w.iter().map(|s| s.as_ref().len() + 1).sum::<usize>();
    let mut s = String::with_capacity(len);
    for (k, c) in w.iter().enumerate() {
        if k > 0 {
            s.push(' ');
        }
        s.push_str(c.as_ref());
    }
    s
}

/// Bijection between n-gram strings and feature indices. Keys are indexed
/// in lexicographic order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    keys: Vec<String>,
    index: HashMap<String, usize>,
    range: NgramRange,
}

impl Vocabulary {
    /// Builds a vocabulary from already-sorted unique keys.
    pub fn from_sorted_keys(keys: Vec<String>, range: NgramRange) -> Result<Self> {
        if !keys.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Parse("vocabulary keys not strictly sorted".into()));
        }
        for k in &keys {
            let n = k.split(' ').count();
            if n < range.min || n > range.max {
                return Err(Error::Parse(format!(
                    "vocabulary key {k:?} has {n} tokens outside ({}, {})",
                    range.min, range.max
                )));
            }
        }
        let index = keys.iter().enumerate().map(|(i, k)| (k.clone(), i)).collect();
        Ok(Vocabulary { keys, index, range })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn range(&self) -> NgramRange {
        self.range
    }

    pub fn get(&self, ngram: &str) -> Option<usize> {
        self.index.get(ngram).copied()
    }

    pub fn key(&self, index: usize) -> Option<&str> {
        self.keys.get(index).map(String::as_str)
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    /// Text export: `index<TAB>ngram` per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, k) in self.keys.iter().enumerate() {
            let _ = writeln!(out, "{i}\t{k}");
        }
        out
    }
}

fn trace_ngrams(calls: &[String], range: NgramRange) -> impl Iterator<Item = String> + '_ {
    range.lengths().flat_map(move |n| {
        let windows = if calls.len() >= n { calls.windows(n) } else { calls[..0].windows(1) };
        windows.map(join_window)
    })
}

pub fn build_vocabulary(corpus: &[SyscallTrace], range: NgramRange) -> Result<Vocabulary> {
    build_vocabulary_with(corpus, range, Exec::default())
}

pub fn build_vocabulary_with(
    corpus: &[SyscallTrace],
    range: NgramRange,
    exec: Exec,
) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::InsufficientData("empty corpus".into()));
    }
    let per_trace: Vec<BTreeSet<String>> =
        exec.map(corpus, |t| trace_ngrams(&t.calls, range).collect());
    let mut all = BTreeSet::new();
    for s in per_trace {
        all.extend(s);
    }
    if all.is_empty() {
        return Err(Error::EmptyVocabulary {
            n_min: range.min,
            n_max: range.max,
        });
    }
    Vocabulary::from_sorted_keys(all.into_iter().collect(), range)
}

/// Term counts of every in-vocabulary n-gram of the trace. Out-of-vocabulary
/// n-grams are ignored.
pub fn count_vector(trace: &SyscallTrace, vocab: &Vocabulary) -> SparseVector {
    let mut counts: HashMap<usize, f64> = HashMap::new();
    for g in trace_ngrams(&trace.calls, vocab.range) {
        if let Some(i) = vocab.get(&g) {
            *counts.entry(i).or_insert(0.0) += 1.0;
        }
    }
    let mut entries: Vec<(usize, f64)> = counts.into_iter().collect();
    entries.sort_unstable_by_key(|e| e.0);
    SparseVector::from_sorted_unchecked(vocab.len(), entries)
}

/// Count matrix for a batch of traces; labels are carried over when every
/// trace has one.
pub fn count_matrix(traces: &[SyscallTrace], vocab: &Vocabulary, exec: Exec) -> FeatureMatrix {
    let rows = exec.map(traces, |t| count_vector(t, vocab));
    let ids = traces.iter().map(|t| t.source_id.clone()).collect();
    let labels: Option<Vec<Label>> = traces.iter().map(|t| t.label).collect();
    FeatureMatrix::new(vocab.len(), rows, ids, labels).expect("rows share vocabulary dim")
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct IdfOptions {
    /// Adds 1 after the logarithm so ubiquitous n-grams keep a nonzero weight.
    pub smooth: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdfModel {
    pub idf: Vec<f64>,
    pub n_docs: usize,
}

impl IdfModel {
    pub fn len(&self) -> usize {
        self.idf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.idf.is_empty()
    }
}

pub fn fit_idf(counts: &FeatureMatrix) -> Result<IdfModel> {
    fit_idf_with(counts, IdfOptions::default())
}

pub fn fit_idf_with(counts: &FeatureMatrix, opts: IdfOptions) -> Result<IdfModel> {
    if counts.is_empty() {
        return Err(Error::InsufficientData("idf needs at least one document".into()));
    }
    let mut df = vec![0usize; counts.dim()];
    for row in &counts.rows {
        for &(i, _) in row.entries() {
            df[i] += 1;
        }
    }
    let n = counts.n_rows() as f64;
    let shift = if opts.smooth { 1.0 } else { 0.0 };
    let idf = df
        .into_iter()
        .map(|d| ((1.0 + n) / (1.0 + d as f64)).ln() + shift)
        .collect();
    Ok(IdfModel {
        idf,
        n_docs: counts.n_rows(),
    })
}

pub fn tfidf_row(row: &SparseVector, idf: &IdfModel) -> Result<SparseVector> {
    if row.dim() != idf.len() {
        return Err(Error::DimensionMismatch {
            expected: idf.len(),
            found: row.dim(),
        });
    }
    Ok(row.map_values(|i, v| v * idf.idf[i]))
}

pub fn tfidf_transform(counts: &FeatureMatrix, idf: &IdfModel) -> Result<FeatureMatrix> {
    let rows = counts
        .rows
        .iter()
        .map(|r| tfidf_row(r, idf))
        .collect::<Result<Vec<_>>>()?;
    FeatureMatrix::new(idf.len(), rows, counts.row_ids.clone(), counts.labels.clone())
}

/// Scales to unit Euclidean norm; the zero vector is returned unchanged.
pub fn l2_normalize(v: &SparseVector) -> SparseVector {
    let norm = v.norm();
    if norm == 0.0 {
        return v.clone();
    }
    v.map_values(|_, x| x / norm)
}

/// Fitted vocabulary plus IDF weights: everything needed to turn a new
/// trace into a feature row.
#[derive(Clone, Debug, PartialEq)]
pub struct Vectorizer {
    pub vocab: Vocabulary,
    pub idf: IdfModel,
}

impl Vectorizer {
    /// Vocabulary, counts, IDF, TF-IDF, then per-row normalization.
    pub fn fit(
        corpus: &[SyscallTrace],
        range: NgramRange,
        opts: IdfOptions,
        exec: Exec,
    ) -> Result<(Vectorizer, FeatureMatrix)> {
        let vocab = build_vocabulary_with(corpus, range, exec)?;
        let counts = count_matrix(corpus, &vocab, exec);
        let idf = fit_idf_with(&counts, opts)?;
        let v = Vectorizer { vocab, idf };
        let matrix = v.weight(counts, exec)?;
        Ok((v, matrix))
    }

    pub fn dim(&self) -> usize {
        self.vocab.len()
    }

    pub fn transform_one(&self, trace: &SyscallTrace) -> SparseVector {
        let counts = count_vector(trace, &self.vocab);
        l2_normalize(&tfidf_row(&counts, &self.idf).expect("vocab and idf share dim"))
    }

    pub fn transform(&self, traces: &[SyscallTrace], exec: Exec) -> FeatureMatrix {
        let counts = count_matrix(traces, &self.vocab, exec);
        self.weight(counts, exec).expect("vocab and idf share dim")
    }

    fn weight(&self, counts: FeatureMatrix, exec: Exec) -> Result<FeatureMatrix> {
        let rows = exec.try_map(&counts.rows, |r| {
            tfidf_row(r, &self.idf).map(|w| l2_normalize(&w))
        })?;
        FeatureMatrix::new(self.idf.len(), rows, counts.row_ids, counts.labels)
    }
}

/// Convenience wrapper over [`Vectorizer::fit`] with default options.
pub fn fit_transform(
    corpus: &[SyscallTrace],
    n_min: usize,
    n_max: usize,
) -> Result<(Vocabulary, IdfModel, FeatureMatrix)> {
    let range = NgramRange::new(n_min, n_max)?;
    let (v, m) = Vectorizer::fit(corpus, range, IdfOptions::default(), Exec::default())?;
    Ok((v.vocab, v.idf, m))
}
