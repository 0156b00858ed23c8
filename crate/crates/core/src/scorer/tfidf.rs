use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{build_vocabulary, Corpus};

use super::ScorerError;

/// Sparse row vector with strictly increasing indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub dim: usize,
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseVector {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            ..Default::default()
        }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&i, &v)| v * dense[i as usize])
            .sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i as usize] = v;
        }
        out
    }
}

/// Row-compressed feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_rows(ncols: usize, rows: &[SparseVector]) -> Self {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        indptr.push(0);
        let nnz = rows.iter().map(SparseVector::nnz).sum();
        let mut indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for row in rows {
            debug_assert_eq!(row.dim, ncols);
            indices.extend_from_slice(&row.indices);
            values.extend_from_slice(&row.values);
            indptr.push(indices.len());
        }
        Self {
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let ncols = rows.first().map_or(0, Vec::len);
        let sparse: Vec<SparseVector> = rows
            .iter()
            .map(|r| {
                let (indices, values) = r
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(i, v)| (i as u32, *v))
                    .unzip();
                SparseVector {
                    dim: ncols,
                    indices,
                    values,
                }
            })
            .collect();
        Self::from_rows(ncols, &sparse)
    }

    pub fn nrows(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, r: usize) -> (&[u32], &[f64]) {
        let span = self.indptr[r]..self.indptr[r + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    pub fn row_dot(&self, r: usize, dense: &[f64]) -> f64 {
        let (idx, val) = self.row(r);
        idx.iter()
            .zip(val)
            .map(|(&i, &v)| v * dense[i as usize])
            .sum()
    }

    /// out += scale * row r
    pub fn add_row_to(&self, r: usize, scale: f64, out: &mut [f64]) {
        let (idx, val) = self.row(r);
        for (&i, &v) in idx.iter().zip(val) {
            out[i as usize] += scale * v;
        }
    }
}

/// Unigram TF-IDF with smoothed idf and L2 row normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct TfidfVectorizer {
    tokens: Vec<String>,
    idf: Vec<f64>,
    index: HashMap<String, u32>,
}

impl TfidfVectorizer {
    /// Fit on a training corpus: idf(t) = ln((1 + N) / (1 + df(t))) + 1.
    pub fn fit(corpus: &Corpus) -> Result<Self, ScorerError> {
        if corpus.is_empty() {
            return Err(ScorerError::EmptyTrainingCorpus);
        }
        let n = corpus.len() as f64;
        let vocab = build_vocabulary(corpus);
        let (tokens, idf) = vocab
            .entries()
            .iter()
            .map(|e| {
                let idf = ((1.0 + n) / (1.0 + e.document_frequency as f64)).ln() + 1.0;
                (e.token.clone(), idf)
            })
            .unzip();
        Ok(Self::from_parts(tokens, idf))
    }

    pub fn from_parts(tokens: Vec<String>, idf: Vec<f64>) -> Self {
        assert_eq!(tokens.len(), idf.len());
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Self { tokens, idf, index }
    }

    pub fn dim(&self) -> usize {
        self.tokens.len()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn idf_of(&self, token: &str) -> Option<f64> {
        self.index.get(token).map(|&i| self.idf[i as usize])
    }

    /// Raw counts times idf, L2-normalized. Out-of-vocabulary tokens are
    /// ignored; an all-OOV input yields the zero vector.
    pub fn transform<S: AsRef<str>>(&self, tokens: &[S]) -> SparseVector {
        let mut counts: Vec<(u32, f64)> = tokens
            .iter()
            .filter_map(|t| self.index.get(t.as_ref()).copied())
            .map(|i| (i, 1.0))
            .collect();
        counts.sort_unstable_by_key(|(i, _)| *i);
        let mut indices: Vec<u32> = Vec::with_capacity(counts.len());
        let mut values: Vec<f64> = Vec::with_capacity(counts.len());
        for (i, c) in counts {
            if indices.last() == Some(&i) {
                *values.last_mut().unwrap() += c;
            } else {
                indices.push(i);
                values.push(c);
            }
        }
        for (i, v) in indices.iter().zip(values.iter_mut()) {
            *v *= self.idf[*i as usize];
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut values {
                *v /= norm;
            }
        }
        SparseVector {
            dim: self.dim(),
            indices,
            values,
        }
    }

    pub fn transform_corpus(&self, corpus: &Corpus) -> CsrMatrix {
        let rows: Vec<SparseVector> = corpus
            .documents()
            .iter()
            .map(|d| self.transform(&d.tokens))
            .collect();
        CsrMatrix::from_rows(self.dim(), &rows)
    }
}
