//! Topic models over a term-document matrix (NMF, LSI, LDA), their document
//! projections, and the concatenation / cosine-distance pair features built
//! from them.

mod lda;
mod lsi;
mod nmf;

pub use lda::{LdaModel, LdaParams};
pub use lsi::LsiModel;
pub use nmf::{NmfModel, NmfParams};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::lexical::{tf_vector, TermFrequencyVector};
use crate::matrix::CsrMatrix;
use crate::text::{build_vocabulary, GramRecipe, Vocabulary};

/// Non-negative term × document counts. Stored both document-major and
/// term-major so either orientation can be walked sparsely.
#[derive(Debug, Clone, PartialEq)]
pub struct TermDocMatrix {
    by_doc: CsrMatrix,
    by_term: CsrMatrix,
}

impl TermDocMatrix {
    /// `doc_rows` holds one row per document over `n_terms` columns.
    pub fn from_doc_rows(doc_rows: CsrMatrix) -> Result<Self> {
        if doc_rows.values().iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidArgument("term-document entries must be finite and non-negative".into()));
        }
        let by_term = doc_rows.transpose();
        Ok(TermDocMatrix {
            by_doc: doc_rows,
            by_term,
        })
    }

    /// Dense `terms × docs` input.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n_docs = rows.first().map_or(0, Vec::len);
        let by_term = CsrMatrix::from_dense_rows(n_docs, rows)?;
        Self::from_doc_rows(by_term.transpose())
    }

    pub fn from_texts<S: AsRef<str>>(texts: &[S], vocab: &Vocabulary) -> Result<Self> {
        let mut rows = CsrMatrix::new(vocab.size());
        for t in texts {
            rows.push_sparse_row(tf_vector(t.as_ref(), vocab).iter())?;
        }
        Self::from_doc_rows(rows)
    }

    pub fn n_terms(&self) -> usize {
        self.by_doc.n_cols()
    }

    pub fn n_docs(&self) -> usize {
        self.by_doc.n_rows()
    }

    pub fn doc(&self, j: usize) -> (&[u32], &[f64]) {
        self.by_doc.row(j)
    }

    pub fn term(&self, t: usize) -> (&[u32], &[f64]) {
        self.by_term.row(t)
    }

    pub fn doc_terms(&self, j: usize) -> DocTerms {
        let (idx, val) = self.doc(j);
        DocTerms {
            indices: idx.to_vec(),
            values: val.to_vec(),
            dim: self.n_terms(),
        }
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.by_doc.frobenius_sq()
    }

    pub fn nnz(&self) -> usize {
        self.by_doc.nnz()
    }

    fn check_nonempty(&self) -> Result<()> {
        if self.n_docs() == 0 || self.n_terms() == 0 || self.nnz() == 0 {
            return Err(Error::Empty("term-document matrix has no entries".into()));
        }
        Ok(())
    }
}

/// A sparse document column over the topic vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct DocTerms {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
    pub dim: usize,
}

impl DocTerms {
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().zip(&self.values).map(|(&i, &v)| (i as usize, v))
    }

    pub fn zero(dim: usize) -> Self {
        DocTerms {
            indices: Vec::new(),
            values: Vec::new(),
            dim,
        }
    }
}

impl From<&TermFrequencyVector> for DocTerms {
    fn from(tf: &TermFrequencyVector) -> Self {
        DocTerms {
            indices: tf.indices.clone(),
            values: tf.counts.iter().map(|&c| c as f64).collect(),
            dim: tf.dim,
        }
    }
}

/// Word unigrams with stop words and punctuation removed.
pub fn topic_vocabulary<S: AsRef<str>>(texts: &[S], cap: usize) -> Result<Vocabulary> {
    build_vocabulary(texts, cap, GramRecipe::words(&[1]).content_words_only())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TopicKind {
    Nmf,
    Lsi,
    Lda,
}

impl TopicKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TopicKind::Nmf => "nmf",
            TopicKind::Lsi => "lsi",
            TopicKind::Lda => "lda",
        }
    }
}

impl fmt::Display for TopicKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TopicKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nmf" => Ok(TopicKind::Nmf),
            "lsi" => Ok(TopicKind::Lsi),
            "lda" => Ok(TopicKind::Lda),
            other => Err(Error::InvalidArgument(format!("unknown topic model kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicParams {
    pub k: usize,
    pub nmf_iters: usize,
    pub lda_iters: usize,
    /// `None` means 50 / k.
    pub lda_alpha: Option<f64>,
    pub lda_beta: f64,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for TopicParams {
    fn default() -> Self {
        TopicParams {
            k: 300,
            nmf_iters: 200,
            lda_iters: 500,
            lda_alpha: None,
            lda_beta: 0.01,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TopicModel {
    Nmf(NmfModel),
    Lsi(LsiModel),
    Lda(LdaModel),
}

impl TopicModel {
    pub fn kind(&self) -> TopicKind {
        match self {
            TopicModel::Nmf(_) => TopicKind::Nmf,
            TopicModel::Lsi(_) => TopicKind::Lsi,
            TopicModel::Lda(_) => TopicKind::Lda,
        }
    }

    pub fn k(&self) -> usize {
        match self {
            TopicModel::Nmf(m) => m.k(),
            TopicModel::Lsi(m) => m.k(),
            TopicModel::Lda(m) => m.k(),
        }
    }

    pub fn n_terms(&self) -> usize {
        match self {
            TopicModel::Nmf(m) => m.n_terms(),
            TopicModel::Lsi(m) => m.n_terms(),
            TopicModel::Lda(m) => m.n_terms(),
        }
    }

    /// Maps a document's term counts into the k-topic space.
    pub fn project(&self, doc: &DocTerms) -> Result<Vec<f64>> {
        if doc.dim != self.n_terms() {
            return Err(Error::DimensionMismatch {
                expected: self.n_terms(),
                got: doc.dim,
            });
        }
        Ok(match self {
            TopicModel::Nmf(m) => m.project(doc),
            TopicModel::Lsi(m) => m.project(doc),
            TopicModel::Lda(m) => m.project(doc),
        })
    }
}

pub fn fit_topic_model(kind: TopicKind, matrix: &TermDocMatrix, params: &TopicParams) -> Result<TopicModel> {
    matrix.check_nonempty()?;
    if params.k == 0 {
        return Err(Error::InvalidArgument("topic count k must be >= 1".into()));
    }
    Ok(match kind {
        TopicKind::Nmf => TopicModel::Nmf(NmfModel::fit(
            matrix,
            &NmfParams {
                k: params.k,
                iters: params.nmf_iters,
                seed: params.seed,
            },
            params.execution,
        )?),
        TopicKind::Lsi => TopicModel::Lsi(LsiModel::fit(matrix, params.k, params.seed, params.execution)?),
        TopicKind::Lda => TopicModel::Lda(LdaModel::fit(
            matrix,
            &LdaParams {
                k: params.k,
                alpha: params.lda_alpha.unwrap_or(50.0 / params.k as f64),
                beta: params.lda_beta,
                iters: params.lda_iters,
                seed: params.seed,
            },
        )?),
    })
}

/// `[headline projection | body projection]`.
pub fn topic_concat_feature(headline: &[f64], body: &[f64]) -> Vec<f64> {
    headline.iter().chain(body).copied().collect()
}

/// Cosine distance `1 - cos`; defined as 1 when either projection is zero.
pub fn topic_cosine_feature(headline: &[f64], body: &[f64]) -> f64 {
    let dot: f64 = headline.iter().zip(body).map(|(a, b)| a * b).sum();
    let na = headline.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nb = body.iter().map(|b| b * b).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    1.0 - (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// `k × k` Gram matrix `Σ_r row_rᵀ row_r` over a row-major `n × k` factor.
/// Rows are summed in fixed 512-row blocks, then blocks in order, so both
/// execution modes give identical bits.
pub(crate) fn gram(factor: &[f64], k: usize, exec: Execution) -> Vec<f64> {
    const BLOCK: usize = 512;
    let n = factor.len() / k;
    let n_blocks = n.div_ceil(BLOCK);
    let partial = exec.map_range(n_blocks, |b| {
        let mut g = vec![0.0; k * k];
        for r in b * BLOCK..((b + 1) * BLOCK).min(n) {
            let row = &factor[r * k..(r + 1) * k];
            for a in 0..k {
                let ra = row[a];
                if ra == 0.0 {
                    continue;
                }
                let ga = &mut g[a * k..(a + 1) * k];
                for (gab, &rb) in ga.iter_mut().zip(row) {
                    *gab += ra * rb;
                }
            }
        }
        g
    });
    let mut g = vec![0.0; k * k];
    for p in partial {
        for (x, y) in g.iter_mut().zip(p) {
            *x += y;
        }
    }
    g
}
