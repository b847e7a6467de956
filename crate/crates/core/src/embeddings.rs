//! Precomputed sentence-embedding tables and the three pair features built
//! from them: the concatenated headline/body document vectors, their cosine,
//! and the best headline-to-body-sentence cosine.
//!
//! File format, one JSON object per line:
//! a header `{"dim": D, "encoder": NAME}` followed by rows
//! `{"id": "PAIR_ID:SIDE:INDEX", "v": [D reals]}` with SIDE `h` or `b`.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Headline,
    Body,
}

impl Side {
    pub fn tag(self) -> &'static str {
        match self {
            Side::Headline => "h",
            Side::Body => "b",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SentenceKey {
    pub pair_id: String,
    pub side: Side,
    pub index: usize,
}

impl SentenceKey {
    pub fn new(pair_id: impl Into<String>, side: Side, index: usize) -> Self {
        SentenceKey {
            pair_id: pair_id.into(),
            side,
            index,
        }
    }
}

impl fmt::Display for SentenceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.pair_id, self.side.tag(), self.index)
    }
}

impl FromStr for SentenceKey {
    type Err = Error;

    /// Pair ids may themselves contain `:`, so the key is split from the right.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Embedding(format!("malformed sentence key {s:?}"));
        let mut parts = s.rsplitn(3, ':');
        let index = parts.next().ok_or_else(bad)?.parse::<usize>().map_err(|_| bad())?;
        let side = match parts.next().ok_or_else(bad)? {
            "h" => Side::Headline,
            "b" => Side::Body,
            _ => return Err(bad()),
        };
        let pair_id = parts.next().filter(|p| !p.is_empty()).ok_or_else(bad)?;
        Ok(SentenceKey::new(pair_id, side, index))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct PairRows {
    headline: Vec<(usize, usize)>,
    body: Vec<(usize, usize)>,
}

/// Sentence key → vector map with a fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    encoder: String,
    data: Vec<f64>,
    /// pair id → (sentence index, row) per side, kept sorted by sentence index.
    rows: HashMap<String, PairRows>,
    n_entries: usize,
}

#[derive(Deserialize)]
struct Header {
    dim: usize,
    encoder: String,
}

#[derive(Serialize, Deserialize)]
struct Row {
    id: String,
    v: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(dim: usize, encoder: impl Into<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Embedding("dimension must be positive".into()));
        }
        Ok(EmbeddingTable {
            dim,
            encoder: encoder.into(),
            data: Vec::new(),
            rows: HashMap::new(),
            n_entries: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn encoder(&self) -> &str {
        &self.encoder
    }

    pub fn len(&self) -> usize {
        self.n_entries
    }

    pub fn is_empty(&self) -> bool {
        self.n_entries == 0
    }

    pub fn insert(&mut self, key: SentenceKey, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::Embedding(format!(
                "{key}: vector has {} values, table dim is {}",
                v.len(),
                self.dim
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Embedding(format!("{key}: non-finite value")));
        }
        let entry = self.rows.entry(key.pair_id.clone()).or_default();
        let side = match key.side {
            Side::Headline => &mut entry.headline,
            Side::Body => &mut entry.body,
        };
        let pos = match side.binary_search_by_key(&key.index, |&(i, _)| i) {
            Ok(_) => return Err(Error::Embedding(format!("duplicate key {key}"))),
            Err(p) => p,
        };
        side.insert(pos, (key.index, self.data.len() / self.dim));
        self.data.extend_from_slice(v);
        self.n_entries += 1;
        Ok(())
    }

    pub fn get(&self, key: &SentenceKey) -> Option<&[f64]> {
        let side = self.side_rows(&key.pair_id, key.side)?;
        let pos = side.binary_search_by_key(&key.index, |&(i, _)| i).ok()?;
        Some(self.row(side[pos].1))
    }

    fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    fn side_rows(&self, pair_id: &str, side: Side) -> Option<&[(usize, usize)]> {
        let p = self.rows.get(pair_id)?;
        Some(match side {
            Side::Headline => &p.headline,
            Side::Body => &p.body,
        })
    }

    /// Sentence vectors of one side in sentence-index order.
    pub fn sentences(&self, pair_id: &str, side: Side) -> Vec<&[f64]> {
        self.side_rows(pair_id, side)
            .map(|rows| rows.iter().map(|&(_, r)| self.row(r)).collect())
            .unwrap_or_default()
    }

    /// Every key, sorted by pair id, side (headline first) and index.
    pub fn keys(&self) -> Vec<SentenceKey> {
        let mut pairs: Vec<&String> = self.rows.keys().collect();
        pairs.sort();
        let mut out = Vec::with_capacity(self.n_entries);
        for p in pairs {
            for side in [Side::Headline, Side::Body] {
                for &(i, _) in self.side_rows(p, side).unwrap_or_default() {
                    out.push(SentenceKey::new(p.clone(), side, i));
                }
            }
        }
        out
    }

    /// Copy with every vector multiplied by `c`.
    pub fn scaled(&self, c: f64) -> EmbeddingTable {
        let mut t = self.clone();
        t.data.iter_mut().for_each(|x| *x *= c);
        t
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        let header = serde_json::json!({"dim": self.dim, "encoder": self.encoder});
        writeln!(w, "{header}").map_err(io)?;
        for key in self.keys() {
            let row = Row {
                id: key.to_string(),
                v: self.get(&key).expect("key listed by table").to_vec(),
            };
            let line = serde_json::to_string(&row).map_err(|e| Error::Embedding(e.to_string()))?;
            writeln!(w, "{line}").map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

pub fn load_embedding_table(path: &Path) -> Result<EmbeddingTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let where_ = |n: usize| format!("{}: line {}", path.display(), n + 1);
    let (n, first) = lines
        .next()
        .ok_or_else(|| Error::Embedding(format!("{}: missing header", path.display())))?;
    let first = first.map_err(|e| Error::io(path, e))?;
    let header: Header = serde_json::from_str(first.trim_start_matches('\u{feff}'))
        .map_err(|e| Error::Embedding(format!("{}: malformed header: {e}", where_(n))))?;
    let mut table = EmbeddingTable::new(header.dim, header.encoder)
        .map_err(|e| Error::Embedding(format!("{}: {e}", where_(n))))?;
    for (n, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Row =
            serde_json::from_str(&line).map_err(|e| Error::Embedding(format!("{}: malformed row: {e}", where_(n))))?;
        let key: SentenceKey = row.id.parse().map_err(|e| Error::Embedding(format!("{}: {e}", where_(n))))?;
        table
            .insert(key, &row.v)
            .map_err(|e| Error::Embedding(format!("{}: {e}", where_(n))))?;
    }
    Ok(table)
}

/// Cosine similarity, 0 when either vector is zero, clamped to [-1, 1].
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// Mean of the sentence vectors of one side of a pair.
pub fn document_vector(table: &EmbeddingTable, pair_id: &str, side: Side) -> Result<Vec<f64>> {
    let sents = table.sentences(pair_id, side);
    if sents.is_empty() {
        return Err(Error::Embedding(format!(
            "no {} vectors for pair {pair_id:?}",
            match side {
                Side::Headline => "headline",
                Side::Body => "body",
            }
        )));
    }
    let mut mean = vec![0.0; table.dim()];
    for s in &sents {
        for (m, x) in mean.iter_mut().zip(*s) {
            *m += x;
        }
    }
    let n = sents.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(mean)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFeature {
    /// `[headline document vector | body document vector]`.
    pub pair_vector: Vec<f64>,
    pub cos_sim: f64,
    pub max_sent_sim: f64,
}

pub fn embedding_features(table: &EmbeddingTable, pair_id: &str) -> Result<EmbeddingFeature> {
    let h = document_vector(table, pair_id, Side::Headline)?;
    let b = document_vector(table, pair_id, Side::Body)?;
    let cos_sim = cosine(&h, &b);
    let max_sent_sim = table
        .sentences(pair_id, Side::Body)
        .into_iter()
        .map(|s| cosine(&h, s))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut pair_vector = h;
    pair_vector.extend_from_slice(&b);
    Ok(EmbeddingFeature {
        pair_vector,
        cos_sim,
        max_sent_sim,
    })
}

/// Which embedding tables feed the classifier and how many of the three
/// embedding features each contributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmbeddingPreset {
    #[default]
    None,
    Inf1,
    Inf3,
    Bert1,
    Bert3,
    Bert3Inf3,
    /// Pair vector from the BERT-style table and nothing else.
    Bert1Only,
}

/// Features drawn from one table under a preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingUse {
    PairVectorOnly,
    AllThree,
}

impl EmbeddingPreset {
    pub const ALL: [EmbeddingPreset; 7] = [
        EmbeddingPreset::None,
        EmbeddingPreset::Inf1,
        EmbeddingPreset::Inf3,
        EmbeddingPreset::Bert1,
        EmbeddingPreset::Bert3,
        EmbeddingPreset::Bert3Inf3,
        EmbeddingPreset::Bert1Only,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EmbeddingPreset::None => "none",
            EmbeddingPreset::Inf1 => "inf1",
            EmbeddingPreset::Inf3 => "inf3",
            EmbeddingPreset::Bert1 => "bert1",
            EmbeddingPreset::Bert3 => "bert3",
            EmbeddingPreset::Bert3Inf3 => "bert3+inf3",
            EmbeddingPreset::Bert1Only => "bert1_only",
        }
    }

    pub fn infersent(self) -> Option<EmbeddingUse> {
        match self {
            EmbeddingPreset::Inf1 => Some(EmbeddingUse::PairVectorOnly),
            EmbeddingPreset::Inf3 | EmbeddingPreset::Bert3Inf3 => Some(EmbeddingUse::AllThree),
            _ => None,
        }
    }

    pub fn bert(self) -> Option<EmbeddingUse> {
        match self {
            EmbeddingPreset::Bert1 | EmbeddingPreset::Bert1Only => Some(EmbeddingUse::PairVectorOnly),
            EmbeddingPreset::Bert3 | EmbeddingPreset::Bert3Inf3 => Some(EmbeddingUse::AllThree),
            _ => None,
        }
    }

    /// True when lexical and topic features are switched off.
    pub fn embeddings_only(self) -> bool {
        self == EmbeddingPreset::Bert1Only
    }
}

impl fmt::Display for EmbeddingPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EmbeddingPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase();
        EmbeddingPreset::ALL
            .into_iter()
            .find(|p| p.as_str() == norm)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown embedding preset {s:?}")))
    }
}
