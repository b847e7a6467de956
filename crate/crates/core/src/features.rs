//! Feature-set configuration, transforms fitted on a training corpus, and
//! assembly of per-pair feature rows in a fixed segment order: BoW/BoC,
//! co-occurrence, overlap/polarity/refuting, topic segments, embedding
//! segments.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::container::{Container, SectionData};
use crate::corpus::{Corpus, LabeledPair};
use crate::embeddings::{embedding_features, EmbeddingPreset, EmbeddingTable, EmbeddingUse};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::lexical::{
    cooccurrence_features, overlap_polarity_refuting, BowBocVocabularies, FeatureVector, Layout, LexiconConfig,
    TermFrequencyVector, COOCCURRENCE_DIM, OVERLAP_DIM,
};
use crate::matrix::CsrMatrix;
use crate::seed;
use crate::text::Vocabulary;
use crate::topics::{
    fit_topic_model, topic_concat_feature, topic_cosine_feature, topic_vocabulary, DocTerms, LdaModel, LsiModel,
    NmfModel, TermDocMatrix, TopicKind, TopicModel, TopicParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureSetConfig {
    pub bow_boc: bool,
    pub cooccurrence: bool,
    pub overlap_polarity_refuting: bool,
    pub nmf_concat: bool,
    pub lsi_concat: bool,
    pub nmf_cos: bool,
    pub lda_cos: bool,
    pub embedding_preset: EmbeddingPreset,
}

impl Default for FeatureSetConfig {
    fn default() -> Self {
        Self::base()
    }
}

impl FeatureSetConfig {
    /// BoW/BoC, co-occurrence and all four topic features; no overlap cues,
    /// no embeddings.
    pub fn base() -> Self {
        FeatureSetConfig {
            bow_boc: true,
            cooccurrence: true,
            overlap_polarity_refuting: false,
            nmf_concat: true,
            lsi_concat: true,
            nmf_cos: true,
            lda_cos: true,
            embedding_preset: EmbeddingPreset::None,
        }
    }

    pub fn none() -> Self {
        FeatureSetConfig {
            bow_boc: false,
            cooccurrence: false,
            overlap_polarity_refuting: false,
            nmf_concat: false,
            lsi_concat: false,
            nmf_cos: false,
            lda_cos: false,
            embedding_preset: EmbeddingPreset::None,
        }
    }

    /// Applies an embedding preset; `bert1_only` also switches off every
    /// lexical and topic feature.
    pub fn with_preset(mut self, preset: EmbeddingPreset) -> Self {
        self.embedding_preset = preset;
        if preset.embeddings_only() {
            self = FeatureSetConfig {
                embedding_preset: preset,
                ..Self::none()
            };
        }
        self
    }

    pub fn needs(&self, kind: TopicKind) -> bool {
        match kind {
            TopicKind::Nmf => self.nmf_concat || self.nmf_cos,
            TopicKind::Lsi => self.lsi_concat,
            TopicKind::Lda => self.lda_cos,
        }
    }

    pub fn any_topic(&self) -> bool {
        [TopicKind::Nmf, TopicKind::Lsi, TopicKind::Lda].iter().any(|&k| self.needs(k))
    }

    pub fn validate(&self) -> Result<()> {
        let lexical = self.bow_boc || self.cooccurrence || self.overlap_polarity_refuting;
        if !lexical && !self.any_topic() && self.embedding_preset == EmbeddingPreset::None {
            return Err(Error::config("features", "at least one feature must be enabled"));
        }
        if self.embedding_preset.embeddings_only() && (lexical || self.any_topic()) {
            return Err(Error::config(
                "embedding_preset",
                "bert1_only cannot be combined with lexical or topic features",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformParams {
    /// Cap of each of the four BoW/BoC vocabularies.
    pub vocab_cap: usize,
    pub topic_vocab_cap: usize,
    /// `topic.seed` is the global seed; each model derives its own stream.
    pub topic: TopicParams,
}

impl Default for TransformParams {
    fn default() -> Self {
        TransformParams {
            vocab_cap: 5000,
            topic_vocab_cap: 5000,
            topic: TopicParams::default(),
        }
    }
}

/// Everything learned from the training corpus. `provenance` is the text
/// digest of that corpus, which the pipeline checks before reuse.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedTransforms {
    pub provenance: String,
    pub bow_boc: Option<BowBocVocabularies>,
    pub topic_vocab: Option<Vocabulary>,
    pub nmf: Option<NmfModel>,
    pub lsi: Option<LsiModel>,
    pub lda: Option<LdaModel>,
}

/// Distinct headlines and distinct bodies, in order of first appearance.
pub fn distinct_texts(c: &Corpus) -> (Vec<&str>, Vec<&str>) {
    let mut seen_h = std::collections::HashSet::new();
    let mut seen_b = std::collections::HashSet::new();
    let mut heads = Vec::new();
    let mut bodies = Vec::new();
    for p in c.pairs() {
        if seen_h.insert(p.headline.as_str()) {
            heads.push(p.headline.as_str());
        }
        if seen_b.insert(p.body.as_str()) {
            bodies.push(p.body.as_str());
        }
    }
    (heads, bodies)
}

/// Fits the vocabularies and topic models the feature set needs, using the
/// training corpus only. Topic models see each distinct headline and each
/// distinct body as a separate document.
pub fn fit_transforms(train: &Corpus, features: &FeatureSetConfig, params: &TransformParams) -> Result<FittedTransforms> {
    features.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training corpus".into()));
    }
    let (heads, bodies) = distinct_texts(train);
    let bow_boc = if features.bow_boc {
        log::info!("fitting BoW/BoC vocabularies on {} headlines, {} bodies", heads.len(), bodies.len());
        Some(BowBocVocabularies::fit(&heads, &bodies, params.vocab_cap)?)
    } else {
        None
    };
    let mut out = FittedTransforms {
        provenance: train.text_digest(),
        bow_boc,
        topic_vocab: None,
        nmf: None,
        lsi: None,
        lda: None,
    };
    if features.any_topic() {
        let docs: Vec<&str> = heads.iter().chain(&bodies).copied().collect();
        let vocab = topic_vocabulary(&docs, params.topic_vocab_cap)?;
        let matrix = TermDocMatrix::from_texts(&docs, &vocab)?;
        for kind in [TopicKind::Nmf, TopicKind::Lsi, TopicKind::Lda] {
            if !features.needs(kind) {
                continue;
            }
            let p = TopicParams {
                seed: seed::derive(params.topic.seed, kind.as_str()),
                ..params.topic.clone()
            };
            log::info!(
                "fitting {kind} with k = {} on {} documents x {} terms",
                p.k,
                matrix.n_docs(),
                matrix.n_terms()
            );
            match fit_topic_model(kind, &matrix, &p)? {
                TopicModel::Nmf(m) => out.nmf = Some(m),
                TopicModel::Lsi(m) => out.lsi = Some(m),
                TopicModel::Lda(m) => out.lda = Some(m),
            }
        }
        out.topic_vocab = Some(vocab);
    }
    Ok(out)
}

const TRANSFORMS_KIND: &str = "fitted-transforms";

impl FittedTransforms {
    /// Fails unless these transforms were fitted on exactly `train`.
    pub fn check_provenance(&self, train: &Corpus) -> Result<()> {
        let digest = train.text_digest();
        if self.provenance != digest {
            return Err(Error::Leakage(format!(
                "transforms were fitted on corpus {} but the training corpus {:?} has digest {}",
                self.provenance, train.name, digest
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut c = Container::new(TRANSFORMS_KIND);
        c.push_text("provenance", &self.provenance)?;
        if let Some(v) = &self.bow_boc {
            c.push_text("vocab.word_headline", &v.word_headline.to_text())?;
            c.push_text("vocab.word_body", &v.word_body.to_text())?;
            c.push_text("vocab.char_headline", &v.char_headline.to_text())?;
            c.push_text("vocab.char_body", &v.char_body.to_text())?;
        }
        if let Some(v) = &self.topic_vocab {
            c.push_text("vocab.topic", &v.to_text())?;
        }
        if let Some(m) = &self.nmf {
            c.push("nmf.w", &[m.n_terms(), m.k()], SectionData::F64(m.w().to_vec()))?;
            c.push("nmf.h", &[m.n_docs(), m.k()], SectionData::F64(m.h().to_vec()))?;
            c.push(
                "nmf.objective",
                &[m.objective_history().len()],
                SectionData::F64(m.objective_history().to_vec()),
            )?;
            c.push("nmf.meta", &[2], SectionData::U64(vec![m.iters() as u64, m.seed()]))?;
        }
        if let Some(m) = &self.lsi {
            c.push("lsi.u", &[m.n_terms(), m.k()], SectionData::F64(m.u().to_vec()))?;
            c.push("lsi.s", &[m.k()], SectionData::F64(m.singular_values().to_vec()))?;
            c.push("lsi.meta", &[1], SectionData::U64(vec![m.seed()]))?;
        }
        if let Some(m) = &self.lda {
            c.push("lda.phi", &[m.k(), m.n_terms()], SectionData::F64(m.phi().to_vec()))?;
            c.push("lda.hyper", &[2], SectionData::F64(vec![m.alpha(), m.beta()]))?;
            c.push("lda.meta", &[1], SectionData::U64(vec![m.seed()]))?;
        }
        c.save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let c = Container::load(path, TRANSFORMS_KIND)?;
        let has = |name: &str| c.sections.iter().any(|s| s.name == name);
        let vocab = |name: &str| -> Result<Vocabulary> { Vocabulary::from_text(c.text(name)?) };
        let bow_boc = if has("vocab.word_headline") {
            Some(BowBocVocabularies {
                word_headline: vocab("vocab.word_headline")?,
                word_body: vocab("vocab.word_body")?,
                char_headline: vocab("vocab.char_headline")?,
                char_body: vocab("vocab.char_body")?,
            })
        } else {
            None
        };
        let topic_vocab = if has("vocab.topic") { Some(vocab("vocab.topic")?) } else { None };
        let dims = |shape: &[u64]| -> Result<(usize, usize)> {
            match shape {
                [a, b] => Ok((*a as usize, *b as usize)),
                _ => Err(Error::Format("expected a 2-d factor".into())),
            }
        };
        let nmf = if has("nmf.w") {
            let (shape, w) = c.f64s("nmf.w")?;
            let (n_terms, k) = dims(shape)?;
            let meta = c.u64s("nmf.meta")?.1;
            Some(NmfModel::from_parts(
                k,
                n_terms,
                w.to_vec(),
                c.f64s("nmf.h")?.1.to_vec(),
                meta[0] as usize,
                meta[1],
                c.f64s("nmf.objective")?.1.to_vec(),
            )?)
        } else {
            None
        };
        let lsi = if has("lsi.u") {
            let (shape, u) = c.f64s("lsi.u")?;
            let (n_terms, k) = dims(shape)?;
            Some(LsiModel::from_parts(
                k,
                n_terms,
                u.to_vec(),
                c.f64s("lsi.s")?.1.to_vec(),
                c.u64s("lsi.meta")?.1[0],
            )?)
        } else {
            None
        };
        let lda = if has("lda.phi") {
            let (shape, phi) = c.f64s("lda.phi")?;
            let (k, n_terms) = dims(shape)?;
            let hyper = c.f64s("lda.hyper")?.1;
            Some(LdaModel::from_parts(
                k,
                n_terms,
                hyper[0],
                hyper[1],
                c.u64s("lda.meta")?.1[0],
                phi.to_vec(),
            )?)
        } else {
            None
        };
        Ok(FittedTransforms {
            provenance: c.text("provenance")?.to_string(),
            bow_boc,
            topic_vocab,
            nmf,
            lsi,
            lda,
        })
    }
}

/// Precomputed sentence-embedding tables, by encoder family.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingTables {
    pub infersent: Option<EmbeddingTable>,
    pub bert: Option<EmbeddingTable>,
}

/// Feature set plus everything it reads from.
#[derive(Debug, Clone, Copy)]
pub struct Featurizer<'a> {
    pub features: &'a FeatureSetConfig,
    pub transforms: &'a FittedTransforms,
    pub tables: &'a EmbeddingTables,
    pub lexicon: &'a LexiconConfig,
}

/// Per-text quantities shared by every pair that uses the text.
#[derive(Debug, Clone, Default)]
struct TextFeatures {
    word_tf: Option<TermFrequencyVector>,
    char_tf: Option<TermFrequencyVector>,
    nmf: Option<Vec<f64>>,
    lsi: Option<Vec<f64>>,
    lda: Option<Vec<f64>>,
}

fn unfitted(name: &str) -> Error {
    Error::Unfitted(format!("{name} is enabled but was not fitted"))
}

fn embedding_table<'t>(table: &'t Option<EmbeddingTable>, family: &str) -> Result<&'t EmbeddingTable> {
    table
        .as_ref()
        .ok_or_else(|| Error::Embedding(format!("preset needs a {family} table but none was loaded")))
}

impl<'a> Featurizer<'a> {
    /// Segment layout; depends only on the configuration and fitted state.
    pub fn layout(&self) -> Result<Layout> {
        let f = self.features;
        f.validate()?;
        let t = self.transforms;
        let mut layout = Layout::default();
        if f.bow_boc {
            layout.push("bow_boc", t.bow_boc.as_ref().ok_or_else(|| unfitted("bow_boc"))?.dim());
        }
        if f.cooccurrence {
            layout.push("cooccurrence", COOCCURRENCE_DIM);
        }
        if f.overlap_polarity_refuting {
            layout.push("overlap_polarity_refuting", OVERLAP_DIM);
        }
        if f.nmf_concat {
            layout.push("nmf_concat", 2 * t.nmf.as_ref().ok_or_else(|| unfitted("nmf_concat"))?.k());
        }
        if f.lsi_concat {
            layout.push("lsi_concat", 2 * t.lsi.as_ref().ok_or_else(|| unfitted("lsi_concat"))?.k());
        }
        if f.nmf_cos {
            t.nmf.as_ref().ok_or_else(|| unfitted("nmf_cos"))?;
            layout.push("nmf_cos", 1);
        }
        if f.lda_cos {
            t.lda.as_ref().ok_or_else(|| unfitted("lda_cos"))?;
            layout.push("lda_cos", 1);
        }
        if f.any_topic() && t.topic_vocab.is_none() {
            return Err(unfitted("topic vocabulary"));
        }
        for (family, table, usage) in self.embedding_uses() {
            let d = embedding_table(table, family)?.dim();
            layout.push(format!("{family}_pair_vector"), 2 * d);
            if usage == EmbeddingUse::AllThree {
                layout.push(format!("{family}_cos"), 1);
                layout.push(format!("{family}_max_sent"), 1);
            }
        }
        Ok(layout)
    }

    fn embedding_uses(&self) -> Vec<(&'static str, &'a Option<EmbeddingTable>, EmbeddingUse)> {
        let p = self.features.embedding_preset;
        let mut out = Vec::new();
        if let Some(u) = p.infersent() {
            out.push(("infersent", &self.tables.infersent, u));
        }
        if let Some(u) = p.bert() {
            out.push(("bert", &self.tables.bert, u));
        }
        out
    }

    fn text_features(&self, text: &str, headline: bool) -> TextFeatures {
        let f = self.features;
        let t = self.transforms;
        let mut out = TextFeatures::default();
        if let (true, Some(v)) = (f.bow_boc, &t.bow_boc) {
            let (w, c) = if headline { v.headline_tf(text) } else { v.body_tf(text) };
            out.word_tf = Some(w);
            out.char_tf = Some(c);
        }
        if let (true, Some(vocab)) = (f.any_topic(), &t.topic_vocab) {
            let doc = DocTerms::from(&crate::lexical::tf_vector(text, vocab));
            if f.needs(TopicKind::Nmf) {
                out.nmf = t.nmf.as_ref().map(|m| m.project(&doc));
            }
            if f.needs(TopicKind::Lsi) {
                out.lsi = t.lsi.as_ref().map(|m| m.project(&doc));
            }
            if f.needs(TopicKind::Lda) {
                out.lda = t.lda.as_ref().map(|m| m.project(&doc));
            }
        }
        out
    }

    /// Sparse row with strictly increasing columns in layout order.
    fn pair_row(&self, pair: &LabeledPair, head: &TextFeatures, body: &TextFeatures) -> Result<Vec<(usize, f64)>> {
        let f = self.features;
        let mut row = Vec::new();
        let mut base = 0;
        let dense = |row: &mut Vec<(usize, f64)>, base: &mut usize, values: &[f64]| {
            row.extend(values.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, &v)| (*base + i, v)));
            *base += values.len();
        };
        if f.bow_boc {
            let v = self.transforms.bow_boc.as_ref().ok_or_else(|| unfitted("bow_boc"))?;
            let pick = |x: &Option<TermFrequencyVector>| x.clone().expect("computed when bow_boc is on");
            let entries = v.concat(&(pick(&head.word_tf), pick(&head.char_tf)), &(pick(&body.word_tf), pick(&body.char_tf)));
            row.extend(entries.into_iter().map(|(i, c)| (base + i, c)));
            base += v.dim();
        }
        if f.cooccurrence {
            dense(&mut row, &mut base, &cooccurrence_features(&pair.headline, &pair.body, self.lexicon));
        }
        if f.overlap_polarity_refuting {
            dense(&mut row, &mut base, &overlap_polarity_refuting(&pair.headline, &pair.body, self.lexicon));
        }
        let proj = |x: &Option<Vec<f64>>, name: &str| x.clone().ok_or_else(|| unfitted(name));
        if f.nmf_concat {
            dense(&mut row, &mut base, &topic_concat_feature(&proj(&head.nmf, "nmf")?, &proj(&body.nmf, "nmf")?));
        }
        if f.lsi_concat {
            dense(&mut row, &mut base, &topic_concat_feature(&proj(&head.lsi, "lsi")?, &proj(&body.lsi, "lsi")?));
        }
        if f.nmf_cos {
            dense(&mut row, &mut base, &[topic_cosine_feature(&proj(&head.nmf, "nmf")?, &proj(&body.nmf, "nmf")?)]);
        }
        if f.lda_cos {
            dense(&mut row, &mut base, &[topic_cosine_feature(&proj(&head.lda, "lda")?, &proj(&body.lda, "lda")?)]);
        }
        for (family, table, usage) in self.embedding_uses() {
            let e = embedding_features(embedding_table(table, family)?, &pair.pair_id)?;
            dense(&mut row, &mut base, &e.pair_vector);
            if usage == EmbeddingUse::AllThree {
                dense(&mut row, &mut base, &[e.cos_sim, e.max_sent_sim]);
            }
        }
        Ok(row)
    }

    /// Dense feature vector of one pair.
    pub fn assemble(&self, pair: &LabeledPair) -> Result<FeatureVector> {
        let layout = self.layout()?;
        let head = self.text_features(&pair.headline, true);
        let body = self.text_features(&pair.body, false);
        let mut values = vec![0.0; layout.dim()];
        for (i, v) in self.pair_row(pair, &head, &body)? {
            values[i] = v;
        }
        Ok(FeatureVector { values, layout })
    }

    /// Feature rows of every pair in corpus order. Per-text work runs once
    /// per distinct headline and body.
    pub fn featurize(&self, corpus: &Corpus, exec: Execution) -> Result<FeatureMatrix> {
        let layout = self.layout()?;
        let (heads, bodies) = distinct_texts(corpus);
        let head_feats = exec.map(&heads, |t| self.text_features(t, true));
        let body_feats = exec.map(&bodies, |t| self.text_features(t, false));
        let head_idx: HashMap<&str, usize> = heads.iter().enumerate().map(|(i, t)| (*t, i)).collect();
        let body_idx: HashMap<&str, usize> = bodies.iter().enumerate().map(|(i, t)| (*t, i)).collect();
        let rows = exec.map(corpus.pairs(), |p| {
            self.pair_row(
                p,
                &head_feats[head_idx[p.headline.as_str()]],
                &body_feats[body_idx[p.body.as_str()]],
            )
        });
        let mut matrix = CsrMatrix::new(layout.dim());
        for r in rows {
            matrix.push_sparse_row(r?)?;
        }
        Ok(FeatureMatrix {
            rows: matrix,
            layout,
            pair_ids: corpus.pairs().iter().map(|p| p.pair_id.clone()).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: CsrMatrix,
    pub layout: Layout,
    pub pair_ids: Vec<String>,
}

const FEATURE_MAGIC: &[u8; 8] = b"STNCFEAT";
const FEATURE_VERSION: u32 = 1;

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.n_rows()
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn dense_row(&self, r: usize) -> Vec<f64> {
        self.rows.dense_row(r)
    }

    /// Writes the header (magic, version, n_rows, dim, layout text) followed
    /// by row-major little-endian f32 values, streaming one row at a time.
    pub fn write(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        let layout = self.layout.to_text();
        w.write_all(FEATURE_MAGIC).map_err(io)?;
        w.write_all(&FEATURE_VERSION.to_le_bytes()).map_err(io)?;
        w.write_all(&(self.n_rows() as u64).to_le_bytes()).map_err(io)?;
        w.write_all(&(self.dim() as u64).to_le_bytes()).map_err(io)?;
        w.write_all(&(layout.len() as u32).to_le_bytes()).map_err(io)?;
        w.write_all(layout.as_bytes()).map_err(io)?;
        let mut buf = vec![0u8; 4 * self.dim()];
        for r in 0..self.n_rows() {
            buf.fill(0);
            let (idx, val) = self.rows.row(r);
            for (&i, &v) in idx.iter().zip(val) {
                buf[4 * i as usize..4 * i as usize + 4].copy_from_slice(&(v as f32).to_le_bytes());
            }
            w.write_all(&buf).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    /// Human-readable `name = offset,len` sidecar with the row count.
    pub fn write_layout_sidecar(&self, path: &Path) -> Result<()> {
        let text = format!(
            "# n_rows = {}\n# dim = {}\n{}",
            self.n_rows(),
            self.dim(),
            self.layout.to_text()
        );
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Reads a matrix written by [`FeatureMatrix::write`]. Values come back
    /// as the stored f32; pair ids are not part of the file.
    pub fn read(path: &Path) -> Result<(Layout, CsrMatrix)> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(f);
        let bad = |m: &str| Error::Format(format!("{}: {m}", path.display()));
        let mut read = |n: usize| -> Result<Vec<u8>> {
            let mut b = vec![0u8; n];
            r.read_exact(&mut b).map_err(|_| bad("truncated feature matrix"))?;
            Ok(b)
        };
        if read(8)? != FEATURE_MAGIC {
            return Err(bad("not a feature matrix"));
        }
        let version = u32::from_le_bytes(read(4)?.try_into().expect("4 bytes"));
        if version != FEATURE_VERSION {
            return Err(bad(&format!("unsupported feature matrix version {version}")));
        }
        let n_rows = u64::from_le_bytes(read(8)?.try_into().expect("8 bytes")) as usize;
        let dim = u64::from_le_bytes(read(8)?.try_into().expect("8 bytes")) as usize;
        let layout_len = u32::from_le_bytes(read(4)?.try_into().expect("4 bytes")) as usize;
        let layout_text = String::from_utf8(read(layout_len)?).map_err(|_| bad("layout is not UTF-8"))?;
        let layout = Layout::from_text(&layout_text)?;
        if layout.dim() != dim {
            return Err(bad("layout does not match the declared dimension"));
        }
        let mut m = CsrMatrix::new(dim);
        for _ in 0..n_rows {
            let b = read(4 * dim)?;
            let row: Vec<f64> = b
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
                .collect();
            m.push_dense_row(&row)?;
        }
        Ok((layout, m))
    }
}
