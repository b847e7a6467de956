//! Term-frequency (BoW/BoC) vectors and the FNC-1 baseline hand-crafted
//! features: headline-gram co-occurrence, token overlap, polarity and
//! refuting cues.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::text::{build_vocabulary, default_stop_words, parse_word_list, token_spans, tokenize, GramRecipe, Vocabulary};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermFrequencyVector {
    pub indices: Vec<u32>,
    pub counts: Vec<u32>,
    pub dim: usize,
}

impl TermFrequencyVector {
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .zip(&self.counts)
            .map(|(&i, &c)| (i as usize, c as f64))
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for (i, c) in self.iter() {
            v[i] = c;
        }
        v
    }
}

/// Raw counts of in-vocabulary grams; out-of-vocabulary grams are ignored.
pub fn tf_from_grams<S: AsRef<str>>(grams: &[S], vocab: &Vocabulary) -> TermFrequencyVector {
    let mut counts: HashMap<u32, u32> = HashMap::new();
    for g in grams {
        if let Some(i) = vocab.get(g.as_ref()) {
            *counts.entry(i as u32).or_insert(0) += 1;
        }
    }
    let mut entries: Vec<(u32, u32)> = counts.into_iter().collect();
    entries.sort_unstable();
    TermFrequencyVector {
        indices: entries.iter().map(|e| e.0).collect(),
        counts: entries.iter().map(|e| e.1).collect(),
        dim: vocab.size(),
    }
}

/// Extracts grams from `text` with the vocabulary's own recipe and counts them.
pub fn tf_vector(text: &str, vocab: &Vocabulary) -> TermFrequencyVector {
    tf_from_grams(&vocab.recipe().extract(text), vocab)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconConfig {
    pub polarity_words: HashSet<String>,
    pub refuting_words: HashSet<String>,
    pub stop_words: HashSet<String>,
}

impl LexiconConfig {
    pub fn new(polarity_words: HashSet<String>, refuting_words: HashSet<String>, stop_words: HashSet<String>) -> Result<Self> {
        if polarity_words.is_empty() || refuting_words.is_empty() || stop_words.is_empty() {
            return Err(Error::InvalidArgument("lexicons must be non-empty".into()));
        }
        Ok(LexiconConfig {
            polarity_words,
            refuting_words,
            stop_words,
        })
    }
}

impl Default for LexiconConfig {
    fn default() -> Self {
        LexiconConfig {
            polarity_words: parse_word_list(include_str!("../config/polarity_words.txt")),
            refuting_words: parse_word_list(include_str!("../config/refuting_words.txt")),
            stop_words: default_stop_words().clone(),
        }
    }
}

/// One named slice of a feature vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Layout {
    segments: Vec<Segment>,
}

impl Layout {
    pub fn push(&mut self, name: impl Into<String>, len: usize) {
        let offset = self.dim();
        self.segments.push(Segment {
            name: name.into(),
            offset,
            len,
        });
    }

    pub fn dim(&self) -> usize {
        self.segments.last().map_or(0, |s| s.offset + s.len)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn get(&self, name: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.name == name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.segments.iter().map(|s| s.name.as_str()).collect()
    }

    /// `name = offset,len` lines.
    pub fn to_text(&self) -> String {
        self.segments
            .iter()
            .map(|s| format!("{} = {},{}\n", s.name, s.offset, s.len))
            .collect()
    }

    pub fn from_text(src: &str) -> Result<Self> {
        let mut layout = Layout::default();
        for line in src.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let bad = || Error::Format(format!("bad layout line {line:?}"));
            let (name, rest) = line.split_once('=').ok_or_else(bad)?;
            let (off, len) = rest.trim().split_once(',').ok_or_else(bad)?;
            let off: usize = off.trim().parse().map_err(|_| bad())?;
            let len: usize = len.trim().parse().map_err(|_| bad())?;
            if off != layout.dim() {
                return Err(bad());
            }
            layout.push(name.trim(), len);
        }
        Ok(layout)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub layout: Layout,
}

impl FeatureVector {
    pub fn segment(&self, name: &str) -> Option<&[f64]> {
        self.layout
            .get(name)
            .map(|s| &self.values[s.offset..s.offset + s.len])
    }
}

/// The four term-frequency vocabularies behind the BoW/BoC segment.
#[derive(Debug, Clone, PartialEq)]
pub struct BowBocVocabularies {
    pub word_headline: Vocabulary,
    pub word_body: Vocabulary,
    pub char_headline: Vocabulary,
    pub char_body: Vocabulary,
}

impl BowBocVocabularies {
    pub fn word_recipe() -> GramRecipe {
        GramRecipe::words(&[1, 2]).with_negation()
    }

    pub fn char_recipe() -> GramRecipe {
        GramRecipe::chars(&[3])
    }

    /// Word uni+bigrams (negation-tagged) and char trigrams, each capped, fitted
    /// separately on headlines and bodies.
    pub fn fit<S: AsRef<str>>(headlines: &[S], bodies: &[S], cap: usize) -> Result<Self> {
        Ok(BowBocVocabularies {
            word_headline: build_vocabulary(headlines, cap, Self::word_recipe())?,
            word_body: build_vocabulary(bodies, cap, Self::word_recipe())?,
            char_headline: build_vocabulary(headlines, cap, Self::char_recipe())?,
            char_body: build_vocabulary(bodies, cap, Self::char_recipe())?,
        })
    }

    pub fn dim(&self) -> usize {
        self.word_headline.size() + self.word_body.size() + self.char_headline.size() + self.char_body.size()
    }

    /// (word TF, char TF) for a headline.
    pub fn headline_tf(&self, text: &str) -> (TermFrequencyVector, TermFrequencyVector) {
        (tf_vector(text, &self.word_headline), tf_vector(text, &self.char_headline))
    }

    pub fn body_tf(&self, text: &str) -> (TermFrequencyVector, TermFrequencyVector) {
        (tf_vector(text, &self.word_body), tf_vector(text, &self.char_body))
    }

    /// Sparse `[BoW_h | BoW_a | BoC_h | BoC_a]` from precomputed TF vectors.
    pub fn concat(
        &self,
        head: &(TermFrequencyVector, TermFrequencyVector),
        body: &(TermFrequencyVector, TermFrequencyVector),
    ) -> Vec<(usize, f64)> {
        let mut out = Vec::with_capacity(head.0.indices.len() + head.1.indices.len() + body.0.indices.len() + body.1.indices.len());
        let mut base = 0;
        for tf in [&head.0, &body.0, &head.1, &body.1] {
            out.extend(tf.iter().map(|(i, c)| (base + i, c)));
            base += tf.dim;
        }
        out
    }

    pub fn feature(&self, headline: &str, body: &str) -> Vec<(usize, f64)> {
        self.concat(&self.headline_tf(headline), &self.body_tf(body))
    }
}

pub const COOCCURRENCE_WINDOWS: [Option<usize>; 3] = [Some(100), Some(255), None];
pub const COOCCURRENCE_FAMILIES: [&str; 8] = ["word1", "word2", "word4", "char2", "char4", "char8", "char16", "stop"];
pub const COOCCURRENCE_DIM: usize = 24;

/// Adds one occurrence ending at char offset `end` into the three window cells.
fn credit(cells: &mut [f64], end: usize) {
    for (w, window) in COOCCURRENCE_WINDOWS.iter().enumerate() {
        if window.is_none_or(|limit| end <= limit) {
            cells[w] += 1.0;
        }
    }
}

/// 8 gram families × 3 body windows (first 100 chars, first 255 chars, whole
/// body), family-major. Each cell counts occurrences, inside the window, of the
/// distinct headline grams of that family. A body gram is inside a window when
/// it ends at or before the window's last char.
pub fn cooccurrence_features(headline: &str, body: &str, cfg: &LexiconConfig) -> [f64; COOCCURRENCE_DIM] {
    let mut out = [0.0; COOCCURRENCE_DIM];
    let head_lower = headline.to_lowercase();
    let body_lower = body.to_lowercase();
    let word_spans = |s: &str| {
        token_spans(s)
            .into_iter()
            .filter(|sp| sp.token.chars().any(char::is_alphanumeric))
            .collect::<Vec<_>>()
    };
    let head_words: Vec<String> = word_spans(&head_lower).into_iter().map(|s| s.token).collect();
    let body_words = word_spans(&body_lower);

    for (f, n) in [1usize, 2, 4].into_iter().enumerate() {
        let head_grams: HashSet<String> = crate::text::word_ngrams(&head_words, n).into_iter().collect();
        let cells = &mut out[f * 3..f * 3 + 3];
        if head_grams.is_empty() || body_words.len() < n {
            continue;
        }
        for w in body_words.windows(n) {
            let gram = w.iter().map(|s| s.token.as_str()).collect::<Vec<_>>().join(" ");
            if head_grams.contains(&gram) {
                credit(cells, w[n - 1].end);
            }
        }
    }

    let body_chars: Vec<char> = body_lower.chars().collect();
    for (j, n) in [2usize, 4, 8, 16].into_iter().enumerate() {
        let f = 3 + j;
        let head_grams: HashSet<String> = crate::text::char_ngrams(&head_lower, n).into_iter().collect();
        let cells = &mut out[f * 3..f * 3 + 3];
        if head_grams.is_empty() || body_chars.len() < n {
            continue;
        }
        let mut buf = String::new();
        for (start, w) in body_chars.windows(n).enumerate() {
            buf.clear();
            buf.extend(w);
            if head_grams.contains(&buf) {
                credit(cells, start + n);
            }
        }
    }

    let head_stops: HashSet<&str> = head_words
        .iter()
        .map(String::as_str)
        .filter(|t| cfg.stop_words.contains(*t))
        .collect();
    let cells = &mut out[21..24];
    for sp in &body_words {
        if head_stops.contains(sp.token.as_str()) {
            credit(cells, sp.end);
        }
    }
    out
}

pub const OVERLAP_DIM: usize = 4;

/// [Jaccard overlap of word-token sets, headline polarity parity, body
/// polarity parity, body refuting-word count].
pub fn overlap_polarity_refuting(headline: &str, body: &str, cfg: &LexiconConfig) -> [f64; OVERLAP_DIM] {
    let h = tokenize(headline);
    let b = tokenize(body);
    let hs: HashSet<&str> = h.words().collect();
    let bs: HashSet<&str> = b.words().collect();
    let union = hs.union(&bs).count();
    let overlap = if union == 0 {
        0.0
    } else {
        hs.intersection(&bs).count() as f64 / union as f64
    };
    let parity = |seq: &crate::text::TokenSequence| (seq.words().filter(|t| cfg.polarity_words.contains(*t)).count() % 2) as f64;
    let refuting = b.words().filter(|t| cfg.refuting_words.contains(*t)).count() as f64;
    [overlap, parity(&h), parity(&b), refuting]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::Vocabulary;
    use proptest::prelude::*;

    fn vocab(grams: &[&str], recipe: GramRecipe) -> Vocabulary {
        Vocabulary::from_grams(recipe, 100, grams.iter().map(|g| g.to_string()).collect()).unwrap()
    }

    #[test]
    fn tf_examples() {
        let v = vocab(&["a", "b", "c"], GramRecipe::words(&[1]));
        let tf = tf_vector("a a b", &v);
        assert_eq!(tf.indices, vec![0, 1]);
        assert_eq!(tf.counts, vec![2, 1]);
        let none = tf_vector("x y", &v);
        assert!(none.is_empty());
        assert_eq!(none.dim, 3);

        let bi = vocab(&["a b", "b a"], GramRecipe::words(&[2]));
        let tf = tf_vector("a b a b", &bi);
        assert_eq!(tf.to_dense(), vec![2.0, 1.0]);
    }

    #[test]
    fn bow_boc_symmetry_and_empty_body() {
        let texts = ["robert plant tore up the deal", "no deal was signed"];
        let v = BowBocVocabularies::fit(&texts, &texts, 5000).unwrap();
        let f = v.feature(texts[0], texts[0]);
        let dense = {
            let mut d = vec![0.0; v.dim()];
            for (i, x) in &f {
                d[*i] = *x;
            }
            d
        };
        let wh = v.word_headline.size();
        assert_eq!(&dense[..wh], &dense[wh..2 * wh]);
        let empty = v.feature(texts[0], "");
        assert!(empty.iter().all(|(i, _)| *i < wh || (*i >= 2 * wh && *i < 2 * wh + v.char_headline.size())));
    }

    #[test]
    fn bow_boc_hand_counted_fixture() {
        // headline vocab from "not good" ; body vocab from "good good day"
        let v = BowBocVocabularies::fit(&["not good"], &["good good day"], 5000).unwrap();
        // word headline grams (ranked): all count 1 -> lexicographic: "not", "not good_NEG", "good_NEG"?
        assert_eq!(v.word_headline.grams(), &["good_NEG", "not", "not good_NEG"]);
        assert_eq!(v.word_body.grams(), &["good", "day", "good day", "good good"]);
        let f = v.feature("not good", "good day good");
        let d = {
            let mut d = vec![0.0; v.dim()];
            for (i, x) in &f {
                d[*i] = *x;
            }
            d
        };
        // BoW_h: good_NEG 1, not 1, "not good_NEG" 1
        assert_eq!(&d[0..3], &[1.0, 1.0, 1.0]);
        // BoW_a: good 2, day 1, "good day" 1, "good good" 0
        assert_eq!(&d[3..7], &[2.0, 1.0, 1.0, 0.0]);
        // BoC_h over "not good": all 6 trigrams once
        let ch = v.char_headline.size();
        assert_eq!(ch, 6);
        assert!(d[7..7 + ch].iter().all(|&x| x == 1.0));
        // BoC_a: "goo" appears twice in "good day good"
        let goo = v.char_body.get("goo").unwrap();
        assert_eq!(d[7 + ch + goo], 2.0);
    }

    #[test]
    fn cooccurrence_headline_prefix() {
        let cfg = LexiconConfig::default();
        let h = "Robert Plant tore up the deal";
        let body = format!("{h}. Further text follows here about the band and the deal.");
        let c = cooccurrence_features(h, &body, &cfg);
        assert!(c[2] >= 6.0, "{c:?}");
        assert!(c[0] >= 6.0);
    }

    #[test]
    fn cooccurrence_disjoint_alphabets() {
        let c = cooccurrence_features("abc abc", "xyz xyz", &LexiconConfig::default());
        assert_eq!(c, [0.0; 24]);
    }

    #[test]
    fn cooccurrence_windows_by_hand() {
        let cfg = LexiconConfig::default();
        // "cat" ends at char 3 and at char 103 + 255 region
        let body = format!("cat {} cat {} cat", "x".repeat(95), "y".repeat(200));
        let c = cooccurrence_features("cat", &body, &cfg);
        // word1: first 'cat' ends at 3 (<=100), second ends at 4+95+1+3=103 (<=255), third at end
        assert_eq!(&c[0..3], &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn overlap_examples() {
        let cfg = LexiconConfig::default();
        assert_eq!(overlap_polarity_refuting("a b c", "a b c", &cfg)[0], 1.0);
        assert_eq!(overlap_polarity_refuting("a b", "c d", &cfg)[0], 0.0);
        let f = overlap_polarity_refuting("claim", "They deny it, a hoax.", &cfg);
        assert_eq!(f[3], 2.0);
        assert_eq!(f[2], 0.0); // two polarity words -> even parity
        assert_eq!(overlap_polarity_refuting("fake news", "x", &cfg)[1], 1.0);
    }

    #[test]
    fn layout_text_round_trip() {
        let mut l = Layout::default();
        l.push("bow_boc", 10);
        l.push("cooccurrence", 24);
        assert_eq!(l.dim(), 34);
        assert_eq!(Layout::from_text(&l.to_text()).unwrap(), l);
        assert!(Layout::from_text("x = 3,2\n").is_err());
    }

    #[test]
    fn default_lexicons() {
        let c = LexiconConfig::default();
        assert!(c.refuting_words.contains("hoax"));
        assert_eq!(c.stop_words.len(), 153);
        assert!(LexiconConfig::new(HashSet::new(), c.refuting_words.clone(), c.stop_words.clone()).is_err());
    }

    proptest! {
        #[test]
        fn cooccurrence_windows_are_nested(h in "[a-d ]{0,30}", b in "[a-d .]{0,400}") {
            let c = cooccurrence_features(&h, &b, &LexiconConfig::default());
            for f in 0..8 {
                prop_assert!(c[3 * f] <= c[3 * f + 1] && c[3 * f + 1] <= c[3 * f + 2]);
                prop_assert!(c[3 * f] >= 0.0 && c[3 * f].fract() == 0.0);
            }
        }
    }
}
