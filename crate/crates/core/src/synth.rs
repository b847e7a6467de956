//! Seeded synthetic corpora and embedding tables for tests, benchmarks and
//! data-free smoke runs.
//!
//! Synthetic corpora draw each body from one of several vocabulary themes.
//! Related headlines share the body's theme; unrelated headlines use another
//! theme. The body of a related pair carries a stance cue sentence whose
//! words depend on the label, with a configurable fraction of cues drawn
//! from a random class.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::corpus::{Corpus, LabeledPair, Split, StanceLabel};
use crate::embeddings::{EmbeddingTable, SentenceKey, Side};
use crate::error::{Error, Result};
use crate::seed;
use crate::text::split_sentences;

const SYLLABLES: [&str; 24] = [
    "ka", "lo", "mi", "ne", "ru", "ta", "vo", "shi", "pe", "dra", "gu", "bel", "tor", "an", "ix", "zu", "fen", "qa",
    "wi", "sol", "dem", "ry", "ob", "cal",
];

const FILLER: [&str; 12] = ["the", "a", "of", "and", "in", "to", "was", "on", "for", "with", "by", "at"];

const CUES: [[&str; 4]; 3] = [
    ["confirmed", "verified", "true", "official"],
    ["hoax", "fake", "denies", "false"],
    ["reportedly", "alleged", "claims", "rumored"],
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpusSpec {
    pub name: String,
    pub split: Split,
    pub n_pairs: usize,
    /// Relative frequency of agree, disagree, discuss, unrelated.
    pub label_weights: [f64; 4],
    pub n_themes: usize,
    pub words_per_theme: usize,
    /// Share of related pairs whose cue words come from a random class.
    pub cue_noise: f64,
    pub seed: u64,
}

impl SynthCorpusSpec {
    /// Label mix close to the FNC-1 training split.
    pub fn new(name: impl Into<String>, n_pairs: usize, seed: u64) -> Self {
        SynthCorpusSpec {
            name: name.into(),
            split: Split::Unsplit,
            n_pairs,
            label_weights: [0.074, 0.02, 0.177, 0.729],
            n_themes: 12,
            words_per_theme: 30,
            cue_noise: 0.15,
            seed,
        }
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    pub fn with_label_weights(mut self, w: [f64; 4]) -> Self {
        self.label_weights = w;
        self
    }

    pub fn with_cue_noise(mut self, noise: f64) -> Self {
        self.cue_noise = noise;
        self
    }
}

fn theme_words(n_themes: usize, per_theme: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<String>> {
    let mut seen = std::collections::HashSet::new();
    (0..n_themes)
        .map(|_| {
            let mut words = Vec::with_capacity(per_theme);
            while words.len() < per_theme {
                let n = rng.random_range(2..=3);
                let w: String = (0..n).map(|_| *SYLLABLES.choose(rng).expect("non-empty")).collect();
                if seen.insert(w.clone()) {
                    words.push(w);
                }
            }
            words
        })
        .collect()
}

fn sentence(rng: &mut ChaCha8Rng, theme: &[String], extra: &[&str], len: usize) -> String {
    let mut words: Vec<String> = (0..len)
        .map(|_| {
            if rng.random::<f64>() < 0.3 {
                FILLER.choose(rng).expect("non-empty").to_string()
            } else {
                theme.choose(rng).expect("non-empty").clone()
            }
        })
        .collect();
    for e in extra {
        let at = rng.random_range(0..=words.len());
        words.insert(at, e.to_string());
    }
    let mut s = words.join(" ");
    if let Some(first) = s.get(0..1) {
        s.replace_range(0..1, &first.to_uppercase());
    }
    s.push('.');
    s
}

fn draw_label(rng: &mut ChaCha8Rng, weights: &[f64; 4]) -> StanceLabel {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for l in StanceLabel::ALL {
        u -= weights[l.index()];
        if u < 0.0 {
            return l;
        }
    }
    StanceLabel::Unrelated
}

pub fn synthetic_corpus(spec: &SynthCorpusSpec) -> Result<Corpus> {
    if spec.n_themes < 2 || spec.words_per_theme == 0 {
        return Err(Error::InvalidArgument("synthetic corpus needs at least two themes".into()));
    }
    if spec.label_weights.iter().any(|&w| w < 0.0) || spec.label_weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::InvalidArgument("label weights must be non-negative and not all zero".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let themes = theme_words(spec.n_themes, spec.words_per_theme, &mut rng);
    let mut bodies: Vec<(String, usize, String)> = Vec::new();
    let mut pairs = Vec::with_capacity(spec.n_pairs);
    for row in 0..spec.n_pairs {
        let label = draw_label(&mut rng, &spec.label_weights);
        let body_theme = rng.random_range(0..spec.n_themes);
        let head_theme = if label.is_related() {
            body_theme
        } else {
            (body_theme + rng.random_range(1..spec.n_themes)) % spec.n_themes
        };
        let head_len = rng.random_range(5..10);
        let headline = sentence(&mut rng, &themes[head_theme], &[], head_len);
        let (body_id, body) = if label.is_related() || bodies.is_empty() || rng.random::<f64>() < 0.3 {
            let mut cue_class = label.index().min(2);
            if label.is_related() && rng.random::<f64>() < spec.cue_noise {
                cue_class = rng.random_range(0..3);
            }
            let n_sent = rng.random_range(3..7);
            let cue_at = rng.random_range(0..n_sent);
            let text: Vec<String> = (0..n_sent)
                .map(|i| {
                    let extra: Vec<&str> = if i == cue_at && label.is_related() {
                        CUES[cue_class].choose_multiple(&mut rng, 2).copied().collect()
                    } else {
                        Vec::new()
                    };
                    let len = rng.random_range(6..14);
                    sentence(&mut rng, &themes[body_theme], &extra, len)
                })
                .collect();
            let id = format!("{}", bodies.len());
            bodies.push((id.clone(), body_theme, text.join(" ")));
            (id, text.join(" "))
        } else {
            let candidates: Vec<&(String, usize, String)> = bodies.iter().filter(|b| b.1 != head_theme).collect();
            match candidates.choose(&mut rng) {
                Some(b) => (b.0.clone(), b.2.clone()),
                None => {
                    let text = sentence(&mut rng, &themes[body_theme], &[], 10);
                    let id = format!("{}", bodies.len());
                    bodies.push((id.clone(), body_theme, text.clone()));
                    (id, text)
                }
            }
        };
        pairs.push(LabeledPair {
            pair_id: format!("{}:{row}", spec.name),
            headline,
            body_id,
            body,
            stance: label,
        });
    }
    Corpus::new(spec.name.clone(), spec.split, pairs)
}

/// Corpus with exactly the given label counts (in agree, disagree, discuss,
/// unrelated order), shuffled under `seed`. Texts are placeholders; useful
/// where only the label sequence matters.
pub fn label_count_corpus(name: &str, counts: [usize; 4], seed: u64) -> Result<Corpus> {
    let mut labels: Vec<StanceLabel> = StanceLabel::ALL
        .iter()
        .flat_map(|&l| std::iter::repeat_n(l, counts[l.index()]))
        .collect();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let pairs = labels
        .into_iter()
        .enumerate()
        .map(|(i, stance)| LabeledPair {
            pair_id: format!("{name}:{i}"),
            headline: format!("headline {i}"),
            body_id: i.to_string(),
            body: format!("body {i}."),
            stance,
        })
        .collect();
    Corpus::new(name, Split::Test, pairs)
}

fn unit_gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    normalize(v)
}

fn normalize(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        v
    } else {
        v.into_iter().map(|x| x / n).collect()
    }
}

/// Unit-norm sentence vectors for every headline and body sentence of every
/// pair, keyed exactly by [`split_sentences`]. With `correlated`, the
/// sentences of related pairs are noisy copies of one shared pair direction,
/// so embedding similarity carries the related/unrelated signal. Each pair
/// draws from its own stream, so output does not depend on corpus order.
pub fn synthetic_embedding_table(
    corpus: &Corpus,
    dim: usize,
    encoder: &str,
    seed_value: u64,
    correlated: bool,
) -> Result<EmbeddingTable> {
    let mut table = EmbeddingTable::new(dim, encoder)?;
    for p in corpus.pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed_value, &p.pair_id));
        let shared = unit_gaussian(&mut rng, dim);
        let noisy = |rng: &mut ChaCha8Rng| {
            let n = unit_gaussian(rng, dim);
            normalize(shared.iter().zip(n).map(|(s, e)| s + 0.6 * e).collect())
        };
        let heads = split_sentences(&p.headline);
        let bodies = split_sentences(&p.body);
        for i in 0..heads.len().max(1) {
            let v = if correlated { noisy(&mut rng) } else { unit_gaussian(&mut rng, dim) };
            table.insert(SentenceKey::new(p.pair_id.clone(), Side::Headline, i), &v)?;
        }
        for i in 0..bodies.len().max(1) {
            let v = if correlated && p.stance.is_related() {
                noisy(&mut rng)
            } else {
                unit_gaussian(&mut rng, dim)
            };
            table.insert(SentenceKey::new(p.pair_id.clone(), Side::Body, i), &v)?;
        }
    }
    Ok(table)
}
