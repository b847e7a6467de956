//! Tokenization, negation scoping, n-grams, sentence splitting and capped
//! n-gram vocabularies.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::sync::OnceLock;

use crate::error::{Error, Result};

pub const NEG_SUFFIX: &str = "_NEG";

/// A punctuation token is any single non-alphanumeric, non-whitespace char.
pub fn is_punct(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

fn is_punct_token(t: &str) -> bool {
    let mut it = t.chars();
    matches!((it.next(), it.next()), (Some(c), None) if is_punct(c))
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Tokens that are not punctuation marks.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str).filter(|t| !is_punct_token(t))
    }
}

impl From<Vec<&str>> for TokenSequence {
    fn from(v: Vec<&str>) -> Self {
        TokenSequence {
            tokens: v.into_iter().map(String::from).collect(),
        }
    }
}

/// A token with its `[start, end)` char offsets into the text it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Span {
    pub token: String,
    pub start: usize,
    pub end: usize,
}

/// Tokenizes already-lowercased text, keeping char offsets.
pub fn token_spans(lower: &str) -> Vec<Span> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut start = 0;
    let mut pos = 0;
    for c in lower.chars() {
        if c.is_whitespace() || is_punct(c) {
            if !cur.is_empty() {
                out.push(Span {
                    token: std::mem::take(&mut cur),
                    start,
                    end: pos,
                });
            }
            if !c.is_whitespace() {
                out.push(Span {
                    token: c.to_string(),
                    start: pos,
                    end: pos + 1,
                });
            }
        } else {
            if cur.is_empty() {
                start = pos;
            }
            cur.push(c);
        }
        pos += 1;
    }
    if !cur.is_empty() {
        out.push(Span {
            token: cur,
            start,
            end: pos,
        });
    }
    out
}

/// Lowercases, splits on whitespace and emits every punctuation char as its
/// own token.
pub fn tokenize(text: &str) -> TokenSequence {
    TokenSequence {
        tokens: token_spans(&text.to_lowercase())
            .into_iter()
            .map(|s| s.token)
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegationConfig {
    pub keywords: HashSet<String>,
    pub terminators: HashSet<String>,
}

impl NegationConfig {
    pub fn new(keywords: impl IntoIterator<Item = String>, terminators: impl IntoIterator<Item = String>) -> Result<Self> {
        let cfg = NegationConfig {
            keywords: keywords.into_iter().collect(),
            terminators: terminators.into_iter().collect(),
        };
        if cfg.keywords.is_empty() || cfg.terminators.is_empty() {
            return Err(Error::InvalidArgument("negation keyword and terminator sets must be non-empty".into()));
        }
        Ok(cfg)
    }

    /// Parses `keywords = ...` / `terminators = ...` lines (whitespace-separated values).
    pub fn parse(src: &str) -> Result<Self> {
        let mut keywords = Vec::new();
        let mut terminators = Vec::new();
        for line in src.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (key, vals) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("negation config line without '=': {line}")))?;
            let vals = vals.split_whitespace().map(String::from);
            match key.trim() {
                "keywords" => keywords.extend(vals),
                "terminators" => terminators.extend(vals),
                other => return Err(Error::Format(format!("unknown negation config key {other:?}"))),
            }
        }
        Self::new(keywords, terminators)
    }
}

impl Default for NegationConfig {
    fn default() -> Self {
        Self::parse(include_str!("../config/negation.txt")).expect("bundled negation config")
    }
}

/// Suffixes `_NEG` to every token after a trigger up to the next terminator.
/// Triggers met inside an open scope are tagged too and the scope stays open.
pub fn tag_negations(seq: &TokenSequence, cfg: &NegationConfig) -> TokenSequence {
    let mut open = false;
    let mut tokens = Vec::with_capacity(seq.len());
    for t in &seq.tokens {
        if cfg.terminators.contains(t) {
            open = false;
            tokens.push(t.clone());
        } else if open {
            if t.ends_with(NEG_SUFFIX) {
                tokens.push(t.clone());
            } else {
                tokens.push(format!("{t}{NEG_SUFFIX}"));
            }
        } else {
            open = cfg.keywords.contains(t);
            tokens.push(t.clone());
        }
    }
    TokenSequence { tokens }
}

pub fn word_ngrams<S: AsRef<str>>(tokens: &[S], n: usize) -> Vec<String> {
    assert!(n >= 1, "n-gram order must be >= 1");
    if tokens.len() < n {
        return Vec::new();
    }
    tokens
        .windows(n)
        .map(|w| {
            let mut g = String::with_capacity(w.iter().map(|t| t.as_ref().len() + 1).sum());
            for (i, t) in w.iter().enumerate() {
                if i > 0 {
                    g.push(' ');
                }
                g.push_str(t.as_ref());
            }
            g
        })
        .collect()
}

pub fn char_ngrams(text: &str, n: usize) -> Vec<String> {
    assert!(n >= 1, "n-gram order must be >= 1");
    let chars: Vec<char> = text.chars().collect();
    if chars.len() < n {
        return Vec::new();
    }
    chars.windows(n).map(|w| w.iter().collect()).collect()
}

/// Splits after '.', '!' or '?' when followed by whitespace. Sentences are
/// trimmed and never empty; a trailing fragment without terminator is kept.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut iter = text.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        if matches!(c, '.' | '!' | '?') {
            if let Some(&(_, next)) = iter.peek() {
                if next.is_whitespace() {
                    let end = i + c.len_utf8();
                    let s = text[start..end].trim();
                    if !s.is_empty() {
                        out.push(s.to_string());
                    }
                    start = end;
                }
            }
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail.to_string());
    }
    out
}

static STOP_WORDS: OnceLock<HashSet<String>> = OnceLock::new();

/// The bundled 153-entry English stop-word list.
pub fn default_stop_words() -> &'static HashSet<String> {
    STOP_WORDS.get_or_init(|| parse_word_list(include_str!("../config/stop_words.txt")))
}

pub fn parse_word_list(src: &str) -> HashSet<String> {
    src.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GramUnit {
    Word,
    Char,
}

impl GramUnit {
    fn as_str(self) -> &'static str {
        match self {
            GramUnit::Word => "word",
            GramUnit::Char => "char",
        }
    }
}

/// How grams are extracted from a raw text.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GramRecipe {
    pub unit: GramUnit,
    pub orders: BTreeSet<usize>,
    /// Word unit only: apply negation tagging before forming grams.
    pub negation: bool,
    /// Word unit only: drop punctuation and stop words.
    pub content_words: bool,
}

impl GramRecipe {
    pub fn words(orders: &[usize]) -> Self {
        GramRecipe {
            unit: GramUnit::Word,
            orders: orders.iter().copied().collect(),
            negation: false,
            content_words: false,
        }
    }

    pub fn chars(orders: &[usize]) -> Self {
        GramRecipe {
            unit: GramUnit::Char,
            ..Self::words(orders)
        }
    }

    pub fn with_negation(mut self) -> Self {
        self.negation = true;
        self
    }

    pub fn content_words_only(mut self) -> Self {
        self.content_words = true;
        self
    }

    pub fn extract(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        match self.unit {
            GramUnit::Char => {
                let lower = text.to_lowercase();
                for &n in &self.orders {
                    out.extend(char_ngrams(&lower, n));
                }
            }
            GramUnit::Word => {
                let mut seq = tokenize(text);
                if self.negation {
                    seq = tag_negations(&seq, negation_defaults());
                }
                if self.content_words {
                    let stop = default_stop_words();
                    seq.tokens.retain(|t| !is_punct_token(t) && !stop.contains(t));
                }
                for &n in &self.orders {
                    out.extend(word_ngrams(&seq.tokens, n));
                }
            }
        }
        out
    }
}

fn negation_defaults() -> &'static NegationConfig {
    static CFG: OnceLock<NegationConfig> = OnceLock::new();
    CFG.get_or_init(NegationConfig::default)
}

/// Capped gram → index map. Indices are dense: rank 0 is the most frequent gram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    recipe: GramRecipe,
    cap: usize,
    grams: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Builds a vocabulary from grams already in rank order.
    pub fn from_grams(recipe: GramRecipe, cap: usize, grams: Vec<String>) -> Result<Self> {
        if grams.len() > cap {
            return Err(Error::Format(format!("vocabulary of {} grams exceeds cap {cap}", grams.len())));
        }
        let mut index = HashMap::with_capacity(grams.len());
        for (i, g) in grams.iter().enumerate() {
            if index.insert(g.clone(), i as u32).is_some() {
                return Err(Error::DuplicateId(format!("gram {g:?}")));
            }
        }
        Ok(Vocabulary {
            recipe,
            cap,
            grams,
            index,
        })
    }

    pub fn recipe(&self) -> &GramRecipe {
        &self.recipe
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn size(&self) -> usize {
        self.grams.len()
    }

    pub fn get(&self, gram: &str) -> Option<usize> {
        self.index.get(gram).map(|&i| i as usize)
    }

    pub fn gram(&self, index: usize) -> Option<&str> {
        self.grams.get(index).map(String::as_str)
    }

    pub fn grams(&self) -> &[String] {
        &self.grams
    }

    /// Versioned text form: one header line, then `gram<TAB>index` lines.
    /// Tabs, newlines, carriage returns and backslashes in grams are escaped.
    pub fn to_text(&self) -> String {
        let orders: Vec<String> = self.recipe.orders.iter().map(usize::to_string).collect();
        let mut s = format!(
            "#vocab v1 unit={} orders={} cap={} negation={} content_words={} size={}\n",
            self.recipe.unit.as_str(),
            orders.join(","),
            self.cap,
            self.recipe.negation,
            self.recipe.content_words,
            self.grams.len()
        );
        for (i, g) in self.grams.iter().enumerate() {
            let _ = writeln!(s, "{}\t{i}", escape_gram(g));
        }
        s
    }

    pub fn from_text(src: &str) -> Result<Self> {
        let mut lines = src.split('\n');
        let header = lines.next().unwrap_or_default();
        let mut fields = header.split(' ');
        if fields.next() != Some("#vocab") || fields.next() != Some("v1") {
            return Err(Error::Format(format!("bad vocabulary header {header:?}")));
        }
        let mut kv = HashMap::new();
        for f in fields {
            let (k, v) = f
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("bad vocabulary header field {f:?}")))?;
            kv.insert(k, v);
        }
        let get = |k: &str| kv.get(k).copied().ok_or_else(|| Error::Format(format!("vocabulary header lacks {k}")));
        let bad = |k: &str| Error::Format(format!("vocabulary header field {k} is malformed"));
        let unit = match get("unit")? {
            "word" => GramUnit::Word,
            "char" => GramUnit::Char,
            _ => return Err(bad("unit")),
        };
        let orders = get("orders")?
            .split(',')
            .map(|o| o.parse::<usize>().map_err(|_| bad("orders")))
            .collect::<Result<BTreeSet<_>>>()?;
        let cap = get("cap")?.parse().map_err(|_| bad("cap"))?;
        let negation = get("negation")?.parse().map_err(|_| bad("negation"))?;
        let content_words = get("content_words")?.parse().map_err(|_| bad("content_words"))?;
        let size: usize = get("size")?.parse().map_err(|_| bad("size"))?;
        let mut grams = Vec::with_capacity(size);
        for line in lines.filter(|l| !l.is_empty()) {
            let (g, i) = line
                .rsplit_once('\t')
                .ok_or_else(|| Error::Format(format!("vocabulary line without tab: {line:?}")))?;
            let i: usize = i.parse().map_err(|_| Error::Format(format!("bad index in {line:?}")))?;
            if i != grams.len() {
                return Err(Error::Format(format!("vocabulary index {i} out of sequence")));
            }
            grams.push(unescape_gram(g)?);
        }
        if grams.len() != size {
            return Err(Error::Format(format!("vocabulary declares {size} grams, found {}", grams.len())));
        }
        let recipe = GramRecipe {
            unit,
            orders,
            negation,
            content_words,
        };
        Self::from_grams(recipe, cap, grams)
    }
}

fn escape_gram(g: &str) -> String {
    let mut s = String::with_capacity(g.len());
    for c in g.chars() {
        match c {
            '\\' => s.push_str("\\\\"),
            '\t' => s.push_str("\\t"),
            '\n' => s.push_str("\\n"),
            '\r' => s.push_str("\\r"),
            c => s.push(c),
        }
    }
    s
}

fn unescape_gram(g: &str) -> Result<String> {
    let mut s = String::with_capacity(g.len());
    let mut it = g.chars();
    while let Some(c) = it.next() {
        if c == '\\' {
            match it.next() {
                Some('\\') => s.push('\\'),
                Some('t') => s.push('\t'),
                Some('n') => s.push('\n'),
                Some('r') => s.push('\r'),
                _ => return Err(Error::Format(format!("bad escape in gram {g:?}"))),
            }
        } else {
            s.push(c);
        }
    }
    Ok(s)
}

/// Counts grams over `docs` and keeps the `cap` most frequent, ties broken
/// lexicographically. Callers pass training-split texts only.
pub fn build_vocabulary<S: AsRef<str>>(docs: &[S], cap: usize, recipe: GramRecipe) -> Result<Vocabulary> {
    if docs.is_empty() {
        return Err(Error::Empty("vocabulary needs at least one document".into()));
    }
    if cap == 0 || recipe.orders.is_empty() || recipe.orders.contains(&0) {
        return Err(Error::InvalidArgument("vocabulary cap and gram orders must be positive".into()));
    }
    let mut counts: HashMap<String, u64> = HashMap::new();
    for d in docs {
        for g in recipe.extract(d.as_ref()) {
            *counts.entry(g).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(cap);
    Vocabulary::from_grams(recipe, cap, ranked.into_iter().map(|(g, _)| g).collect())
}
