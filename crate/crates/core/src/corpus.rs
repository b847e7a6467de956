//! Stance corpora in the two-file FNC-1 layout (stances CSV + bodies CSV).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const STANCES_HEADER: [&str; 3] = ["Headline", "Body ID", "Stance"];
pub const BODIES_HEADER: [&str; 2] = ["Body ID", "articleBody"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StanceLabel {
    Agree,
    Disagree,
    Discuss,
    Unrelated,
}

impl StanceLabel {
    /// Fixed class order used for matrices, model outputs and tie-breaking.
    pub const ALL: [StanceLabel; 4] = [
        StanceLabel::Agree,
        StanceLabel::Disagree,
        StanceLabel::Discuss,
        StanceLabel::Unrelated,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn is_related(self) -> bool {
        self != StanceLabel::Unrelated
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StanceLabel::Agree => "agree",
            StanceLabel::Disagree => "disagree",
            StanceLabel::Discuss => "discuss",
            StanceLabel::Unrelated => "unrelated",
        }
    }
}

impl fmt::Display for StanceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StanceLabel {
    type Err = String;

    /// Case-insensitive after trimming.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "agree" => Ok(StanceLabel::Agree),
            "disagree" => Ok(StanceLabel::Disagree),
            "discuss" => Ok(StanceLabel::Discuss),
            "unrelated" => Ok(StanceLabel::Unrelated),
            _ => Err(s.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledPair {
    pub pair_id: String,
    pub headline: String,
    pub body_id: String,
    pub body: String,
    pub stance: StanceLabel,
}

impl LabeledPair {
    /// Empty bodies are kept in the corpus; this is the flag.
    pub fn has_empty_body(&self) -> bool {
        self.body.trim().is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    Unsplit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub name: String,
    pub split: Split,
    pairs: Vec<LabeledPair>,
}

impl Corpus {
    /// Builds a corpus, rejecting duplicate pair ids and empty headlines.
    pub fn new(name: impl Into<String>, split: Split, pairs: Vec<LabeledPair>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(pairs.len());
        for p in &pairs {
            if !seen.insert(p.pair_id.as_str()) {
                return Err(Error::DuplicateId(p.pair_id.clone()));
            }
            if p.headline.trim().is_empty() {
                return Err(Error::InvalidArgument(format!("pair {} has an empty headline", p.pair_id)));
            }
        }
        Ok(Corpus {
            name: name.into(),
            split,
            pairs,
        })
    }

    pub fn empty(name: impl Into<String>, split: Split) -> Self {
        Corpus {
            name: name.into(),
            split,
            pairs: Vec::new(),
        }
    }

    pub fn pairs(&self) -> &[LabeledPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn labels(&self) -> Vec<StanceLabel> {
        self.pairs.iter().map(|p| p.stance).collect()
    }

    pub fn label_counts(&self) -> [usize; 4] {
        let mut counts = [0usize; 4];
        for p in &self.pairs {
            counts[p.stance.index()] += 1;
        }
        counts
    }

    pub fn get(&self, pair_id: &str) -> Option<&LabeledPair> {
        self.pairs.iter().find(|p| p.pair_id == pair_id)
    }

    /// Sub-corpus made of the given row indices, in the given order.
    pub fn select(&self, indices: &[usize], split: Split) -> Corpus {
        Corpus {
            name: self.name.clone(),
            split,
            pairs: indices.iter().map(|&i| self.pairs[i].clone()).collect(),
        }
    }

    /// SHA-256 over pair ids and texts (labels excluded). Used to prove which
    /// corpus a transform was fitted on.
    pub fn text_digest(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.pairs {
            for field in [&p.pair_id, &p.headline, &p.body] {
                h.update((field.len() as u64).to_le_bytes());
                h.update(field.as_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    pub fn flagged_empty_bodies(&self) -> usize {
        self.pairs.iter().filter(|p| p.has_empty_body()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub n_headlines: usize,
    pub n_documents: usize,
    pub n_instances: usize,
    pub label_counts: [usize; 4],
    /// Fractions in [`StanceLabel::ALL`] order.
    pub label_fractions: [f64; 4],
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>10} {:>10} {:>10} {:>8} {:>8} {:>8} {:>9}",
            "headlines", "documents", "instances", "agree", "disagree", "discuss", "unrelated"
        )?;
        write!(
            f,
            "{:>10} {:>10} {:>10}",
            self.n_headlines, self.n_documents, self.n_instances
        )?;
        for frac in self.label_fractions {
            write!(f, " {:>7.1}%", frac * 100.0)?;
        }
        Ok(())
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        kind => Error::Csv {
            path: path.to_path_buf(),
            line,
            message: format!("{kind:?}"),
        },
    }
}

fn open_csv(path: &Path, expected: &[&str]) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(file);
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let got: Vec<&str> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| if i == 0 { h.trim_start_matches('\u{feff}') } else { h })
        .collect();
    if got != expected {
        return Err(Error::Csv {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header {:?}, found {:?}", expected.join(","), got.join(",")),
        });
    }
    Ok(rdr)
}

/// Loads a corpus from a stances CSV and a bodies CSV. Pair ids are
/// `"<name>:<row index>"` with the row index counted over stance rows.
pub fn load_corpus(name: &str, stances_path: &Path, bodies_path: &Path) -> Result<Corpus> {
    let mut bodies: HashMap<String, String> = HashMap::new();
    let mut rdr = open_csv(bodies_path, &BODIES_HEADER)?;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(bodies_path, e))?;
        let id = rec[0].trim().to_string();
        if bodies.insert(id.clone(), rec[1].to_string()).is_some() {
            return Err(Error::DuplicateId(format!("body {id}")));
        }
    }

    let mut pairs = Vec::new();
    let mut rdr = open_csv(stances_path, &STANCES_HEADER)?;
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(stances_path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let body_id = rec[1].trim().to_string();
        let body = bodies
            .get(&body_id)
            .ok_or_else(|| Error::MissingBody(body_id.clone()))?
            .clone();
        let stance = rec[2]
            .parse::<StanceLabel>()
            .map_err(|value| Error::UnknownStance { value, line })?;
        if rec[0].trim().is_empty() {
            return Err(Error::Csv {
                path: stances_path.to_path_buf(),
                line,
                message: "empty headline".into(),
            });
        }
        pairs.push(LabeledPair {
            pair_id: format!("{name}:{row}"),
            headline: rec[0].to_string(),
            body_id,
            body,
            stance,
        });
    }
    let corpus = Corpus::new(name, Split::Unsplit, pairs)?;
    let empty = corpus.flagged_empty_bodies();
    if empty > 0 {
        log::warn!("{name}: {empty} pairs have an empty body (kept)");
    }
    Ok(corpus)
}

/// Writes the corpus back into the two-file layout. Bodies are emitted once
/// per body id, in first-appearance order.
pub fn save_corpus(corpus: &Corpus, stances_path: &Path, bodies_path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(stances_path).map_err(|e| csv_err(stances_path, e))?;
    w.write_record(STANCES_HEADER).map_err(|e| csv_err(stances_path, e))?;
    let mut bodies: BTreeMap<usize, (&str, &str)> = BTreeMap::new();
    let mut seen: HashMap<&str, &str> = HashMap::new();
    for (i, p) in corpus.pairs.iter().enumerate() {
        w.write_record([p.headline.as_str(), p.body_id.as_str(), p.stance.as_str()])
            .map_err(|e| csv_err(stances_path, e))?;
        match seen.get(p.body_id.as_str()) {
            Some(text) if *text != p.body => {
                return Err(Error::InvalidArgument(format!(
                    "body id {} maps to two different texts",
                    p.body_id
                )))
            }
            Some(_) => {}
            None => {
                seen.insert(&p.body_id, &p.body);
                bodies.insert(i, (&p.body_id, &p.body));
            }
        }
    }
    w.flush().map_err(|e| Error::io(stances_path, e))?;

    let mut w = csv::Writer::from_path(bodies_path).map_err(|e| csv_err(bodies_path, e))?;
    w.write_record(BODIES_HEADER).map_err(|e| csv_err(bodies_path, e))?;
    for (id, text) in bodies.values() {
        w.write_record([*id, *text]).map_err(|e| csv_err(bodies_path, e))?;
    }
    w.flush().map_err(|e| Error::io(bodies_path, e))?;
    Ok(())
}

pub fn corpus_stats(c: &Corpus) -> Result<CorpusStats> {
    if c.is_empty() {
        return Err(Error::Empty(format!("corpus {}", c.name)));
    }
    let headlines: HashSet<&str> = c.pairs.iter().map(|p| p.headline.as_str()).collect();
    // Body ids are only unique within one bodies file, so merged corpora
    // count distinct texts.
    let documents: HashSet<&str> = c.pairs.iter().map(|p| p.body.as_str()).collect();
    let counts = c.label_counts();
    let n = c.len() as f64;
    Ok(CorpusStats {
        n_headlines: headlines.len(),
        n_documents: documents.len(),
        n_instances: c.len(),
        label_counts: counts,
        label_fractions: counts.map(|k| k as f64 / n),
    })
}

/// Seeded random partition. Each side keeps the input's relative order.
pub fn split_corpus(c: &Corpus, train_fraction: f64, seed: u64) -> Result<(Corpus, Corpus)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train_fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n_train = (c.len() as f64 * train_fraction).floor() as usize;
    if n_train == 0 || n_train == c.len() {
        return Err(Error::InvalidArgument(format!(
            "fraction {train_fraction} of {} pairs leaves one side empty",
            c.len()
        )));
    }
    let mut order: Vec<usize> = (0..c.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train: Vec<usize> = order[..n_train].to_vec();
    let mut test: Vec<usize> = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((c.select(&train, Split::Train), c.select(&test, Split::Test)))
}

pub fn merge_corpora(a: &Corpus, b: &Corpus) -> Result<Corpus> {
    if b.is_empty() {
        return Ok(a.clone());
    }
    if a.is_empty() {
        return Ok(b.clone());
    }
    let split = if a.split == b.split { a.split } else { Split::Unsplit };
    let pairs = a.pairs.iter().chain(&b.pairs).cloned().collect();
    Corpus::new(format!("{}+{}", a.name, b.name), split, pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn pair(id: &str, stance: StanceLabel) -> LabeledPair {
        LabeledPair {
            pair_id: id.into(),
            headline: format!("headline {id}"),
            body_id: id.into(),
            body: format!("body {id}"),
            stance,
        }
    }

    fn write(dir: &Path, name: &str, content: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, content).unwrap();
        p
    }

    #[test]
    fn stance_parsing_is_case_insensitive() {
        assert_eq!(" Agree ".parse::<StanceLabel>(), Ok(StanceLabel::Agree));
        assert_eq!("UNRELATED".parse::<StanceLabel>(), Ok(StanceLabel::Unrelated));
        assert!("maybe".parse::<StanceLabel>().is_err());
        assert!(StanceLabel::Discuss.is_related());
        assert!(!StanceLabel::Unrelated.is_related());
    }

    #[test]
    fn load_two_rows_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = write(
            dir.path(),
            "s.csv",
            "Headline,Body ID,Stance\n\"Plant, reportedly\",7,agree\nOther news,8,Unrelated\n",
        );
        let b = write(
            dir.path(),
            "b.csv",
            "Body ID,articleBody\n7,\"Robert Plant \"\"tore\"\" up.\nSecond line.\"\n8,Unrelated text\n",
        );
        let c = load_corpus("t", &s, &b).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.pairs()[0].pair_id, "t:0");
        assert_eq!(c.pairs()[0].headline, "Plant, reportedly");
        assert_eq!(c.pairs()[0].body, "Robert Plant \"tore\" up.\nSecond line.");
        assert_eq!(c.pairs()[1].stance, StanceLabel::Unrelated);

        let s2 = dir.path().join("s2.csv");
        let b2 = dir.path().join("b2.csv");
        save_corpus(&c, &s2, &b2).unwrap();
        let again = load_corpus("t", &s2, &b2).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn missing_body_names_the_id() {
        let dir = tempfile::tempdir().unwrap();
        let s = write(dir.path(), "s.csv", "Headline,Body ID,Stance\nH,99,agree\n");
        let b = write(dir.path(), "b.csv", "Body ID,articleBody\n1,x\n");
        match load_corpus("t", &s, &b) {
            Err(Error::MissingBody(id)) => assert_eq!(id, "99"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_stance_and_bad_header() {
        let dir = tempfile::tempdir().unwrap();
        let b = write(dir.path(), "b.csv", "Body ID,articleBody\n1,x\n");
        let s = write(dir.path(), "s.csv", "Headline,Body ID,Stance\nH,1,agree\nH2,1,sort of\n");
        match load_corpus("t", &s, &b) {
            Err(Error::UnknownStance { value, line }) => {
                assert_eq!(value, "sort of");
                assert_eq!(line, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
        let s = write(dir.path(), "s3.csv", "Title,Body ID,Stance\nH,1,agree\n");
        assert!(matches!(load_corpus("t", &s, &b), Err(Error::Csv { line: 1, .. })));
        let s = write(dir.path(), "s4.csv", "Headline,Body ID,Stance\nH,1\n");
        assert!(matches!(load_corpus("t", &s, &b), Err(Error::Csv { line: 2, .. })));
    }

    #[test]
    fn empty_body_is_kept_and_flagged() {
        let dir = tempfile::tempdir().unwrap();
        let s = write(dir.path(), "s.csv", "Headline,Body ID,Stance\nH,1,discuss\n");
        let b = write(dir.path(), "b.csv", "Body ID,articleBody\n1,\n");
        let c = load_corpus("t", &s, &b).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.flagged_empty_bodies(), 1);
    }

    #[test]
    fn uniform_stats() {
        let c = Corpus::new(
            "u",
            Split::Unsplit,
            StanceLabel::ALL
                .iter()
                .enumerate()
                .map(|(i, &l)| pair(&i.to_string(), l))
                .collect(),
        )
        .unwrap();
        let s = corpus_stats(&c).unwrap();
        assert_eq!(s.label_fractions, [0.25; 4]);
        assert_eq!(s.n_instances, 4);
        assert!(corpus_stats(&Corpus::empty("e", Split::Unsplit)).is_err());
    }

    #[test]
    fn split_is_deterministic_and_exhaustive() {
        let pairs = (0..10).map(|i| pair(&i.to_string(), StanceLabel::Discuss)).collect();
        let c = Corpus::new("c", Split::Unsplit, pairs).unwrap();
        let (a, b) = split_corpus(&c, 0.8, 7).unwrap();
        assert_eq!((a.len(), b.len()), (8, 2));
        let (a2, b2) = split_corpus(&c, 0.8, 7).unwrap();
        assert_eq!(a, a2);
        assert_eq!(b, b2);
        let mut all: Vec<_> = a.pairs().iter().chain(b.pairs()).map(|p| p.pair_id.clone()).collect();
        all.sort();
        let mut want: Vec<_> = c.pairs().iter().map(|p| p.pair_id.clone()).collect();
        want.sort();
        assert_eq!(all, want);
        assert!(split_corpus(&c, 1.0, 7).is_err());
        assert!(split_corpus(&c, 0.05, 7).is_err());
    }

    #[test]
    fn split_sizes_for_arc_count() {
        let pairs = (0..17_792).map(|i| pair(&i.to_string(), StanceLabel::Agree)).collect();
        let c = Corpus::new("arc", Split::Unsplit, pairs).unwrap();
        let (a, b) = split_corpus(&c, 0.8, 1).unwrap();
        assert!((a.len() as i64 - 14_233).abs() <= 1);
        assert!((b.len() as i64 - 3_559).abs() <= 1);
    }

    #[test]
    fn merge_behaviour() {
        let a = Corpus::new("a", Split::Train, vec![pair("a:0", StanceLabel::Agree)]).unwrap();
        let b = Corpus::new("b", Split::Train, vec![pair("b:0", StanceLabel::Disagree)]).unwrap();
        let m = merge_corpora(&a, &b).unwrap();
        assert_eq!(m.name, "a+b");
        assert_eq!(m.pairs()[0].pair_id, "a:0");
        assert_eq!(m.pairs()[1].pair_id, "b:0");
        assert_eq!(merge_corpora(&a, &Corpus::empty("e", Split::Train)).unwrap(), a);
        assert!(matches!(merge_corpora(&a, &a), Err(Error::DuplicateId(_))));
    }
}
