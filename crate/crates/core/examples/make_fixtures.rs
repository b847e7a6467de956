//! Regenerates the small CSV corpora under `tests/fixtures`.
//!
//! `cargo run -p stance-core --example make_fixtures`

use std::path::Path;

use stance_core::corpus::{save_corpus, split_corpus, Split};
use stance_core::synth::{synthetic_corpus, SynthCorpusSpec};

fn main() -> stance_core::error::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    std::fs::create_dir_all(&dir).map_err(|e| stance_core::error::Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    // Balanced-ish label mix so a 200-pair training set sees every class.
    let weights = [0.2, 0.12, 0.28, 0.4];
    for (family, n, seed) in [("fnc", 300, 11), ("arc", 150, 12)] {
        let spec = SynthCorpusSpec::new(family, n, seed).with_label_weights(weights);
        let all = synthetic_corpus(&spec)?;
        let (train, test) = split_corpus(&all, 2.0 / 3.0, seed)?;
        for (c, split) in [(&train, "train"), (&test, "test")] {
            assert_eq!(c.split, if split == "train" { Split::Train } else { Split::Test });
            save_corpus(
                c,
                &dir.join(format!("{family}_{split}_stances.csv")),
                &dir.join(format!("{family}_{split}_bodies.csv")),
            )?;
        }
    }
    Ok(())
}
