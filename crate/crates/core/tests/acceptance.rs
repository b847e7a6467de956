//! Acceptance checks, one PASS/FAIL line each.
//!
//! Corpus-dependent checks read the FNC-1 and ARC CSV files from the
//! directory named by `STANCE_DATA_DIR`:
//!
//! - train_stances.csv, train_bodies.csv, competition_test_stances.csv,
//!   competition_test_bodies.csv (FNC-1)
//! - arc_stances_train.csv, arc_stances_test.csv, arc_bodies.csv (ARC)
//!
//! Without them those checks report FAIL with the reason. Expected values in
//! the kernel and metric checks come from the brute-force oracles below, not
//! from the library under test.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use stance_core::classifier::{train, MlpConfig, MlpModel, TrainConfig};
use stance_core::corpus::{corpus_stats, load_corpus, merge_corpora, Corpus, StanceLabel};
use stance_core::embeddings::{embedding_features, EmbeddingPreset};
use stance_core::error::{Error, Result};
use stance_core::exec::Execution;
use stance_core::features::{fit_transforms, EmbeddingTables, FeatureSetConfig, FittedTransforms, Featurizer};
use stance_core::matrix::CsrMatrix;
use stance_core::metrics::{evaluate, naive_baselines, EvalReport};
use stance_core::pipeline::{self, cross_evaluate, run_experiment, CrossDirection, Profile, RunConfig};
use stance_core::synth::{label_count_corpus, synthetic_embedding_table};
use stance_core::topics::{LdaModel, LdaParams, LsiModel, NmfModel, NmfParams, TermDocMatrix};

// Corpus fidelity.
const FNC_INSTANCES: usize = 75_385;
const FNC_PERCENT: [f64; 4] = [7.4, 2.0, 17.7, 72.8];
const ARC_INSTANCES: usize = 17_792;
const ARC_PERCENT: [f64; 4] = [8.9, 10.0, 6.1, 75.0];
const PERCENT_TOL: f64 = 0.1;

// Metric anchors on the FNC-1 test split.
const FNC_TEST_COUNTS: [usize; 4] = [1903, 697, 4464, 18349];
const ALWAYS_DISCUSS_FNC: f64 = 0.833;
const ALWAYS_DISAGREE_MACRO_F1: f64 = 0.444;
const ANCHOR_TOL: f64 = 0.005;

const METRIC_TOL: f64 = 1e-12;
const GRADIENT_REL_TOL: f64 = 1e-4;
/// Components smaller than this in both gradients are compared absolutely.
const GRADIENT_FLOOR: f64 = 1e-7;
const NMF_RANK2_TOL: f64 = 1e-2;
const LSI_TOL: f64 = 1e-8;
const LDA_MIN_COSINE: f64 = 0.8;
const UNRELATED_F1_MIN: f64 = 0.95;
const MACRO_F1_MIN: f64 = 0.55;
const SCALE_TOL: f64 = 1e-9;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn fixture_corpus(name: &str) -> Result<Corpus> {
    let dir = fixtures();
    load_corpus(
        name,
        &dir.join(format!("{name}_stances.csv")),
        &dir.join(format!("{name}_bodies.csv")),
    )
}

fn data_dir() -> std::result::Result<PathBuf, String> {
    let dir = std::env::var_os("STANCE_DATA_DIR")
        .map(PathBuf::from)
        .ok_or_else(|| "blocked: STANCE_DATA_DIR is not set (FNC-1 and ARC CSV files unavailable)".to_string())?;
    let needed = [
        "train_stances.csv",
        "train_bodies.csv",
        "competition_test_stances.csv",
        "competition_test_bodies.csv",
        "arc_stances_train.csv",
        "arc_stances_test.csv",
        "arc_bodies.csv",
    ];
    let missing: Vec<&str> = needed.iter().copied().filter(|f| !dir.join(f).is_file()).collect();
    if missing.is_empty() {
        Ok(dir)
    } else {
        Err(format!("blocked: {} lacks {}", dir.display(), missing.join(", ")))
    }
}

struct RealData {
    fnc_train: Corpus,
    fnc_test: Corpus,
    arc_train: Corpus,
    arc_test: Corpus,
}

fn load_real(dir: &Path) -> Result<RealData> {
    Ok(RealData {
        fnc_train: load_corpus("fnc_train", &dir.join("train_stances.csv"), &dir.join("train_bodies.csv"))?,
        fnc_test: load_corpus(
            "fnc_test",
            &dir.join("competition_test_stances.csv"),
            &dir.join("competition_test_bodies.csv"),
        )?,
        arc_train: load_corpus("arc_train", &dir.join("arc_stances_train.csv"), &dir.join("arc_bodies.csv"))?,
        arc_test: load_corpus("arc_test", &dir.join("arc_stances_test.csv"), &dir.join("arc_bodies.csv"))?,
    })
}

// ---------------------------------------------------------------- corpus

fn stats_match(c: &Corpus, n: usize, percent: [f64; 4]) -> Result<(bool, String)> {
    let s = corpus_stats(c)?;
    let got = s.label_fractions.map(|f| 100.0 * f);
    let ok = s.n_instances == n && got.iter().zip(percent).all(|(g, e)| (g - e).abs() <= PERCENT_TOL + 1e-9);
    Ok((
        ok,
        format!(
            "{} instances (want {n}), {:.2}/{:.2}/{:.2}/{:.2}%",
            s.n_instances, got[0], got[1], got[2], got[3]
        ),
    ))
}

fn corpus_fidelity() -> Result<Outcome> {
    let dir = match data_dir() {
        Ok(d) => d,
        Err(why) => return Ok(outcome(false, why)),
    };
    let d = load_real(&dir)?;
    let fnc = merge_corpora(&d.fnc_train, &d.fnc_test)?;
    let arc = merge_corpora(&d.arc_train, &d.arc_test)?;
    let (fnc_ok, fnc_msg) = stats_match(&fnc, FNC_INSTANCES, FNC_PERCENT)?;
    let (arc_ok, arc_msg) = stats_match(&arc, ARC_INSTANCES, ARC_PERCENT)?;
    let again = corpus_stats(&fnc)? == corpus_stats(&merge_corpora(&d.fnc_train, &d.fnc_test)?)?;
    Ok(outcome(
        fnc_ok && arc_ok && again,
        format!("FNC-1 {fnc_msg}; ARC {arc_msg}; deterministic {again}"),
    ))
}

// ---------------------------------------------------------------- metrics

fn metric_anchors() -> Result<Outcome> {
    let (test, source) = match data_dir().and_then(|d| load_real(&d).map_err(|e| e.to_string())) {
        Ok(d) => (d.fnc_test, "FNC-1 test split"),
        Err(_) => (
            label_count_corpus("fnc_test", FNC_TEST_COUNTS, 0)?,
            "FNC-1 test label counts 1903/697/4464/18349",
        ),
    };
    let b = naive_baselines(&test)?;
    let again = naive_baselines(&test)?;
    let discuss_ok = (b.always_discuss.fnc_score - ALWAYS_DISCUSS_FNC).abs() <= ANCHOR_TOL;
    let disagree_ok = (b.always_disagree.macro_f1 - ALWAYS_DISAGREE_MACRO_F1).abs() <= ANCHOR_TOL;
    Ok(outcome(
        discuss_ok && disagree_ok && b == again,
        format!(
            "{source}: always-discuss FNC {:.4} (want {ALWAYS_DISCUSS_FNC} ± {ANCHOR_TOL}) {}; \
             unrelated-oracle always-disagree F1m {:.4} (want {ALWAYS_DISAGREE_MACRO_F1} ± {ANCHOR_TOL}) {}; \
             for reference always-discuss F1m {:.4}",
            b.always_discuss.fnc_score,
            if discuss_ok { "ok" } else { "MISS" },
            b.always_disagree.macro_f1,
            if disagree_ok { "ok" } else { "MISS" },
            b.always_discuss.macro_f1,
        ),
    ))
}

/// Per-item brute force: counts from scratch for every quantity.
struct OracleMetrics {
    fnc: f64,
    accuracy: f64,
    f1: [f64; 4],
    macro_f1: f64,
    gold_counts: [u64; 4],
    pred_counts: [u64; 4],
}

fn oracle_metrics(gold: &[usize], pred: &[usize]) -> OracleMetrics {
    const UNRELATED: usize = 3;
    let mut earned = 0.0;
    let mut possible = 0.0;
    let mut correct = 0usize;
    for (&g, &p) in gold.iter().zip(pred) {
        possible += if g == UNRELATED { 0.25 } else { 1.0 };
        if (g == UNRELATED) == (p == UNRELATED) {
            earned += 0.25;
        }
        if g != UNRELATED && g == p {
            earned += 0.75;
        }
        if g == p {
            correct += 1;
        }
    }
    let mut f1 = [0.0; 4];
    let mut gold_counts = [0u64; 4];
    let mut pred_counts = [0u64; 4];
    for c in 0..4 {
        let tp = gold.iter().zip(pred).filter(|&(&g, &p)| g == c && p == c).count() as f64;
        let fp = gold.iter().zip(pred).filter(|&(&g, &p)| g != c && p == c).count() as f64;
        let fneg = gold.iter().zip(pred).filter(|&(&g, &p)| g == c && p != c).count() as f64;
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fneg > 0.0 { tp / (tp + fneg) } else { 0.0 };
        f1[c] = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        gold_counts[c] = gold.iter().filter(|&&g| g == c).count() as u64;
        pred_counts[c] = pred.iter().filter(|&&p| p == c).count() as u64;
    }
    OracleMetrics {
        fnc: earned / possible,
        accuracy: correct as f64 / gold.len() as f64,
        f1,
        macro_f1: f1.iter().sum::<f64>() / 4.0,
        gold_counts,
        pred_counts,
    }
}

fn metric_oracle_equivalence() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let mut worst = 0.0f64;
    let mut marginal_mismatches = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=500);
        // Skewed label draws so some sequences miss whole classes.
        let skew: [f64; 4] = std::array::from_fn(|_| rng.random::<f64>().powi(3));
        let draw = |rng: &mut ChaCha8Rng| {
            let total: f64 = skew.iter().sum();
            let mut u = rng.random::<f64>() * total;
            for (c, w) in skew.iter().enumerate() {
                u -= w;
                if u < 0.0 {
                    return c;
                }
            }
            3
        };
        let gold: Vec<usize> = (0..n).map(|_| draw(&mut rng)).collect();
        let pred: Vec<usize> = gold
            .iter()
            .map(|&g| if rng.random::<f64>() < 0.4 { g } else { draw(&mut rng) })
            .collect();
        let to_labels = |v: &[usize]| -> Vec<StanceLabel> {
            v.iter().map(|&i| StanceLabel::from_index(i).expect("class index")).collect()
        };
        let r: EvalReport = evaluate(&to_labels(&gold), &to_labels(&pred))?;
        let o = oracle_metrics(&gold, &pred);
        let mut diffs = vec![
            (r.fnc_score - o.fnc).abs(),
            (r.accuracy - o.accuracy).abs(),
            (r.macro_f1 - o.macro_f1).abs(),
        ];
        for l in StanceLabel::ALL {
            diffs.push((r.f1(l) - o.f1[l.index()]).abs());
        }
        worst = diffs.into_iter().fold(worst, f64::max);
        if r.confusion.gold_counts() != o.gold_counts || r.confusion.pred_counts() != o.pred_counts {
            marginal_mismatches += 1;
        }
    }
    Ok(outcome(
        worst <= METRIC_TOL && marginal_mismatches == 0,
        format!("max |diff| {worst:.2e} over 1000 sequences (tol {METRIC_TOL:.0e}); marginal mismatches {marginal_mismatches}"),
    ))
}

// ---------------------------------------------------------------- gradients

fn gradient_check() -> Result<Outcome> {
    let mut worst = 0.0f64;
    for net in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + net);
        let config = MlpConfig {
            input_dim: 10,
            hidden_sizes: vec![8; 6],
            dropout_rate: 0.0,
        };
        let mut model = MlpModel::init(config, net)?;
        for s in model.param_slices_mut() {
            for v in s.iter_mut() {
                *v += 0.1 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
            }
        }
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..10).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let x = CsrMatrix::from_dense_rows(10, &rows)?;
        let labels: Vec<StanceLabel> = (0..5)
            .map(|_| StanceLabel::from_index(rng.random_range(0..4)).expect("class index"))
            .collect();
        let weights = (net == 4).then_some([0.7, 2.5, 1.3, 0.4]);
        let (_, grads) = model.loss_and_gradients(&x, &labels, weights.as_ref(), Execution::Sequential)?;
        let analytic: Vec<f64> = grads.slices().iter().flat_map(|s| s.iter().copied()).collect();

        let h = 1e-6;
        let mut numeric = Vec::with_capacity(analytic.len());
        let n_slices = model.param_slices_mut().len();
        for si in 0..n_slices {
            let len = model.param_slices_mut()[si].len();
            for i in 0..len {
                let orig = model.param_slices_mut()[si][i];
                model.param_slices_mut()[si][i] = orig + h;
                let plus = model.loss_and_gradients(&x, &labels, weights.as_ref(), Execution::Sequential)?.0;
                model.param_slices_mut()[si][i] = orig - h;
                let minus = model.loss_and_gradients(&x, &labels, weights.as_ref(), Execution::Sequential)?.0;
                model.param_slices_mut()[si][i] = orig;
                numeric.push((plus - minus) / (2.0 * h));
            }
        }
        for (a, n) in analytic.iter().zip(&numeric) {
            let scale = a.abs().max(n.abs());
            let err = if scale < GRADIENT_FLOOR { (a - n).abs() / GRADIENT_FLOOR } else { (a - n).abs() / scale };
            worst = worst.max(err);
        }
    }
    Ok(outcome(
        worst < GRADIENT_REL_TOL,
        format!("max relative error {worst:.2e} over 5 networks 10-8x6-4, batch 5 (tol {GRADIENT_REL_TOL:.0e})"),
    ))
}

// ---------------------------------------------------------------- kernels

/// Dense terms × docs matrix as rows of terms.
fn term_doc(rows: &[Vec<f64>]) -> Result<TermDocMatrix> {
    TermDocMatrix::from_dense(rows)
}

fn nmf_check() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (m, n) = (30, 40);
    let w0: Vec<[f64; 2]> = (0..m).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
    let h0: Vec<[f64; 2]> = (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
    let dense: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..n).map(|j| w0[i][0] * h0[j][0] + w0[i][1] * h0[j][1]).collect())
        .collect();
    let v = term_doc(&dense)?;
    let model = NmfModel::fit(&v, &NmfParams { k: 2, iters: 2000, seed: 9 }, Execution::Parallel)?;
    let (w, h) = (model.w(), model.h());
    let mut err = 0.0;
    let mut norm = 0.0;
    for i in 0..m {
        for j in 0..n {
            let approx = w[i * 2] * h[j * 2] + w[i * 2 + 1] * h[j * 2 + 1];
            err += (dense[i][j] - approx).powi(2);
            norm += dense[i][j].powi(2);
        }
    }
    let rel = (err / norm).sqrt();

    // Monotonicity also on a sparse text matrix.
    let texts: Vec<String> = fixture_corpus("fnc_train")?.pairs().iter().map(|p| p.body.clone()).collect();
    let vocab = stance_core::topics::topic_vocabulary(&texts, 2000)?;
    let text_matrix = TermDocMatrix::from_texts(&texts, &vocab)?;
    let text_model = NmfModel::fit(&text_matrix, &NmfParams { k: 10, iters: 200, seed: 1 }, Execution::Parallel)?;

    let mut max_increase = f64::MIN;
    for (hist, scale) in [
        (model.objective_history(), norm),
        (text_model.objective_history(), text_matrix.frobenius_sq()),
    ] {
        for w in hist.windows(2) {
            max_increase = max_increase.max((w[1] - w[0]) / scale);
        }
    }
    let monotone = max_increase <= 1e-12;
    Ok((
        monotone && rel < NMF_RANK2_TOL,
        format!("NMF rank-2 rel error {rel:.2e} (tol {NMF_RANK2_TOL:.0e}), max objective step {max_increase:.1e}·‖V‖²"),
    ))
}

/// One-sided Jacobi SVD: orthogonalizes the columns of `cols` (each a
/// column of A); returns singular values and left singular vectors sorted by
/// decreasing singular value.
fn jacobi_svd(mut cols: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let n = cols.len();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..cols[p].len() {
                    let (a, b) = (cols[p][i], cols[q][i]);
                    cols[p][i] = c * a - s * b;
                    cols[q][i] = s * a + c * b;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut pairs: Vec<(f64, Vec<f64>)> = cols
        .into_iter()
        .map(|c| {
            let s = dot(&c, &c).sqrt();
            let u = if s > 0.0 { c.iter().map(|x| x / s).collect() } else { c };
            (s, u)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs.into_iter().unzip()
}

fn lsi_check() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for trial in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(70 + trial);
        let (terms, docs) = (20, 30);
        let dense: Vec<Vec<f64>> = (0..terms).map(|_| (0..docs).map(|_| rng.random::<f64>()).collect()).collect();
        let columns: Vec<Vec<f64>> = (0..docs).map(|j| (0..terms).map(|i| dense[i][j]).collect()).collect();
        let (sigma, u) = jacobi_svd(columns);
        let a = term_doc(&dense)?;
        for k in [5, 20] {
            let model = LsiModel::fit(&a, k, trial, Execution::Parallel)?;
            for c in 0..k {
                worst = worst.max((model.singular_values()[c] - sigma[c]).abs());
                let got = model.u_column(c);
                let same: f64 = got.iter().zip(&u[c]).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                let flipped: f64 = got.iter().zip(&u[c]).map(|(x, y)| (x + y).abs()).fold(0.0, f64::max);
                worst = worst.max(same.min(flipped));
            }
        }
    }
    Ok((
        worst <= LSI_TOL,
        format!("LSI vs Jacobi SVD max |diff| {worst:.2e} (tol {LSI_TOL:.0e})"),
    ))
}

fn lda_check() -> Result<(bool, String)> {
    let (k, words_per_topic, n_docs, doc_len) = (5, 10, 500, 60);
    let vocab = k * words_per_topic;
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let gamma = Gamma::new(0.2, 1.0).expect("valid gamma");
    let mut counts = vec![vec![0.0; n_docs]; vocab];
    for d in 0..n_docs {
        let raw: Vec<f64> = (0..k).map(|_| gamma.sample(&mut rng) + 1e-12).collect();
        let total: f64 = raw.iter().sum();
        for _ in 0..doc_len {
            let mut u = rng.random::<f64>() * total;
            let mut topic = k - 1;
            for (t, w) in raw.iter().enumerate() {
                u -= w;
                if u < 0.0 {
                    topic = t;
                    break;
                }
            }
            let word = topic * words_per_topic + rng.random_range(0..words_per_topic);
            counts[word][d] += 1.0;
        }
    }
    let truth: Vec<Vec<f64>> = (0..k)
        .map(|t| (0..vocab).map(|w| if w / words_per_topic == t { 1.0 } else { 0.0 }).collect())
        .collect();
    let a = term_doc(&counts)?;
    let model = LdaModel::fit(
        &a,
        &LdaParams {
            k,
            alpha: 50.0 / k as f64,
            beta: 0.01,
            iters: 300,
            seed: 5,
        },
    )?;
    let cos = |x: &[f64], y: &[f64]| {
        let d: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        d / (x.iter().map(|a| a * a).sum::<f64>().sqrt() * y.iter().map(|b| b * b).sum::<f64>().sqrt())
    };
    let mut best = f64::MIN;
    let mut perm: Vec<usize> = (0..k).collect();
    permute(&mut perm, 0, &mut |p| {
        let mean = (0..k).map(|t| cos(model.topic(p[t]), &truth[t])).sum::<f64>() / k as f64;
        best = best.max(mean);
    });
    Ok((
        best > LDA_MIN_COSINE,
        format!("LDA matched mean cosine {best:.3} (min {LDA_MIN_COSINE})"),
    ))
}

fn permute(v: &mut Vec<usize>, at: usize, f: &mut impl FnMut(&[usize])) {
    if at == v.len() {
        f(v);
        return;
    }
    for i in at..v.len() {
        v.swap(at, i);
        permute(v, at + 1, f);
        v.swap(at, i);
    }
}

fn numerical_kernels() -> Result<Outcome> {
    let checks = [nmf_check()?, lsi_check()?, lda_check()?];
    Ok(outcome(
        checks.iter().all(|c| c.0),
        checks.iter().map(|c| c.1.as_str()).collect::<Vec<_>>().join("; "),
    ))
}

// ---------------------------------------------------------------- classifier

fn fixture_experiment() -> Result<pipeline::Experiment> {
    RunConfig::load(&fixtures().join("base.toml"))?.experiment()
}

fn memorization() -> Result<Outcome> {
    let full = fixture_corpus("fnc_train")?;
    let subset = full.select(&(0..50).collect::<Vec<_>>(), full.split);
    let exp = fixture_experiment()?;
    let transforms = fit_transforms(&subset, &exp.features, &exp.transform)?;
    let tables = EmbeddingTables::default();
    let fz = Featurizer {
        features: &exp.features,
        transforms: &transforms,
        tables: &tables,
        lexicon: &exp.lexicon,
    };
    let x = fz.featurize(&subset, Execution::Parallel)?;
    let labels = subset.labels();
    let mlp = MlpConfig::new(x.dim());
    let cfg = TrainConfig {
        max_epochs: 500,
        early_stop_patience: None,
        seed: 3,
        ..TrainConfig::default()
    };
    let (model, history) = train(&x.rows, &labels, &mlp, &cfg)?;
    let pred = model.predict(&x.rows, Execution::Parallel)?;
    let correct = pred.iter().zip(&labels).filter(|(p, g)| p == g).count();
    Ok(outcome(
        correct == labels.len(),
        format!(
            "featMLP 6x600 on 50 pairs: training accuracy {correct}/50 after {} epochs, final loss {:.2e}",
            history.epochs.len(),
            history.epochs.last().map_or(f64::NAN, |e| e.train_loss)
        ),
    ))
}

fn end_to_end_desk() -> Result<Outcome> {
    let dir = match data_dir() {
        Ok(d) => d,
        Err(why) => return Ok(outcome(false, why)),
    };
    let out = tempfile::tempdir().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut cfg = RunConfig {
        train_names: vec!["fnc_train".into(), "arc_train".into()],
        train_stances: vec![dir.join("train_stances.csv"), dir.join("arc_stances_train.csv")],
        train_bodies: vec![dir.join("train_bodies.csv"), dir.join("arc_bodies.csv")],
        test_names: vec!["fnc_test".into(), "arc_test".into()],
        test_stances: vec![dir.join("competition_test_stances.csv"), dir.join("arc_stances_test.csv")],
        test_bodies: vec![dir.join("competition_test_bodies.csv"), dir.join("arc_bodies.csv")],
        out_dir: out.path().to_path_buf(),
        save_features: false,
        ..RunConfig::default()
    };
    cfg.apply_profile(Profile::Desk);
    let run = pipeline::run(&cfg, None)?;
    let unrelated = run.report.f1(StanceLabel::Unrelated);
    let macro_f1 = run.report.macro_f1;
    Ok(outcome(
        unrelated >= UNRELATED_F1_MIN && macro_f1 >= MACRO_F1_MIN,
        format!(
            "Base, k=20, {} training pairs, FNC+ARC test n={}: F1 unrelated {unrelated:.4} (min {UNRELATED_F1_MIN}), \
             F1m {macro_f1:.4} (min {MACRO_F1_MIN})",
            run.manifest.n_train, run.report.n
        ),
    ))
}

// ---------------------------------------------------------------- embeddings

fn embedding_plumbing() -> Result<Outcome> {
    let train_c = fixture_corpus("fnc_train")?;
    let test_c = fixture_corpus("fnc_test")?;
    let all = merge_corpora(&train_c, &test_c)?;
    let d = 16;
    let table = synthetic_embedding_table(&all, d, "synthetic-bert", 21, true)?;

    let base = fixture_experiment()?;
    let mut bert = base.clone();
    bert.features = FeatureSetConfig::base().with_preset(EmbeddingPreset::Bert3);
    let tables = EmbeddingTables {
        infersent: None,
        bert: Some(table.clone()),
    };

    let base_run = run_experiment(&train_c, &test_c, &base, &EmbeddingTables::default(), None)?;
    let bert_run = run_experiment(&train_c, &test_c, &bert, &tables, Some(base_run.transforms.clone()))?;
    let base_dim = base_run.train_features.dim();
    let bert_dim = bert_run.train_features.dim();
    let dim_ok = bert_dim == base_dim + 2 * d + 2;

    let mut worst = 0.0f64;
    for c in [1e-3, 3.7, 1e4] {
        let scaled = table.scaled(c);
        for p in all.pairs() {
            let a = embedding_features(&table, &p.pair_id)?;
            let b = embedding_features(&scaled, &p.pair_id)?;
            worst = worst.max((a.cos_sim - b.cos_sim).abs()).max((a.max_sent_sim - b.max_sent_sim).abs());
        }
    }
    let scale_ok = worst <= SCALE_TOL;
    let delta = bert_run.report.macro_f1 - base_run.report.macro_f1;
    Ok(outcome(
        dim_ok && scale_ok && delta != 0.0,
        format!(
            "dim {bert_dim} = {base_dim} + 2·{d} + 2: {dim_ok}; scale drift {worst:.1e} (tol {SCALE_TOL:.0e}); \
             test F1m Base {:.4} -> BERT3 {:.4} (Δ {delta:+.4})",
            base_run.report.macro_f1, bert_run.report.macro_f1
        ),
    ))
}

// ---------------------------------------------------------------- leakage

fn leakage_guard() -> Result<Outcome> {
    let train_c = fixture_corpus("fnc_train")?;
    let test_c = fixture_corpus("fnc_test")?;
    let exp = fixture_experiment()?;
    let tables = EmbeddingTables::default();
    let leaked: FittedTransforms = fit_transforms(&test_c, &exp.features, &exp.transform)?;
    let rejected = matches!(
        cross_evaluate(&train_c, &test_c, &exp, &tables, Some(leaked)),
        Err(Error::Leakage(_))
    );

    let out = tempfile::tempdir().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut cfg = RunConfig::load(&fixtures().join("both.toml"))?;
    cfg.out_dir = out.path().to_path_buf();
    let mut notes = Vec::new();
    let mut directions_ok = true;
    for (direction, train_name, test_name) in [("fnc-arc", "fnc_train", "arc_test"), ("arc-fnc", "arc_train", "fnc_test")] {
        let dir: CrossDirection = direction.parse()?;
        let run = pipeline::run(&cfg, Some(&dir))?;
        let train_side = fixture_corpus(train_name)?;
        let test_side = fixture_corpus(test_name)?;
        let cache = run
            .manifest
            .artifacts
            .iter()
            .find(|a| a.path.parent().is_some_and(|p| p.ends_with("cache")))
            .map(|a| a.path.clone())
            .ok_or_else(|| Error::Format("manifest lists no transform cache".into()))?;
        let fitted = FittedTransforms::load(&cache)?;
        let fitted_on_train = fitted.check_provenance(&train_side).is_ok() && fitted.check_provenance(&test_side).is_err();
        let sizes_ok = run.manifest.n_train == train_side.len() && run.report.n == test_side.len() as u64;
        directions_ok &= fitted_on_train && sizes_ok;
        notes.push(format!(
            "{direction}: F1m {:.3}, transforms fitted on train side only {fitted_on_train}",
            run.report.macro_f1
        ));
    }
    Ok(outcome(
        rejected && directions_ok,
        format!("test-fitted transforms rejected {rejected}; {}", notes.join("; ")),
    ))
}

fn main() -> ExitCode {
    type Check = fn() -> Result<Outcome>;
    let checks: [(&str, Duration, Check); 9] = [
        ("corpus fidelity", Duration::from_secs(10), corpus_fidelity),
        ("metric anchors", Duration::from_secs(10), metric_anchors),
        ("metric oracle equivalence", Duration::from_secs(60), metric_oracle_equivalence),
        ("gradient correctness", Duration::from_secs(60), gradient_check),
        ("numerical kernels", Duration::from_secs(300), numerical_kernels),
        ("memorization", Duration::from_secs(120), memorization),
        ("end-to-end desk run", Duration::from_secs(3600), end_to_end_desk),
        ("embedding-feature plumbing", Duration::from_secs(1800), embedding_plumbing),
        ("leakage guard and cross-domain runs", Duration::from_secs(300), leakage_guard),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, limit, check) in checks {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && elapsed <= limit, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} {name}: {detail} [{:.1}s / limit {}s]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance check(s) failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
