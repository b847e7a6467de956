use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{gram, DocTerms, TermDocMatrix};
use crate::error::{Error, Result};
use crate::exec::Execution;

#[derive(Debug, Clone, PartialEq)]
pub struct NmfParams {
    pub k: usize,
    pub iters: usize,
    pub seed: u64,
}

/// Frobenius NMF `V ≈ W H` fitted with Lee–Seung multiplicative updates.
#[derive(Debug, Clone, PartialEq)]
pub struct NmfModel {
    k: usize,
    n_terms: usize,
    /// `terms × k`, row-major.
    w: Vec<f64>,
    /// Stored document-major: `docs × k`, i.e. column `j` of H is `h[j*k..(j+1)*k]`.
    h: Vec<f64>,
    iters: usize,
    seed: u64,
    /// Objective before the first update, then after every iteration.
    objective_history: Vec<f64>,
}

/// Projection runs multiplicative updates until the largest relative change
/// of any coordinate drops below this, or `PROJECT_MAX_ITERS` is reached.
const PROJECT_TOL: f64 = 1e-10;
const PROJECT_MAX_ITERS: usize = 5000;

/// Rounding allowance for the per-iteration monotonicity check, relative to ‖V‖².
const MONOTONE_SLACK: f64 = 1e-12;

impl NmfModel {
    pub fn fit(v: &TermDocMatrix, params: &NmfParams, exec: Execution) -> Result<Self> {
        let k = params.k;
        let (m, n) = (v.n_terms(), v.n_docs());
        let mean = v.by_doc.values().iter().sum::<f64>() / (m as f64 * n as f64);
        let scale = (mean / k as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        // 1 - U[0,1) lies in (0, 1]: strictly positive start.
        let mut w: Vec<f64> = (0..m * k).map(|_| scale * (1.0 - rng.random::<f64>())).collect();
        let mut h: Vec<f64> = (0..n * k).map(|_| scale * (1.0 - rng.random::<f64>())).collect();

        let v_norm = v.frobenius_sq();
        let mut history = Vec::with_capacity(params.iters + 1);
        history.push(objective(v, &w, &h, k, exec));
        for it in 0..params.iters {
            update_h(v, &w, &mut h, k, exec);
            update_w(v, &mut w, &h, k, exec);
            let obj = objective(v, &w, &h, k, exec);
            let prev = *history.last().unwrap();
            if !obj.is_finite() || obj > prev + MONOTONE_SLACK * v_norm {
                return Err(Error::Numerical(format!(
                    "NMF objective increased at iteration {}: {prev} -> {obj}",
                    it + 1
                )));
            }
            history.push(obj);
        }
        Ok(NmfModel {
            k,
            n_terms: m,
            w,
            h,
            iters: params.iters,
            seed: params.seed,
            objective_history: history,
        })
    }

    pub fn from_parts(k: usize, n_terms: usize, w: Vec<f64>, h: Vec<f64>, iters: usize, seed: u64, objective_history: Vec<f64>) -> Result<Self> {
        if k == 0 || w.len() != n_terms * k || !h.len().is_multiple_of(k) {
            return Err(Error::Format("NMF factor shapes do not match k and term count".into()));
        }
        if w.iter().chain(&h).any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(Error::Format("NMF factors must be finite and non-negative".into()));
        }
        Ok(NmfModel {
            k,
            n_terms,
            w,
            h,
            iters,
            seed,
            objective_history,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_terms(&self) -> usize {
        self.n_terms
    }

    pub fn n_docs(&self) -> usize {
        self.h.len() / self.k
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    /// Document-major H (`docs × k`).
    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn h_column(&self, doc: usize) -> &[f64] {
        &self.h[doc * self.k..(doc + 1) * self.k]
    }

    pub fn iters(&self) -> usize {
        self.iters
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn objective_history(&self) -> &[f64] {
        &self.objective_history
    }

    pub fn final_objective(&self) -> f64 {
        *self.objective_history.last().unwrap_or(&f64::NAN)
    }

    /// Non-negative `h` minimizing ‖x − W h‖ by multiplicative updates with W fixed.
    pub fn project(&self, doc: &DocTerms) -> Vec<f64> {
        let k = self.k;
        let mut wtx = vec![0.0; k];
        let mut total = 0.0;
        for (t, c) in doc.iter() {
            total += c;
            for (a, wa) in wtx.iter_mut().zip(&self.w[t * k..(t + 1) * k]) {
                *a += c * wa;
            }
        }
        if total == 0.0 {
            return vec![0.0; k];
        }
        let wtw = gram(&self.w, k, Execution::Sequential);
        let w_sum: f64 = self.w.iter().sum();
        let mut h = vec![(total / w_sum.max(f64::MIN_POSITIVE)).max(1e-12); k];
        let mut denom = vec![0.0; k];
        for _ in 0..PROJECT_MAX_ITERS {
            mat_vec(&wtw, &h, &mut denom);
            let mut change: f64 = 0.0;
            for a in 0..k {
                if denom[a] > 0.0 {
                    let next = h[a] * wtx[a] / denom[a];
                    let rel = (next - h[a]).abs() / h[a].max(f64::MIN_POSITIVE);
                    change = change.max(if next == 0.0 && h[a] == 0.0 { 0.0 } else { rel });
                    h[a] = next;
                }
            }
            if change < PROJECT_TOL {
                break;
            }
        }
        h
    }
}

fn mat_vec(a: &[f64], x: &[f64], out: &mut [f64]) {
    let k = x.len();
    for (r, o) in out.iter_mut().enumerate() {
        *o = a[r * k..(r + 1) * k].iter().zip(x).map(|(p, q)| p * q).sum();
    }
}

/// H ← H ⊙ (Wᵀ V) / (Wᵀ W H), one document column at a time.
fn update_h(v: &TermDocMatrix, w: &[f64], h: &mut [f64], k: usize, exec: Execution) {
    let wtw = gram(w, k, exec);
    exec.for_each_chunk_mut(h, k, |j, hj| {
        let (idx, val) = v.doc(j);
        let mut numer = vec![0.0; k];
        for (&t, &x) in idx.iter().zip(val) {
            let wt = &w[t as usize * k..(t as usize + 1) * k];
            for (a, wa) in numer.iter_mut().zip(wt) {
                *a += x * wa;
            }
        }
        let mut denom = vec![0.0; k];
        mat_vec(&wtw, hj, &mut denom);
        for a in 0..k {
            if denom[a] > 0.0 {
                hj[a] *= numer[a] / denom[a];
            }
        }
    });
}

/// W ← W ⊙ (V Hᵀ) / (W H Hᵀ), one term row at a time.
fn update_w(v: &TermDocMatrix, w: &mut [f64], h: &[f64], k: usize, exec: Execution) {
    let hht = gram(h, k, exec);
    exec.for_each_chunk_mut(w, k, |t, wt| {
        let (idx, val) = v.term(t);
        let mut numer = vec![0.0; k];
        for (&j, &x) in idx.iter().zip(val) {
            let hj = &h[j as usize * k..(j as usize + 1) * k];
            for (a, ha) in numer.iter_mut().zip(hj) {
                *a += x * ha;
            }
        }
        let mut denom = vec![0.0; k];
        mat_vec(&hht, wt, &mut denom);
        for a in 0..k {
            if denom[a] > 0.0 {
                wt[a] *= numer[a] / denom[a];
            }
        }
    });
}

/// ‖V − WH‖²_F = Σ_nz (v − r)² + (Σ_all r² − Σ_nz r²), with
/// Σ_all r² = ⟨WᵀW, HHᵀ⟩. Nonzero cells are summed per document then in
/// document order.
fn objective(v: &TermDocMatrix, w: &[f64], h: &[f64], k: usize, exec: Execution) -> f64 {
    let per_doc = exec.map_range(v.n_docs(), |j| {
        let (idx, val) = v.doc(j);
        let hj = &h[j * k..(j + 1) * k];
        let mut resid = 0.0;
        let mut recon = 0.0;
        for (&t, &x) in idx.iter().zip(val) {
            let r: f64 = w[t as usize * k..(t as usize + 1) * k].iter().zip(hj).map(|(a, b)| a * b).sum();
            resid += (x - r) * (x - r);
            recon += r * r;
        }
        (resid, recon)
    });
    let (resid, recon_nz) = per_doc.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let wtw = gram(w, k, exec);
    let hht = gram(h, k, exec);
    let recon_all: f64 = wtw.iter().zip(&hht).map(|(a, b)| a * b).sum();
    resid + (recon_all - recon_nz).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topics::{fit_topic_model, TopicKind, TopicModel, TopicParams};

    fn rank2(seed: u64) -> (Vec<Vec<f64>>, TermDocMatrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<[f64; 2]> = (0..10).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
        let b: Vec<[f64; 2]> = (0..8).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
        let dense: Vec<Vec<f64>> = a
            .iter()
            .map(|ar| b.iter().map(|bc| ar[0] * bc[0] + ar[1] * bc[1]).collect())
            .collect();
        let m = TermDocMatrix::from_dense(&dense).unwrap();
        (dense, m)
    }

    fn dense_objective(dense: &[Vec<f64>], model: &NmfModel) -> f64 {
        let k = model.k();
        let mut s = 0.0;
        for (t, row) in dense.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                let r: f64 = (0..k).map(|a| model.w()[t * k + a] * model.h_column(j)[a]).sum();
                s += (x - r).powi(2);
            }
        }
        s
    }

    #[test]
    fn rank_two_reconstruction_and_monotone_objective() {
        let (dense, m) = rank2(11);
        let params = TopicParams {
            k: 2,
            nmf_iters: 2000,
            seed: 5,
            ..Default::default()
        };
        let TopicModel::Nmf(model) = fit_topic_model(TopicKind::Nmf, &m, &params).unwrap() else {
            unreachable!()
        };
        let hist = model.objective_history();
        assert!(hist.windows(2).all(|w| w[1] <= w[0] + MONOTONE_SLACK * m.frobenius_sq()));
        let rel = (dense_objective(&dense, &model) / m.frobenius_sq()).sqrt();
        assert!(rel < 1e-2, "relative error {rel}");
        assert!((dense_objective(&dense, &model) - model.final_objective()).abs() < 1e-9);
        assert!(model.w().iter().chain(model.h()).all(|&x| x >= 0.0));
    }

    #[test]
    fn projection_recovers_training_column_and_zero_doc() {
        let (_, m) = rank2(3);
        let model = NmfModel::fit(&m, &NmfParams { k: 2, iters: 3000, seed: 1 }, Execution::Sequential).unwrap();
        for j in 0..m.n_docs() {
            let p = model.project(&m.doc_terms(j));
            let h = model.h_column(j);
            let norm = h.iter().map(|x| x * x).sum::<f64>().sqrt();
            let diff = p.iter().zip(h).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(diff / norm < 1e-2, "doc {j}: {p:?} vs {h:?}");
        }
        assert_eq!(model.project(&DocTerms::zero(m.n_terms())), vec![0.0; 2]);
    }

    #[test]
    fn execution_modes_are_bit_identical() {
        let (_, m) = rank2(8);
        let p = NmfParams { k: 2, iters: 50, seed: 9 };
        let a = NmfModel::fit(&m, &p, Execution::Sequential).unwrap();
        let b = NmfModel::fit(&m, &p, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }
}
