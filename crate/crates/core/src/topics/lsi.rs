use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{DocTerms, TermDocMatrix};
use crate::error::{Error, Result};
use crate::exec::Execution;

/// Matrices whose smaller side is at most this are decomposed exactly.
const EXACT_LIMIT: usize = 512;
const OVERSAMPLE: usize = 10;
const POWER_ITERS: usize = 6;

/// Truncated SVD of the term-document matrix: `A ≈ U_k S_k V_kᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LsiModel {
    k: usize,
    n_terms: usize,
    /// `terms × k`, row-major, orthonormal columns.
    u: Vec<f64>,
    /// Non-increasing singular values.
    s: Vec<f64>,
    seed: u64,
}

impl LsiModel {
    pub fn fit(a: &TermDocMatrix, k: usize, seed: u64, exec: Execution) -> Result<Self> {
        let (m, n) = (a.n_terms(), a.n_docs());
        if k == 0 || k > m.min(n) {
            return Err(Error::InvalidArgument(format!(
                "LSI needs 1 <= k <= min(terms, docs) = {}, got k = {k}",
                m.min(n)
            )));
        }
        let (u, s) = if m.min(n) <= EXACT_LIMIT || k + OVERSAMPLE >= m.min(n) {
            exact_svd(a, k)?
        } else {
            randomized_svd(a, k, seed, exec)?
        };
        Ok(LsiModel {
            k,
            n_terms: m,
            u,
            s,
            seed,
        })
    }

    pub fn from_parts(k: usize, n_terms: usize, u: Vec<f64>, s: Vec<f64>, seed: u64) -> Result<Self> {
        if k == 0 || u.len() != n_terms * k || s.len() != k {
            return Err(Error::Format("LSI factor shapes do not match k and term count".into()));
        }
        Ok(LsiModel {
            k,
            n_terms,
            u,
            s,
            seed,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_terms(&self) -> usize {
        self.n_terms
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.s
    }

    /// `terms × k` row-major.
    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn u_column(&self, c: usize) -> Vec<f64> {
        (0..self.n_terms).map(|t| self.u[t * self.k + c]).collect()
    }

    /// `S_k⁻¹ U_kᵀ x`; zero singular values project to 0.
    pub fn project(&self, doc: &DocTerms) -> Vec<f64> {
        let k = self.k;
        let mut y = vec![0.0; k];
        for (t, x) in doc.iter() {
            for (a, ua) in y.iter_mut().zip(&self.u[t * k..(t + 1) * k]) {
                *a += x * ua;
            }
        }
        for (a, &s) in y.iter_mut().zip(&self.s) {
            *a = if s > 0.0 { *a / s } else { 0.0 };
        }
        y
    }

    /// ‖A − U_k U_kᵀ A‖²_F.
    pub fn reconstruction_error(&self, a: &TermDocMatrix) -> f64 {
        let k = self.k;
        let mut err = 0.0;
        for j in 0..a.n_docs() {
            let (idx, val) = a.doc(j);
            let mut c = vec![0.0; k];
            let mut norm = 0.0;
            for (&t, &x) in idx.iter().zip(val) {
                norm += x * x;
                for (ca, ua) in c.iter_mut().zip(&self.u[t as usize * k..(t as usize + 1) * k]) {
                    *ca += x * ua;
                }
            }
            err += norm - c.iter().map(|v| v * v).sum::<f64>();
        }
        err.max(0.0)
    }
}

fn dense(a: &TermDocMatrix) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(a.n_terms(), a.n_docs());
    for j in 0..a.n_docs() {
        let (idx, val) = a.doc(j);
        for (&t, &x) in idx.iter().zip(val) {
            d[(t as usize, j)] = x;
        }
    }
    d
}

/// Sorts singular triplets by value and keeps the top k left vectors.
fn top_k(u: &DMatrix<f64>, s: &[f64], k: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("SVD produced non-finite singular values".into()));
    }
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
    let m = u.nrows();
    let mut out = vec![0.0; m * k];
    for (c, &src) in order.iter().take(k).enumerate() {
        for t in 0..m {
            out[t * k + c] = u[(t, src)];
        }
    }
    Ok((out, order.iter().take(k).map(|&i| s[i].max(0.0)).collect()))
}

fn exact_svd(a: &TermDocMatrix, k: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = dense(a);
    let svd = d.svd(true, false);
    let u = svd.u.ok_or_else(|| Error::Numerical("SVD did not return U".into()))?;
    top_k(&u, svd.singular_values.as_slice(), k)
}

/// `A X` for dense `n_docs × l` X, result `n_terms × l`.
fn a_times(a: &TermDocMatrix, x: &DMatrix<f64>, exec: Execution) -> DMatrix<f64> {
    let l = x.ncols();
    let rows = exec.map_range(a.n_terms(), |t| {
        let (idx, val) = a.term(t);
        let mut r = vec![0.0; l];
        for (&j, &v) in idx.iter().zip(val) {
            for (c, rc) in r.iter_mut().enumerate() {
                *rc += v * x[(j as usize, c)];
            }
        }
        r
    });
    DMatrix::from_fn(a.n_terms(), l, |r, c| rows[r][c])
}

/// `Aᵀ X` for dense `n_terms × l` X, result `n_docs × l`.
fn at_times(a: &TermDocMatrix, x: &DMatrix<f64>, exec: Execution) -> DMatrix<f64> {
    let l = x.ncols();
    let rows = exec.map_range(a.n_docs(), |j| {
        let (idx, val) = a.doc(j);
        let mut r = vec![0.0; l];
        for (&t, &v) in idx.iter().zip(val) {
            for (c, rc) in r.iter_mut().enumerate() {
                *rc += v * x[(t as usize, c)];
            }
        }
        r
    });
    DMatrix::from_fn(a.n_docs(), l, |r, c| rows[r][c])
}

fn orthonormalize(y: DMatrix<f64>) -> DMatrix<f64> {
    y.qr().q()
}

/// Randomized range finder with power iterations, followed by an exact SVD of
/// the small projected matrix.
fn randomized_svd(a: &TermDocMatrix, k: usize, seed: u64, exec: Execution) -> Result<(Vec<f64>, Vec<f64>)> {
    let l = (k + OVERSAMPLE).min(a.n_terms().min(a.n_docs()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = DMatrix::from_fn(a.n_docs(), l, |_, _| StandardNormal.sample(&mut rng));
    let mut q = orthonormalize(a_times(a, &omega, exec));
    for _ in 0..POWER_ITERS {
        let z = orthonormalize(at_times(a, &q, exec));
        q = orthonormalize(a_times(a, &z, exec));
    }
    // Bᵀ = Aᵀ Q  (n_docs × l); B = V Σ Uᵀ of its SVD, so B's left vectors are V.
    let bt = at_times(a, &q, exec);
    let svd = bt.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Numerical("SVD did not return Vᵀ".into()))?;
    let u_small = v_t.transpose();
    let u = &q * u_small;
    top_k(&u, svd.singular_values.as_slice(), k)
}
