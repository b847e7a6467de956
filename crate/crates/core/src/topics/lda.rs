use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DocTerms, TermDocMatrix};
use crate::error::{Error, Result};
use crate::seed::fnv1a;

const FOLD_IN_SWEEPS: usize = 60;
const FOLD_IN_BURN_IN: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct LdaParams {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iters: usize,
    pub seed: u64,
}

/// Latent Dirichlet allocation fitted by collapsed Gibbs sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    k: usize,
    n_terms: usize,
    alpha: f64,
    beta: f64,
    seed: u64,
    /// Topic-word distributions, `k × terms` row-major; each row sums to 1.
    phi: Vec<f64>,
}

/// Expands a sparse count column into one term id per token.
/// Non-integer weights are rounded to the nearest count.
fn tokens(idx: &[u32], val: &[f64]) -> Vec<u32> {
    let mut out = Vec::new();
    for (&t, &v) in idx.iter().zip(val) {
        let n = v.round().max(0.0) as usize;
        out.extend(std::iter::repeat_n(t, n));
    }
    out
}

fn sample(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        u -= w;
        if u < 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

impl LdaModel {
    pub fn fit(a: &TermDocMatrix, p: &LdaParams) -> Result<Self> {
        if p.k == 0 || p.alpha.is_nan() || p.alpha <= 0.0 || p.beta.is_nan() || p.beta <= 0.0 {
            return Err(Error::InvalidArgument("LDA needs k >= 1 and positive alpha, beta".into()));
        }
        let (k, v) = (p.k, a.n_terms());
        let docs: Vec<Vec<u32>> = (0..a.n_docs())
            .map(|j| {
                let (idx, val) = a.doc(j);
                tokens(idx, val)
            })
            .collect();
        if docs.iter().all(Vec::is_empty) {
            return Err(Error::Empty("LDA corpus has no tokens".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
        let mut n_dk = vec![0u32; docs.len() * k];
        let mut n_kw = vec![0u32; k * v];
        let mut n_k = vec![0u32; k];
        let mut z: Vec<Vec<u16>> = Vec::with_capacity(docs.len());
        if k > u16::MAX as usize {
            return Err(Error::InvalidArgument(format!("LDA topic count {k} is too large")));
        }
        for (d, doc) in docs.iter().enumerate() {
            let zd: Vec<u16> = doc
                .iter()
                .map(|&w| {
                    let t = rng.random_range(0..k);
                    n_dk[d * k + t] += 1;
                    n_kw[t * v + w as usize] += 1;
                    n_k[t] += 1;
                    t as u16
                })
                .collect();
            z.push(zd);
        }
        let v_beta = v as f64 * p.beta;
        let mut weights = vec![0.0; k];
        for _ in 0..p.iters {
            for (d, doc) in docs.iter().enumerate() {
                let nd = &mut n_dk[d * k..(d + 1) * k];
                for (i, &w) in doc.iter().enumerate() {
                    let w = w as usize;
                    let old = z[d][i] as usize;
                    nd[old] -= 1;
                    n_kw[old * v + w] -= 1;
                    n_k[old] -= 1;
                    for t in 0..k {
                        weights[t] = (nd[t] as f64 + p.alpha) * (n_kw[t * v + w] as f64 + p.beta)
                            / (n_k[t] as f64 + v_beta);
                    }
                    let new = sample(&mut rng, &weights);
                    nd[new] += 1;
                    n_kw[new * v + w] += 1;
                    n_k[new] += 1;
                    z[d][i] = new as u16;
                }
            }
        }
        let mut phi = vec![0.0; k * v];
        for t in 0..k {
            let denom = n_k[t] as f64 + v_beta;
            for w in 0..v {
                phi[t * v + w] = (n_kw[t * v + w] as f64 + p.beta) / denom;
            }
        }
        Ok(LdaModel {
            k,
            n_terms: v,
            alpha: p.alpha,
            beta: p.beta,
            seed: p.seed,
            phi,
        })
    }

    pub fn from_parts(k: usize, n_terms: usize, alpha: f64, beta: f64, seed: u64, phi: Vec<f64>) -> Result<Self> {
        if k == 0 || phi.len() != k * n_terms {
            return Err(Error::Format("LDA topic-word table does not match k and term count".into()));
        }
        Ok(LdaModel {
            k,
            n_terms,
            alpha,
            beta,
            seed,
            phi,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_terms(&self) -> usize {
        self.n_terms
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn topic(&self, t: usize) -> &[f64] {
        &self.phi[t * self.n_terms..(t + 1) * self.n_terms]
    }

    /// Posterior-mean topic proportions of an unseen document, by Gibbs
    /// fold-in with the topic-word table held fixed. The sampler is seeded from
    /// the document's content, so a text always gets the same projection.
    /// Documents without known terms get the uniform distribution.
    pub fn project(&self, doc: &DocTerms) -> Vec<f64> {
        let k = self.k;
        let toks = tokens(&doc.indices, &doc.values);
        if toks.is_empty() {
            return vec![1.0 / k as f64; k];
        }
        let key = doc
            .indices
            .iter()
            .zip(&doc.values)
            .flat_map(|(&i, &v)| [i as u64, v.to_bits()]);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ fnv1a(key));
        let mut nd = vec![0u32; k];
        let mut z: Vec<usize> = toks
            .iter()
            .map(|_| {
                let t = rng.random_range(0..k);
                nd[t] += 1;
                t
            })
            .collect();
        let mut weights = vec![0.0; k];
        let mut theta = vec![0.0; k];
        let denom = toks.len() as f64 + k as f64 * self.alpha;
        for sweep in 0..FOLD_IN_SWEEPS {
            for (i, &w) in toks.iter().enumerate() {
                nd[z[i]] -= 1;
                for t in 0..k {
                    weights[t] = (nd[t] as f64 + self.alpha) * self.phi[t * self.n_terms + w as usize];
                }
                z[i] = sample(&mut rng, &weights);
                nd[z[i]] += 1;
            }
            if sweep >= FOLD_IN_BURN_IN {
                for (th, &n) in theta.iter_mut().zip(&nd) {
                    *th += (n as f64 + self.alpha) / denom;
                }
            }
        }
        let samples = (FOLD_IN_SWEEPS - FOLD_IN_BURN_IN) as f64;
        theta.iter_mut().for_each(|t| *t /= samples);
        theta
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Documents drawn from 5 disjoint-vocabulary topics, two topics per doc.
    fn planted(n_docs: usize, seed: u64) -> (TermDocMatrix, Vec<Vec<f64>>) {
        let (k, per_topic) = (5, 12);
        let v = k * per_topic;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = vec![vec![0.0; n_docs]; v];
        for d in 0..n_docs {
            let main = rng.random_range(0..k);
            let other = rng.random_range(0..k);
            for _ in 0..60 {
                let t = if rng.random::<f64>() < 0.8 { main } else { other };
                let w = t * per_topic + rng.random_range(0..per_topic);
                rows[w][d] += 1.0;
            }
        }
        let truth = (0..k)
            .map(|t| {
                let mut p = vec![0.0; v];
                p[t * per_topic..(t + 1) * per_topic].fill(1.0 / per_topic as f64);
                p
            })
            .collect();
        (TermDocMatrix::from_dense(&rows).unwrap(), truth)
    }

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        d / (a.iter().map(|x| x * x).sum::<f64>().sqrt() * b.iter().map(|x| x * x).sum::<f64>().sqrt())
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for i in 0..=p.len() {
                let mut q = p.clone();
                q.insert(i, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn recovers_planted_topics() {
        let (a, truth) = planted(500, 11);
        let m = LdaModel::fit(
            &a,
            &LdaParams {
                k: 5,
                alpha: 0.5,
                beta: 0.01,
                iters: 200,
                seed: 3,
            },
        )
        .unwrap();
        for t in 0..5 {
            assert!((m.topic(t).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let best = permutations(5)
            .into_iter()
            .map(|p| (0..5).map(|t| cosine(m.topic(p[t]), &truth[t])).sum::<f64>() / 5.0)
            .fold(f64::MIN, f64::max);
        assert!(best > 0.8, "mean matched cosine {best}");

        let d = a.doc_terms(0);
        let theta = m.project(&d);
        assert!((theta.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(theta, m.project(&d));
        let uniform = m.project(&DocTerms::zero(a.n_terms()));
        assert!(uniform.iter().all(|&x| (x - 0.2).abs() < 1e-12));
    }
}
