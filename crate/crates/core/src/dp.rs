//! Exact integration over segmentations: the matrix-power recursion on the
//! weighted segment-likelihood matrix, evidence `p(y|K)`, change-point and
//! segment posteriors, the posterior on `K`, and MAP segmentation recovery
//! (Segment Neighbourhood Search).
//!
//! All recursions run in log-domain with streaming log-sum-exp; nothing is
//! exponentiated except normalized differences.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::math::{exp, log_sum_exp_slice, ln};
use crate::segment::{SegmentLikelihoodMatrix, SegmentPrior};
use crate::Result;

/// A segmentation of `[1, N]` into contiguous segments, stored as its sorted
/// interior change-points (1-based segment start indices, each in `2..=N`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmentation {
    n: usize,
    change_points: Vec<usize>,
}

impl Segmentation {
    pub fn new(n: usize, change_points: Vec<usize>) -> Result<Self> {
        let mut prev = 1usize;
        for &cp in &change_points {
            if cp <= prev || cp > n {
                return Err(Error::InvalidParameter {
                    context: format!("change-points must be strictly increasing within 2..={n}"),
                });
            }
            prev = cp;
        }
        Ok(Segmentation { n, change_points })
    }

    #[inline]
    pub fn series_len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn num_segments(&self) -> usize {
        self.change_points.len() + 1
    }

    #[inline]
    pub fn change_points(&self) -> &[usize] {
        &self.change_points
    }

    /// Half-open segments `[s, t)` with boundaries in `1..=N+1`.
    pub fn segments(&self) -> Vec<(usize, usize)> {
        let mut bounds = Vec::with_capacity(self.num_segments() + 1);
        bounds.push(1);
        bounds.extend_from_slice(&self.change_points);
        bounds.push(self.n + 1);
        bounds.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

/// Prior on the number of segments, supported on `1..=K_max`.
#[derive(Debug, Clone)]
pub struct KPrior {
    kind: KPriorKind,
    k_max: usize,
}

#[derive(Debug, Clone)]
enum KPriorKind {
    Uniform,
    /// Poisson(gamma) truncated to `1..=K_max`.
    TruncatedPoisson(f64),
}

impl KPrior {
    pub fn uniform(k_max: usize) -> Result<Self> {
        if k_max < 1 {
            return Err(Error::InvalidParameter { context: format!("K_max must be >= 1") });
        }
        Ok(KPrior { kind: KPriorKind::Uniform, k_max })
    }

    pub fn truncated_poisson(gamma: f64, k_max: usize) -> Result<Self> {
        if k_max < 1 || !(gamma > 0.0) {
            return Err(Error::InvalidParameter {
                context: format!("truncated Poisson requires gamma > 0 and K_max >= 1"),
            });
        }
        Ok(KPrior { kind: KPriorKind::TruncatedPoisson(gamma), k_max })
    }

    #[inline]
    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Normalized log prior probabilities for `K = 1..=K_max`.
    pub fn log_probs(&self) -> Vec<f64> {
        let mut logs = Vec::with_capacity(self.k_max);
        match self.kind {
            KPriorKind::Uniform => logs.resize(self.k_max, 0.0),
            KPriorKind::TruncatedPoisson(gamma) => {
                let mut log_fact = 0.0;
                for k in 1..=self.k_max {
                    log_fact += ln(k as f64);
                    logs.push(k as f64 * ln(gamma) - log_fact);
                }
            }
        }
        let total = log_sum_exp_slice(&logs);
        for l in logs.iter_mut() {
            *l -= total;
        }
        logs
    }
}

/// Forward/backward tables `log [A^k]_{1,t}` and `log [A^k]_{t,N+1}` for
/// `k <= K_max`. The zero power follows the identity convention
/// (`[A^0]_{t1,t2} = 1` iff `t1 = t2`), which is what the posterior
/// normalizations require.
#[derive(Debug, Clone)]
pub struct DpTables {
    n: usize,
    k_max: usize,
    /// `forward[k][t] = log [A^k]_{1,t}`, `t` in `1..=N+1` (index 0 unused).
    forward: Vec<Vec<f64>>,
    /// `backward[k][t] = log [A^k]_{t,N+1}`.
    backward: Vec<Vec<f64>>,
}

impl DpTables {
    pub fn new(a: &SegmentLikelihoodMatrix, k_max: usize) -> Result<Self> {
        if k_max < 1 {
            return Err(Error::InvalidParameter { context: format!("K_max must be >= 1") });
        }
        let n = a.series_len();
        let mut forward = vec![vec![f64::NEG_INFINITY; n + 2]; k_max + 1];
        let mut backward = vec![vec![f64::NEG_INFINITY; n + 2]; k_max + 1];
        forward[0][1] = 0.0;
        backward[0][n + 1] = 0.0;
        let mut terms = Vec::with_capacity(n + 1);
        for k in 1..=k_max {
            for t in 2..=(n + 1) {
                terms.clear();
                for u in 1..t {
                    let prev = forward[k - 1][u];
                    if prev != f64::NEG_INFINITY {
                        let step = a.entry(u, t);
                        if step != f64::NEG_INFINITY {
                            terms.push(prev + step);
                        }
                    }
                }
                forward[k][t] = log_sum_exp_slice(&terms);
            }
            for t in (1..=n).rev() {
                terms.clear();
                for u in (t + 1)..=(n + 1) {
                    let next = backward[k - 1][u];
                    if next != f64::NEG_INFINITY {
                        let step = a.entry(t, u);
                        if step != f64::NEG_INFINITY {
                            terms.push(step + next);
                        }
                    }
                }
                backward[k][t] = log_sum_exp_slice(&terms);
            }
        }
        for k in 1..=k_max {
            if forward[k][n + 1] == f64::NEG_INFINITY {
                return Err(Error::NoAdmissibleSegmentation { k });
            }
        }
        Ok(DpTables { n, k_max, forward, backward })
    }

    #[inline]
    pub fn series_len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// `log [A^k]_{1,t}`.
    #[inline]
    pub fn forward(&self, k: usize, t: usize) -> f64 {
        self.forward[k][t]
    }

    /// `log [A^k]_{t,N+1}`.
    #[inline]
    pub fn backward(&self, k: usize, t: usize) -> f64 {
        self.backward[k][t]
    }

    /// `log [A^K]_{1,N+1}`, i.e. `log (C_K(a) p(y|K))`.
    #[inline]
    pub fn log_total(&self, k: usize) -> f64 {
        self.forward[k][self.n + 1]
    }
}

/// `log C_K(a)`, the segmentation normalizing constant, via the same
/// recursion on the weight-only matrix. For uniform weights this is the
/// binomial coefficient `C(N-1, K-1)`.
pub fn segmentation_constant(seg_prior: &SegmentPrior, n: usize, k: usize) -> Result<f64> {
    if k > n {
        return Err(Error::InvalidParameter {
            context: format!("K = {k} segments cannot partition N = {n} points"),
        });
    }
    let mut forward = vec![f64::NEG_INFINITY; n + 2];
    forward[1] = 0.0;
    let mut next = vec![f64::NEG_INFINITY; n + 2];
    let mut terms = Vec::with_capacity(n + 1);
    for _ in 1..=k {
        for t in 2..=(n + 1) {
            terms.clear();
            for u in 1..t {
                if forward[u] != f64::NEG_INFINITY {
                    let w = seg_prior.log_weight(u, t);
                    if w != f64::NEG_INFINITY {
                        terms.push(forward[u] + w);
                    }
                }
            }
            next[t] = log_sum_exp_slice(&terms);
        }
        core::mem::swap(&mut forward, &mut next);
        for v in next.iter_mut() {
            *v = f64::NEG_INFINITY;
        }
        forward[1] = f64::NEG_INFINITY; // index 1 is only reachable at power 0
    }
    let total = forward[n + 1];
    if total == f64::NEG_INFINITY {
        return Err(Error::NoAdmissibleSegmentation { k });
    }
    Ok(total)
}

/// `log p(y|K) = log [A^K]_{1,N+1} - log C_K(a)`.
pub fn log_evidence(tables: &DpTables, seg_prior: &SegmentPrior, k: usize) -> Result<f64> {
    Ok(tables.log_total(k) - segmentation_constant(seg_prior, tables.series_len(), k)?)
}

/// Normalized posterior `p(K|y)` over `1..=K_max`.
pub fn posterior_k(tables: &DpTables, seg_prior: &SegmentPrior, kprior: &KPrior) -> Result<Vec<f64>> {
    let k_max = kprior.k_max().min(tables.k_max());
    let log_prior = kprior.log_probs();
    let mut logs = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        logs.push(log_prior[k - 1] + log_evidence(tables, seg_prior, k)?);
    }
    let total = log_sum_exp_slice(&logs);
    Ok(logs.into_iter().map(|l| exp(l - total)).collect())
}

/// Change-point posteriors conditional on `K` segments:
/// `B_{K,k}(t)` for `1 <= k < K` and their sum `B_K(t)`. Both are indexed by
/// `t` directly (`t` in `2..=N`); entries outside that range are zero.
/// Empty for `K < 2`.
pub fn changepoint_posteriors(tables: &DpTables, k_total: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = tables.series_len();
    let mut b_kk = Vec::new();
    let mut b_k = vec![0.0; n + 2];
    if k_total < 2 {
        return (b_kk, b_k);
    }
    let norm = tables.log_total(k_total);
    for k in 1..k_total {
        let mut row = vec![0.0; n + 2];
        for t in 2..=n {
            let v = tables.forward(k, t) + tables.backward(k_total - k, t) - norm;
            if v != f64::NEG_INFINITY {
                let prob = exp(v);
                row[t] = prob;
                b_k[t] += prob;
            }
        }
        b_kk.push(row);
    }
    (b_kk, b_k)
}

/// Posterior segment probabilities `S_K([s, t)) = sum_k S_{K,k}([s, t))`,
/// returned sparsely as `(s, t, prob)` over admissible segments with nonzero
/// posterior mass.
pub fn segment_posteriors(
    tables: &DpTables,
    a: &SegmentLikelihoodMatrix,
    k_total: usize,
) -> Vec<(usize, usize, f64)> {
    let n = tables.series_len();
    let norm = tables.log_total(k_total);
    let mut out = Vec::new();
    for s in 1..=n {
        for t in (s + 1)..=(n + 1) {
            let step = a.entry(s, t);
            if step == f64::NEG_INFINITY {
                continue;
            }
            let mut mass = 0.0;
            for k in 1..=k_total {
                let left = tables.forward(k - 1, s);
                let right = tables.backward(k_total - k, t);
                if left != f64::NEG_INFINITY && right != f64::NEG_INFINITY {
                    mass += exp(left + step + right - norm);
                }
            }
            if mass > 0.0 {
                out.push((s, t, mass));
            }
        }
    }
    out
}

/// Max-product analogue of the forward recursion, backtracked to the best
/// segmentation with exactly `K` segments. Ties are broken towards the
/// smallest change-point index at each backtrack step. Also returns the
/// maximized `log prod_r A_{s,t}` value.
pub fn map_segmentation(a: &SegmentLikelihoodMatrix, k_total: usize) -> Result<(Segmentation, f64)> {
    let n = a.series_len();
    if k_total < 1 || k_total > n {
        return Err(Error::InvalidParameter {
            context: format!("MAP segmentation requires 1 <= K <= N, got K = {k_total}, N = {n}"),
        });
    }
    let mut best = vec![vec![f64::NEG_INFINITY; n + 2]; k_total + 1];
    best[0][1] = 0.0;
    for k in 1..=k_total {
        for t in 2..=(n + 1) {
            let mut b = f64::NEG_INFINITY;
            for u in 1..t {
                let prev = best[k - 1][u];
                if prev == f64::NEG_INFINITY {
                    continue;
                }
                let step = a.entry(u, t);
                if step == f64::NEG_INFINITY {
                    continue;
                }
                let cand = prev + step;
                if cand > b {
                    b = cand;
                }
            }
            best[k][t] = b;
        }
    }
    let score = best[k_total][n + 1];
    if score == f64::NEG_INFINITY {
        return Err(Error::NoAdmissibleSegmentation { k: k_total });
    }
    // backtrack; at each step take the smallest boundary achieving the max
    let mut cps = Vec::with_capacity(k_total - 1);
    let mut t = n + 1;
    for k in (1..=k_total).rev() {
        let target = best[k][t];
        let mut chosen = 0;
        for u in 1..t {
            let prev = best[k - 1][u];
            if prev == f64::NEG_INFINITY {
                continue;
            }
            let step = a.entry(u, t);
            if step == f64::NEG_INFINITY {
                continue;
            }
            if prev + step >= target - 1e-12 {
                chosen = u;
                break;
            }
        }
        debug_assert!(chosen >= 1);
        if k > 1 {
            cps.push(chosen);
        }
        t = chosen;
    }
    cps.reverse();
    Ok((Segmentation::new(n, cps)?, score))
}

/// Full posterior summary: evidence and posterior over `K`, change-point and
/// segment posteriors for every `K`, MAP segmentations and both `K`
/// estimators.
#[derive(Debug, Clone)]
pub struct PosteriorSummary {
    pub n: usize,
    pub k_max: usize,
    /// `log p(y|K)` for `K = 1..=K_max`.
    pub log_evidence_by_k: Vec<f64>,
    /// `p(K|y)`.
    pub posterior_k: Vec<f64>,
    /// `B_{K,k}(t)`: `b_kk[K-1][k-1][t]` (empty inner list for `K = 1`).
    pub b_kk: Vec<Vec<Vec<f64>>>,
    /// `B_K(t)`: `b_k[K-1][t]`.
    pub b_k: Vec<Vec<f64>>,
    /// `B(t) = sum_{K >= 2} p(K|y) B_K(t)`.
    pub b: Vec<f64>,
    /// Sparse `S_K` per `K`: `(s, t, prob)` triples.
    pub s_k: Vec<Vec<(usize, usize, f64)>>,
    /// Best segmentation with exactly `K` segments.
    pub map_by_k: Vec<Segmentation>,
    /// `log p(K) - log C_K(a) + max_m log prod A` for each `K`.
    pub map_log_joint_by_k: Vec<f64>,
    /// `argmax_K p(K|y)`.
    pub k_hat_1: usize,
    /// `K` of the global MAP over `(m, K)` jointly.
    pub k_hat_2: usize,
}

impl PosteriorSummary {
    /// The MAP segmentation under the global `(m, K)` maximization.
    pub fn global_map(&self) -> &Segmentation {
        &self.map_by_k[self.k_hat_2 - 1]
    }
}

const NORMALIZATION_TOL: f64 = 1e-8;

/// Run the whole posterior analysis on a segment-likelihood matrix.
pub fn analyze(
    a: &SegmentLikelihoodMatrix,
    seg_prior: &SegmentPrior,
    kprior: &KPrior,
) -> Result<PosteriorSummary> {
    let n = a.series_len();
    let k_max = kprior.k_max().min(n);
    let tables = DpTables::new(a, k_max)?;
    let log_prior = kprior.log_probs();

    let mut log_evidence_by_k = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        log_evidence_by_k.push(log_evidence(&tables, seg_prior, k)?);
    }
    let posterior = {
        let mut logs: Vec<f64> = (0..k_max).map(|i| log_prior[i] + log_evidence_by_k[i]).collect();
        let total = log_sum_exp_slice(&logs);
        for l in logs.iter_mut() {
            *l = exp(*l - total);
        }
        logs
    };

    let mut b_kk = Vec::with_capacity(k_max);
    let mut b_k = Vec::with_capacity(k_max);
    let mut s_k = Vec::with_capacity(k_max);
    let mut map_by_k = Vec::with_capacity(k_max);
    let mut map_log_joint_by_k = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let (kk, ksum) = changepoint_posteriors(&tables, k);
        b_kk.push(kk);
        b_k.push(ksum);
        s_k.push(segment_posteriors(&tables, a, k));
        let (map, score) = map_segmentation(a, k)?;
        map_by_k.push(map);
        map_log_joint_by_k
            .push(log_prior[k - 1] - segmentation_constant(seg_prior, n, k)? + score);
    }

    let mut b = vec![0.0; n + 2];
    for k in 2..=k_max {
        for t in 2..=n {
            b[t] += posterior[k - 1] * b_k[k - 1][t];
        }
    }

    let k_hat_1 = argmax(&posterior) + 1;
    let k_hat_2 = argmax(&map_log_joint_by_k) + 1;

    let summary = PosteriorSummary {
        n,
        k_max,
        log_evidence_by_k,
        posterior_k: posterior,
        b_kk,
        b_k,
        b,
        s_k,
        map_by_k,
        map_log_joint_by_k,
        k_hat_1,
        k_hat_2,
    };
    summary.check_normalizations()?;
    Ok(summary)
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

impl PosteriorSummary {
    /// Assert the exact-inference normalization identities.
    pub fn check_normalizations(&self) -> Result<()> {
        let total_k: f64 = self.posterior_k.iter().sum();
        if crate::math::abs(total_k - 1.0) > NORMALIZATION_TOL {
            return Err(Error::NumericalFailure {
                context: format!("posterior over K sums to {total_k}"),
                condition: f64::NAN,
            });
        }
        for (ki, rows) in self.b_kk.iter().enumerate() {
            for (kj, row) in rows.iter().enumerate() {
                let total: f64 = row.iter().sum();
                if crate::math::abs(total - 1.0) > NORMALIZATION_TOL {
                    return Err(Error::NumericalFailure {
                        context: format!("B_{{{},{}}} sums to {total}", ki + 1, kj + 1),
                        condition: f64::NAN,
                    });
                }
            }
        }
        for (ki, triples) in self.s_k.iter().enumerate() {
            let k = ki + 1;
            let mut per_time = vec![0.0; self.n + 1];
            for &(s, t, prob) in triples {
                for u in s..t {
                    if u <= self.n {
                        per_time[u] += prob;
                    }
                }
            }
            for (u, &mass) in per_time.iter().enumerate().skip(1) {
                if crate::math::abs(mass - 1.0) > NORMALIZATION_TOL {
                    return Err(Error::NumericalFailure {
                        context: format!("S_{k} mass at time {u} sums to {mass}"),
                        condition: f64::NAN,
                    });
                }
            }
        }
        Ok(())
    }
}
