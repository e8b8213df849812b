//! Integrated likelihood of every candidate segment and the weighted
//! segment-likelihood matrix `A` feeding the segmentation dynamic program.
//!
//! Under the tree backend, the likelihood of segment `r` is
//! `Z(omega^(r)) / Z(b) * prod_i p(y_i^r)` where
//! `omega^(r)_ij = b_ij * p(y_i^r, y_j^r) / (p(y_i^r) p(y_j^r))`.
//! Under the full backend it is the p-dimensional conjugate block marginal.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::Error;
use crate::marginals::{joint_log_block_marginal, Backend, CumulativeStats, PriorSpec, SegmentStats};
use crate::matrix::Mat;
use crate::tree::{edge_posterior, log_tree_partition, EdgeWeightMatrix};
use crate::Result;

/// Segment weights `a_r` and the minimum admissible segment length.
#[derive(Debug, Clone)]
pub struct SegmentPrior {
    weights: SegmentWeights,
    l_min: usize,
}

#[derive(Debug, Clone)]
enum SegmentWeights {
    /// `a_r = 1` for every segment.
    Uniform,
    /// Explicit log-weight table indexed by 1-based boundaries `(s, t)`.
    Custom(Mat),
}

impl SegmentPrior {
    pub fn uniform() -> Self {
        SegmentPrior { weights: SegmentWeights::Uniform, l_min: 1 }
    }

    pub fn uniform_with_min_length(l_min: usize) -> Result<Self> {
        if l_min < 1 {
            return Err(Error::InvalidParameter {
                context: String::from("minimum segment length must be >= 1"),
            });
        }
        Ok(SegmentPrior { weights: SegmentWeights::Uniform, l_min })
    }

    /// Custom log-weight table: `table.get(s, t)` is `log a_[s,t)` for 1-based
    /// boundaries, so the table must be `(N+2) x (N+2)`.
    pub fn custom(log_weights: Mat, l_min: usize) -> Result<Self> {
        if l_min < 1 {
            return Err(Error::InvalidParameter {
                context: String::from("minimum segment length must be >= 1"),
            });
        }
        Ok(SegmentPrior { weights: SegmentWeights::Custom(log_weights), l_min })
    }

    #[inline]
    pub fn min_length(&self) -> usize {
        self.l_min
    }

    /// `log a_[s,t)`, or `-inf` for an inadmissible segment.
    pub fn log_weight(&self, s: usize, t: usize) -> f64 {
        if t < s + self.l_min {
            return f64::NEG_INFINITY;
        }
        match &self.weights {
            SegmentWeights::Uniform => 0.0,
            SegmentWeights::Custom(table) => table.get(s, t),
        }
    }
}

/// The `(N+1) x (N+1)` strictly upper-triangular log-domain matrix of weighted
/// segment likelihoods, stored with 1-based boundary indices.
#[derive(Debug, Clone)]
pub struct SegmentLikelihoodMatrix {
    n: usize,
    /// `(N+2) x (N+2)`; `log_a.get(s, t)` is `log(a_r p(y^r))` for `r = [s, t)`.
    log_a: Mat,
}

impl SegmentLikelihoodMatrix {
    /// Wrap a pre-computed table; `log_a` must be `(N+2) x (N+2)` with finite
    /// entries only at admissible `1 <= s < t <= N+1`.
    pub fn from_parts(n: usize, log_a: Mat) -> Self {
        debug_assert_eq!(log_a.rows(), n + 2);
        SegmentLikelihoodMatrix { n, log_a }
    }

    #[inline]
    pub fn series_len(&self) -> usize {
        self.n
    }

    /// `log(a_r p(y^r))` for `r = [s, t)`; `-inf` off the admissible support.
    #[inline]
    pub fn entry(&self, s: usize, t: usize) -> f64 {
        self.log_a.get(s, t)
    }
}

/// Everything needed to price a segment: prefix statistics per replicate, the
/// prior, the edge prior `b` and its partition function.
///
/// Pure reads only; safe to share across threads.
pub struct SegmentEngine<'a> {
    cums: &'a [CumulativeStats],
    prior: &'a PriorSpec,
    b: &'a EdgeWeightMatrix,
    log_z_b: f64,
}

impl<'a> SegmentEngine<'a> {
    pub fn new(
        cums: &'a [CumulativeStats],
        prior: &'a PriorSpec,
        b: &'a EdgeWeightMatrix,
    ) -> Result<Self> {
        let first = cums.first().ok_or(Error::EmptyReplicates)?;
        let (n, p) = (first.len(), first.dim());
        for cum in cums {
            if cum.len() != n || cum.dim() != p {
                return Err(Error::DimensionMismatch {
                    context: format!(
                        "replicates must share N and p; expected {n}x{p}, got {}x{}",
                        cum.len(),
                        cum.dim()
                    ),
                });
            }
        }
        if prior.dim() != p {
            return Err(Error::DimensionMismatch {
                context: format!("prior is {}-dimensional, data has p = {p}", prior.dim()),
            });
        }
        if b.dim() != p {
            return Err(Error::DimensionMismatch {
                context: format!("edge prior is {}-dimensional, data has p = {p}", b.dim()),
            });
        }
        prior.validate()?;
        let log_z_b = log_tree_partition(b)?;
        Ok(SegmentEngine { cums, prior, b, log_z_b })
    }

    #[inline]
    pub fn series_len(&self) -> usize {
        self.cums[0].len()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.cums[0].dim()
    }

    #[inline]
    pub fn prior(&self) -> &PriorSpec {
        self.prior
    }

    #[inline]
    pub fn edge_prior(&self) -> &EdgeWeightMatrix {
        self.b
    }

    #[inline]
    pub fn log_z_prior(&self) -> f64 {
        self.log_z_b
    }

    fn replicate_stats(&self, s: usize, t: usize) -> Result<Vec<SegmentStats>> {
        self.cums.iter().map(|c| c.segment_stats(s, t)).collect()
    }

    /// Posterior edge weights `omega^(r)` of segment `[s, t)` together with
    /// the per-vertex log marginals.
    pub fn omega(&self, s: usize, t: usize) -> Result<(EdgeWeightMatrix, Vec<f64>)> {
        let p = self.dim();
        let stats = self.replicate_stats(s, t)?;
        let mut vertex = Vec::with_capacity(p);
        for i in 0..p {
            vertex.push(joint_log_block_marginal(&stats, &[i], self.prior).map_err(|e| {
                annotate(e, s, t)
            })?);
        }
        let mut log_w = Mat::zeros(p, p);
        for i in 0..p {
            for j in (i + 1)..p {
                let pair = joint_log_block_marginal(&stats, &[i, j], self.prior)
                    .map_err(|e| annotate(e, s, t))?;
                let v = self.b.log_weight(i, j) + pair - vertex[i] - vertex[j];
                log_w.set(i, j, v);
                log_w.set(j, i, v);
            }
        }
        Ok((EdgeWeightMatrix::new(log_w)?, vertex))
    }

    /// Log integrated likelihood `log p(y^r)` of segment `[s, t)` under the
    /// configured backend (and tempering in replicate mode).
    pub fn segment_log_likelihood(&self, s: usize, t: usize) -> Result<f64> {
        match self.prior.backend {
            Backend::Tree => {
                let (omega, vertex) = self.omega(s, t)?;
                let log_z_omega = log_tree_partition(&omega).map_err(|e| annotate(e, s, t))?;
                let vertex_sum: f64 = vertex.iter().sum();
                Ok(log_z_omega - self.log_z_b + vertex_sum)
            }
            Backend::Full => {
                let stats = self.replicate_stats(s, t)?;
                let block: Vec<usize> = (0..self.dim()).collect();
                joint_log_block_marginal(&stats, &block, self.prior).map_err(|e| annotate(e, s, t))
            }
        }
    }

    /// Posterior edge probabilities `P((i,j) in E_T | y^r)` of one segment.
    /// Tree backend only.
    pub fn segment_edge_posterior(&self, s: usize, t: usize) -> Result<Mat> {
        if self.prior.backend != Backend::Tree {
            return Err(Error::Unsupported {
                context: String::from("per-segment edge posteriors require the tree backend"),
            });
        }
        let (omega, _) = self.omega(s, t)?;
        let summary = edge_posterior(&omega).map_err(|e| annotate(e, s, t))?;
        Ok(summary.edge_prob)
    }

    /// Fill the weighted segment-likelihood matrix over all admissible
    /// segments. Each cell depends only on `(s, t)`, so evaluation order is
    /// irrelevant.
    pub fn build_a(&self, seg_prior: &SegmentPrior) -> Result<SegmentLikelihoodMatrix> {
        let n = self.series_len();
        let mut log_a = Mat::filled(n + 2, n + 2, f64::NEG_INFINITY);
        for s in 1..=n {
            for t in (s + 1)..=(n + 1) {
                let w = seg_prior.log_weight(s, t);
                if w == f64::NEG_INFINITY {
                    continue;
                }
                log_a.set(s, t, w + self.segment_log_likelihood(s, t)?);
            }
        }
        Ok(SegmentLikelihoodMatrix::from_parts(n, log_a))
    }
}

fn annotate(e: Error, s: usize, t: usize) -> Error {
    match e {
        Error::NotPositiveDefinite { context } => Error::NotPositiveDefinite {
            context: format!("segment [{s}, {t}): {context}"),
        },
        Error::NumericalFailure { context, condition } => Error::NumericalFailure {
            context: format!("segment [{s}, {t}): {context}"),
            condition,
        },
        other => other,
    }
}

/// Lazily populated per-segment edge-posterior matrices. Values are pure
/// functions of `(s, t)`, so repeated population is value-identical.
#[derive(Default)]
pub struct SegmentEdgeCache {
    entries: BTreeMap<(usize, usize), Mat>,
}

impl SegmentEdgeCache {
    pub fn new() -> Self {
        SegmentEdgeCache { entries: BTreeMap::new() }
    }

    pub fn edge_posterior(&mut self, engine: &SegmentEngine<'_>, s: usize, t: usize) -> Result<&Mat> {
        if !self.entries.contains_key(&(s, t)) {
            let mat = engine.segment_edge_posterior(s, t)?;
            self.entries.insert((s, t), mat);
        }
        Ok(&self.entries[&(s, t)])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marginals::{log_block_marginal, Dataset};
    use alloc::vec;

    fn dataset_p2() -> Dataset {
        Dataset::new(Mat::from_vec(
            5,
            2,
            vec![0.3, -0.1, 1.2, 0.4, -0.8, 0.9, 0.05, -1.1, 0.6, 0.2],
        ))
        .unwrap()
    }

    #[test]
    fn p2_backends_agree() {
        let data = dataset_p2();
        let cum = [CumulativeStats::new(&data)];
        let b = EdgeWeightMatrix::uniform(2);
        let tree_prior = PriorSpec::naive(2, Backend::Tree);
        let full_prior = PriorSpec::naive(2, Backend::Full);
        let tree = SegmentEngine::new(&cum, &tree_prior, &b).unwrap();
        let full = SegmentEngine::new(&cum, &full_prior, &b).unwrap();
        for s in 1..=5 {
            for t in (s + 1)..=6 {
                let a = tree.segment_log_likelihood(s, t).unwrap();
                let bb = full.segment_log_likelihood(s, t).unwrap();
                assert!((a - bb).abs() < 1e-10, "segment [{s}, {t}): {a} vs {bb}");
            }
        }
    }

    #[test]
    fn p2_edge_posterior_is_one() {
        let data = dataset_p2();
        let cum = [CumulativeStats::new(&data)];
        let b = EdgeWeightMatrix::uniform(2);
        let prior = PriorSpec::naive(2, Backend::Tree);
        let engine = SegmentEngine::new(&cum, &prior, &b).unwrap();
        let m = engine.segment_edge_posterior(1, 6).unwrap();
        assert!((m.get(0, 1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_backend_rejects_edge_posterior() {
        let data = dataset_p2();
        let cum = [CumulativeStats::new(&data)];
        let b = EdgeWeightMatrix::uniform(2);
        let prior = PriorSpec::naive(2, Backend::Full);
        let engine = SegmentEngine::new(&cum, &prior, &b).unwrap();
        assert!(matches!(engine.segment_edge_posterior(1, 6), Err(Error::Unsupported { .. })));
    }

    #[test]
    fn build_a_counts_and_weights() {
        // N = 3: segments [1,2), [1,3), [1,4), [2,3), [2,4), [3,4)
        let data = Dataset::new(Mat::from_vec(3, 2, vec![0.1, 0.2, -0.3, 0.4, 0.5, -0.6])).unwrap();
        let cum = [CumulativeStats::new(&data)];
        let b = EdgeWeightMatrix::uniform(2);
        let prior = PriorSpec::naive(2, Backend::Tree);
        let engine = SegmentEngine::new(&cum, &prior, &b).unwrap();
        let a = engine.build_a(&SegmentPrior::uniform()).unwrap();
        let mut finite = 0;
        for s in 1..=4 {
            for t in 1..=4 {
                if a.entry(s, t).is_finite() {
                    finite += 1;
                    // uniform weights: entry equals the bare segment likelihood
                    let direct = engine.segment_log_likelihood(s, t).unwrap();
                    assert_eq!(a.entry(s, t).to_bits(), direct.to_bits());
                }
            }
        }
        assert_eq!(finite, 6);
    }

    #[test]
    fn min_length_masks_short_segments() {
        let data = dataset_p2();
        let cum = [CumulativeStats::new(&data)];
        let b = EdgeWeightMatrix::uniform(2);
        let prior = PriorSpec::naive(2, Backend::Tree);
        let engine = SegmentEngine::new(&cum, &prior, &b).unwrap();
        let seg_prior = SegmentPrior::uniform_with_min_length(2).unwrap();
        let a = engine.build_a(&seg_prior).unwrap();
        assert_eq!(a.entry(1, 2), f64::NEG_INFINITY);
        assert!(a.entry(1, 3).is_finite());
    }

    #[test]
    fn prior_omega_reduces_to_prior_edge_probabilities() {
        // with omega = b, the segment edge posterior equals the prior one
        let b = EdgeWeightMatrix::uniform(3);
        let prior_summary = edge_posterior(&b).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!((prior_summary.edge_prob.get(i, j) - 2.0 / 3.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn cache_matches_eager() {
        let data = Dataset::new(Mat::from_vec(
            4,
            3,
            vec![0.1, 0.5, -0.2, 0.9, -0.4, 0.3, -0.7, 0.2, 0.8, 0.4, -0.1, -0.6],
        ))
        .unwrap();
        let cum = [CumulativeStats::new(&data)];
        let b = EdgeWeightMatrix::uniform(3);
        let prior = PriorSpec::naive(3, Backend::Tree);
        let engine = SegmentEngine::new(&cum, &prior, &b).unwrap();
        let mut cache = SegmentEdgeCache::new();
        let lazy = cache.edge_posterior(&engine, 1, 4).unwrap().clone();
        let eager = engine.segment_edge_posterior(1, 4).unwrap();
        assert_eq!(lazy, eager);
        // second read hits the cache and is identical
        let again = cache.edge_posterior(&engine, 1, 4).unwrap().clone();
        assert_eq!(again, eager);
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn tree_likelihood_uses_coherent_vertex_marginals() {
        let data = dataset_p2();
        let cum = CumulativeStats::new(&data);
        let stats = cum.segment_stats(2, 5).unwrap();
        let prior = PriorSpec::naive(2, Backend::Tree);
        // vertex marginal depends only on the vertex block
        let v0 = log_block_marginal(&stats, &[0], &prior).unwrap();
        let v0_again = log_block_marginal(&stats, &[0], &prior).unwrap();
        assert_eq!(v0.to_bits(), v0_again.to_bits());
    }
}
