//! Conjugate Gaussian marginal likelihoods for arbitrary index blocks of
//! arbitrary segments.
//!
//! One coherent p-dimensional (normal-)Wishart prior is specified once; block
//! marginals of size 1 and 2 feed the tree machinery, the full p-dimensional
//! block is the unstructured backend. Prefix sufficient statistics make any
//! segment's statistics an O(p^2) difference of two prefixes.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::math::{self, log_multivariate_gamma, LOG_PI};
use crate::matrix::Mat;
use crate::Result;

/// Which integrated likelihood governs each segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    /// Spanning-tree mixture built from 1- and 2-dimensional block marginals.
    Tree,
    /// Unconstrained p-dimensional Wishart model.
    Full,
}

/// Mean treatment of the Gaussian model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanMode {
    /// Known zero mean; Wishart prior on the precision only.
    ZeroMean,
    /// Unknown mean with a normal-Wishart prior.
    UnknownMean,
}

/// A multivariate time-series: `N` rows (time) by `p` columns (variables).
#[derive(Debug, Clone)]
pub struct Dataset {
    values: Mat,
    pub replicate_id: Option<String>,
    pub variable_names: Option<Vec<String>>,
}

impl Dataset {
    /// Validates shape (`N >= 2`, `p >= 2`) and finiteness of every entry.
    pub fn new(values: Mat) -> Result<Self> {
        if values.rows() < 2 || values.cols() < 2 {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "dataset must be at least 2x2, got {}x{}",
                    values.rows(),
                    values.cols()
                ),
            });
        }
        for i in 0..values.rows() {
            for j in 0..values.cols() {
                if !values.get(i, j).is_finite() {
                    return Err(Error::NonFiniteData { row: i, col: j });
                }
            }
        }
        Ok(Dataset { values, replicate_id: None, variable_names: None })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.rows()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false // N >= 2 by construction
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    #[inline]
    pub fn values(&self) -> &Mat {
        &self.values
    }

    /// Column means.
    pub fn column_means(&self) -> Vec<f64> {
        let (n, p) = (self.len(), self.dim());
        let mut mean = vec![0.0; p];
        for t in 0..n {
            for j in 0..p {
                mean[j] += self.values.get(t, j);
            }
        }
        for m in mean.iter_mut() {
            *m /= n as f64;
        }
        mean
    }

    /// Returns a copy with every column centered on its mean.
    pub fn centered(&self) -> Dataset {
        let (n, p) = (self.len(), self.dim());
        let mean = self.column_means();
        let mut values = self.values.clone();
        for t in 0..n {
            for j in 0..p {
                values.set(t, j, values.get(t, j) - mean[j]);
            }
        }
        Dataset {
            values,
            replicate_id: self.replicate_id.clone(),
            variable_names: self.variable_names.clone(),
        }
    }
}

/// Hyper-parameters of the conjugate prior shared by both backends.
#[derive(Debug, Clone)]
pub struct PriorSpec {
    /// Degrees of freedom of the p-dimensional Wishart, `alpha > p - 1`.
    pub alpha: f64,
    /// p x p symmetric positive-definite scale matrix.
    pub phi: Mat,
    pub mean_mode: MeanMode,
    /// Prior precision scalar for the mean (unknown-mean mode only).
    pub kappa0: f64,
    /// Prior mean vector (unknown-mean mode only).
    pub mu0: Vec<f64>,
    pub backend: Backend,
    /// Tempering exponent, `>= 1`; block log-marginals are divided by it in
    /// replicate mode.
    pub temper_alpha: f64,
}

impl PriorSpec {
    /// The `alpha = p + 10`, `phi = (alpha - p - 1) I` prior.
    pub fn naive(p: usize, backend: Backend) -> Self {
        let alpha = p as f64 + 10.0;
        let mut phi = Mat::identity(p);
        for i in 0..p {
            phi.set(i, i, alpha - p as f64 - 1.0);
        }
        PriorSpec {
            alpha,
            phi,
            mean_mode: MeanMode::ZeroMean,
            kappa0: 1.0,
            mu0: vec![0.0; p],
            backend,
            temper_alpha: 1.0,
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.phi.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.dim();
        self.phi.require_symmetric(1e-10, "prior scale matrix phi")?;
        self.phi
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite { context: String::from("prior scale matrix phi") })?;
        if !(self.alpha > p as f64 - 1.0) {
            return Err(Error::InvalidParameter {
                context: format!("alpha = {} must exceed p - 1 = {}", self.alpha, p - 1),
            });
        }
        if !(self.temper_alpha >= 1.0) {
            return Err(Error::InvalidParameter {
                context: format!("temper_alpha = {} must be >= 1", self.temper_alpha),
            });
        }
        if self.mean_mode == MeanMode::UnknownMean {
            if !(self.kappa0 > 0.0) {
                return Err(Error::InvalidParameter {
                    context: format!("kappa0 = {} must be > 0 in unknown-mean mode", self.kappa0),
                });
            }
            if self.mu0.len() != p {
                return Err(Error::DimensionMismatch {
                    context: format!("mu0 has length {}, expected {p}", self.mu0.len()),
                });
            }
        }
        Ok(())
    }
}

/// Prefix sufficient statistics of a dataset: `prefix(t)` holds the sums over
/// rows `0..t`, so segment statistics are prefix differences.
#[derive(Debug, Clone)]
pub struct CumulativeStats {
    n: usize,
    p: usize,
    /// (N+1) x p prefix sums of `y^t`.
    sum_prefix: Mat,
    /// N+1 prefix sums of `y^t (y^t)^T`, flattened p x p each.
    outer_prefix: Vec<Mat>,
}

/// Sufficient statistics of one segment.
#[derive(Debug, Clone)]
pub struct SegmentStats {
    /// Segment length.
    pub n: usize,
    /// `sum_{t in r} y^t`.
    pub s_vec: Vec<f64>,
    /// `sum_{t in r} y^t (y^t)^T`.
    pub s_mat: Mat,
}

impl CumulativeStats {
    pub fn new(data: &Dataset) -> Self {
        let (n, p) = (data.len(), data.dim());
        let mut sum_prefix = Mat::zeros(n + 1, p);
        let mut outer_prefix = Vec::with_capacity(n + 1);
        outer_prefix.push(Mat::zeros(p, p));
        for t in 0..n {
            let mut outer = outer_prefix[t].clone();
            for i in 0..p {
                let yi = data.values().get(t, i);
                sum_prefix.set(t + 1, i, sum_prefix.get(t, i) + yi);
                for j in 0..p {
                    outer.add_to(i, j, yi * data.values().get(t, j));
                }
            }
            outer_prefix.push(outer);
        }
        CumulativeStats { n, p, sum_prefix, outer_prefix }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.p
    }

    /// Statistics of the 1-based half-open segment `[s, t)`.
    pub fn segment_stats(&self, s: usize, t: usize) -> Result<SegmentStats> {
        if s < 1 || s >= t || t > self.n + 1 {
            return Err(Error::InvalidSegment { s, t, n: self.n });
        }
        let (lo, hi) = (s - 1, t - 1);
        let p = self.p;
        let mut s_vec = vec![0.0; p];
        for i in 0..p {
            s_vec[i] = self.sum_prefix.get(hi, i) - self.sum_prefix.get(lo, i);
        }
        let mut s_mat = Mat::zeros(p, p);
        for i in 0..p {
            for j in 0..p {
                s_mat.set(i, j, self.outer_prefix[hi].get(i, j) - self.outer_prefix[lo].get(i, j));
            }
        }
        Ok(SegmentStats { n: hi - lo, s_vec, s_mat })
    }
}

/// Log marginal likelihood of the block-restricted observations of one
/// segment under the coherent conjugate prior.
///
/// With `d = |block|`, the marginal degrees of freedom are `nu = alpha - p + d`
/// so that block marginals of every size come from one p-dimensional prior.
pub fn log_block_marginal(stats: &SegmentStats, block: &[usize], prior: &PriorSpec) -> Result<f64> {
    let p = prior.dim();
    let d = block.len();
    if d != 1 && d != 2 && d != p {
        return Err(Error::InvalidParameter {
            context: format!("block size {d} not in {{1, 2, {p}}}"),
        });
    }
    if stats.n < 1 {
        return Err(Error::InvalidParameter { context: String::from("empty segment") });
    }
    let n = stats.n as f64;
    let nu = prior.alpha - p as f64 + d as f64;
    let psi = prior.phi.principal_submatrix(block);
    let mut scatter = stats.s_mat.principal_submatrix(block);

    let mut log_m = -(n * d as f64 / 2.0) * LOG_PI
        + log_multivariate_gamma(d, (nu + n) / 2.0)?
        - log_multivariate_gamma(d, nu / 2.0)?;

    if prior.mean_mode == MeanMode::UnknownMean {
        // Psi_n = Psi + S - n ybar ybar^T + (kappa0 n / (kappa0 + n)) (ybar - mu0)(ybar - mu0)^T
        let k0 = prior.kappa0;
        let shrink = k0 * n / (k0 + n);
        for (a, &i) in block.iter().enumerate() {
            let ybar_i = stats.s_vec[i] / n;
            let dev_i = ybar_i - prior.mu0[i];
            for (b, &j) in block.iter().enumerate() {
                let ybar_j = stats.s_vec[j] / n;
                let dev_j = ybar_j - prior.mu0[j];
                scatter.add_to(a, b, -n * ybar_i * ybar_j + shrink * dev_i * dev_j);
            }
        }
        log_m += d as f64 / 2.0 * math::ln(k0 / (k0 + n));
    }

    let mut posterior_scale = psi.clone();
    for a in 0..d {
        for b in 0..d {
            posterior_scale.add_to(a, b, scatter.get(a, b));
        }
    }
    let log_det_psi = psi.spd_log_det("block restriction of phi")?;
    let log_det_post = posterior_scale.spd_log_det(&format!(
        "posterior scale Psi + S on block {block:?} (segment length {})",
        stats.n
    ))?;
    log_m += nu / 2.0 * log_det_psi - (nu + n) / 2.0 * log_det_post;
    Ok(log_m)
}

/// Per-block contribution of the joint multi-replicate (and possibly
/// tempered) likelihood: `(1 / temper_alpha) * sum_u log m_u`.
pub fn joint_log_block_marginal(
    stats_list: &[SegmentStats],
    block: &[usize],
    prior: &PriorSpec,
) -> Result<f64> {
    if stats_list.is_empty() {
        return Err(Error::EmptyReplicates);
    }
    let mut acc = 0.0;
    for stats in stats_list {
        acc += log_block_marginal(stats, block, prior)?;
    }
    Ok(acc / prior.temper_alpha)
}

/// Data-driven prior: `phi = (alpha - p - 1) * Sigma_y` with `Sigma_y` the
/// sample covariance of the centered data. Returns the centered dataset and
/// the prior (zero-mean mode).
pub fn data_driven_prior(data: &Dataset, alpha: f64, backend: Backend) -> Result<(Dataset, PriorSpec)> {
    let (n, p) = (data.len(), data.dim());
    let centered = data.centered();
    // sample covariance with the N-1 denominator
    let mut sigma = Mat::zeros(p, p);
    for t in 0..n {
        for i in 0..p {
            let yi = centered.values().get(t, i);
            for j in 0..p {
                sigma.add_to(i, j, yi * centered.values().get(t, j));
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..p {
        for j in 0..p {
            sigma.set(i, j, sigma.get(i, j) / denom);
        }
    }
    for j in 0..p {
        if sigma.get(j, j) <= 0.0 || !sigma.get(j, j).is_finite() {
            return Err(Error::ConstantColumn { col: j });
        }
    }
    if sigma.cholesky().is_none() {
        // single out a zero-variance column first, otherwise report the matrix
        return Err(Error::NotPositiveDefinite {
            context: String::from("sample covariance of the centered data"),
        });
    }
    let scale = alpha - p as f64 - 1.0;
    if !(scale > 0.0) {
        return Err(Error::InvalidParameter {
            context: format!("data-driven prior requires alpha > p + 1, got alpha = {alpha}"),
        });
    }
    let mut phi = sigma;
    for i in 0..p {
        for j in 0..p {
            phi.set(i, j, phi.get(i, j) * scale);
        }
    }
    let prior = PriorSpec {
        alpha,
        phi,
        mean_mode: MeanMode::ZeroMean,
        kappa0: 1.0,
        mu0: vec![0.0; p],
        backend,
        temper_alpha: 1.0,
    };
    prior.validate()?;
    Ok((centered, prior))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        Dataset::new(Mat::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0])).unwrap()
    }

    #[test]
    fn dataset_rejects_non_finite() {
        let err = Dataset::new(Mat::from_vec(2, 2, vec![1.0, f64::NAN, 0.0, 1.0])).unwrap_err();
        assert_eq!(err, Error::NonFiniteData { row: 0, col: 1 });
    }

    #[test]
    fn prefix_identity_2x2() {
        let cum = CumulativeStats::new(&toy());
        let full = cum.segment_stats(1, 3).unwrap();
        assert_eq!(full.s_vec, vec![1.0, 1.0]);
        assert_eq!(full.s_mat, Mat::identity(2));
    }

    #[test]
    fn single_point_segment_is_outer_product() {
        let data =
            Dataset::new(Mat::from_vec(3, 2, vec![2.0, -1.0, 0.5, 3.0, 1.0, 1.0])).unwrap();
        let cum = CumulativeStats::new(&data);
        let s = cum.segment_stats(2, 3).unwrap();
        assert_eq!(s.n, 1);
        assert_eq!(s.s_vec, vec![0.5, 3.0]);
        assert!((s.s_mat.get(0, 0) - 0.25).abs() < 1e-15);
        assert!((s.s_mat.get(0, 1) - 1.5).abs() < 1e-15);
        assert!((s.s_mat.get(1, 1) - 9.0).abs() < 1e-15);
    }

    #[test]
    fn adjacent_segments_add_to_whole() {
        let data = Dataset::new(Mat::from_vec(
            4,
            2,
            vec![1.0, 2.0, -0.5, 0.25, 3.0, -1.0, 0.0, 0.5],
        ))
        .unwrap();
        let cum = CumulativeStats::new(&data);
        let left = cum.segment_stats(1, 3).unwrap();
        let right = cum.segment_stats(3, 5).unwrap();
        let full = cum.segment_stats(1, 5).unwrap();
        for i in 0..2 {
            assert!((left.s_vec[i] + right.s_vec[i] - full.s_vec[i]).abs() < 1e-12);
            for j in 0..2 {
                assert!(
                    (left.s_mat.get(i, j) + right.s_mat.get(i, j) - full.s_mat.get(i, j)).abs()
                        < 1e-12
                );
            }
        }
    }

    #[test]
    fn degenerate_segment_rejected() {
        let cum = CumulativeStats::new(&toy());
        assert!(matches!(cum.segment_stats(2, 2), Err(Error::InvalidSegment { .. })));
        assert!(matches!(cum.segment_stats(0, 2), Err(Error::InvalidSegment { .. })));
        assert!(matches!(cum.segment_stats(1, 4), Err(Error::InvalidSegment { .. })));
    }

    #[test]
    fn p2_full_block_equals_whole_prior() {
        // at p = 2 the "full" block is also the only edge block
        let data = toy();
        let cum = CumulativeStats::new(&data);
        let stats = cum.segment_stats(1, 3).unwrap();
        let prior = PriorSpec::naive(2, Backend::Tree);
        let edge = log_block_marginal(&stats, &[0, 1], &prior).unwrap();
        let full = log_block_marginal(&stats, &[0, 1], &prior).unwrap();
        assert_eq!(edge, full);
        assert!(edge.is_finite());
    }

    #[test]
    fn vertex_marginal_reuse_is_bit_equal() {
        let data =
            Dataset::new(Mat::from_vec(3, 3, vec![0.1, -0.2, 0.5, 1.0, 0.3, -0.7, 0.2, 0.9, 0.4]))
                .unwrap();
        let cum = CumulativeStats::new(&data);
        let stats = cum.segment_stats(1, 4).unwrap();
        let prior = PriorSpec::naive(3, Backend::Tree);
        let a = log_block_marginal(&stats, &[1], &prior).unwrap();
        let b = log_block_marginal(&stats, &[1], &prior).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn scaling_tracks_closed_form_d1() {
        // doubling the data turns S into 4S; recompute both sides
        let prior = PriorSpec::naive(3, Backend::Tree);
        let stats = SegmentStats {
            n: 4,
            s_vec: vec![1.0, 0.0, 0.0],
            s_mat: {
                let mut m = Mat::identity(3);
                m.set(0, 0, 2.5);
                m
            },
        };
        let mut scaled = stats.clone();
        for i in 0..3 {
            scaled.s_vec[i] *= 2.0;
            for j in 0..3 {
                scaled.s_mat.set(i, j, 4.0 * stats.s_mat.get(i, j));
            }
        }
        let d = 1usize;
        let nu = prior.alpha - 3.0 + d as f64;
        let psi = prior.phi.get(0, 0);
        let n = stats.n as f64;
        let direct = |s: f64| {
            -(n / 2.0) * LOG_PI + math::ln_gamma((nu + n) / 2.0) - math::ln_gamma(nu / 2.0)
                + nu / 2.0 * math::ln(psi)
                - (nu + n) / 2.0 * math::ln(psi + s)
        };
        let got = log_block_marginal(&stats, &[0], &prior).unwrap();
        let got_scaled = log_block_marginal(&scaled, &[0], &prior).unwrap();
        assert!((got - direct(2.5)).abs() < 1e-12);
        assert!((got_scaled - direct(10.0)).abs() < 1e-12);
        assert!(got_scaled < got); // larger scatter, fixed psi: lower marginal here
    }

    #[test]
    fn joint_reduces_and_adds() {
        let data = toy();
        let cum = CumulativeStats::new(&data);
        let stats = cum.segment_stats(1, 3).unwrap();
        let mut prior = PriorSpec::naive(2, Backend::Tree);
        let single = log_block_marginal(&stats, &[0], &prior).unwrap();
        let joint1 = joint_log_block_marginal(core::slice::from_ref(&stats), &[0], &prior).unwrap();
        assert!((joint1 - single).abs() < 1e-15);
        let joint2 =
            joint_log_block_marginal(&[stats.clone(), stats.clone()], &[0], &prior).unwrap();
        assert!((joint2 - 2.0 * single).abs() < 1e-12);
        prior.temper_alpha = 3.0;
        let joint3 = joint_log_block_marginal(&[stats.clone(), stats.clone(), stats], &[0], &prior)
            .unwrap();
        assert!((joint3 - single).abs() < 1e-12); // mean of three identical log marginals
        assert!(joint_log_block_marginal(&[], &[0], &prior).is_err());
    }

    #[test]
    fn data_driven_prior_scaling() {
        // standardized two-column data with empty covariance off-diagonal
        let data = Dataset::new(Mat::from_vec(
            4,
            2,
            vec![1.0, 1.0, -1.0, 1.0, 1.0, -1.0, -1.0, -1.0],
        ))
        .unwrap();
        let alpha = 2.0 + 10.0;
        let (_, prior) = data_driven_prior(&data, alpha, Backend::Tree).unwrap();
        // Sigma_y = (4/3) I, scale factor alpha - p - 1 = 9
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 9.0 * 4.0 / 3.0 } else { 0.0 };
                assert!((prior.phi.get(i, j) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn data_driven_prior_rejects_constant_column() {
        let data =
            Dataset::new(Mat::from_vec(3, 2, vec![1.0, 5.0, 2.0, 5.0, 3.0, 5.0])).unwrap();
        let err = data_driven_prior(&data, 12.0, Backend::Tree).unwrap_err();
        assert_eq!(err, Error::ConstantColumn { col: 1 });
    }
}
