//! Summations over the `p^(p-2)` spanning trees: partition functions via the
//! Matrix-Tree theorem and posterior edge probabilities via the inverse of a
//! Laplacian minor.
//!
//! Weights are stored as logs. Before exponentiating, the maximum off-diagonal
//! log-weight `c` is subtracted; since the partition function is homogeneous
//! of degree `p - 1` in the weights, `log Z = logdet(minor) + (p - 1) c`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::Error;
use crate::math;
use crate::matrix::Mat;
use crate::Result;

const CONDITION_LIMIT: f64 = 1e12;

/// Symmetric p x p matrix of log edge weights; the diagonal is ignored.
///
/// All off-diagonal log-weights must be finite, i.e. every weight is strictly
/// positive. Exact zero weights (disconnected edges) are not supported.
#[derive(Debug, Clone)]
pub struct EdgeWeightMatrix {
    log_w: Mat,
}

impl EdgeWeightMatrix {
    pub fn new(log_w: Mat) -> Result<Self> {
        let p = log_w.rows();
        if !log_w.is_square() || p < 2 {
            return Err(Error::DimensionMismatch {
                context: format!("edge weight matrix must be square with p >= 2, got {}x{}", p, log_w.cols()),
            });
        }
        for i in 0..p {
            for j in 0..p {
                if i != j {
                    let v = log_w.get(i, j);
                    if !v.is_finite() {
                        return Err(Error::InvalidParameter {
                            context: format!("non-finite log edge weight at ({i}, {j})"),
                        });
                    }
                    if math::abs(v - log_w.get(j, i)) > 1e-12 {
                        return Err(Error::InvalidParameter {
                            context: format!("asymmetric log edge weights at ({i}, {j})"),
                        });
                    }
                }
            }
        }
        Ok(EdgeWeightMatrix { log_w })
    }

    /// Uniform weights (`b_ij = 1`).
    pub fn uniform(p: usize) -> Self {
        EdgeWeightMatrix::new(Mat::zeros(p, p)).expect("uniform weights are valid")
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.log_w.rows()
    }

    #[inline]
    pub fn log_weight(&self, i: usize, j: usize) -> f64 {
        self.log_w.get(i, j)
    }

    pub fn log_weights(&self) -> &Mat {
        &self.log_w
    }

    fn max_off_diagonal(&self) -> f64 {
        let p = self.dim();
        let mut c = f64::NEG_INFINITY;
        for i in 0..p {
            for j in 0..p {
                if i != j && self.log_w.get(i, j) > c {
                    c = self.log_w.get(i, j);
                }
            }
        }
        c
    }

    /// Weights rescaled by `exp(-c)` with `c` the max off-diagonal log-weight.
    fn scaled_weights(&self) -> (Mat, f64) {
        let p = self.dim();
        let c = self.max_off_diagonal();
        let mut w = Mat::zeros(p, p);
        for i in 0..p {
            for j in 0..p {
                if i != j {
                    w.set(i, j, math::exp(self.log_w.get(i, j) - c));
                }
            }
        }
        (w, c)
    }
}

/// Laplacian minor (last row/column deleted) of the scaled weights.
fn laplacian_minor(w: &Mat) -> Mat {
    let p = w.rows();
    let mut m = Mat::zeros(p - 1, p - 1);
    for i in 0..p - 1 {
        let mut degree = 0.0;
        for j in 0..p {
            if j != i {
                degree += w.get(i, j);
            }
        }
        m.set(i, i, degree);
        for j in 0..p - 1 {
            if j != i {
                m.set(i, j, -w.get(i, j));
            }
        }
    }
    m
}

/// Log partition function `log sum_T prod_{(i,j) in T} w_ij`.
pub fn log_tree_partition(w: &EdgeWeightMatrix) -> Result<f64> {
    let p = w.dim();
    let (scaled, c) = w.scaled_weights();
    let minor = laplacian_minor(&scaled);
    let fact = minor.spd_inverse("weighted Laplacian minor").map_err(|_| Error::NumericalFailure {
        context: String::from("Laplacian minor not positive-definite in Matrix-Tree determinant"),
        condition: f64::INFINITY,
    })?;
    if fact.condition > CONDITION_LIMIT {
        return Err(Error::NumericalFailure {
            context: String::from("near-singular Laplacian minor in Matrix-Tree determinant"),
            condition: fact.condition,
        });
    }
    Ok(fact.log_det + (p as f64 - 1.0) * c)
}

/// Partition function and all-edges posterior probabilities of a tree
/// distribution `P(T) ∝ prod w_ij`.
#[derive(Debug, Clone)]
pub struct TreeDistributionSummary {
    pub log_z: f64,
    /// Symmetric matrix of `P((i,j) in E_T)`; zero diagonal.
    pub edge_prob: Mat,
}

/// Kirchhoff formula: with `M` the Laplacian minor (last row/column deleted),
/// `Q = M^-1` extended by a zero row/column at index `p - 1`,
/// `P((i,j) in E_T) = w_ij (Q_ii + Q_jj - 2 Q_ij)`. One `O(p^3)` factorization
/// yields both `log Z` and every edge probability.
pub fn edge_posterior(w: &EdgeWeightMatrix) -> Result<TreeDistributionSummary> {
    let p = w.dim();
    let (scaled, c) = w.scaled_weights();
    let minor = laplacian_minor(&scaled);
    let fact = minor.spd_inverse("weighted Laplacian minor").map_err(|_| Error::NumericalFailure {
        context: String::from("singular Laplacian minor in edge posterior computation"),
        condition: f64::INFINITY,
    })?;
    if fact.condition > CONDITION_LIMIT {
        return Err(Error::NumericalFailure {
            context: String::from("near-singular Laplacian minor in edge posterior computation"),
            condition: fact.condition,
        });
    }
    let q = |i: usize, j: usize| -> f64 {
        if i == p - 1 || j == p - 1 {
            0.0
        } else {
            fact.inverse.get(i, j)
        }
    };
    let mut edge_prob = Mat::zeros(p, p);
    for i in 0..p {
        for j in (i + 1)..p {
            let prob = scaled.get(i, j) * (q(i, i) + q(j, j) - 2.0 * q(i, j));
            let prob = prob.clamp(0.0, 1.0);
            edge_prob.set(i, j, prob);
            edge_prob.set(j, i, prob);
        }
    }
    Ok(TreeDistributionSummary { log_z: fact.log_det + (p as f64 - 1.0) * c, edge_prob })
}

/// Element-wise K-th power (`K` times the log-weights).
pub fn elementwise_power(w: &EdgeWeightMatrix, k: usize) -> Result<EdgeWeightMatrix> {
    if k < 1 {
        return Err(Error::InvalidParameter { context: String::from("element-wise power requires K >= 1") });
    }
    let p = w.dim();
    let mut log_w = Mat::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            if i != j {
                log_w.set(i, j, k as f64 * w.log_weight(i, j));
            }
        }
    }
    EdgeWeightMatrix::new(log_w)
}

/// Element-wise product (entrywise sum of log-weights).
pub fn elementwise_product(ws: &[EdgeWeightMatrix]) -> Result<EdgeWeightMatrix> {
    let first = ws.first().ok_or(Error::InvalidParameter {
        context: String::from("element-wise product of an empty list"),
    })?;
    let p = first.dim();
    let mut log_w = Mat::zeros(p, p);
    for w in ws {
        if w.dim() != p {
            return Err(Error::DimensionMismatch {
                context: format!("element-wise product: {} vs {}", w.dim(), p),
            });
        }
        for i in 0..p {
            for j in 0..p {
                if i != j {
                    log_w.add_to(i, j, w.log_weight(i, j));
                }
            }
        }
    }
    EdgeWeightMatrix::new(log_w)
}

/// All spanning trees on `p` vertices as edge lists, by decoding every Prüfer
/// sequence. Exponential in `p`; intended for oracles and small-p checks.
pub fn enumerate_spanning_trees(p: usize) -> Vec<Vec<(usize, usize)>> {
    assert!(p >= 2);
    if p == 2 {
        return alloc::vec![alloc::vec![(0, 1)]];
    }
    let seq_len = p - 2;
    let count = (0..seq_len).fold(1usize, |acc, _| acc * p);
    let mut trees = Vec::with_capacity(count);
    let mut seq = alloc::vec![0usize; seq_len];
    for code in 0..count {
        let mut rem = code;
        for s in seq.iter_mut() {
            *s = rem % p;
            rem /= p;
        }
        trees.push(decode_prufer(p, &seq));
    }
    trees
}

fn decode_prufer(p: usize, seq: &[usize]) -> Vec<(usize, usize)> {
    let mut degree = alloc::vec![1usize; p];
    for &s in seq {
        degree[s] += 1;
    }
    let mut edges = Vec::with_capacity(p - 1);
    for &s in seq {
        for v in 0..p {
            if degree[v] == 1 {
                edges.push(if v < s { (v, s) } else { (s, v) });
                degree[v] -= 1;
                degree[s] -= 1;
                break;
            }
        }
    }
    let mut last = [0usize; 2];
    let mut idx = 0;
    for v in 0..p {
        if degree[v] == 1 {
            last[idx] = v;
            idx += 1;
        }
    }
    edges.push((last[0], last[1]));
    edges
}
