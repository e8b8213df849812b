//! Synthetic-data generation: random graph structures, graph-derived
//! precision matrices with unit-variance margins, segment layouts, and the
//! AUC evaluation of edge-probability matrices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use treeseg_core::marginals::Dataset;
use treeseg_core::matrix::Mat;

use crate::{AppError, AppResult};

/// Which random-graph law generates each segment's structure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StructureKind {
    /// Uniform distribution over the p^(p-2) spanning trees.
    UniformTree,
    /// Independent edges with a fixed connection probability.
    ErdosRenyi { p_c: f64 },
}

/// A full simulation scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: StructureKind,
    pub n: usize,
    pub p: usize,
    /// Segment length fractions; must sum to 1.
    pub fractions: Vec<f64>,
    pub seed: u64,
}

/// Default segment layout: fractions (3/7, 1/7, 2/7, 1/7).
pub fn default_fractions() -> Vec<f64> {
    vec![3.0 / 7.0, 1.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0]
}

impl Scenario {
    pub fn validate(&self) -> AppResult<()> {
        if self.p < 2 {
            return Err(AppError::Config(format!("p must be >= 2, got {}", self.p)));
        }
        if let StructureKind::ErdosRenyi { p_c } = self.kind {
            if !(p_c > 0.0 && p_c <= 1.0) {
                return Err(AppError::Config(format!(
                    "connection probability must lie in (0, 1], got {p_c}"
                )));
            }
        }
        if self.fractions.is_empty() {
            return Err(AppError::Config("at least one segment fraction required".into()));
        }
        let total: f64 = self.fractions.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(AppError::Config(format!("segment fractions must sum to 1, got {total}")));
        }
        for &f in &self.fractions {
            if !(f > 0.0) {
                return Err(AppError::Config("segment fractions must be positive".into()));
            }
        }
        for (s, t) in self.boundaries().windows(2).map(|w| (w[0], w[1])) {
            if t <= s {
                return Err(AppError::Config(format!(
                    "fractions produce an empty segment at N = {}",
                    self.n
                )));
            }
        }
        Ok(())
    }

    /// 1-based segment boundaries `1 = tau_0 < ... < tau_K = N+1` from rounded
    /// cumulative fractions; the last segment absorbs the rounding remainder.
    pub fn boundaries(&self) -> Vec<usize> {
        let mut bounds = vec![1usize];
        let mut acc = 0.0;
        for f in &self.fractions[..self.fractions.len() - 1] {
            acc += f;
            bounds.push(1 + (acc * self.n as f64).round() as usize);
        }
        bounds.push(self.n + 1);
        bounds
    }

    /// Interior change-points (the boundaries strictly inside `[1, N+1)`).
    pub fn change_points(&self) -> Vec<usize> {
        let b = self.boundaries();
        b[1..b.len() - 1].to_vec()
    }
}

/// What actually generated a dataset: boundaries, per-segment adjacency and
/// precision matrices.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub change_points: Vec<usize>,
    pub adjacency_by_segment: Vec<Mat>,
    pub precision_by_segment: Vec<Mat>,
}

/// Uniform spanning tree of the complete graph on `p` vertices via the
/// Aldous-Broder random walk: the first-entry edges of a random walk form an
/// exactly uniform spanning tree.
pub fn sample_uniform_spanning_tree(p: usize, rng: &mut ChaCha8Rng) -> Mat {
    debug_assert!(p >= 2);
    let mut adj = Mat::zeros(p, p);
    let mut visited = vec![false; p];
    let mut current = rng.gen_range(0..p);
    visited[current] = true;
    let mut remaining = p - 1;
    while remaining > 0 {
        // step to a uniformly random *other* vertex (complete-graph walk)
        let mut next = rng.gen_range(0..p - 1);
        if next >= current {
            next += 1;
        }
        if !visited[next] {
            visited[next] = true;
            remaining -= 1;
            adj.set(current, next, 1.0);
            adj.set(next, current, 1.0);
        }
        current = next;
    }
    adj
}

/// Erdős–Rényi adjacency: each of the p(p-1)/2 edges present independently
/// with probability `p_c`.
pub fn sample_erdos_renyi(p: usize, p_c: f64, rng: &mut ChaCha8Rng) -> Mat {
    let mut adj = Mat::zeros(p, p);
    for i in 0..p {
        for j in (i + 1)..p {
            if rng.gen_bool(p_c) {
                adj.set(i, j, 1.0);
                adj.set(j, i, 1.0);
            }
        }
    }
    adj
}

/// Precision matrix of a graph: the graph Laplacian plus the identity,
/// rescaled symmetrically so the implied covariance has unit diagonal. The
/// off-diagonal zero pattern of the result matches the adjacency exactly.
pub fn graph_to_precision(adjacency: &Mat) -> Mat {
    let p = adjacency.rows();
    let mut lambda0 = Mat::zeros(p, p);
    for i in 0..p {
        let mut degree = 0.0;
        for j in 0..p {
            if i != j && adjacency.get(i, j) != 0.0 {
                degree += 1.0;
                lambda0.set(i, j, -1.0);
            }
        }
        lambda0.set(i, i, degree + 1.0);
    }
    let sigma0 = lambda0
        .spd_inverse("graph Laplacian plus identity")
        .expect("Laplacian + I is always positive definite");
    let d: Vec<f64> = (0..p).map(|i| sigma0.inverse.get(i, i).sqrt()).collect();
    let mut lambda = Mat::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            lambda.set(i, j, d[i] * lambda0.get(i, j) * d[j]);
        }
    }
    lambda
}

/// RNG stream for dataset `index` under a master seed: one keyed generator per
/// dataset so parallel batch generation stays reproducible.
pub fn dataset_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Generate one dataset and its ground truth.
pub fn generate_dataset(scenario: &Scenario, index: u64) -> AppResult<(Dataset, GroundTruth)> {
    scenario.validate()?;
    let mut rng = dataset_rng(scenario.seed, index);
    let p = scenario.p;
    let bounds = scenario.boundaries();
    let mut adjacency = Vec::new();
    let mut precision = Vec::new();
    let mut values = Mat::zeros(scenario.n, p);
    for w in bounds.windows(2) {
        let (s, t) = (w[0], w[1]);
        let adj = match scenario.kind {
            StructureKind::UniformTree => sample_uniform_spanning_tree(p, &mut rng),
            StructureKind::ErdosRenyi { p_c } => sample_erdos_renyi(p, p_c, &mut rng),
        };
        let lambda = graph_to_precision(&adj);
        // draw y = L z with L the lower Cholesky factor of the covariance
        let sigma = lambda
            .spd_inverse("segment precision")
            .map_err(AppError::from_core)?
            .inverse;
        let chol = sigma
            .cholesky()
            .ok_or_else(|| AppError::Numerical("segment covariance not factorizable".into()))?;
        for row in (s - 1)..(t - 1) {
            let z: Vec<f64> = (0..p).map(|_| standard_normal(&mut rng)).collect();
            for i in 0..p {
                let mut y = 0.0;
                for j in 0..=i {
                    y += chol.get(i, j) * z[j];
                }
                values.set(row, i, y);
            }
        }
        adjacency.push(adj);
        precision.push(lambda);
    }
    let data = Dataset::new(values).map_err(AppError::from_core)?;
    let truth = GroundTruth {
        change_points: scenario.change_points(),
        adjacency_by_segment: adjacency,
        precision_by_segment: precision,
    };
    Ok((data, truth))
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; two uniforms per draw keeps the stream layout simple
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Area under the ROC curve of a symmetric score matrix against a 0/1
/// adjacency, over the p(p-1)/2 upper-triangle pairs, with midrank ties.
pub fn auc_roc(scores: &Mat, truth: &Mat) -> AppResult<f64> {
    let p = truth.rows();
    if scores.rows() != p || scores.cols() != p || truth.cols() != p {
        return Err(AppError::Config("score and truth matrices must be square and same size".into()));
    }
    let mut pairs: Vec<(f64, bool)> = Vec::with_capacity(p * (p - 1) / 2);
    for i in 0..p {
        for j in (i + 1)..p {
            pairs.push((scores.get(i, j), truth.get(i, j) != 0.0));
        }
    }
    let positives = pairs.iter().filter(|x| x.1).count();
    let negatives = pairs.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(AppError::Config(
            "AUC undefined: truth adjacency has no present or no absent edges".into(),
        ));
    }
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    // midrank sum of the positive class
    let mut rank_sum = 0.0;
    let mut idx = 0usize;
    while idx < pairs.len() {
        let mut end = idx + 1;
        while end < pairs.len() && pairs[end].0 == pairs[idx].0 {
            end += 1;
        }
        let midrank = (idx + 1 + end) as f64 / 2.0; // average of ranks idx+1..=end
        for pair in &pairs[idx..end] {
            if pair.1 {
                rank_sum += midrank;
            }
        }
        idx = end;
    }
    let np = positives as f64;
    let auc = (rank_sum - np * (np + 1.0) / 2.0) / (np * negatives as f64);
    Ok(auc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn boundaries_at_n70_follow_the_sevenths_layout() {
        let scenario = Scenario {
            kind: StructureKind::UniformTree,
            n: 70,
            p: 3,
            fractions: default_fractions(),
            seed: 0,
        };
        assert_eq!(scenario.change_points(), vec![31, 41, 61]);
    }

    #[test]
    fn boundaries_at_n210() {
        let scenario = Scenario {
            kind: StructureKind::UniformTree,
            n: 210,
            p: 10,
            fractions: default_fractions(),
            seed: 0,
        };
        assert_eq!(scenario.change_points(), vec![91, 121, 181]);
    }

    #[test]
    fn tree_sampler_yields_trees() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for p in 2..7usize {
            for _ in 0..50 {
                let adj = sample_uniform_spanning_tree(p, &mut rng);
                let edges: f64 = (0..p)
                    .map(|i| ((i + 1)..p).map(|j| adj.get(i, j)).sum::<f64>())
                    .sum();
                assert_eq!(edges as usize, p - 1);
                assert!(connected(&adj));
            }
        }
    }

    fn connected(adj: &Mat) -> bool {
        let p = adj.rows();
        let mut seen = vec![false; p];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for u in 0..p {
                if adj.get(v, u) != 0.0 && !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    #[test]
    fn tree_sampler_is_uniform_at_p4() {
        // chi-square over the 16 labelled trees on 4 vertices
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let draws = 100_000usize;
        let mut counts: BTreeMap<Vec<(usize, usize)>, usize> = BTreeMap::new();
        for _ in 0..draws {
            let adj = sample_uniform_spanning_tree(4, &mut rng);
            let mut key = Vec::new();
            for i in 0..4 {
                for j in (i + 1)..4 {
                    if adj.get(i, j) != 0.0 {
                        key.push((i, j));
                    }
                }
            }
            *counts.entry(key).or_insert(0) += 1;
        }
        assert_eq!(counts.len(), 16);
        let expected = draws as f64 / 16.0;
        let chi2: f64 = counts
            .values()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        // chi-square with 15 dof: 1e-3 upper quantile is about 37.7
        assert!(chi2 < 37.7, "chi2 = {chi2}");
    }

    #[test]
    fn erdos_renyi_edge_count_is_binomial() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (p, p_c, draws) = (10usize, 0.2f64, 100_000usize);
        let mut total = 0usize;
        for _ in 0..draws {
            let adj = sample_erdos_renyi(p, p_c, &mut rng);
            for i in 0..p {
                for j in (i + 1)..p {
                    if adj.get(i, j) != 0.0 {
                        total += 1;
                    }
                }
            }
        }
        let mean = total as f64 / draws as f64;
        // Binomial(45, 0.2): mean 9, per-draw sd sqrt(45 * 0.2 * 0.8) = 2.683
        let se = (45.0 * 0.2 * 0.8f64).sqrt() / (draws as f64).sqrt();
        assert!((mean - 9.0).abs() < 4.0 * se, "mean edge count {mean}");
    }

    #[test]
    fn precision_gives_unit_variance_and_exact_sparsity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for p in [3usize, 6, 10] {
            let adj = sample_erdos_renyi(p, 0.4, &mut rng);
            let lambda = graph_to_precision(&adj);
            let sigma = lambda.spd_inverse("test").unwrap().inverse;
            for i in 0..p {
                assert!((sigma.get(i, i) - 1.0).abs() < 1e-12, "variance at {i}");
                for j in 0..p {
                    if i != j {
                        let present = adj.get(i, j) != 0.0;
                        let nonzero = lambda.get(i, j).abs() > 1e-14;
                        assert_eq!(present, nonzero, "sparsity at ({i},{j})");
                    }
                }
            }
        }
    }

    #[test]
    fn empty_graph_precision_is_identity() {
        let lambda = graph_to_precision(&Mat::zeros(4, 4));
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((lambda.get(i, j) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn path_graph_precision_matches_symbolic_inverse() {
        // path 0-1-2: Lambda0 = [[2,-1,0],[-1,3,-1],[0,-1,2]],
        // Sigma0 = Lambda0^{-1} = (1/8) [[5,2,1],[2,4,2],[1,2,5]]
        let mut adj = Mat::zeros(3, 3);
        adj.set(0, 1, 1.0);
        adj.set(1, 0, 1.0);
        adj.set(1, 2, 1.0);
        adj.set(2, 1, 1.0);
        let lambda = graph_to_precision(&adj);
        let d0 = (5.0f64 / 8.0).sqrt();
        let d1 = (4.0f64 / 8.0).sqrt();
        let d2 = (5.0f64 / 8.0).sqrt();
        let want = [
            [2.0 * d0 * d0, -d0 * d1, 0.0],
            [-d0 * d1, 3.0 * d1 * d1, -d1 * d2],
            [0.0, -d1 * d2, 2.0 * d2 * d2],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert!(
                    (lambda.get(i, j) - want[i][j]).abs() < 1e-12,
                    "({i},{j}): {} vs {}",
                    lambda.get(i, j),
                    want[i][j]
                );
            }
        }
    }

    #[test]
    fn generation_is_deterministic_per_stream() {
        let scenario = Scenario {
            kind: StructureKind::UniformTree,
            n: 21,
            p: 4,
            fractions: default_fractions(),
            seed: 33,
        };
        let (d1, t1) = generate_dataset(&scenario, 2).unwrap();
        let (d2, t2) = generate_dataset(&scenario, 2).unwrap();
        assert_eq!(d1.values().data(), d2.values().data());
        assert_eq!(t1.change_points, t2.change_points);
        let (d3, _) = generate_dataset(&scenario, 3).unwrap();
        assert_ne!(d1.values().data(), d3.values().data());
    }

    #[test]
    fn segment_sample_covariance_tracks_truth() {
        // one long segment: empirical covariance close to Lambda^{-1}
        let scenario = Scenario {
            kind: StructureKind::UniformTree,
            n: 100_000,
            p: 4,
            fractions: vec![1.0],
            seed: 11,
        };
        let (data, truth) = generate_dataset(&scenario, 0).unwrap();
        let sigma = truth.precision_by_segment[0].spd_inverse("truth").unwrap().inverse;
        let n = data.len() as f64;
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = 0.0;
                for t in 0..data.len() {
                    acc += data.values().get(t, i) * data.values().get(t, j);
                }
                let emp = acc / n;
                // entrywise 4 sigma with a conservative moment bound
                let tol = 4.0 * 2.0 / n.sqrt();
                assert!(
                    (emp - sigma.get(i, j)).abs() < tol,
                    "({i},{j}): {emp} vs {}",
                    sigma.get(i, j)
                );
            }
        }
    }

    #[test]
    fn auc_extremes_and_random_mean() {
        let mut truth = Mat::zeros(4, 4);
        truth.set(0, 1, 1.0);
        truth.set(1, 0, 1.0);
        truth.set(2, 3, 1.0);
        truth.set(3, 2, 1.0);
        assert!((auc_roc(&truth, &truth).unwrap() - 1.0).abs() < 1e-12);
        let mut inverted = Mat::zeros(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    inverted.set(i, j, 1.0 - truth.get(i, j));
                }
            }
        }
        assert!(auc_roc(&inverted, &truth).unwrap().abs() < 1e-12);

        // random scores against random truth average to 1/2
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let trials = 10_000usize;
        let mut total = 0.0;
        let mut used = 0usize;
        for _ in 0..trials {
            let truth = sample_erdos_renyi(5, 0.5, &mut rng);
            let mut scores = Mat::zeros(5, 5);
            for i in 0..5 {
                for j in (i + 1)..5 {
                    let v: f64 = rng.gen_range(0.0..1.0);
                    scores.set(i, j, v);
                    scores.set(j, i, v);
                }
            }
            if let Ok(auc) = auc_roc(&scores, &truth) {
                total += auc;
                used += 1;
            }
        }
        let mean = total / used as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean AUC {mean} over {used} trials");
    }

    #[test]
    fn degenerate_truth_rejected() {
        let scores = Mat::zeros(3, 3);
        assert!(auc_roc(&scores, &Mat::zeros(3, 3)).is_err());
        let mut full = Mat::filled(3, 3, 1.0);
        for i in 0..3 {
            full.set(i, i, 0.0);
        }
        assert!(auc_roc(&scores, &full).is_err());
    }

    #[test]
    fn bad_fractions_rejected() {
        let mut scenario = Scenario {
            kind: StructureKind::UniformTree,
            n: 20,
            p: 3,
            fractions: vec![0.5, 0.4],
            seed: 0,
        };
        assert!(scenario.validate().is_err());
        scenario.fractions = vec![0.999, 0.001];
        assert!(scenario.validate().is_err()); // empty second segment at N = 20
    }
}
