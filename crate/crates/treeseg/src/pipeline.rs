//! The programmatic detection pipeline: data preparation, parallel
//! construction of the segment-likelihood matrix, the exact posterior
//! analysis, and the structure-through-time artifacts.

use rayon::prelude::*;
use treeseg_core::dp::{analyze, PosteriorSummary};
use treeseg_core::dynamics::{edge_prob_over_time, EdgeTimeTensor};
use treeseg_core::marginals::{data_driven_prior, CumulativeStats, Dataset, PriorSpec};
use treeseg_core::matrix::Mat;
use treeseg_core::segment::{SegmentEngine, SegmentLikelihoodMatrix, SegmentPrior};
use treeseg_core::Backend;

use crate::config::{PriorChoice, RunConfig};
use crate::{AppError, AppResult};

/// Prepared inputs: possibly transformed data plus the resolved prior.
pub struct Prepared {
    pub datasets: Vec<Dataset>,
    pub prior: PriorSpec,
}

/// Detection artifacts beyond the posterior summary.
pub struct DetectResult {
    pub summary: PosteriorSummary,
    /// Instant edge-probability tensor conditional on K-hat_1 (tree backend).
    pub edge_time: Option<EdgeTimeTensor>,
    /// Per-segment posterior edge matrices on the global MAP segmentation.
    pub map_segment_edges: Vec<(usize, usize, Mat)>,
}

/// Column-standardize all replicates with pooled means and standard
/// deviations, so replicates stay on one common scale.
pub fn standardize(datasets: &[Dataset]) -> AppResult<Vec<Dataset>> {
    let p = datasets[0].dim();
    let total_rows: usize = datasets.iter().map(|d| d.len()).sum();
    let mut mean = vec![0.0; p];
    for d in datasets {
        for t in 0..d.len() {
            for j in 0..p {
                mean[j] += d.values().get(t, j);
            }
        }
    }
    for m in mean.iter_mut() {
        *m /= total_rows as f64;
    }
    let mut var = vec![0.0; p];
    for d in datasets {
        for t in 0..d.len() {
            for j in 0..p {
                let c = d.values().get(t, j) - mean[j];
                var[j] += c * c;
            }
        }
    }
    let mut out = Vec::with_capacity(datasets.len());
    for d in datasets {
        let mut values = d.values().clone();
        for j in 0..p {
            let sd = (var[j] / (total_rows - 1) as f64).sqrt();
            if !(sd > 0.0) {
                return Err(AppError::Ingestion(format!(
                    "column {} is constant; cannot standardize",
                    j + 1
                )));
            }
            for t in 0..d.len() {
                values.set(t, j, (values.get(t, j) - mean[j]) / sd);
            }
        }
        let mut nd = Dataset::new(values).map_err(AppError::from_core)?;
        nd.replicate_id = d.replicate_id.clone();
        nd.variable_names = d.variable_names.clone();
        out.push(nd);
    }
    Ok(out)
}

/// Resolve the prior against the data (handles the data-driven variant, which
/// centers the data it sees).
pub fn prepare(datasets: Vec<Dataset>, config: &RunConfig) -> AppResult<Prepared> {
    if datasets.is_empty() {
        return Err(AppError::Ingestion("no datasets provided".into()));
    }
    let p = datasets[0].dim();
    let replicates = datasets.len();
    let datasets =
        if config.standardize { standardize(&datasets)? } else { datasets };
    match config.prior {
        PriorChoice::Naive => {
            let prior = config.naive_prior(p, replicates)?;
            Ok(Prepared { datasets, prior })
        }
        PriorChoice::DataDriven => {
            // pool all rows for the covariance, center every replicate with
            // the pooled means
            let total: usize = datasets.iter().map(|d| d.len()).sum();
            let mut pooled = Mat::zeros(total, p);
            let mut row = 0;
            for d in &datasets {
                for t in 0..d.len() {
                    for j in 0..p {
                        pooled.set(row, j, d.values().get(t, j));
                    }
                    row += 1;
                }
            }
            let pooled = Dataset::new(pooled).map_err(AppError::from_core)?;
            let alpha = config.alpha.unwrap_or(p as f64 + 10.0);
            let (_, mut prior) = data_driven_prior(&pooled, alpha, config.core_backend())
                .map_err(AppError::from_core)?;
            let mean = pooled.column_means();
            let mut centered = Vec::with_capacity(datasets.len());
            for d in &datasets {
                let mut values = d.values().clone();
                for t in 0..d.len() {
                    for j in 0..p {
                        values.set(t, j, values.get(t, j) - mean[j]);
                    }
                }
                let mut nd = Dataset::new(values).map_err(AppError::from_core)?;
                nd.replicate_id = d.replicate_id.clone();
                nd.variable_names = d.variable_names.clone();
                centered.push(nd);
            }
            config.finish_prior(&mut prior, p, replicates)?;
            Ok(Prepared { datasets: centered, prior })
        }
    }
}

/// Build the weighted segment-likelihood matrix, with the cell computations
/// spread over a bounded rayon pool. Cells are pure functions of `(s, t)`, so
/// the result is independent of thread count and schedule.
pub fn build_a_parallel(
    engine: &SegmentEngine<'_>,
    seg_prior: &SegmentPrior,
    threads: usize,
) -> AppResult<SegmentLikelihoodMatrix> {
    let n = engine.series_len();
    let mut cells = Vec::with_capacity(n * (n + 1) / 2);
    for s in 1..=n {
        for t in (s + 1)..=(n + 1) {
            if seg_prior.log_weight(s, t) != f64::NEG_INFINITY {
                cells.push((s, t));
            }
        }
    }
    let compute = |&(s, t): &(usize, usize)| -> Result<(usize, usize, f64), treeseg_core::Error> {
        let w = seg_prior.log_weight(s, t);
        Ok((s, t, w + engine.segment_log_likelihood(s, t)?))
    };
    let results: Result<Vec<_>, _> = if threads == 1 {
        cells.iter().map(|c| compute(c)).collect()
    } else if threads == 0 {
        cells.par_iter().map(compute).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| treeseg_core::Error::NumericalFailure {
                context: format!("thread pool: {e}"),
                condition: f64::NAN,
            })?;
        pool.install(|| cells.par_iter().map(compute).collect())
    };
    let mut log_a = Mat::filled(n + 2, n + 2, f64::NEG_INFINITY);
    for (s, t, v) in results.map_err(AppError::from_core)? {
        log_a.set(s, t, v);
    }
    Ok(SegmentLikelihoodMatrix::from_parts(n, log_a))
}

/// Run the whole detection pipeline on prepared data.
pub fn run_detect(prepared: &Prepared, config: &RunConfig) -> AppResult<DetectResult> {
    let cums: Vec<CumulativeStats> =
        prepared.datasets.iter().map(CumulativeStats::new).collect();
    let p = prepared.datasets[0].dim();
    let n = prepared.datasets[0].len();
    let b = config.edge_prior(p);
    let engine = SegmentEngine::new(&cums, &prepared.prior, &b).map_err(AppError::from_core)?;
    let seg_prior = config.segment_prior()?;
    let a = build_a_parallel(&engine, &seg_prior, config.threads)?;
    let kprior = config.k_prior(n)?;
    let summary = analyze(&a, &seg_prior, &kprior).map_err(AppError::from_core)?;

    let tree_backend = prepared.prior.backend == Backend::Tree;
    let edge_time = if config.edge_time && tree_backend {
        let k = summary.k_hat_1;
        Some(
            edge_prob_over_time(&summary.s_k[k - 1], &engine, k, config.mass_floor)
                .map_err(AppError::from_core)?,
        )
    } else {
        None
    };
    let map_segment_edges = if tree_backend {
        summary
            .global_map()
            .segments()
            .into_iter()
            .map(|(s, t)| {
                engine
                    .segment_edge_posterior(s, t)
                    .map(|m| (s, t, m))
                    .map_err(AppError::from_core)
            })
            .collect::<AppResult<Vec<_>>>()?
    } else {
        Vec::new()
    };
    Ok(DetectResult { summary, edge_time, map_segment_edges })
}
