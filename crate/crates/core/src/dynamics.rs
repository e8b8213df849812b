//! Structure-level posteriors through time: instant posterior edge
//! probabilities with the segmentation integrated out, and fixed-segmentation
//! edge-status and whole-structure comparisons.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::dp::Segmentation;
use crate::error::Error;
use crate::math::{self, exp, log1mexp, log_sum_exp_slice, ln, ln_1p};
use crate::matrix::Mat;
use crate::segment::SegmentEngine;
use crate::tree::{edge_posterior, elementwise_power, elementwise_product, log_tree_partition};
use crate::Result;

/// Default posterior-mass floor below which a segment's edge posterior is not
/// evaluated.
pub const DEFAULT_MASS_FLOOR: f64 = 1e-12;

const SKIPPED_MASS_WARNING: f64 = 1e-6;

/// Instant posterior edge probabilities `p_ij^K(t)`, one symmetric p x p
/// matrix per time point.
#[derive(Debug, Clone)]
pub struct EdgeTimeTensor {
    /// Conditioning number of segments.
    pub k: usize,
    /// `probs[t - 1]` is the p x p matrix at time `t` (1-based times).
    pub probs: Vec<Mat>,
    /// Posterior segment mass skipped at each time point because of the floor.
    pub skipped_mass: Vec<f64>,
    /// Set when the skipped mass exceeds the audit threshold anywhere.
    pub mass_warning: bool,
}

/// `p_ij^K(t) = sum_{r contains t} S_K(r) P((i,j) in E_T | y^r)`.
///
/// Segments whose posterior mass is below `mass_floor` are skipped; the
/// skipped mass is reported per time point so the approximation is auditable.
pub fn edge_prob_over_time(
    s_k: &[(usize, usize, f64)],
    engine: &SegmentEngine<'_>,
    k: usize,
    mass_floor: f64,
) -> Result<EdgeTimeTensor> {
    let n = engine.series_len();
    let p = engine.dim();
    let mut probs = vec![Mat::zeros(p, p); n];
    let mut skipped = vec![0.0; n];
    for &(s, t, mass) in s_k {
        if mass < mass_floor {
            for u in s..t {
                skipped[u - 1] += mass;
            }
            continue;
        }
        let edge = engine.segment_edge_posterior(s, t)?;
        for u in s..t {
            let target = &mut probs[u - 1];
            for i in 0..p {
                for j in (i + 1)..p {
                    let v = mass * edge.get(i, j);
                    target.add_to(i, j, v);
                    target.add_to(j, i, v);
                }
            }
        }
    }
    let mass_warning = skipped.iter().any(|&m| m > SKIPPED_MASS_WARNING);
    Ok(EdgeTimeTensor { k, probs, skipped_mass: skipped, mass_warning })
}

/// Posterior over the status indicator of one edge across all segments of a
/// fixed segmentation: `(P(always absent), P(status changes), P(always
/// present))`.
#[derive(Debug, Clone)]
pub struct EdgeStatusPosterior {
    pub i: usize,
    pub j: usize,
    /// `(P(eps = -1 | y), P(eps = 0 | y), P(eps = +1 | y))`.
    pub posterior: [f64; 3],
    /// The prior triple `(lambda_minus, lambda_change, lambda_plus)`.
    pub prior: [f64; 3],
}

fn validate_lambda(lambda: &[f64; 3]) -> Result<()> {
    for &l in lambda {
        if !(l > 0.0) {
            return Err(Error::InvalidParameter {
                context: format!("edge-status prior components must be > 0, got {lambda:?}"),
            });
        }
    }
    let total: f64 = lambda.iter().sum();
    if math::abs(total - 1.0) > 1e-9 {
        return Err(Error::InvalidParameter {
            context: format!("edge-status prior must sum to 1, got {total}"),
        });
    }
    Ok(())
}

/// Edge-status comparison on a fixed segmentation.
///
/// For each edge, the prior probabilities of "always absent / changed /
/// always present" are `(q0^-, q0bar, q0^+)` from the prior edge
/// probabilities; the posterior ones multiply per-segment posterior edge
/// (non-)probabilities. The status posterior reweights the `lambda` triple by
/// the corresponding ratios. Returns the per-edge posteriors and whether the
/// comparison is trivial (`K = 1`).
pub fn edge_status_comparison(
    engine: &SegmentEngine<'_>,
    m: &Segmentation,
    lambda: [f64; 3],
) -> Result<(Vec<EdgeStatusPosterior>, bool)> {
    validate_lambda(&lambda)?;
    if m.series_len() != engine.series_len() {
        return Err(Error::DimensionMismatch {
            context: format!(
                "segmentation is over N = {}, data has N = {}",
                m.series_len(),
                engine.series_len()
            ),
        });
    }
    let p = engine.dim();
    let k = m.num_segments();
    let prior_summary = edge_posterior(engine.edge_prior())?;
    let mut posteriors = Vec::with_capacity(p * (p - 1) / 2);

    let segment_edges: Vec<Mat> = m
        .segments()
        .iter()
        .map(|&(s, t)| engine.segment_edge_posterior(s, t))
        .collect::<Result<_>>()?;

    for i in 0..p {
        for j in (i + 1)..p {
            let prior_p = prior_summary.edge_prob.get(i, j);
            // log-domain products across segments
            let lq0_plus = k as f64 * ln(prior_p);
            let lq0_minus = k as f64 * ln_1p(-prior_p);
            let lq0_bar = log_complement_pair(lq0_plus, lq0_minus);
            let mut lq_plus = 0.0;
            let mut lq_minus = 0.0;
            for edge in &segment_edges {
                let pp = edge.get(i, j);
                lq_plus += ln(pp);
                lq_minus += ln_1p(-pp);
            }
            let lq_bar = log_complement_pair(lq_plus, lq_minus);

            let components = [
                log_ratio_component(lambda[0], lq_minus, lq0_minus),
                log_ratio_component(lambda[1], lq_bar, lq0_bar),
                log_ratio_component(lambda[2], lq_plus, lq0_plus),
            ];
            let total = log_sum_exp_slice(&components);
            let posterior = [
                exp(components[0] - total),
                exp(components[1] - total),
                exp(components[2] - total),
            ];
            posteriors.push(EdgeStatusPosterior { i, j, posterior, prior: lambda });
        }
    }
    Ok((posteriors, k == 1))
}

/// `log(1 - exp(a) - exp(b))` for log-probabilities `a`, `b` of disjoint
/// events.
fn log_complement_pair(a: f64, b: f64) -> f64 {
    let mass = exp(a) + exp(b);
    if mass >= 1.0 {
        f64::NEG_INFINITY
    } else {
        ln_1p(-mass)
    }
}

/// `log(lambda * q / q0)`, with the prior-impossible case (`q0 = 0`) mapped
/// to an impossible posterior.
fn log_ratio_component(lambda: f64, lq: f64, lq0: f64) -> f64 {
    if lq0 == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        ln(lambda) + lq - lq0
    }
}

/// Posterior probability that all segments of a fixed segmentation share one
/// tree structure.
#[derive(Debug, Clone)]
pub struct StructureComparisonPosterior {
    pub pi_star: f64,
    pub prior_pi: f64,
    /// `log q0 = log Z(b^{element-wise K}) - K log Z(b)`.
    pub log_q0: f64,
    /// `log q = log Z(prod_k omega^(k)) - sum_k log Z(omega^(k))`.
    pub log_q: f64,
    /// Comparison degenerates (single segment, or p = 2 where there is only
    /// one tree).
    pub trivial: bool,
}

/// Whole-structure comparison on a fixed segmentation:
/// `pi* = pi (q/q0) / (pi (q/q0) + (1 - pi)(1 - q)/(1 - q0))`.
pub fn structure_comparison(
    engine: &SegmentEngine<'_>,
    m: &Segmentation,
    pi: f64,
) -> Result<StructureComparisonPosterior> {
    if !(pi > 0.0 && pi < 1.0) {
        return Err(Error::InvalidParameter {
            context: format!("structure-comparison prior pi must lie in (0, 1), got {pi}"),
        });
    }
    if m.series_len() != engine.series_len() {
        return Err(Error::DimensionMismatch {
            context: String::from("segmentation length does not match the data"),
        });
    }
    let k = m.num_segments();
    let b = engine.edge_prior();
    let log_q0 = log_tree_partition(&elementwise_power(b, k)?)? - k as f64 * engine.log_z_prior();

    let mut omegas = Vec::with_capacity(k);
    let mut sum_log_z = 0.0;
    for &(s, t) in &m.segments() {
        let (omega, _) = engine.omega(s, t)?;
        sum_log_z += log_tree_partition(&omega)?;
        omegas.push(omega);
    }
    let log_q = log_tree_partition(&elementwise_product(&omegas)?)? - sum_log_z;
    // both are log-probabilities; floating error can push them above 0
    let log_q0 = log_q0.min(0.0);
    let log_q = log_q.min(0.0);

    // log-domain odds: l1 = log(pi q / q0), l0 = log((1-pi)(1-q)/(1-q0))
    let l1 = ln(pi) + log_q - log_q0;
    let trivial = k == 1 || log_q0 == 0.0;
    let pi_star = if trivial {
        // q = q0 = 1: agreement is certain a priori and a posteriori
        1.0
    } else {
        let l0 = ln(1.0 - pi) + log1mexp(log_q) - log1mexp(log_q0);
        if l0 == f64::NEG_INFINITY {
            1.0
        } else {
            exp(l1 - log_sum_exp_slice(&[l1, l0]))
        }
    };
    Ok(StructureComparisonPosterior { pi_star, prior_pi: pi, log_q0, log_q, trivial })
}
