//! Evaluation of detection output against simulation ground truth:
//! change-point localization from posterior local maxima, per-time AUC of the
//! edge-probability tensor, and K-recovery accounting.

use std::path::Path;

use treeseg_core::matrix::Mat;

use crate::simulate::{auc_roc, GroundTruth};
use crate::{AppError, AppResult};

/// Local maxima of the integrated change-point posterior `B(t)` over
/// `t = 2..=N`, treating out-of-range neighbors as smaller. Plateaus report
/// their leftmost point.
pub fn local_maxima(b: &[f64], n: usize) -> Vec<usize> {
    let get = |t: isize| -> f64 {
        if t < 2 || t as usize > n {
            -1.0
        } else {
            b[t as usize]
        }
    };
    let mut out = Vec::new();
    for t in 2..=n as isize {
        let v = get(t);
        if v <= 0.0 {
            continue;
        }
        if v > get(t - 1) && v >= get(t + 1) {
            out.push(t as usize);
        }
    }
    out
}

/// For each true change-point, the distance to the nearest posterior local
/// maximum (`None` when there are no maxima at all).
pub fn localization(truth: &[usize], maxima: &[usize]) -> Vec<(usize, Option<usize>)> {
    truth
        .iter()
        .map(|&cp| {
            let best = maxima
                .iter()
                .map(|&m| m.abs_diff(cp))
                .min();
            (cp, best)
        })
        .collect()
}

/// Which segment (0-based) of the truth layout covers time `t`.
pub fn segment_index_at(t: usize, change_points: &[usize]) -> usize {
    change_points.iter().filter(|&&cp| cp <= t).count()
}

/// AUC of the instant edge-probability matrix against the true adjacency of
/// the segment covering each time point. `None` where AUC is undefined
/// (degenerate truth adjacency).
pub fn auc_by_time(probs: &[Mat], truth: &GroundTruth) -> Vec<Option<f64>> {
    probs
        .iter()
        .enumerate()
        .map(|(idx, m)| {
            let seg = segment_index_at(idx + 1, &truth.change_points);
            auc_roc(m, &truth.adjacency_by_segment[seg]).ok()
        })
        .collect()
}

/// Midpoints (1-based times) of the true segments.
pub fn segment_midpoints(change_points: &[usize], n: usize) -> Vec<usize> {
    let mut bounds = vec![1usize];
    bounds.extend_from_slice(change_points);
    bounds.push(n + 1);
    bounds.windows(2).map(|w| (w[0] + w[1] - 1) / 2).collect()
}

/// Read back a `t,prob` table into a vector indexed by `t` (length n + 2).
pub fn read_b_csv(path: &Path) -> AppResult<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AppError::Ingestion(format!("{}: {e}", path.display())))?;
    let mut entries = Vec::new();
    for (line_no, line) in text.lines().enumerate().skip(1) {
        let mut cells = line.split(',');
        let parse_err =
            || AppError::Ingestion(format!("{}: line {}", path.display(), line_no + 1));
        let t: usize = cells.next().ok_or_else(parse_err)?.trim().parse().map_err(|_| parse_err())?;
        let prob: f64 =
            cells.next().ok_or_else(parse_err)?.trim().parse().map_err(|_| parse_err())?;
        entries.push((t, prob));
    }
    let n = entries.iter().map(|&(t, _)| t).max().unwrap_or(1);
    let mut b = vec![0.0; n + 2];
    for (t, prob) in entries {
        b[t] = prob;
    }
    Ok(b)
}

/// Read back a long-format `t,i,j,prob` tensor into per-time matrices.
pub fn read_edge_time_csv(path: &Path) -> AppResult<Vec<Mat>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AppError::Ingestion(format!("{}: {e}", path.display())))?;
    let mut entries: Vec<(usize, usize, usize, f64)> = Vec::new();
    for (line_no, line) in text.lines().enumerate().skip(1) {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let parse_err =
            || AppError::Ingestion(format!("{}: line {}", path.display(), line_no + 1));
        if cells.len() != 4 {
            return Err(parse_err());
        }
        let t: usize = cells[0].parse().map_err(|_| parse_err())?;
        let i: usize = cells[1].parse().map_err(|_| parse_err())?;
        let j: usize = cells[2].parse().map_err(|_| parse_err())?;
        let prob: f64 = cells[3].parse().map_err(|_| parse_err())?;
        if i < 1 || j < 1 || t < 1 {
            return Err(parse_err());
        }
        entries.push((t, i, j, prob));
    }
    let n = entries.iter().map(|&(t, ..)| t).max().unwrap_or(0);
    let p = entries.iter().map(|&(_, i, j, _)| i.max(j)).max().unwrap_or(0);
    let mut probs = vec![Mat::zeros(p, p); n];
    for (t, i, j, prob) in entries {
        probs[t - 1].set(i - 1, j - 1, prob);
        probs[t - 1].set(j - 1, i - 1, prob);
    }
    Ok(probs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maxima_with_plateaus_and_boundaries() {
        //            t:   0    1    2    3    4    5    6    7
        let b = vec![0.0, 0.0, 0.5, 0.2, 0.4, 0.4, 0.1, 0.0];
        // N = 6: candidates t in 2..=6; t=2 boundary max, plateau 4-5 reports 4
        assert_eq!(local_maxima(&b, 6), vec![2, 4]);
    }

    #[test]
    fn zero_mass_yields_no_maxima() {
        let b = vec![0.0; 9];
        assert!(local_maxima(&b, 7).is_empty());
    }

    #[test]
    fn localization_distances() {
        let loc = localization(&[10, 20], &[12, 19]);
        assert_eq!(loc, vec![(10, Some(2)), (20, Some(1))]);
        let none = localization(&[10], &[]);
        assert_eq!(none, vec![(10, None)]);
    }

    #[test]
    fn segment_lookup() {
        let cps = [5usize, 9];
        assert_eq!(segment_index_at(1, &cps), 0);
        assert_eq!(segment_index_at(4, &cps), 0);
        assert_eq!(segment_index_at(5, &cps), 1);
        assert_eq!(segment_index_at(9, &cps), 2);
        assert_eq!(segment_index_at(12, &cps), 2);
    }

    #[test]
    fn midpoints_of_the_sevenths_layout() {
        // N = 70, change-points 31, 41, 61: segments [1,31), [31,41), [41,61), [61,71)
        assert_eq!(segment_midpoints(&[31, 41, 61], 70), vec![15, 35, 50, 65]);
    }
}
