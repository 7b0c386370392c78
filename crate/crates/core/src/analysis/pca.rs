use super::score::polarity_of;
use super::Representations;
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::model::{Model, ModelParams};

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedPoint {
    pub token: usize,
    pub px: f64,
    pub py: f64,
    pub polarity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionReport {
    pub points: Vec<ProjectedPoint>,
    /// Variance along the first and second principal axes.
    pub explained: (f64, f64),
}

const JACOBI_SWEEPS: usize = 100;

/// Eigen-decomposition of a symmetric `n×n` row-major matrix by cyclic Jacobi
/// rotations. Returns eigenvalues descending with unit eigenvectors (as rows).
pub fn symmetric_eigen(matrix: &[f64], n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut a = matrix.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _ in 0..JACOBI_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        let diag: f64 = (0..n).map(|i| a[i * n + i] * a[i * n + i]).sum();
        if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let vectors = order
        .iter()
        .map(|&i| (0..n).map(|k| v[k * n + i]).collect())
        .collect();
    (values, vectors)
}

/// Flips `axis` so that its largest-magnitude component is positive.
fn orient(axis: &mut [f64]) {
    let mut best = 0;
    for (i, x) in axis.iter().enumerate() {
        if x.abs() > axis[best].abs() {
            best = i;
        }
    }
    if axis[best] < 0.0 {
        axis.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Projects row vectors onto their top two principal axes.
/// Returns `(coords, explained)`; a rank-deficient second axis is zeroed.
pub fn project_vectors(rows: &[Vec<f64>]) -> (Vec<(f64, f64)>, (f64, f64)) {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x / n as f64;
        }
    }
    let centered: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();
    let mut cov = vec![0.0; d * d];
    for r in &centered {
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] += r[i] * r[j] / n as f64;
            }
        }
    }
    let (values, mut vectors) = symmetric_eigen(&cov, d);
    let lead = values.first().copied().unwrap_or(0.0).max(0.0);
    let rank_tol = 1e-12 * lead.max(f64::MIN_POSITIVE);
    let mut axes: Vec<Option<Vec<f64>>> = Vec::with_capacity(2);
    for k in 0..2 {
        match (values.get(k), vectors.get_mut(k)) {
            (Some(&lambda), Some(axis)) if lambda > rank_tol => {
                orient(axis);
                axes.push(Some(axis.clone()));
            }
            _ => axes.push(None),
        }
    }
    let coord = |r: &[f64], axis: &Option<Vec<f64>>| {
        axis.as_ref()
            .map_or(0.0, |a| r.iter().zip(a).map(|(x, y)| x * y).sum())
    };
    let coords: Vec<(f64, f64)> = centered
        .iter()
        .map(|r| (coord(r, &axes[0]), coord(r, &axes[1])))
        .collect();
    let explained = (
        axes[0].as_ref().map_or(0.0, |_| values[0]),
        axes[1].as_ref().map_or(0.0, |_| values[1]),
    );
    (coords, explained)
}

/// Mean-centered top-2 PCA of the single-token representations of `subset`,
/// each point tagged with its polarity under `reference`.
pub fn pca_project(
    lm: &ModelParams,
    vocab: &Vocabulary,
    subset: &[usize],
    reference: &Model,
) -> Result<ProjectionReport> {
    if subset.len() < 3 {
        return Err(Error::Config(format!(
            "projection needs at least 3 tokens, got {}",
            subset.len()
        )));
    }
    let reps = Representations::compute(lm, vocab)?;
    let rows = subset
        .iter()
        .map(|&t| reps.get(t).map(<[f64]>::to_vec))
        .collect::<Result<Vec<_>>>()?;
    let (coords, explained) = project_vectors(&rows);
    let points = subset
        .iter()
        .zip(coords)
        .map(|(&token, (px, py))| {
            Ok(ProjectedPoint {
                token,
                px,
                py,
                polarity: polarity_of(reference, token)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProjectionReport { points, explained })
}
