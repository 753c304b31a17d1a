//! Principal component analysis over standardized feature rows, with a
//! cyclic Jacobi eigensolver for the symmetric covariance matrix.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PcaError {
    #[error("need at least {needed} samples for {k} components, got {got}")]
    TooFewSamples { needed: usize, got: usize, k: usize },
    #[error("k must lie in [1, {dim}], got {k}")]
    BadK { k: usize, dim: usize },
    #[error("row {row} has {got} features, expected {expected}")]
    DimensionMismatch { row: usize, got: usize, expected: usize },
    #[error("row {row} contains a non-finite value")]
    NonFinite { row: usize },
}

/// Standardization statistics and the top-k principal axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Population standard deviation per feature; zero marks a constant feature.
    pub std: Vec<f64>,
    /// `basis[c]` is the unit eigenvector of component `c`.
    pub basis: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub explained_ratio: Vec<f64>,
}

fn check_rows(rows: &[Vec<f64>], dim: usize) -> Result<(), PcaError> {
    for (i, r) in rows.iter().enumerate() {
        if r.len() != dim {
            return Err(PcaError::DimensionMismatch { row: i, got: r.len(), expected: dim });
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(PcaError::NonFinite { row: i });
        }
    }
    Ok(())
}

fn standardize(row: &[f64], mean: &[f64], std: &[f64]) -> Vec<f64> {
    row.iter()
        .zip(mean.iter().zip(std))
        .map(|(v, (m, s))| if *s > 0.0 { (v - m) / s } else { 0.0 })
        .collect()
}

/// Eigen-decomposition of a symmetric matrix (row-major, `n x n`).
/// Returns eigenvalues in descending order and matching unit eigenvectors;
/// each vector's largest-magnitude entry is made positive.
pub fn symmetric_eigen(matrix: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    let scale: f64 = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order
        .iter()
        .map(|&c| {
            let mut col: Vec<f64> = (0..n).map(|r| v[r][c]).collect();
            let pivot = col.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            if pivot < 0.0 {
                col.iter_mut().for_each(|x| *x = -*x);
            }
            col
        })
        .collect();
    (values, vectors)
}

/// Fits `k` principal components to `rows` (one sample per row).
pub fn pca_fit(rows: &[Vec<f64>], k: usize) -> Result<PcaModel, PcaError> {
    let dim = rows.first().map_or(0, Vec::len);
    if k == 0 || (dim > 0 && k > dim) {
        return Err(PcaError::BadK { k, dim });
    }
    if rows.len() < k + 1 {
        return Err(PcaError::TooFewSamples { needed: k + 1, got: rows.len(), k });
    }
    check_rows(rows, dim)?;
    let n = rows.len() as f64;
    let mean: Vec<f64> = (0..dim).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let std: Vec<f64> = (0..dim)
        .map(|j| {
            let var = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            // Treat numerically constant columns as constant.
            if sd <= 1e-12 * mean[j].abs().max(1.0) { 0.0 } else { sd }
        })
        .collect();
    let z: Vec<Vec<f64>> = rows.iter().map(|r| standardize(r, &mean, &std)).collect();
    let cov: Vec<Vec<f64>> = (0..dim)
        .map(|a| (0..dim).map(|b| z.iter().map(|r| r[a] * r[b]).sum::<f64>() / n).collect())
        .collect();
    let (values, vectors) = symmetric_eigen(&cov);
    let trace: f64 = (0..dim).map(|i| cov[i][i]).sum();
    let eigenvalues: Vec<f64> = values[..k].iter().map(|v| v.max(0.0)).collect();
    let explained_ratio = eigenvalues
        .iter()
        .map(|v| if trace > 0.0 { v / trace } else { 0.0 })
        .collect();
    Ok(PcaModel {
        mean,
        std,
        basis: vectors[..k].to_vec(),
        eigenvalues,
        explained_ratio,
    })
}

/// Projects rows onto the fitted components.
pub fn pca_project(model: &PcaModel, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, PcaError> {
    check_rows(rows, model.mean.len())?;
    Ok(rows
        .iter()
        .map(|r| {
            let z = standardize(r, &model.mean, &model.std);
            model
                .basis
                .iter()
                .map(|axis| axis.iter().zip(&z).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect())
}
