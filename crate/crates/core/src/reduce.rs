//! Group-wise standardization and truncated principal component analysis.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Variance share below which principal axes are discarded by default.
pub const DEFAULT_VARIANCE_CUTOFF: f64 = 0.002;

/// Per-group standardization statistics.
///
/// Statistics are pooled over every training entry of a group, so all
/// positions in one group share a mean and a standard deviation (population
/// form, divisor `n`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub group_of: Vec<usize>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// Groups with zero spread; their scaled output is 0.
    pub constant: Vec<bool>,
}

/// Fits pooled per-group statistics over the training rows.
pub fn fit_standardizer(rows: &[Vec<f64>], group_map: &[usize]) -> Result<Standardizer> {
    if rows.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "standardization needs at least 2 rows, got {}",
            rows.len()
        )));
    }
    let width = group_map.len();
    if let Some(bad) = rows.iter().find(|r| r.len() != width) {
        return Err(Error::ShapeError {
            expected: width,
            found: bad.len(),
        });
    }
    let n_groups = group_map.iter().max().map_or(0, |m| m + 1);
    let mut count = vec![0usize; n_groups];
    let mut sum = vec![0.0; n_groups];
    for row in rows {
        for (&g, &v) in group_map.iter().zip(row) {
            count[g] += 1;
            sum[g] += v;
        }
    }
    let means: Vec<f64> = sum
        .iter()
        .zip(&count)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    let mut sq = vec![0.0; n_groups];
    for row in rows {
        for (&g, &v) in group_map.iter().zip(row) {
            let d = v - means[g];
            sq[g] += d * d;
        }
    }
    let stds: Vec<f64> = sq
        .iter()
        .zip(&count)
        .map(|(s, &c)| if c > 0 { (s / c as f64).sqrt() } else { 0.0 })
        .collect();
    let constant = stds
        .iter()
        .zip(&means)
        .map(|(&s, &m)| s <= 1e-12 * m.abs().max(1.0))
        .collect();
    Ok(Standardizer {
        group_of: group_map.to_vec(),
        means,
        stds,
        constant,
    })
}

impl Standardizer {
    pub fn width(&self) -> usize {
        self.group_of.len()
    }

    pub fn apply_in_place(&self, row: &mut [f64]) -> Result<()> {
        if row.len() != self.width() {
            return Err(Error::ShapeError {
                expected: self.width(),
                found: row.len(),
            });
        }
        for (v, &g) in row.iter_mut().zip(&self.group_of) {
            *v = if self.constant[g] {
                0.0
            } else {
                (*v - self.means[g]) / self.stds[g]
            };
        }
        Ok(())
    }

    pub fn apply(&self, row: &[f64]) -> Result<Vec<f64>> {
        let mut out = row.to_vec();
        self.apply_in_place(&mut out)?;
        Ok(out)
    }
}

/// Truncated PCA basis with its variance ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    /// Feature-wise mean of the fitting matrix.
    pub mean: Vec<f64>,
    /// Retained axes, row-major: one row per feature, one column per axis.
    pub basis: Vec<Vec<f64>>,
    /// Variance of the training scores along each retained axis.
    pub explained_variance: Vec<f64>,
    /// Variance share of every axis the decomposition produced, descending.
    pub variance_shares: Vec<f64>,
    pub total_variance: f64,
    pub threshold: f64,
    pub n_samples: usize,
}

impl PcaModel {
    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    pub fn n_axes(&self) -> usize {
        self.explained_variance.len()
    }

    /// Share of the total variance kept by the retained axes.
    pub fn retained_share(&self) -> f64 {
        self.explained_variance.iter().sum::<f64>() / self.total_variance
    }

    /// Column `axis` of the basis.
    pub fn axis(&self, axis: usize) -> Vec<f64> {
        self.basis.iter().map(|r| r[axis]).collect()
    }
}

/// Fits a PCA on `data` (rows are samples) and keeps every axis whose
/// variance share is at least `threshold`.
///
/// Tall or square matrices use a thin SVD of the centered data. Wide
/// matrices (more features than samples, the usual case for scattering
/// features) go through the eigendecomposition of the `n × n` Gram matrix,
/// whose eigenvectors are the left singular vectors.
///
/// Each basis column is signed so that its largest-magnitude entry is
/// positive.
pub fn fit_pca(data: &DMatrix<f64>, threshold: f64) -> Result<PcaModel> {
    let (n, p) = data.shape();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "PCA needs at least 2 rows, got {n}"
        )));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "variance cutoff must lie in (0, 1), got {threshold}"
        )));
    }
    let mean: Vec<f64> = data.column_iter().map(|c| c.mean()).collect();
    let mut centered = data.clone();
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }
    let dof = (n - 1) as f64;
    let total_variance = centered.norm_squared() / dof;
    if !(total_variance > 0.0) || !total_variance.is_finite() {
        return Err(Error::DegenerateData("data matrix has rank 0".into()));
    }

    // (singular value², unit axis in feature space), unsorted
    let mut pairs: Vec<(f64, Option<Vec<f64>>)> = Vec::new();
    let mut gram_vectors: Option<DMatrix<f64>> = None;
    if p <= n {
        let svd = centered.clone().svd(false, true);
        let v_t = svd.v_t.expect("requested V^T");
        for (k, s) in svd.singular_values.iter().enumerate() {
            pairs.push((s * s, Some(v_t.row(k).iter().copied().collect())));
        }
    } else {
        let gram = &centered * centered.transpose();
        let eig = SymmetricEigen::new(gram);
        for &l in eig.eigenvalues.iter() {
            pairs.push((l.max(0.0), None));
        }
        gram_vectors = Some(eig.eigenvectors);
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| pairs[b].0.total_cmp(&pairs[a].0));

    let variance_shares: Vec<f64> = order
        .iter()
        .map(|&k| pairs[k].0 / dof / total_variance)
        .collect();
    let keep = variance_shares.iter().take_while(|&&s| s >= threshold).count();
    if keep == 0 {
        return Err(Error::DegenerateData(format!(
            "no principal axis reaches a variance share of {threshold}"
        )));
    }

    let mut axes: Vec<Vec<f64>> = Vec::with_capacity(keep);
    let mut explained_variance = Vec::with_capacity(keep);
    for &k in order.iter().take(keep) {
        let (sq, ref axis) = pairs[k];
        let mut v = match axis {
            Some(v) => v.clone(),
            None => {
                let u = gram_vectors.as_ref().expect("gram path").column(k);
                let sigma = sq.sqrt();
                (centered.tr_mul(&u) / sigma).iter().copied().collect()
            }
        };
        let lead = v
            .iter()
            .copied()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
            .map_or(1.0, |(_, x)| x);
        if lead < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        axes.push(v);
        explained_variance.push(sq / dof);
    }

    let basis = (0..p)
        .map(|f| axes.iter().map(|a| a[f]).collect())
        .collect();
    Ok(PcaModel {
        mean,
        basis,
        explained_variance,
        variance_shares,
        total_variance,
        threshold,
        n_samples: n,
    })
}

/// Builds a matrix from equally long rows.
pub fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != p) {
        return Err(Error::ShapeError {
            expected: p,
            found: bad.len(),
        });
    }
    Ok(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
}

/// PC scores `(row - mean) · U_red`.
pub fn transform(model: &PcaModel, row: &[f64]) -> Result<Vec<f64>> {
    if row.len() != model.n_features() {
        return Err(Error::ShapeError {
            expected: model.n_features(),
            found: row.len(),
        });
    }
    let mut scores = vec![0.0; model.n_axes()];
    for ((x, m), b) in row.iter().zip(&model.mean).zip(&model.basis) {
        let d = x - m;
        for (s, u) in scores.iter_mut().zip(b) {
            *s += d * u;
        }
    }
    Ok(scores)
}

/// Projection back into feature space, `scores · U_redᵀ + mean`.
pub fn inverse_transform(model: &PcaModel, scores: &[f64]) -> Result<Vec<f64>> {
    if scores.len() != model.n_axes() {
        return Err(Error::ShapeError {
            expected: model.n_axes(),
            found: scores.len(),
        });
    }
    Ok(model
        .basis
        .iter()
        .zip(&model.mean)
        .map(|(b, m)| m + b.iter().zip(scores).map(|(u, s)| u * s).sum::<f64>())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_group_scales_to_zero() {
        let rows = vec![vec![3.0, 1.0], vec![3.0, 5.0]];
        let s = fit_standardizer(&rows, &[0, 1]).unwrap();
        assert!(s.constant[0]);
        assert!(!s.constant[1]);
        assert_eq!(s.apply(&[3.0, 3.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(s.apply(&[7.0, 5.0]).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn two_row_closed_form() {
        // one group pooled over [1, 2] and [3, 6]: mean 3, population var 3.5
        let rows = vec![vec![1.0, 2.0], vec![3.0, 6.0]];
        let s = fit_standardizer(&rows, &[0, 0]).unwrap();
        assert_eq!(s.means, vec![3.0]);
        assert!((s.stds[0] - 3.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn single_row_rejected() {
        assert!(matches!(
            fit_standardizer(&[vec![1.0]], &[0]),
            Err(Error::InsufficientData(_))
        ));
        let m = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        assert!(matches!(fit_pca(&m, 0.1), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn rank_zero_rejected() {
        let m = DMatrix::from_element(4, 3, 2.0);
        assert!(matches!(fit_pca(&m, 0.01), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn line_through_origin() {
        let dir = [0.6, -0.8, 0.0];
        let rows: Vec<Vec<f64>> = (-5..=5)
            .map(|t| dir.iter().map(|d| d * t as f64).collect())
            .collect();
        let model = fit_pca(&rows_to_matrix(&rows).unwrap(), 0.002).unwrap();
        assert_eq!(model.n_axes(), 1);
        assert!((model.retained_share() - 1.0).abs() < 1e-12);
        // largest entry (-0.8) flipped positive
        assert!((model.axis(0)[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn transform_examples() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let t = i as f64;
                vec![t, (t * 0.7).sin() * 3.0, t * 0.1 + (t * 1.3).cos()]
            })
            .collect();
        let model = fit_pca(&rows_to_matrix(&rows).unwrap(), 1e-6).unwrap();
        let zero = transform(&model, &model.mean).unwrap();
        assert!(zero.iter().all(|v| v.abs() < 1e-12));

        let c = 2.5;
        let shifted: Vec<f64> = model
            .mean
            .iter()
            .zip(model.axis(0))
            .map(|(m, u)| m + c * u)
            .collect();
        let s = transform(&model, &shifted).unwrap();
        assert!((s[0] - c).abs() < 1e-10);
        assert!(s[1..].iter().all(|v| v.abs() < 1e-10));

        let back = inverse_transform(&model, &vec![0.0; model.n_axes()]).unwrap();
        assert_eq!(back, model.mean);
        assert!(transform(&model, &[1.0]).is_err());
        assert!(inverse_transform(&model, &[1.0; 9]).is_err());
    }
}
