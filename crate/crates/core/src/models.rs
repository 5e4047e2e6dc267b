//! Heads on PC scores: quadratic damage regression, kNN maneuver
//! classification and the evaluation metrics.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default neighbor count of the maneuver classifier.
pub const DEFAULT_KNN_K: usize = 20;

/// `lg D ≈ c + Σ a_i h_i + Σ_{i≤j} b_ij h_i h_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticRegressor {
    pub intercept: f64,
    pub linear: Vec<f64>,
    /// Pair order `(0,0), (0,1), …, (0,p-1), (1,1), …, (p-1,p-1)`.
    pub quadratic: Vec<f64>,
    pub target_channel: String,
}

/// Number of coefficients of a quadratic model in `p` variables.
pub fn n_quadratic_coefficients(p: usize) -> usize {
    1 + p + p * (p + 1) / 2
}

/// Expanded feature map `[1, h_i, h_i h_j (i ≤ j)]`.
pub fn quadratic_features(h: &[f64]) -> Vec<f64> {
    let p = h.len();
    let mut out = Vec::with_capacity(n_quadratic_coefficients(p));
    out.push(1.0);
    out.extend_from_slice(h);
    for i in 0..p {
        for j in i..p {
            out.push(h[i] * h[j]);
        }
    }
    out
}

/// Least-squares fit of a full quadratic model.
///
/// Solved with an SVD of the expanded design matrix; on rank deficiency the
/// minimum-norm solution is returned.
pub fn fit_quadratic(
    scores: &[Vec<f64>],
    targets: &[f64],
    target_channel: &str,
) -> Result<QuadraticRegressor> {
    if scores.len() != targets.len() {
        return Err(Error::ShapeError {
            expected: scores.len(),
            found: targets.len(),
        });
    }
    let p = scores.first().map_or(0, Vec::len);
    if let Some(bad) = scores.iter().find(|r| r.len() != p) {
        return Err(Error::ShapeError {
            expected: p,
            found: bad.len(),
        });
    }
    let m = n_quadratic_coefficients(p);
    if scores.len() <= m {
        return Err(Error::InsufficientData(format!(
            "quadratic model in {p} axes has {m} coefficients but only {} rows",
            scores.len()
        )));
    }
    let rows: Vec<Vec<f64>> = scores.iter().map(|h| quadratic_features(h)).collect();
    let design = DMatrix::from_fn(rows.len(), m, |i, j| rows[i][j]);
    // column scaling keeps the singular values of mixed-order terms comparable
    let col_scale: Vec<f64> = design
        .column_iter()
        .map(|c| {
            let n = c.norm();
            if n > 0.0 {
                n
            } else {
                1.0
            }
        })
        .collect();
    let scaled = DMatrix::from_fn(rows.len(), m, |i, j| design[(i, j)] / col_scale[j]);
    let y = DVector::from_column_slice(targets);
    let svd = scaled.svd(true, true);
    let tol = svd.singular_values.max() * (rows.len().max(m) as f64) * f64::EPSILON;
    let beta = svd
        .solve(&y, tol)
        .map_err(|e| Error::DegenerateData(e.to_string()))?;
    let coef: Vec<f64> = beta.iter().zip(&col_scale).map(|(b, s)| b / s).collect();
    Ok(QuadraticRegressor {
        intercept: coef[0],
        linear: coef[1..=p].to_vec(),
        quadratic: coef[p + 1..].to_vec(),
        target_channel: target_channel.to_string(),
    })
}

impl QuadraticRegressor {
    pub fn n_axes(&self) -> usize {
        self.linear.len()
    }

    pub fn coefficients(&self) -> Vec<f64> {
        let mut c = vec![self.intercept];
        c.extend_from_slice(&self.linear);
        c.extend_from_slice(&self.quadratic);
        c
    }

    /// Predicted `lg D`.
    pub fn predict(&self, h: &[f64]) -> Result<f64> {
        if h.len() != self.n_axes() {
            return Err(Error::ShapeError {
                expected: self.n_axes(),
                found: h.len(),
            });
        }
        Ok(quadratic_features(h)
            .iter()
            .zip(self.coefficients())
            .map(|(x, c)| x * c)
            .sum())
    }

    pub fn predict_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        rows.iter().map(|h| self.predict(h)).collect()
    }

    /// Predicted damage `10^lgD`.
    pub fn dampred(&self, h: &[f64]) -> Result<f64> {
        Ok(10f64.powf(self.predict(h)?))
    }
}

/// Coefficient of determination `1 - SSE/SST`.
pub fn r2(y: &[f64], y_star: &[f64]) -> Result<f64> {
    if y.len() != y_star.len() {
        return Err(Error::ShapeError {
            expected: y.len(),
            found: y_star.len(),
        });
    }
    if y.len() < 2 {
        return Err(Error::UndefinedMetric("R² needs at least 2 values".into()));
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if sst == 0.0 {
        return Err(Error::UndefinedMetric("R² of constant targets".into()));
    }
    let sse: f64 = y.iter().zip(y_star).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(1.0 - sse / sst)
}

/// Fatigue damage sum ratio `Σ D* / Σ D`.
pub fn fds_ratio(d: &[f64], d_star: &[f64]) -> Result<f64> {
    if d.len() != d_star.len() {
        return Err(Error::ShapeError {
            expected: d.len(),
            found: d_star.len(),
        });
    }
    let total: f64 = d.iter().sum();
    if !(total > 0.0) {
        return Err(Error::UndefinedMetric("observed damage sums to zero".into()));
    }
    Ok(d_star.iter().sum::<f64>() / total)
}

/// Euclidean k-nearest-neighbor classifier over PC scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub training_points: Vec<Vec<f64>>,
    pub training_labels: Vec<String>,
    pub k: usize,
}

pub fn knn_fit(points: Vec<Vec<f64>>, labels: Vec<String>, k: usize) -> Result<KnnModel> {
    if points.len() != labels.len() {
        return Err(Error::ShapeError {
            expected: points.len(),
            found: labels.len(),
        });
    }
    if k == 0 || k > points.len() {
        return Err(Error::InvalidK { k, n: points.len() });
    }
    let dim = points[0].len();
    if let Some(bad) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::ShapeError {
            expected: dim,
            found: bad.len(),
        });
    }
    Ok(KnnModel {
        training_points: points,
        training_labels: labels,
        k,
    })
}

impl KnnModel {
    pub fn dim(&self) -> usize {
        self.training_points.first().map_or(0, Vec::len)
    }

    /// Majority label among the `k` nearest training points.
    ///
    /// Neighbors are ranked by distance, then label, so the result does not
    /// depend on training row order. Vote ties go to the label with the
    /// smaller mean distance, then to the lexicographically smaller label.
    pub fn predict(&self, query: &[f64]) -> Result<String> {
        if query.len() != self.dim() {
            return Err(Error::ShapeError {
                expected: self.dim(),
                found: query.len(),
            });
        }
        let mut ranked: Vec<(f64, &str)> = self
            .training_points
            .iter()
            .zip(&self.training_labels)
            .map(|(p, l)| {
                let d2: f64 = p.iter().zip(query).map(|(a, b)| (a - b).powi(2)).sum();
                (d2, l.as_str())
            })
            .collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));

        let mut votes: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
        for &(d2, label) in &ranked[..self.k] {
            let e = votes.entry(label).or_insert((0, 0.0));
            e.0 += 1;
            e.1 += d2.sqrt();
        }
        let best = votes
            .into_iter()
            .map(|(label, (n, dsum))| (label, n, dsum / n as f64))
            .min_by(|a, b| {
                b.1.cmp(&a.1)
                    .then_with(|| a.2.total_cmp(&b.2))
                    .then_with(|| a.0.cmp(b.0))
            })
            .map(|(l, _, _)| l.to_string())
            .expect("k >= 1");
        Ok(best)
    }

    pub fn predict_batch(&self, queries: &[Vec<f64>]) -> Result<Vec<String>> {
        queries.iter().map(|q| self.predict(q)).collect()
    }
}

/// Confusion matrix indexed `[true][predicted]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<usize>>,
    pub accuracy: f64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }

    /// Row sums: number of samples per true class.
    pub fn support(&self) -> Vec<usize> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }
}

pub fn confusion_and_accuracy(
    labels: &[String],
    truth: &[String],
    predicted: &[String],
) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::ShapeError {
            expected: truth.len(),
            found: predicted.len(),
        });
    }
    let index: BTreeMap<&str, usize> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let lookup = |l: &String| {
        index
            .get(l.as_str())
            .copied()
            .ok_or_else(|| Error::UnknownLabel(l.clone()))
    };
    let mut counts = vec![vec![0usize; labels.len()]; labels.len()];
    for (t, p) in truth.iter().zip(predicted) {
        counts[lookup(t)?][lookup(p)?] += 1;
    }
    let mut cm = ConfusionMatrix {
        labels: labels.to_vec(),
        counts,
        accuracy: 0.0,
    };
    let total = cm.total();
    cm.accuracy = if total > 0 {
        cm.trace() as f64 / total as f64
    } else {
        0.0
    };
    Ok(cm)
}

/// Regression metrics of one strain channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelMetrics {
    pub channel: String,
    pub n_segments: usize,
    pub r2: Option<f64>,
    pub fds_ratio: Option<f64>,
}

/// Classification result of one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub task: String,
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub regression: Vec<ChannelMetrics>,
    pub classification: Vec<TaskReport>,
}
