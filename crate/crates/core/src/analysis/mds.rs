//! Classical (Torgerson) multidimensional scaling.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::eigen::symmetric_eigen;
use super::segments::SegmentToken;
use crate::{Error, Result};

/// Symmetric, zero-diagonal dissimilarities between `n` objects, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DissimilarityMatrix {
    pub fn new(values: Vec<f64>, n: usize) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::Shape(format!("{} values do not form a {n}x{n} matrix", values.len())));
        }
        let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            if values[i * n + i].abs() > 1e-12 * scale {
                return Err(Error::Precondition(format!("nonzero diagonal at {i}")));
            }
            for j in 0..i {
                if (values[i * n + j] - values[j * n + i]).abs() > 1e-9 * scale {
                    return Err(Error::Precondition(format!("dissimilarities not symmetric at ({i}, {j})")));
                }
            }
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Precondition(format!("non-finite dissimilarity {v}")));
        }
        Ok(Self { n, values })
    }

    /// Euclidean distances between the rows of `points`.
    pub fn euclidean(points: &[Vec<f64>]) -> Self {
        let n = points.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..i {
                let d = libm::sqrt(points[i].iter().zip(&points[j]).map(|(a, b)| (a - b) * (a - b)).sum());
                values[i * n + j] = d;
                values[j * n + i] = d;
            }
        }
        Self { n, values }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Euclidean distances between token feature vectors.
pub fn class_distance_matrix(tokens: &[SegmentToken]) -> Result<DissimilarityMatrix> {
    if tokens.len() < 2 {
        return Err(Error::Precondition(format!("need at least 2 tokens, got {}", tokens.len())));
    }
    let dims = tokens[0].feature_vector.len();
    if let Some(t) = tokens.iter().find(|t| t.feature_vector.len() != dims) {
        return Err(Error::Shape(format!(
            "token {} has {} dims, expected {dims}",
            t.label,
            t.feature_vector.len()
        )));
    }
    let rows: Vec<Vec<f64>> = tokens.iter().map(|t| t.feature_vector.clone()).collect();
    Ok(DissimilarityMatrix::euclidean(&rows))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MdsEmbedding {
    /// One row of `k` coordinates per object; every column has zero mean.
    pub points: Vec<Vec<f64>>,
    /// All eigenvalues of the double-centred matrix, descending. Negative
    /// values signal non-Euclidean input; they are clamped to zero when
    /// scaling coordinates.
    pub eigenvalues: Vec<f64>,
    pub stress: f64,
}

impl MdsEmbedding {
    pub fn dims(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }
}

/// Embeds `d` in `k` dimensions.
///
/// `B = -1/2 J D^2 J` with the centring matrix `J`; coordinates are the top
/// `k` eigenvectors of `B` scaled by `sqrt(max(lambda, 0))`, each column
/// sign-flipped so its largest-magnitude entry is positive. Stress is
/// Kruskal's stress-1 between input and embedded distances.
pub fn classical_mds(d: &DissimilarityMatrix, k: usize) -> Result<MdsEmbedding> {
    let n = d.len();
    if n < 3 {
        return Err(Error::Precondition(format!("classical MDS needs at least 3 objects, got {n}")));
    }
    if k == 0 || k > n {
        return Err(Error::Precondition(format!("cannot embed {n} objects in {k} dimensions")));
    }
    let sq: Vec<f64> = d.values().iter().map(|v| v * v).collect();
    let nf = n as f64;
    let row_mean: Vec<f64> = (0..n).map(|i| sq[i * n..(i + 1) * n].iter().sum::<f64>() / nf).collect();
    let grand = row_mean.iter().sum::<f64>() / nf;
    let mut b = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            // D^2 is symmetric, so column means equal row means
            b[i * n + j] = -0.5 * (sq[i * n + j] - row_mean[i] - row_mean[j] + grand);
        }
    }
    let eig = symmetric_eigen(&b, n)?;

    let mut points = vec![vec![0.0; k]; n];
    for c in 0..k {
        let scale = libm::sqrt(eig.values[c].max(0.0));
        let v = &eig.vectors[c];
        let pivot = (0..n).max_by(|&x, &y| v[x].abs().total_cmp(&v[y].abs())).unwrap_or(0);
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            points[i][c] = sign * scale * v[i];
        }
    }
    // remove the residual mean left by rounding in the eigenvectors
    for c in 0..k {
        let mean = points.iter().map(|p| p[c]).sum::<f64>() / nf;
        points.iter_mut().for_each(|p| p[c] -= mean);
    }

    let embedded = DissimilarityMatrix::euclidean(&points);
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let (orig, emb) = (d.get(i, j), embedded.get(i, j));
            num += (orig - emb) * (orig - emb);
            den += orig * orig;
        }
    }
    let stress = if den > 0.0 { libm::sqrt(num / den) } else { 0.0 };
    Ok(MdsEmbedding {
        points,
        eigenvalues: eig.values,
        stress,
    })
}
