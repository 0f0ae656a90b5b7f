//! Cyclic Jacobi eigensolver for small dense symmetric matrices.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Eigenpairs sorted by descending eigenvalue. `vectors[k]` is the unit
/// eigenvector for `values[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub sweeps: usize,
}

/// Diagonalizes the row-major `n x n` symmetric matrix `a`.
///
/// Sweeps rotate every off-diagonal pair in row order until all
/// off-diagonal magnitudes fall below `1e-12` (scaled by the matrix norm
/// when that exceeds 1).
pub fn symmetric_eigen(a: &[f64], n: usize) -> Result<SymmetricEigen> {
    if a.len() != n * n {
        return Err(Error::Shape(format!("{} values do not form a {n}x{n} matrix", a.len())));
    }
    let mut m = a.to_vec();
    for i in 0..n {
        for j in 0..i {
            let (x, y) = (m[i * n + j], m[j * n + i]);
            if (x - y).abs() > 1e-9 * x.abs().max(y.abs()).max(1.0) {
                return Err(Error::Precondition(format!("matrix is not symmetric at ({i}, {j})")));
            }
            let avg = 0.5 * (x + y);
            m[i * n + j] = avg;
            m[j * n + i] = avg;
        }
    }
    let norm = libm::sqrt(m.iter().map(|v| v * v).sum::<f64>());
    let tol = 1e-12 * norm.max(1.0);
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let mut sweeps = 0;
    loop {
        let off = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .fold(0.0f64, |acc, (i, j)| acc.max(m[i * n + j].abs()));
        if off < tol {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::Precondition(format!(
                "Jacobi iteration did not converge in {MAX_SWEEPS} sweeps (off-diagonal {off:e})"
            )));
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq.abs() < f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (m[k * n + p], m[k * n + q]);
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (m[p * n + k], m[q * n + k]);
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[y * n + y].total_cmp(&m[x * n + x]));
    Ok(SymmetricEigen {
        values: order.iter().map(|&k| m[k * n + k]).collect(),
        vectors: order.iter().map(|&k| (0..n).map(|i| v[i * n + k]).collect()).collect(),
        sweeps,
    })
}
