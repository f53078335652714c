//! Lowest eigenvalue of a sparse self-adjoint matrix by Lanczos iteration.

use nalgebra::{DMatrix, SymmetricEigen};

use super::matrix::Csr;
use crate::error::{Error, Result};

fn dot(w: Option<&[f64]>, a: &[f64], b: &[f64]) -> f64 {
    match w {
        None => a.iter().zip(b).map(|(x, y)| x * y).sum(),
        Some(w) => a.iter().zip(b).zip(w).map(|((x, y), w)| x * y * w).sum(),
    }
}

/// Lowest eigenvalue of `m`, self-adjoint in the inner product with weights
/// `weight` (flat when `None`).
///
/// Full reorthogonalization; stops once the Ritz residual of the lowest
/// pair drops below `tol·max(1, |θ|)`. The start vector is positive, which
/// overlaps the ground state of any operator with non-positive off-diagonal
/// entries.
pub fn lowest_eigenvalue(m: &Csr, weight: Option<&[f64]>, tol: f64, max_iter: usize) -> Result<f64> {
    let n = m.dim();
    if n == 0 {
        return Err(Error::Eigensolver("empty matrix".into()));
    }
    let max_iter = max_iter.min(n).max(1);
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * (0.37 * i as f64).sin().powi(2)).collect();
    let nv = dot(weight, &v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= nv);

    let mut basis: Vec<Vec<f64>> = vec![v];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut theta_prev = f64::INFINITY;

    for it in 0..max_iter {
        let cur = &basis[it];
        m.apply_real(cur, &mut w);
        let a = dot(weight, cur, &w);
        alpha.push(a);
        // two passes of Gram–Schmidt against the whole basis
        for _ in 0..2 {
            for q in &basis {
                let c = dot(weight, q, &w);
                w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
        }
        let b = dot(weight, &w, &w).sqrt();

        let k = alpha.len();
        let check = k == max_iter || b < 1e-14 || k.is_multiple_of(10);
        if check {
            let t = DMatrix::from_fn(k, k, |i, j| {
                if i == j {
                    alpha[i]
                } else if i + 1 == j {
                    beta[i]
                } else if j + 1 == i {
                    beta[j]
                } else {
                    0.0
                }
            });
            let eig = SymmetricEigen::new(t);
            let (imin, theta) = eig
                .eigenvalues
                .iter()
                .copied()
                .enumerate()
                .min_by(|x, y| x.1.total_cmp(&y.1))
                .expect("non-empty");
            let resid = (b * eig.eigenvectors[(k - 1, imin)]).abs();
            let scale = theta.abs().max(1.0);
            if resid <= tol * scale || b < 1e-14 || (theta_prev - theta).abs() <= 1e-3 * tol * scale {
                return Ok(theta);
            }
            theta_prev = theta;
            if k == max_iter {
                return Err(Error::Eigensolver(format!(
                    "no convergence after {k} iterations (residual {resid:.3e}, estimate {theta})"
                )));
            }
        }
        beta.push(b);
        let next: Vec<f64> = w.iter().map(|x| x / b).collect();
        basis.push(next);
    }
    Err(Error::Eigensolver("iteration limit reached".into()))
}
