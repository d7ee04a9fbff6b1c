//! Compressed sparse row storage and a Jacobi-preconditioned conjugate
//! gradient solver for the symmetric positive-definite systems arising from
//! the metric operator.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Row pointers and column indices of a square sparse matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityPattern {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl SparsityPattern {
    /// Builds a pattern from per-row column sets.
    pub fn from_rows(rows: &[BTreeSet<usize>]) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for row in rows {
            col_idx.extend(row.iter().copied());
            row_ptr.push(col_idx.len());
        }
        SparsityPattern {
            n,
            row_ptr,
            col_idx,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    /// Position of entry `(row, col)` in the value array.
    pub fn position(&self, row: usize, col: usize) -> Option<usize> {
        let start = self.row_ptr[row];
        let cols = &self.col_idx[start..self.row_ptr[row + 1]];
        cols.binary_search(&col).ok().map(|k| start + k)
    }
}

/// A square sparse matrix sharing its pattern with other matrices on the same mesh.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pattern: Arc<SparsityPattern>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(pattern: Arc<SparsityPattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        CsrMatrix { pattern, values }
    }

    pub fn n(&self) -> usize {
        self.pattern.n
    }

    pub fn pattern(&self) -> &SparsityPattern {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pattern
            .position(row, col)
            .map_or(0.0, |k| self.values[k])
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        let p = &*self.pattern;
        for (row, yr) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in p.row_ptr[row]..p.row_ptr[row + 1] {
                acc += self.values[k] * x[p.col_idx[k]];
            }
            *yr = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n()];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.get(i, i)).collect()
    }

    /// Dense copy, row-major. Only meant for small matrices in tests and diagnostics.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let p = &*self.pattern;
        let mut dense = vec![vec![0.0; n]; n];
        for (row, dr) in dense.iter_mut().enumerate() {
            for k in p.row_ptr[row]..p.row_ptr[row + 1] {
                dr[p.col_idx[k]] = self.values[k];
            }
        }
        dense
    }

    /// Solves `A x = b` by conjugate gradients with Jacobi preconditioning.
    ///
    /// Converged when `‖b − A x‖ ≤ rel_tol · ‖b‖`. A zero right-hand side
    /// returns the zero vector without iterating.
    pub fn solve_pcg(&self, b: &[f64], rel_tol: f64, max_iter: usize) -> Result<Solve> {
        let n = self.n();
        assert_eq!(b.len(), n, "right-hand side length");
        let b_norm = norm(b);
        let mut x = vec![0.0; n];
        if b_norm == 0.0 {
            return Ok(Solve {
                x,
                iterations: 0,
                residual: 0.0,
            });
        }
        let inv_diag: Vec<f64> = self
            .diagonal()
            .into_iter()
            .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
            .collect();

        let mut r = b.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
        let mut p = z.clone();
        let mut ap = vec![0.0; n];
        let mut rz = dot(&r, &z);
        let target = rel_tol * b_norm;

        for it in 0..max_iter {
            let r_norm = norm(&r);
            if r_norm <= target {
                return Ok(Solve {
                    x,
                    iterations: it,
                    residual: r_norm / b_norm,
                });
            }
            self.mul_vec_into(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                // loss of positive-definiteness (or NaN)
                return Err(Error::SolverNotConverged {
                    iterations: it,
                    residual: r_norm / b_norm,
                });
            }
            let step = rz / pap;
            for i in 0..n {
                x[i] += step * p[i];
                r[i] -= step * ap[i];
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }

        // recompute the true residual before giving up
        let ax = self.mul_vec(&x);
        let res = norm(&b.iter().zip(&ax).map(|(b, a)| b - a).collect::<Vec<_>>()) / b_norm;
        if res <= rel_tol {
            Ok(Solve {
                x,
                iterations: max_iter,
                residual: res,
            })
        } else {
            Err(Error::SolverNotConverged {
                iterations: max_iter,
                residual: res,
            })
        }
    }
}

/// Outcome of a converged iterative solve.
#[derive(Debug, Clone)]
pub struct Solve {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> CsrMatrix {
        let rows: Vec<BTreeSet<usize>> = (0..n)
            .map(|i| {
                let mut s = BTreeSet::new();
                if i > 0 {
                    s.insert(i - 1);
                }
                s.insert(i);
                if i + 1 < n {
                    s.insert(i + 1);
                }
                s
            })
            .collect();
        let pattern = Arc::new(SparsityPattern::from_rows(&rows));
        let mut m = CsrMatrix::zeros(pattern.clone());
        for i in 0..n {
            let k = pattern.position(i, i).unwrap();
            m.values_mut()[k] = 2.0 + i as f64 * 0.1;
            if i + 1 < n {
                let k = pattern.position(i, i + 1).unwrap();
                m.values_mut()[k] = -1.0;
                let k = pattern.position(i + 1, i).unwrap();
                m.values_mut()[k] = -1.0;
            }
        }
        m
    }

    #[test]
    fn pcg_solves_tridiagonal() {
        let a = tridiag(50);
        let x_true: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = a.mul_vec(&x_true);
        let sol = a.solve_pcg(&b, 1e-12, 500).unwrap();
        let err: f64 = sol
            .x
            .iter()
            .zip(&x_true)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "err = {err}");
        assert!(sol.residual <= 1e-12);
    }

    #[test]
    fn pcg_zero_rhs() {
        let a = tridiag(5);
        let sol = a.solve_pcg(&[0.0; 5], 1e-10, 10).unwrap();
        assert_eq!(sol.iterations, 0);
        assert!(sol.x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pcg_reports_non_convergence() {
        let a = tridiag(200);
        let b = vec![1.0; 200];
        let err = a.solve_pcg(&b, 1e-14, 2).unwrap_err();
        assert!(matches!(err, Error::SolverNotConverged { iterations: 2, .. }));
    }

    #[test]
    fn pattern_positions() {
        let a = tridiag(4);
        assert_eq!(a.pattern().nnz(), 10);
        assert_eq!(a.pattern().position(0, 3), None);
        assert_eq!(a.get(1, 0), -1.0);
        assert_eq!(a.get(0, 3), 0.0);
    }
}
