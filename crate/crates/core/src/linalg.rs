//! Sparse symmetric positive-definite solves: Jacobi-preconditioned conjugate
//! gradients over a small operator trait, plus a dense Cholesky route used as
//! an independent oracle on small systems.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lattice::BoxRegion;

/// Default relative residual for production solves.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// Systems at or below this many unknowns may be cross-checked densely.
pub const DENSE_LIMIT: usize = 5000;

pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    fn diagonal(&self) -> Vec<f64>;
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub x: Vec<f64>,
    /// `|b - A x| / |b|`.
    pub residual: f64,
    pub iterations: usize,
}

pub fn conjugate_gradient<A: LinearOperator + ?Sized>(
    op: &A,
    b: &[f64],
    tolerance: f64,
    max_iterations: usize,
) -> Result<Solution> {
    let n = op.dim();
    assert_eq!(b.len(), n);
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(Solution {
            x: vec![0.0; n],
            residual: 0.0,
            iterations: 0,
        });
    }
    let inv_diag: Vec<f64> = op
        .diagonal()
        .iter()
        .map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, m)| a * m).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut residual = 1.0;
    for it in 0..max_iterations {
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::SolverNonConvergence {
                iterations: it,
                residual,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        residual = norm(&r) / bnorm;
        if residual <= tolerance {
            // recompute the true residual to guard against drift
            op.apply(&x, &mut ap);
            let true_res = b
                .iter()
                .zip(&ap)
                .map(|(bi, ai)| (bi - ai) * (bi - ai))
                .sum::<f64>()
                .sqrt()
                / bnorm;
            if true_res <= tolerance * 10.0 {
                return Ok(Solution {
                    x,
                    residual: true_res,
                    iterations: it + 1,
                });
            }
            for i in 0..n {
                r[i] = b[i] - ap[i];
            }
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
    Err(Error::SolverNonConvergence {
        iterations: max_iterations,
        residual,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Compressed sparse rows, symmetric by construction of the callers.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Build from per-row `(column, value)` lists; duplicate columns are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.cols[k])] += self.vals[k];
            }
        }
        m
    }
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            *yi = (self.row_ptr[i]..self.row_ptr[i + 1])
                .map(|k| self.vals[k] * x[self.cols[k]])
                .sum();
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .filter(|&k| self.cols[k] == i)
                    .map(|k| self.vals[k])
                    .sum()
            })
            .collect()
    }
}

/// Matrix-free `I - P` for simple random walk on a box, killed on leaving the
/// box and, optionally, on a set of removed vertices.
pub struct BoxWalkOperator<'a> {
    region: &'a BoxRegion,
    strides: Vec<usize>,
    killed: Option<&'a [bool]>,
}

impl<'a> BoxWalkOperator<'a> {
    pub fn new(region: &'a BoxRegion, killed: Option<&'a [bool]>) -> Self {
        if let Some(k) = killed {
            assert_eq!(k.len(), region.volume());
        }
        Self {
            region,
            strides: region.strides(),
            killed,
        }
    }
}

impl LinearOperator for BoxWalkOperator<'_> {
    fn dim(&self) -> usize {
        self.region.volume()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let side = self.region.side();
        let w = 1.0 / (2 * self.region.dim()) as f64;
        let killed = self.killed;
        let is_killed = |i: usize| killed.is_some_and(|k| k[i]);
        for i in 0..x.len() {
            if is_killed(i) {
                y[i] = x[i];
                continue;
            }
            let mut s = 0.0;
            for &st in &self.strides {
                let c = (i / st) % side;
                if c > 0 && !is_killed(i - st) {
                    s += x[i - st];
                }
                if c + 1 < side && !is_killed(i + st) {
                    s += x[i + st];
                }
            }
            y[i] = x[i] - w * s;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        vec![1.0; self.dim()]
    }
}

/// Dense SPD solve by Cholesky; fails with the smallest eigenvalue if `a` is
/// not numerically positive-definite.
pub fn dense_spd_solve(a: &DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let chol = a.clone().cholesky().ok_or_else(|| Error::Factorization {
        smallest_eigenvalue: smallest_eigenvalue(a),
    })?;
    Ok(chol
        .solve(&DVector::from_column_slice(b))
        .iter()
        .copied()
        .collect())
}

pub fn smallest_eigenvalue(a: &DMatrix<f64>) -> f64 {
    a.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}
