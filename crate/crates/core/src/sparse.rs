//! Compressed sparse row matrices and the Krylov solvers used for the Galerkin systems.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Square or rectangular matrix in compressed sparse row form with sorted columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Zero matrix with the given per-row column sets (need not be sorted or unique).
    pub fn from_pattern(rows: usize, cols: usize, pattern: Vec<Vec<usize>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for mut r in pattern {
            r.sort_unstable();
            r.dedup();
            debug_assert!(r.last().is_none_or(|&c| c < cols));
            col_idx.extend(r);
            row_ptr.push(col_idx.len());
        }
        let values = vec![0.0; col_idx.len()];
        Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut pattern = vec![Vec::new(); rows];
        for &(i, j, _) in triplets {
            pattern[i].push(j);
        }
        let mut m = Self::from_pattern(rows, cols, pattern);
        for &(i, j, v) in triplets {
            m.add(i, j, v);
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, &(0..n).map(|i| (i, i, 1.0)).collect::<Vec<_>>())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[lo..hi].binary_search(&j).ok().map(|k| lo + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.values[k])
    }

    /// Adds `v` to entry `(i, j)`, which must be part of the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .position(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) is not in the sparsity pattern"));
        self.values[k] += v;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(y.len(), self.rows);
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let (c, v) = self.row(i);
            *yi = c.iter().zip(v).map(|(j, a)| a * x[*j]).sum();
        });
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        self.matvec(x, &mut y);
        y
    }

    pub fn transpose(&self) -> Self {
        let mut pattern = vec![Vec::new(); self.cols];
        for i in 0..self.rows {
            for &j in self.row(i).0 {
                pattern[j].push(i);
            }
        }
        let mut t = Self::from_pattern(self.cols, self.rows, pattern);
        for i in 0..self.rows {
            let (c, v) = self.row(i);
            for (j, a) in c.iter().zip(v) {
                t.add(*j, i, *a);
            }
        }
        t
    }

    /// Largest `|a_ij − a_ji|`; the pattern is assumed symmetric.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            let (c, v) = self.row(i);
            for (j, a) in c.iter().zip(v) {
                worst = worst.max((a - self.get(*j, i)).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Submatrix of the given rows and columns, renumbered in the given order.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut col_map = vec![usize::MAX; self.cols];
        for (k, &j) in cols.iter().enumerate() {
            col_map[j] = k;
        }
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for &i in rows {
            let (c, v) = self.row(i);
            let mut entries: Vec<(usize, f64)> = c
                .iter()
                .zip(v)
                .filter(|(j, _)| col_map[**j] != usize::MAX)
                .map(|(j, a)| (col_map[*j], *a))
                .collect();
            entries.sort_unstable_by_key(|e| e.0);
            for (j, a) in entries {
                col_idx.push(j);
                values.push(a);
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            rows: rows.len(),
            cols: cols.len(),
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            let (c, v) = self.row(i);
            for (j, a) in c.iter().zip(v) {
                m[(i, *j)] += a;
            }
        }
        m
    }

    /// Coordinate text form, one `i j value` line per stored entry (0-based).
    pub fn write_coordinate<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for i in 0..self.rows {
            let (c, v) = self.row(i);
            for (j, a) in c.iter().zip(v) {
                writeln!(w, "{i} {j} {a:e}")?;
            }
        }
        Ok(())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final true relative residual `‖b − Ax‖ / ‖b‖`.
    pub residual: f64,
    pub method: &'static str,
}

/// Convergence controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    /// Iteration cap as a multiple of the system size.
    pub max_iter_factor: usize,
    /// Nonsymmetric systems below this size are factorized densely.
    pub dense_threshold: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter_factor: 20,
            dense_threshold: 5000,
        }
    }
}

fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64], bn: f64) -> (Vec<f64>, f64) {
    let ax = a.mul(x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let rn = norm(&r);
    (r, rn / bn)
}

/// Jacobi-preconditioned conjugate gradients, started from `x`.
pub fn pcg(a: &CsrMatrix, b: &[f64], x: &mut [f64], opts: &SolverOptions) -> Result<SolveStats> {
    let n = b.len();
    let bn = norm(b);
    if bn == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats { iterations: 0, residual: 0.0, method: "pcg" });
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let max_iter = (opts.max_iter_factor * n).max(10);
    let mut history = Vec::new();
    let mut it = 0;
    // The recursive residual drifts from the true one; restart from the true
    // residual until the latter meets the tolerance.
    loop {
        let (mut r, rel) = relative_residual(a, x, b, bn);
        history.push(rel);
        if rel <= opts.tol {
            return Ok(SolveStats { iterations: it, residual: rel, method: "pcg" });
        }
        if it >= max_iter || history.len() > 50 {
            return Err(Error::NoConvergence { iterations: it, residual: rel, history });
        }
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![0.0; n];
        while it < max_iter {
            a.matvec(&p, &mut ap);
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                break;
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            it += 1;
            let rel = norm(&r) / bn;
            if rel <= 0.5 * opts.tol {
                break;
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
    }
}

/// Jacobi-preconditioned BiCGStab for nonsymmetric systems, started from `x`.
pub fn bicgstab(a: &CsrMatrix, b: &[f64], x: &mut [f64], opts: &SolverOptions) -> Result<SolveStats> {
    let n = b.len();
    let bn = norm(b);
    if bn == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats { iterations: 0, residual: 0.0, method: "bicgstab" });
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let max_iter = (opts.max_iter_factor * n).max(10);
    let mut history = Vec::new();
    let mut it = 0;
    loop {
        let (mut r, rel) = relative_residual(a, x, b, bn);
        history.push(rel);
        if rel <= opts.tol {
            return Ok(SolveStats { iterations: it, residual: rel, method: "bicgstab" });
        }
        if it >= max_iter || history.len() > 50 {
            return Err(Error::NoConvergence { iterations: it, residual: rel, history });
        }
        let r0 = r.clone();
        let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
        let mut v = vec![0.0; n];
        let mut p = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut s = vec![0.0; n];
        let mut zz = vec![0.0; n];
        let mut t = vec![0.0; n];
        while it < max_iter {
            let rho_new = dot(&r0, &r);
            if rho_new == 0.0 || omega == 0.0 {
                break;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
                y[i] = p[i] * inv_diag[i];
            }
            a.matvec(&y, &mut v);
            let r0v = dot(&r0, &v);
            if r0v == 0.0 {
                break;
            }
            alpha = rho / r0v;
            for i in 0..n {
                s[i] = r[i] - alpha * v[i];
                zz[i] = s[i] * inv_diag[i];
            }
            a.matvec(&zz, &mut t);
            let tt = dot(&t, &t);
            omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
            for i in 0..n {
                x[i] += alpha * y[i] + omega * zz[i];
                r[i] = s[i] - omega * t[i];
            }
            it += 1;
            if norm(&r) / bn <= 0.5 * opts.tol {
                break;
            }
        }
    }
}

/// Dense LU solve.
pub fn dense_solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let lu = a.to_dense().lu();
    lu.solve(&DVector::from_column_slice(b))
        .map(|v| v.iter().copied().collect())
        .ok_or(Error::NoConvergence {
            iterations: 0,
            residual: f64::INFINITY,
            history: Vec::new(),
        })
}

/// Solves `A x = b`: conjugate gradients for symmetric systems, otherwise
/// dense LU below the size threshold and BiCGStab above it.
pub fn solve(a: &CsrMatrix, b: &[f64], symmetric: bool, opts: &SolverOptions) -> Result<(Vec<f64>, SolveStats)> {
    let n = b.len();
    let mut x = vec![0.0; n];
    if n == 0 {
        return Ok((x, SolveStats { iterations: 0, residual: 0.0, method: "none" }));
    }
    if symmetric {
        let stats = pcg(a, b, &mut x, opts)?;
        return Ok((x, stats));
    }
    if n < opts.dense_threshold {
        let mut x = dense_solve(a, b)?;
        // one step of iterative refinement
        let bn = norm(b).max(f64::MIN_POSITIVE);
        let (r, _) = relative_residual(a, &x, b, bn);
        if let Ok(dx) = dense_solve(a, &r) {
            for (xi, di) in x.iter_mut().zip(dx) {
                *xi += di;
            }
        }
        let (_, rel) = relative_residual(a, &x, b, bn);
        return Ok((x, SolveStats { iterations: 1, residual: rel, method: "dense-lu" }));
    }
    let stats = bicgstab(a, b, &mut x, opts)?;
    Ok((x, stats))
}
