//! Residual-based indicators attached to the functions of a hierarchical basis.

use std::io::Write;

use rayon::prelude::*;

use crate::assembly::{error_points, Discretization, EllipticProblem, PhysicalCell};
use crate::error::{Error, Result};
use crate::hierarchy::HierarchicalBasis;
use crate::tensor::{TensorFunction, MAX_DIM};

/// Strong residual `f + div(A∇U) − b·∇U − cU` at quadrature point `q` of a cell.
pub fn residual_at(problem: &EllipticProblem, pc: &PhysicalCell, coeffs: &[f64], q: usize) -> f64 {
    let d = problem.dim;
    let (u, g, h) = pc.combine(coeffs, q);
    let x = pc.maps[q].point;
    let a = problem.diffusion_at(&x);
    let div_a = problem.diffusion_div_at(&x);
    let b = problem.advection_at(&x);
    let mut div_agrad = 0.0;
    for i in 0..d {
        for j in 0..d {
            div_agrad += a[i][j] * h[i][j];
        }
        div_agrad += div_a[i] * g[i];
    }
    let adv: f64 = (0..d).map(|i| b[i] * g[i]).sum();
    (problem.source)(&x) + div_agrad - adv - problem.reaction_at(&x) * u
}

/// Residual at an arbitrary parametric point strictly inside an active cell.
pub fn residual_at_point(problem: &EllipticProblem, disc: &Discretization, coeffs: &[f64], xi: &[f64]) -> Result<f64> {
    let d = disc.dim();
    let cell = disc.basis.locate(xi)?;
    let (lo, hi) = disc.basis.space(cell.level).cell_bounds(&cell);
    if (0..d).any(|i| xi[i] == lo[i] || xi[i] == hi[i]) {
        return Err(Error::OnCellBoundary(xi[..d].to_vec()));
    }
    let map = disc.map.eval(xi)?;
    let e = disc.basis.eval_combination(coeffs, xi)?;
    let x = map.point;
    let g = map.physical_gradient(&e.grad);
    let h = map.physical_hessian(&e.grad, &e.hess);
    let a = problem.diffusion_at(&x);
    let div_a = problem.diffusion_div_at(&x);
    let b = problem.advection_at(&x);
    let mut r = (problem.source)(&x) - problem.reaction_at(&x) * e.value;
    for i in 0..d {
        for j in 0..d {
            r += a[i][j] * h[i][j];
        }
        r += div_a[i] * g[i] - b[i] * g[i];
    }
    Ok(r)
}

/// Indicators `E_β = √a_β h_β (∫_{ω_β} |r|² β)^{1/2}` for every active function.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorSet {
    pub functions: Vec<TensorFunction>,
    pub values: Vec<f64>,
    /// `h_β` used for each function.
    pub meshsizes: Vec<f64>,
    /// `a_β` used for each function.
    pub weights: Vec<f64>,
    /// `∫ |r|² H² |det DF|`, accumulated independently of the indicators.
    pub weighted_residual: f64,
}

impl IndicatorSet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(Σ_β E_β²)^{1/2}`.
    pub fn global(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn get(&self, f: &TensorFunction) -> Option<f64> {
        self.functions.iter().position(|g| g == f).map(|i| self.values[i])
    }

    /// Root-sum-square over a subset of the functions.
    pub fn subset(&self, subset: &[TensorFunction]) -> Result<f64> {
        let index: rustc_hash::FxHashMap<&TensorFunction, usize> =
            self.functions.iter().enumerate().map(|(i, f)| (f, i)).collect();
        let mut s = 0.0;
        for f in subset {
            let i = index
                .get(f)
                .ok_or_else(|| Error::InactiveFunction(format!("level {} {:?}", f.level, f.index)))?;
            s += self.values[*i].powi(2);
        }
        Ok(s.sqrt())
    }

    /// One `level i,j,… indicator` line per function.
    pub fn write_dump<W: Write>(&self, mut w: W, dim: usize) -> std::io::Result<()> {
        for (f, v) in self.functions.iter().zip(&self.values) {
            let idx: Vec<String> = f.index[..dim].iter().map(|i| i.to_string()).collect();
            writeln!(w, "{} {} {}", f.level, idx.join(","), v)?;
        }
        Ok(())
    }
}

const CELL_CHUNK: usize = 2048;

/// Indicators of the active functions of `disc`.
pub fn compute_indicators(disc: &Discretization, problem: &EllipticProblem, coeffs: &[f64]) -> Result<IndicatorSet> {
    indicators_with_weights(&disc.basis, disc, problem, coeffs)
}

/// Indicators attached to the functions of `weights` for the discrete function
/// `Σ coeffs_i β_i` of `disc`, integrated over the cells of `disc`.
///
/// The hierarchy of `weights` must be contained in that of `disc`, so that each
/// cell of `disc` lies inside a single cell of `weights`.
pub fn indicators_with_weights(
    weights: &HierarchicalBasis,
    disc: &Discretization,
    problem: &EllipticProblem,
    coeffs: &[f64],
) -> Result<IndicatorSet> {
    if !weights.hierarchy().is_contained_in(disc.basis.hierarchy()) {
        return Err(Error::InvalidHierarchy("weight basis is finer than the integration mesh".into()));
    }
    let points = error_points(disc.degree());
    let n = weights.len();
    let mut acc = vec![0.0; n];
    let mut weighted = 0.0;
    let h2: Vec<f64> = weights
        .functions()
        .iter()
        .map(|f| weights.function_meshsize(f).powi(2))
        .collect();
    for chunk in disc.mesh.cells().chunks(CELL_CHUNK) {
        let locals = chunk
            .par_iter()
            .map(|cell| {
                let pc = disc.physical_cell(cell, points, 2)?;
                let nq = pc.eval.num_points();
                let r2: Vec<f64> = (0..nq)
                    .map(|q| residual_at(problem, &pc, coeffs, q).powi(2) * pc.measure(q))
                    .collect();
                let we = if std::ptr::eq(weights, &disc.basis) {
                    pc.eval
                } else {
                    weights.eval_cell(cell, points, 0)
                };
                let contrib: Vec<(usize, f64)> = we
                    .indices
                    .iter()
                    .enumerate()
                    .map(|(k, &i)| (i, (0..nq).map(|q| r2[q] * we.values[k * nq + q]).sum()))
                    .collect();
                Ok(contrib)
            })
            .collect::<Result<Vec<_>>>()?;
        for contrib in locals {
            for (i, v) in contrib {
                acc[i] += v;
                weighted += weights.weights()[i] * h2[i] * v;
            }
        }
    }
    let values = (0..n)
        .map(|i| (weights.weights()[i] * h2[i] * acc[i]).sqrt())
        .collect();
    Ok(IndicatorSet {
        functions: weights.functions().to_vec(),
        values,
        meshsizes: h2.iter().map(|v| v.sqrt()).collect(),
        weights: weights.weights().to_vec(),
        weighted_residual: weighted,
    })
}

/// `∫ |r|² H² |det DF|` evaluated with the weight function `H²` at every
/// quadrature point, independently of the per-function accumulation.
pub fn weighted_residual_integral(disc: &Discretization, problem: &EllipticProblem, coeffs: &[f64]) -> Result<f64> {
    let points = error_points(disc.degree());
    let parts = disc
        .mesh
        .cells()
        .par_iter()
        .map(|cell| {
            let pc = disc.physical_cell(cell, points, 2)?;
            let mut s = 0.0;
            for q in 0..pc.eval.num_points() {
                let x: [f64; MAX_DIM] = pc.eval.points[q];
                let h2 = disc.basis.h2_weight(&x[..disc.dim()])?;
                s += residual_at(problem, &pc, coeffs, q).powi(2) * h2 * pc.measure(q);
            }
            Ok(s)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(parts.iter().sum())
}
