//! Tensor-product spline spaces of one refinement level.
//!
//! Level spaces are never stored knot by knot. A [`LevelKnots`] keeps the
//! level-0 knot vector and computes the knots of its `ℓ`-fold dyadic
//! refinement arithmetically, so that deep levels cost nothing to represent.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::splines::{basis_ders, refine_local, KnotVector, MAX_BASIS};

/// Maximum number of parametric directions.
pub const MAX_DIM: usize = 3;

/// Per-direction integer index; unused trailing components are zero.
pub type MultiIndex = [u64; MAX_DIM];

/// Children coefficients at or below this magnitude are treated as zero.
pub const CHILD_THRESHOLD: f64 = 1e-14;

/// Univariate knot vector of level `ℓ`: the level-0 vector refined dyadically `ℓ` times.
#[derive(Debug, Clone)]
pub struct LevelKnots {
    base: Arc<KnotVector>,
    prefix: Arc<Vec<u64>>,
    level: u32,
}

impl LevelKnots {
    pub fn new(base: KnotVector) -> Self {
        let mut prefix = Vec::with_capacity(base.breakpoints().len());
        let mut acc = 0u64;
        for &m in base.multiplicities() {
            prefix.push(acc);
            acc += m as u64;
        }
        Self {
            base: Arc::new(base),
            prefix: Arc::new(prefix),
            level: 0,
        }
    }

    pub fn at_level(&self, level: u32) -> Self {
        Self {
            base: Arc::clone(&self.base),
            prefix: Arc::clone(&self.prefix),
            level,
        }
    }

    pub fn refined(&self) -> Self {
        self.at_level(self.level + 1)
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn base(&self) -> &KnotVector {
        &self.base
    }

    pub fn degree(&self) -> usize {
        self.base.degree()
    }

    fn factor(&self) -> u64 {
        1u64 << self.level
    }

    fn base_cells(&self) -> u64 {
        self.base.num_elements() as u64
    }

    pub fn num_cells(&self) -> u64 {
        self.base_cells() * self.factor()
    }

    pub fn num_functions(&self) -> u64 {
        self.num_knots() - self.degree() as u64 - 1
    }

    fn num_knots(&self) -> u64 {
        let m = self.base_cells();
        self.first_knot(m * self.factor()) + self.mult(m * self.factor())
    }

    /// Multiplicity of breakpoint `b`.
    pub fn mult(&self, b: u64) -> u64 {
        let f = self.factor();
        if b % f == 0 {
            self.base.multiplicities()[(b / f) as usize] as u64
        } else {
            1
        }
    }

    /// Knot index of the first copy of breakpoint `b`.
    fn first_knot(&self, b: u64) -> u64 {
        let f = self.factor();
        let (b0, r) = (b / f, b % f);
        let mut k = self.prefix[b0 as usize] + b0 * (f - 1);
        if r > 0 {
            k += self.base.multiplicities()[b0 as usize] as u64 + r - 1;
        }
        k
    }

    pub fn breakpoint(&self, b: u64) -> f64 {
        let f = self.factor();
        let (b0, r) = ((b / f) as usize, b % f);
        let z = self.base.breakpoints();
        if r == 0 {
            z[b0]
        } else {
            z[b0] + (z[b0 + 1] - z[b0]) * (r as f64 / f as f64)
        }
    }

    /// Breakpoint index of knot `k`.
    pub fn knot_break(&self, k: u64) -> u64 {
        let f = self.factor();
        let m = self.base_cells() as usize;
        // Largest level-0 breakpoint whose group starts at or before k.
        let mut lo = 0usize;
        let mut hi = m;
        while lo < hi {
            let mid = (lo + hi).div_ceil(2);
            if self.prefix[mid] + mid as u64 * (f - 1) <= k {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        let start = self.prefix[lo] + lo as u64 * (f - 1);
        let off = k - start;
        let m0 = self.base.multiplicities()[lo] as u64;
        if off < m0 {
            lo as u64 * f
        } else {
            lo as u64 * f + 1 + (off - m0)
        }
    }

    pub fn knot(&self, k: u64) -> f64 {
        self.breakpoint(self.knot_break(k))
    }

    /// Knot index of the span covering cell `c`.
    pub fn span_of_cell(&self, c: u64) -> u64 {
        self.first_knot(c) + self.mult(c) - 1
    }

    /// Index of the first function that is non-zero on cell `c`.
    pub fn first_function_on_cell(&self, c: u64) -> u64 {
        self.span_of_cell(c) - self.degree() as u64
    }

    /// Cells `lo..hi` covered by the support of function `j`.
    pub fn function_cells(&self, j: u64) -> (u64, u64) {
        let p = self.degree() as u64;
        (self.knot_break(j), self.knot_break(j + p + 1))
    }

    pub fn cell_bounds(&self, c: u64) -> (f64, f64) {
        (self.breakpoint(c), self.breakpoint(c + 1))
    }

    /// Cell containing `x`; right-continuous except at `x = 1`.
    pub fn cell_of(&self, x: f64) -> u64 {
        let z = self.base.breakpoints();
        let m = self.base_cells();
        let b0 = if x >= 1.0 {
            (m - 1) as usize
        } else {
            (z.partition_point(|&v| v <= x) - 1).min(m as usize - 1)
        };
        let f = self.factor();
        let t = (x - z[b0]) / (z[b0 + 1] - z[b0]) * f as f64;
        let mut r = (t.floor().max(0.0) as u64).min(f - 1);
        // Guard against rounding in the scaled coordinate.
        let c = b0 as u64 * f + r;
        if x < self.breakpoint(c) && r > 0 {
            r -= 1;
        } else if r + 1 < f && x >= self.breakpoint(c + 1) {
            r += 1;
        }
        b0 as u64 * f + r
    }

    pub fn meshsize(&self) -> f64 {
        self.base.meshsize() / self.factor() as f64
    }

    fn window(&self, span: u64) -> ([f64; 2 * MAX_BASIS], usize) {
        let p = self.degree() as u64;
        let mut w = [0.0; 2 * MAX_BASIS];
        for (i, k) in (span - p..=span + p + 1).enumerate() {
            w[i] = self.knot(k);
        }
        (w, 2 * p as usize + 2)
    }

    /// Non-zero functions on cell `c` at `x` (which should lie in the cell):
    /// returns the index of the first one; `out[k][i]` holds derivative `k`.
    pub fn eval_on_cell(&self, c: u64, x: f64, nd: usize, out: &mut [[f64; MAX_BASIS]; 3]) -> u64 {
        let span = self.span_of_cell(c);
        let (w, len) = self.window(span);
        basis_ders(&w[..len], self.degree(), x, nd, out);
        span - self.degree() as u64
    }

    /// Value and first two derivatives of function `j` at `x`.
    pub fn eval_function(&self, j: u64, x: f64) -> [f64; 3] {
        let c = self.cell_of(x);
        let mut out = [[0.0; MAX_BASIS]; 3];
        let first = self.eval_on_cell(c, x, 2, &mut out);
        let p = self.degree() as u64;
        if j < first || j > first + p {
            return [0.0; 3];
        }
        let i = (j - first) as usize;
        [out[0][i], out[1][i], out[2][i]]
    }

    /// Explicit knot vector of this level.
    pub fn to_knot_vector(&self) -> KnotVector {
        let knots = (0..self.num_knots()).map(|k| self.knot(k)).collect();
        KnotVector::new(self.degree(), knots).expect("level knots are valid")
    }

    /// Two-scale coefficients of function `j` in terms of level `ℓ + 1` functions.
    pub fn children(&self, j: u64) -> Vec<(u64, f64)> {
        let p = self.degree();
        let local: Vec<f64> = (j..=j + p as u64 + 1).map(|k| self.knot(k)).collect();
        let inserts: Vec<f64> = local
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| 0.5 * (w[0] + w[1]))
            .collect();
        let coef = refine_local(&local, &inserts, p);
        let b = self.knot_break(j);
        let copies = (self.first_knot(b) + self.mult(b) - j).min(p as u64 + 2);
        let fine = self.refined();
        let first = fine.first_knot(2 * b) + fine.mult(2 * b) - copies;
        coef.into_iter()
            .enumerate()
            .map(|(i, c)| (first + i as u64, c))
            .collect()
    }
}

/// d-variate tensor-product spline space of one level.
#[derive(Debug, Clone)]
pub struct TensorSpace {
    dirs: Vec<LevelKnots>,
}

/// A tensor-product B-spline `β(x) = β_1(x_1)…β_d(x_d)` of a given level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TensorFunction {
    pub level: u32,
    pub index: MultiIndex,
}

/// A closed Cartesian cell of a given level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub level: u32,
    pub index: MultiIndex,
}

/// Value, gradient and Hessian of a function at a point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PointEval {
    pub value: f64,
    pub grad: [f64; MAX_DIM],
    pub hess: [[f64; MAX_DIM]; MAX_DIM],
}

impl TensorSpace {
    /// Level-0 space from one knot vector per direction.
    pub fn new(knots: Vec<KnotVector>) -> Result<Self> {
        if knots.len() < 2 || knots.len() > MAX_DIM {
            return Err(Error::InvalidArgument(format!(
                "dimension must be between 2 and {MAX_DIM}"
            )));
        }
        Ok(Self {
            dirs: knots.into_iter().map(LevelKnots::new).collect(),
        })
    }

    /// Uniform open knot vectors of one degree in every direction.
    pub fn uniform(dim: usize, degree: usize, elements: &[usize]) -> Result<Self> {
        if elements.len() != dim {
            return Err(Error::InvalidArgument("one element count per direction".into()));
        }
        Self::new(
            elements
                .iter()
                .map(|&n| KnotVector::uniform(degree, n))
                .collect::<Result<_>>()?,
        )
    }

    pub fn dim(&self) -> usize {
        self.dirs.len()
    }

    pub fn level(&self) -> u32 {
        self.dirs[0].level()
    }

    pub fn direction(&self, i: usize) -> &LevelKnots {
        &self.dirs[i]
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.dirs.iter().map(|d| d.degree()).collect()
    }

    pub fn at_level(&self, level: u32) -> Self {
        Self {
            dirs: self.dirs.iter().map(|d| d.at_level(level)).collect(),
        }
    }

    pub fn refined(&self) -> Self {
        self.at_level(self.level() + 1)
    }

    /// This level as a fresh level-0 space with explicit knot vectors.
    pub fn to_base(&self) -> Result<Self> {
        Self::new(self.dirs.iter().map(|d| d.to_knot_vector()).collect())
    }

    /// Same level-0 knot vectors.
    pub fn same_family(&self, other: &TensorSpace) -> bool {
        self.dim() == other.dim()
            && self
                .dirs
                .iter()
                .zip(&other.dirs)
                .all(|(a, b)| Arc::ptr_eq(&a.base, &b.base) || a.base == b.base)
    }

    pub fn num_functions(&self) -> u64 {
        self.dirs.iter().map(|d| d.num_functions()).product()
    }

    pub fn num_cells(&self) -> u64 {
        self.dirs.iter().map(|d| d.num_cells()).product()
    }

    pub fn cells_per_direction(&self) -> MultiIndex {
        let mut n = [1; MAX_DIM];
        for (i, d) in self.dirs.iter().enumerate() {
            n[i] = d.num_cells();
        }
        n
    }

    pub fn functions_per_direction(&self) -> MultiIndex {
        let mut n = [1; MAX_DIM];
        for (i, d) in self.dirs.iter().enumerate() {
            n[i] = d.num_functions();
        }
        n
    }

    /// Largest cell diameter `h_ℓ`.
    pub fn meshsize(&self) -> f64 {
        self.dirs
            .iter()
            .map(|d| d.meshsize().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn cell(&self, index: MultiIndex) -> Cell {
        Cell {
            level: self.level(),
            index,
        }
    }

    pub fn function(&self, index: MultiIndex) -> TensorFunction {
        TensorFunction {
            level: self.level(),
            index,
        }
    }

    pub fn cell_bounds(&self, cell: &Cell) -> ([f64; MAX_DIM], [f64; MAX_DIM]) {
        let mut lo = [0.0; MAX_DIM];
        let mut hi = [0.0; MAX_DIM];
        for (i, d) in self.dirs.iter().enumerate() {
            let (a, b) = d.cell_bounds(cell.index[i]);
            lo[i] = a;
            hi[i] = b;
        }
        (lo, hi)
    }

    pub fn cell_diameter(&self, cell: &Cell) -> f64 {
        let (lo, hi) = self.cell_bounds(cell);
        (0..self.dim())
            .map(|i| (hi[i] - lo[i]).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn cell_volume(&self, cell: &Cell) -> f64 {
        let (lo, hi) = self.cell_bounds(cell);
        (0..self.dim()).map(|i| hi[i] - lo[i]).product()
    }

    pub fn cell_of(&self, x: &[f64]) -> Cell {
        let mut index = [0; MAX_DIM];
        for (i, d) in self.dirs.iter().enumerate() {
            index[i] = d.cell_of(x[i]);
        }
        self.cell(index)
    }

    /// Per-direction half-open cell ranges covered by the support `ω_β`.
    pub fn support_cells(&self, f: &TensorFunction) -> [(u64, u64); MAX_DIM] {
        let mut r = [(0, 1); MAX_DIM];
        for (i, d) in self.dirs.iter().enumerate() {
            r[i] = d.function_cells(f.index[i]);
        }
        r
    }

    /// Parametric support box `ω_β`.
    pub fn support_box(&self, f: &TensorFunction) -> ([f64; MAX_DIM], [f64; MAX_DIM]) {
        let mut lo = [0.0; MAX_DIM];
        let mut hi = [0.0; MAX_DIM];
        let p: Vec<usize> = self.degrees();
        for (i, d) in self.dirs.iter().enumerate() {
            lo[i] = d.knot(f.index[i]);
            hi[i] = d.knot(f.index[i] + p[i] as u64 + 1);
        }
        (lo, hi)
    }

    /// Tensor-product value, gradient and Hessian; exact zero outside `ω_β`.
    pub fn eval_function(&self, f: &TensorFunction, x: &[f64]) -> PointEval {
        let d = self.dim();
        let mut uni = [[0.0; 3]; MAX_DIM];
        for i in 0..d {
            uni[i] = self.dirs[i].eval_function(f.index[i], x[i]);
        }
        tensor_combine(&uni[..d])
    }

    /// The `Π (p_i + 1)` functions that are non-zero on `cell`.
    pub fn functions_on_cell(&self, cell: &Cell) -> Vec<TensorFunction> {
        let mut ranges = [(0u64, 1u64); MAX_DIM];
        for (i, d) in self.dirs.iter().enumerate() {
            let first = d.first_function_on_cell(cell.index[i]);
            ranges[i] = (first, first + d.degree() as u64 + 1);
        }
        box_indices(&ranges)
            .into_iter()
            .map(|index| self.function(index))
            .collect()
    }

    /// Children `C(β)` with their two-scale coefficients, in the next level.
    pub fn children(&self, fine: &TensorSpace, f: &TensorFunction) -> Result<Vec<(TensorFunction, f64)>> {
        if fine.level() != self.level() + 1 || f.level != self.level() || !self.same_family(fine) {
            return Err(Error::InvalidArgument(format!(
                "children of a level-{} function need the level-{} space (got {})",
                f.level,
                self.level() + 1,
                fine.level()
            )));
        }
        Ok(self.children_unchecked(f))
    }

    pub(crate) fn children_unchecked(&self, f: &TensorFunction) -> Vec<(TensorFunction, f64)> {
        let d = self.dim();
        let per_dir: Vec<Vec<(u64, f64)>> = (0..d).map(|i| self.dirs[i].children(f.index[i])).collect();
        let mut out = vec![([0u64; MAX_DIM], 1.0)];
        for (i, list) in per_dir.iter().enumerate() {
            let mut next = Vec::with_capacity(out.len() * list.len());
            for (idx, c) in &out {
                for &(k, ck) in list {
                    let mut j = *idx;
                    j[i] = k;
                    next.push((j, c * ck));
                }
            }
            out = next;
        }
        out.into_iter()
            .filter(|(_, c)| c.abs() > CHILD_THRESHOLD)
            .map(|(index, c)| {
                (
                    TensorFunction {
                        level: f.level + 1,
                        index,
                    },
                    c,
                )
            })
            .collect()
    }

    /// Tensor Gauss–Legendre rule on `cell` with `orders[i]` points in direction `i`.
    pub fn cell_quadrature(&self, cell: &Cell, orders: &[usize]) -> Vec<([f64; MAX_DIM], f64)> {
        let (lo, hi) = self.cell_bounds(cell);
        let rules: Vec<(Vec<f64>, Vec<f64>)> = (0..self.dim())
            .map(|i| GaussLegendre::new(orders[i]).mapped(lo[i], hi[i]))
            .collect();
        tensor_rule(&rules)
    }
}

/// Tensor product of univariate `(nodes, weights)` rules, first direction slowest.
pub fn tensor_rule(rules: &[(Vec<f64>, Vec<f64>)]) -> Vec<([f64; MAX_DIM], f64)> {
    let mut out = vec![([0.0; MAX_DIM], 1.0)];
    for (i, (x, w)) in rules.iter().enumerate() {
        let mut next = Vec::with_capacity(out.len() * x.len());
        for (p, wp) in &out {
            for (xi, wi) in x.iter().zip(w) {
                let mut q = *p;
                q[i] = *xi;
                next.push((q, wp * wi));
            }
        }
        out = next;
    }
    out
}

/// All multi-indices of a box `Π [lo_i, hi_i)`, first direction slowest.
pub fn box_indices(ranges: &[(u64, u64)]) -> Vec<MultiIndex> {
    let mut out = vec![[0u64; MAX_DIM]];
    for (i, &(lo, hi)) in ranges.iter().enumerate() {
        let mut next = Vec::with_capacity(out.len() * (hi - lo) as usize);
        for idx in &out {
            for k in lo..hi {
                let mut j = *idx;
                j[i] = k;
                next.push(j);
            }
        }
        out = next;
    }
    out
}

/// Combines univariate `[value, d1, d2]` triples into a tensor-product evaluation.
pub(crate) fn tensor_combine(uni: &[[f64; 3]]) -> PointEval {
    let d = uni.len();
    let mut e = PointEval {
        value: uni.iter().map(|u| u[0]).product(),
        ..Default::default()
    };
    for a in 0..d {
        e.grad[a] = (0..d).map(|i| if i == a { uni[i][1] } else { uni[i][0] }).product();
        for b in 0..d {
            e.hess[a][b] = (0..d)
                .map(|i| {
                    if a == b && i == a {
                        uni[i][2]
                    } else if i == a || i == b {
                        uni[i][1]
                    } else {
                        uni[i][0]
                    }
                })
                .product();
        }
    }
    e
}
