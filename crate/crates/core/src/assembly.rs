//! Galerkin discretization of `−div(A∇u) + b·∇u + cu = f`, `u = g` on the boundary.

use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{GeometryMap, MapEval};
use crate::hierarchy::{CellEval, HierarchicalBasis, HierarchicalMesh};
use crate::quadrature::GaussLegendre;
use crate::sparse::{self, CsrMatrix, SolveStats, SolverOptions};
use crate::tensor::{Cell, MAX_DIM};

pub type Point = [f64; MAX_DIM];
pub type ScalarFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&Point) -> Point + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(&Point) -> [[f64; MAX_DIM]; MAX_DIM] + Send + Sync>;

/// Data of a second-order elliptic problem in physical coordinates.
///
/// Missing coefficients default to `A = I`, `b = 0`, `c = 0`.
#[derive(Clone)]
pub struct EllipticProblem {
    pub dim: usize,
    pub diffusion: Option<MatrixFn>,
    /// `(div A)_j = Σ_i ∂A_ij/∂x_i`.
    pub diffusion_div: Option<VectorFn>,
    pub advection: Option<VectorFn>,
    pub advection_div: Option<ScalarFn>,
    pub reaction: Option<ScalarFn>,
    pub source: ScalarFn,
    pub dirichlet: ScalarFn,
    pub exact: Option<ScalarFn>,
    pub exact_grad: Option<VectorFn>,
    /// Declared bounds `γ₁ ≤ ξᵀAξ/|ξ|² ≤ γ₂`.
    pub ellipticity: (f64, f64),
}

impl std::fmt::Debug for EllipticProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EllipticProblem")
            .field("dim", &self.dim)
            .field("diffusion", &self.diffusion.is_some())
            .field("advection", &self.advection.is_some())
            .field("reaction", &self.reaction.is_some())
            .field("exact", &self.exact.is_some())
            .field("ellipticity", &self.ellipticity)
            .finish()
    }
}

impl EllipticProblem {
    /// `−Δu = f`, `u = g`.
    pub fn poisson(
        dim: usize,
        source: impl Fn(&Point) -> f64 + Send + Sync + 'static,
        dirichlet: impl Fn(&Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            diffusion: None,
            diffusion_div: None,
            advection: None,
            advection_div: None,
            reaction: None,
            source: Arc::new(source),
            dirichlet: Arc::new(dirichlet),
            exact: None,
            exact_grad: None,
            ellipticity: (1.0, 1.0),
        }
    }

    pub fn with_exact(
        mut self,
        u: impl Fn(&Point) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&Point) -> Point + Send + Sync + 'static,
    ) -> Self {
        self.exact = Some(Arc::new(u));
        self.exact_grad = Some(Arc::new(grad));
        self
    }

    pub fn with_diffusion(
        mut self,
        a: impl Fn(&Point) -> [[f64; MAX_DIM]; MAX_DIM] + Send + Sync + 'static,
        div_a: impl Fn(&Point) -> Point + Send + Sync + 'static,
        bounds: (f64, f64),
    ) -> Self {
        self.diffusion = Some(Arc::new(a));
        self.diffusion_div = Some(Arc::new(div_a));
        self.ellipticity = bounds;
        self
    }

    pub fn with_advection(
        mut self,
        b: impl Fn(&Point) -> Point + Send + Sync + 'static,
        div_b: impl Fn(&Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.advection = Some(Arc::new(b));
        self.advection_div = Some(Arc::new(div_b));
        self
    }

    pub fn with_reaction(mut self, c: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Self {
        self.reaction = Some(Arc::new(c));
        self
    }

    /// Symmetric bilinear form (no advection).
    pub fn is_symmetric(&self) -> bool {
        self.advection.is_none()
    }

    pub fn diffusion_at(&self, x: &Point) -> [[f64; MAX_DIM]; MAX_DIM] {
        match &self.diffusion {
            Some(a) => a(x),
            None => {
                let mut m = [[0.0; MAX_DIM]; MAX_DIM];
                for (i, row) in m.iter_mut().enumerate().take(self.dim) {
                    row[i] = 1.0;
                }
                m
            }
        }
    }

    pub fn diffusion_div_at(&self, x: &Point) -> Point {
        self.diffusion_div.as_ref().map_or([0.0; MAX_DIM], |f| f(x))
    }

    pub fn advection_at(&self, x: &Point) -> Point {
        self.advection.as_ref().map_or([0.0; MAX_DIM], |f| f(x))
    }

    pub fn reaction_at(&self, x: &Point) -> f64 {
        self.reaction.as_ref().map_or(0.0, |f| f(x))
    }

    /// Spot-checks the declared ellipticity bounds and `c − ½ div b ≥ 0` at
    /// random points of the physical domain.
    pub fn check_ellipticity(&self, map: &GeometryMap, seed: u64) -> Result<()> {
        let (g1, g2) = self.ellipticity;
        if !(g1 > 0.0 && g1 <= g2) {
            return Err(Error::Ellipticity(format!("invalid bounds ({g1}, {g2})")));
        }
        let d = self.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..100 {
            let mut xi = [0.0; MAX_DIM];
            for v in xi.iter_mut().take(d) {
                *v = rng.gen::<f64>();
            }
            let Ok(e) = map.eval(&xi) else { continue };
            let x = e.point;
            let a = self.diffusion_at(&x);
            let mut v = [0.0; MAX_DIM];
            for c in v.iter_mut().take(d) {
                *c = rng.gen_range(-1.0..1.0);
            }
            let vv: f64 = v.iter().map(|c| c * c).sum();
            let q: f64 = (0..d).map(|i| (0..d).map(|j| v[i] * a[i][j] * v[j]).sum::<f64>()).sum();
            let slack = 1e-12 * vv.max(1.0);
            if q < g1 * vv - slack || q > g2 * vv + slack {
                return Err(Error::Ellipticity(format!(
                    "ξᵀAξ = {q} outside [{}, {}] at {:?}",
                    g1 * vv,
                    g2 * vv,
                    &x[..d]
                )));
            }
            for i in 0..d {
                for j in 0..i {
                    if (a[i][j] - a[j][i]).abs() > 1e-12 * (a[i][j].abs() + 1.0) {
                        return Err(Error::Ellipticity(format!("A is not symmetric at {:?}", &x[..d])));
                    }
                }
            }
            let div_b = self.advection_div.as_ref().map_or(0.0, |f| f(&x));
            let c = self.reaction_at(&x);
            if c - 0.5 * div_b < -1e-12 {
                return Err(Error::Ellipticity(format!("c − div(b)/2 = {} < 0 at {:?}", c - 0.5 * div_b, &x[..d])));
            }
        }
        Ok(())
    }
}

/// A hierarchical spline space on a mapped domain.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub basis: HierarchicalBasis,
    pub mesh: HierarchicalMesh,
    pub map: GeometryMap,
}

impl Discretization {
    pub fn new(basis: HierarchicalBasis, map: GeometryMap) -> Result<Self> {
        if basis.dim() != map.dim() {
            return Err(Error::InvalidArgument(format!(
                "basis dimension {} does not match the {}-dimensional geometry",
                basis.dim(),
                map.dim()
            )));
        }
        let mesh = HierarchicalMesh::new(basis.hierarchy());
        Ok(Self { basis, mesh, map })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Largest polynomial degree over the directions.
    pub fn degree(&self) -> usize {
        self.basis.space(0).degrees().into_iter().max().unwrap()
    }

    pub fn num_dofs(&self) -> usize {
        self.basis.len()
    }

    /// Evaluates the active functions on a cell together with the map, pushing
    /// gradients (and Hessians when `nd = 2`) to physical coordinates.
    pub fn physical_cell(&self, cell: &Cell, points: usize, nd: usize) -> Result<PhysicalCell> {
        let ce = self.basis.eval_cell(cell, points, nd);
        let maps = ce
            .points
            .iter()
            .map(|x| self.map.eval(x))
            .collect::<Result<Vec<MapEval>>>()?;
        let nq = ce.num_points();
        let mut grads = Vec::with_capacity(ce.grads.len());
        for f in 0..ce.num_functions() {
            for (q, m) in maps.iter().enumerate() {
                grads.push(m.physical_gradient(&ce.grads[f * nq + q]));
            }
        }
        Ok(PhysicalCell { eval: ce, maps, grads })
    }
}

/// A [`CellEval`] with the geometry map evaluated at its quadrature points.
#[derive(Debug, Clone)]
pub struct PhysicalCell {
    pub eval: CellEval,
    pub maps: Vec<MapEval>,
    /// Physical gradients, laid out like `eval.grads`.
    pub grads: Vec<Point>,
}

impl PhysicalCell {
    /// Physical measure `w_q |det DF|` of quadrature point `q`.
    pub fn measure(&self, q: usize) -> f64 {
        self.eval.weights[q] * self.maps[q].det.abs()
    }

    /// Value, physical gradient and physical Hessian of `Σ c_i β_i` at point `q`.
    pub fn combine(&self, coeffs: &[f64], q: usize) -> (f64, Point, [[f64; MAX_DIM]; MAX_DIM]) {
        let e = self.eval.combine(coeffs, q);
        let m = &self.maps[q];
        let g = m.physical_gradient(&e.grad);
        let h = if self.eval.hess.is_empty() {
            [[0.0; MAX_DIM]; MAX_DIM]
        } else {
            m.physical_hessian(&e.grad, &e.hess)
        };
        (e.value, g, h)
    }
}

/// Assembled Galerkin system.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    /// `B[β_j, β_i]` at `(i, j)` over all active functions.
    pub full: CsrMatrix,
    /// `F(β_i)` over all active functions.
    pub load: Vec<f64>,
    /// Active functions vanishing on the boundary, in increasing global order.
    pub free: Vec<usize>,
    pub boundary: Vec<usize>,
    /// Coefficients of the boundary functions, aligned with `boundary`.
    pub boundary_values: Vec<f64>,
    /// Free-by-free block.
    pub matrix: CsrMatrix,
    /// Load with the boundary contribution moved to the right-hand side.
    pub rhs: Vec<f64>,
    pub symmetric: bool,
}

impl LinearSystem {
    pub fn num_free(&self) -> usize {
        self.free.len()
    }

    /// Writes the free-by-free matrix as `i j value` lines.
    pub fn write_matrix<W: Write>(&self, w: W) -> std::io::Result<()> {
        self.matrix.write_coordinate(w)
    }

    /// Full coefficient vector from free coefficients.
    pub fn expand(&self, free_values: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.load.len()];
        for (k, &i) in self.free.iter().enumerate() {
            u[i] = free_values[k];
        }
        for (k, &i) in self.boundary.iter().enumerate() {
            u[i] = self.boundary_values[k];
        }
        u
    }
}

/// Quadrature points per direction used for assembling on degree `p` splines.
pub fn assembly_points(p: usize) -> usize {
    p + 1
}

/// Quadrature points per direction for error and indicator integrals.
pub fn error_points(p: usize) -> usize {
    p + 2
}

const CELL_CHUNK: usize = 2048;

struct LocalSystem {
    indices: Vec<usize>,
    matrix: Vec<f64>,
    load: Vec<f64>,
}

fn local_system(disc: &Discretization, problem: &EllipticProblem, cell: &Cell, points: usize) -> Result<LocalSystem> {
    let pc = disc.physical_cell(cell, points, 1)?;
    let ce = &pc.eval;
    let (nf, nq, d) = (ce.num_functions(), ce.num_points(), disc.dim());
    let mut matrix = vec![0.0; nf * nf];
    let mut load = vec![0.0; nf];
    let mut ag = vec![[0.0; MAX_DIM]; nf];
    for q in 0..nq {
        let x = pc.maps[q].point;
        let w = pc.measure(q);
        let a = problem.diffusion_at(&x);
        let b = problem.advection_at(&x);
        let c = problem.reaction_at(&x);
        let f = (problem.source)(&x);
        for i in 0..nf {
            let g = &pc.grads[i * nq + q];
            for k in 0..d {
                ag[i][k] = (0..d).map(|l| a[k][l] * g[l]).sum();
            }
        }
        for i in 0..nf {
            let vi = ce.values[i * nq + q];
            let gi = &pc.grads[i * nq + q];
            load[i] += w * f * vi;
            for j in 0..nf {
                let vj = ce.values[j * nq + q];
                let gj = &pc.grads[j * nq + q];
                let mut s: f64 = (0..d).map(|k| ag[j][k] * gi[k]).sum();
                if problem.advection.is_some() {
                    s += (0..d).map(|k| b[k] * gj[k]).sum::<f64>() * vi;
                }
                if c != 0.0 {
                    s += c * vj * vi;
                }
                matrix[i * nf + j] += w * s;
            }
        }
    }
    Ok(LocalSystem {
        indices: ce.indices.clone(),
        matrix,
        load,
    })
}

/// Sparsity pattern coupling every pair of functions sharing an active cell.
fn pattern(disc: &Discretization) -> Vec<Vec<usize>> {
    let n = disc.num_dofs();
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
    for cell in disc.mesh.cells() {
        let idx: Vec<usize> = disc.basis.cell_functions(cell).into_iter().map(|x| x.0).collect();
        for &i in &idx {
            rows[i].extend_from_slice(&idx);
        }
    }
    rows.par_iter_mut().for_each(|r| {
        r.sort_unstable();
        r.dedup();
    });
    rows
}

/// Assembles the Galerkin system and applies the Dirichlet data.
pub fn assemble(disc: &Discretization, problem: &EllipticProblem) -> Result<LinearSystem> {
    if problem.dim != disc.dim() {
        return Err(Error::InvalidArgument("problem and discretization dimensions differ".into()));
    }
    problem.check_ellipticity(&disc.map, 0x5eed)?;
    let n = disc.num_dofs();
    let points = assembly_points(disc.degree());
    let mut full = CsrMatrix::from_pattern(n, n, pattern(disc));
    let mut load = vec![0.0; n];
    for chunk in disc.mesh.cells().chunks(CELL_CHUNK) {
        let locals = chunk
            .par_iter()
            .map(|c| local_system(disc, problem, c, points))
            .collect::<Result<Vec<_>>>()?;
        for loc in locals {
            let nf = loc.indices.len();
            for (a, &i) in loc.indices.iter().enumerate() {
                load[i] += loc.load[a];
                for (b, &j) in loc.indices.iter().enumerate() {
                    full.add(i, j, loc.matrix[a * nf + b]);
                }
            }
        }
    }
    let (free, boundary): (Vec<usize>, Vec<usize>) =
        (0..n).partition(|&i| !disc.basis.is_boundary(&disc.basis.functions()[i]));
    let boundary_values = dirichlet_values(disc, &problem.dirichlet, &boundary)?;
    let matrix = full.submatrix(&free, &free);
    let coupling = full.submatrix(&free, &boundary);
    let lifted = coupling.mul(&boundary_values);
    let rhs: Vec<f64> = free.iter().zip(&lifted).map(|(&i, l)| load[i] - l).collect();
    Ok(LinearSystem {
        full,
        load,
        free,
        boundary,
        boundary_values,
        matrix,
        rhs,
        symmetric: problem.is_symmetric(),
    })
}

/// Boundary coefficients from the L² projection of `g ∘ F` onto the traces of
/// the boundary functions, with the parametric surface measure.
pub fn dirichlet_values(disc: &Discretization, g: &ScalarFn, boundary: &[usize]) -> Result<Vec<f64>> {
    let nb = boundary.len();
    if nb == 0 {
        return Ok(Vec::new());
    }
    let d = disc.dim();
    let mut local_of = vec![usize::MAX; disc.num_dofs()];
    for (k, &i) in boundary.iter().enumerate() {
        local_of[i] = k;
    }
    let rule = GaussLegendre::new(error_points(disc.degree()));
    let mut triplets = Vec::new();
    let mut rhs = vec![0.0; nb];
    for cell in disc.mesh.cells() {
        let space = disc.basis.space(cell.level);
        let ncell = space.cells_per_direction();
        for dir in 0..d {
            for side in 0..2 {
                let on_face = if side == 0 { cell.index[dir] == 0 } else { cell.index[dir] + 1 == ncell[dir] };
                if !on_face {
                    continue;
                }
                let funcs: Vec<(usize, crate::tensor::TensorFunction)> = disc
                    .basis
                    .cell_functions(cell)
                    .into_iter()
                    .filter(|(i, _)| local_of[*i] != usize::MAX)
                    .collect();
                let (lo, hi) = space.cell_bounds(cell);
                let rules: Vec<(Vec<f64>, Vec<f64>)> = (0..d)
                    .map(|i| {
                        if i == dir {
                            (vec![side as f64], vec![1.0])
                        } else {
                            rule.mapped(lo[i], hi[i])
                        }
                    })
                    .collect();
                for (x, w) in crate::tensor::tensor_rule(&rules) {
                    let gx = g(&disc.map.eval(&x)?.point);
                    let vals: Vec<f64> = funcs
                        .iter()
                        .map(|(_, f)| disc.basis.space(f.level).eval_function(f, &x[..d]).value)
                        .collect();
                    for (a, (ia, _)) in funcs.iter().enumerate() {
                        if vals[a] == 0.0 {
                            continue;
                        }
                        rhs[local_of[*ia]] += w * gx * vals[a];
                        for (b, (ib, _)) in funcs.iter().enumerate() {
                            if vals[b] != 0.0 {
                                triplets.push((local_of[*ia], local_of[*ib], w * vals[a] * vals[b]));
                            }
                        }
                    }
                }
            }
        }
    }
    let mass = CsrMatrix::from_triplets(nb, nb, &triplets);
    let opts = SolverOptions { tol: 1e-13, ..Default::default() };
    let mut x = vec![0.0; nb];
    match sparse::pcg(&mass, &rhs, &mut x, &opts) {
        Ok(_) => Ok(x),
        // Traces of hierarchical functions may be linearly dependent on a
        // face; the projection is then a consistent semidefinite system.
        Err(Error::NoConvergence { residual, .. }) if residual < 1e-9 => Ok(x),
        Err(e) => Err(e),
    }
}

/// Solves the system; returns the full coefficient vector.
pub fn solve(system: &LinearSystem, opts: &SolverOptions) -> Result<(Vec<f64>, SolveStats)> {
    let (x, stats) = sparse::solve(&system.matrix, &system.rhs, system.symmetric, opts)?;
    Ok((system.expand(&x), stats))
}

/// `|u − U|_{H¹}` over the physical domain.
pub fn energy_error(disc: &Discretization, coeffs: &[f64], exact_grad: &VectorFn) -> Result<f64> {
    let points = error_points(disc.degree());
    let d = disc.dim();
    let parts = disc
        .mesh
        .cells()
        .par_iter()
        .map(|cell| {
            let pc = disc.physical_cell(cell, points, 1)?;
            let mut s = 0.0;
            for q in 0..pc.eval.num_points() {
                let (_, g, _) = pc.combine(coeffs, q);
                let ge = exact_grad(&pc.maps[q].point);
                s += pc.measure(q) * (0..d).map(|k| (ge[k] - g[k]).powi(2)).sum::<f64>();
            }
            Ok(s)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(parts.iter().sum::<f64>().sqrt())
}

/// `‖∇U‖²` and `‖U‖²` over the physical domain.
pub fn seminorm_and_norm_squared(disc: &Discretization, coeffs: &[f64]) -> Result<(f64, f64)> {
    let points = error_points(disc.degree());
    let d = disc.dim();
    let mut gs = 0.0;
    let mut vs = 0.0;
    for cell in disc.mesh.cells() {
        let pc = disc.physical_cell(cell, points, 1)?;
        for q in 0..pc.eval.num_points() {
            let (v, g, _) = pc.combine(coeffs, q);
            gs += pc.measure(q) * (0..d).map(|k| g[k] * g[k]).sum::<f64>();
            vs += pc.measure(q) * v * v;
        }
    }
    Ok((gs, vs))
}

/// Physical volume `Σ_Q ∫_Q |det DF|`.
pub fn physical_volume(disc: &Discretization) -> Result<f64> {
    let points = error_points(disc.degree());
    let mut v = 0.0;
    for cell in disc.mesh.cells() {
        let space = disc.basis.space(cell.level);
        let orders = vec![points; disc.dim()];
        for (x, w) in space.cell_quadrature(cell, &orders) {
            v += w * disc.map.eval(&x)?.det.abs();
        }
    }
    Ok(v)
}

/// `|F(β_i) − B[U, β_i]|` for every free function.
pub fn galerkin_defects(system: &LinearSystem, coeffs: &[f64]) -> Vec<f64> {
    let bu = system.full.mul(coeffs);
    system.free.iter().map(|&i| (system.load[i] - bu[i]).abs()).collect()
}
