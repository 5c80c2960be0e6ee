//! Randomized checks of the weighted inequalities behind the estimator:
//! concavity of B-spline roots, the weighted trace identity, weighted
//! Poincaré and Friedrichs bounds and the generalized Cauchy–Schwarz bound.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::splines::KnotVector;
use crate::tensor::{box_indices, tensor_rule, Cell, TensorFunction, TensorSpace, MAX_DIM};

/// Outcome of one randomized check; `pass` iff `worst_margin ≥ −tolerance`.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalityReport {
    pub name: String,
    pub samples: usize,
    pub worst_margin: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl InequalityReport {
    pub fn new(name: &str, samples: usize, worst_margin: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            samples,
            worst_margin,
            tolerance,
            pass: worst_margin >= -tolerance,
        }
    }

    /// Combines reports of the same check: samples add, margins take the minimum.
    pub fn merge(self, other: InequalityReport) -> InequalityReport {
        let margin = self.worst_margin.min(other.worst_margin);
        InequalityReport::new(&self.name, self.samples + other.samples, margin, self.tolerance)
    }
}

impl fmt::Display for InequalityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {:e} {}", self.name, self.samples, self.worst_margin, self.pass)
    }
}

pub const CONCAVITY_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const POINCARE_TOL: f64 = 1e-10;
pub const CS_TOL: f64 = 1e-12;
/// Bound on the empirical Friedrichs constant.
pub const FRIEDRICHS_BOUND: f64 = 10.0;
/// Allowed spread of the Friedrichs constants across degrees.
pub const FRIEDRICHS_SPREAD: f64 = 3.0;

fn sample_box(rng: &mut ChaCha8Rng, lo: &[f64; MAX_DIM], hi: &[f64; MAX_DIM], d: usize) -> [f64; MAX_DIM] {
    let mut x = [0.0; MAX_DIM];
    for i in 0..d {
        x[i] = rng.gen_range(lo[i]..hi[i]);
    }
    x
}

/// Midpoint-type concavity of `β^s` on `ω_β` over random triples `(x, y, α)`.
///
/// The margin of a triple is `β^s(αx + (1−α)y) − αβ^s(x) − (1−α)β^s(y)`.
pub fn check_concavity_exponent(
    space: &TensorSpace,
    f: &TensorFunction,
    exponent: f64,
    samples: usize,
    seed: u64,
) -> Result<InequalityReport> {
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let d = space.dim();
    let (lo, hi) = space.support_box(f);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let root = |x: &[f64; MAX_DIM]| space.eval_function(f, &x[..d]).value.max(0.0).powf(exponent);
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let x = sample_box(&mut rng, &lo, &hi, d);
        let y = sample_box(&mut rng, &lo, &hi, d);
        let a: f64 = rng.gen_range(0.0..1.0);
        let mut z = [0.0; MAX_DIM];
        for i in 0..d {
            z[i] = a * x[i] + (1.0 - a) * y[i];
        }
        worst = worst.min(root(&z) - a * root(&x) - (1.0 - a) * root(&y));
    }
    Ok(InequalityReport::new("concavity", samples, worst, CONCAVITY_TOL))
}

/// Concavity of `β^{1/(pd)}`.
pub fn check_concavity(space: &TensorSpace, f: &TensorFunction, samples: usize, seed: u64) -> Result<InequalityReport> {
    let p = space.direction(0).degree();
    check_concavity_exponent(space, f, 1.0 / (p * space.dim()) as f64, samples, seed)
}

/// Searches for a concavity violation of the raw function `β`.
///
/// The margin is the largest violation found beyond the concavity tolerance,
/// so the report passes iff the search found a counterexample.
pub fn concavity_control(space: &TensorSpace, f: &TensorFunction, samples: usize, seed: u64) -> Result<InequalityReport> {
    let raw = check_concavity_exponent(space, f, 1.0, samples, seed)?;
    Ok(InequalityReport::new(
        "concavity-control",
        samples,
        -raw.worst_margin - CONCAVITY_TOL,
        0.0,
    ))
}

/// Polynomial `Σ c_k x^{e_k}` with coordinate degrees at most three.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub terms: Vec<([u32; MAX_DIM], f64)>,
}

impl Polynomial {
    /// Random coefficients in `[−1, 1]` for every monomial of coordinate degree `≤ degree`.
    pub fn random(dim: usize, degree: u32, rng: &mut ChaCha8Rng) -> Self {
        let ranges: Vec<(u64, u64)> = (0..dim).map(|_| (0, degree as u64 + 1)).collect();
        let terms = box_indices(&ranges)
            .into_iter()
            .map(|e| ([e[0] as u32, e[1] as u32, e[2] as u32], rng.gen_range(-1.0..1.0)))
            .collect();
        Self { terms }
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: vec![([0; MAX_DIM], c)],
        }
    }

    /// The coordinate function `x_i`.
    pub fn coordinate(i: usize) -> Self {
        let mut e = [0; MAX_DIM];
        e[i] = 1;
        Self { terms: vec![(e, 1.0)] }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * x.iter().zip(e).map(|(xi, k)| xi.powi(*k as i32)).product::<f64>())
            .sum()
    }

    pub fn partial(&self, x: &[f64], i: usize) -> f64 {
        self.terms
            .iter()
            .filter(|(e, _)| e[i] > 0)
            .map(|(e, c)| {
                let mut v = c * e[i] as f64;
                for (j, xj) in x.iter().enumerate() {
                    let k = if j == i { e[j] - 1 } else { e[j] };
                    v *= xj.powi(k as i32);
                }
                v
            })
            .sum()
    }
}

/// Side of a cell lying on the boundary of the parametric domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Side {
    pub direction: usize,
    /// `true` for the side `x_i = 1`.
    pub upper: bool,
}

/// Defects of the weighted trace identity on one configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceDefects {
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs − rhs|`.
    pub identity: f64,
    /// `|avg_S β − (p+1) avg_Q β|`.
    pub averages: f64,
}

/// Evaluates both sides of the weighted trace identity for `β`, the cell `q`,
/// its boundary side `side` and the polynomial `w`.
pub fn trace_identity(
    space: &TensorSpace,
    f: &TensorFunction,
    q: &Cell,
    side: Side,
    w: &Polynomial,
) -> Result<TraceDefects> {
    let d = space.dim();
    let i = side.direction;
    if i >= d {
        return Err(Error::InvalidArgument(format!("direction {i} in dimension {d}")));
    }
    let (lo, hi) = space.cell_bounds(q);
    let face = if side.upper { hi[i] } else { lo[i] };
    if face != if side.upper { 1.0 } else { 0.0 } {
        return Err(Error::InvalidArgument("side is not on the domain boundary".into()));
    }
    let support = space.support_cells(f);
    if (0..d).any(|k| q.index[k] < support[k].0 || q.index[k] >= support[k].1) {
        return Err(Error::InvalidArgument("cell is not inside the support".into()));
    }
    let dir = space.direction(i);
    let last = dir.num_functions() - 1;
    if f.index[i] != if side.upper { last } else { 0 } {
        return Err(Error::InvalidArgument("function vanishes on the side".into()));
    }
    let p = dir.degree();
    // Vertex of Q off the side.
    let a = if side.upper { lo[i] } else { hi[i] };
    let n = p + 4;
    let rules: Vec<(Vec<f64>, Vec<f64>)> = (0..d).map(|k| GaussLegendre::new(n).mapped(lo[k], hi[k])).collect();
    let (mut qb, mut qwb, mut qgb) = (0.0, 0.0, 0.0);
    for (x, wt) in tensor_rule(&rules) {
        let b = space.eval_function(f, &x[..d]).value;
        qb += wt * b;
        qwb += wt * w.value(&x[..d]) * b;
        qgb += wt * (x[i] - a) * w.partial(&x[..d], i) * b;
    }
    let mut face_rules = rules.clone();
    face_rules[i] = (vec![face], vec![1.0]);
    let (mut sb, mut swb) = (0.0, 0.0);
    for (x, wt) in tensor_rule(&face_rules) {
        let b = space.eval_function(f, &x[..d]).value;
        sb += wt * b;
        swb += wt * w.value(&x[..d]) * b;
    }
    if sb <= 0.0 {
        return Err(Error::InvalidArgument("function vanishes on the side".into()));
    }
    let vol = space.cell_volume(q);
    let area = vol / (hi[i] - lo[i]);
    let lhs = swb / sb - qwb / qb;
    let rhs = qgb / qb / (p + 1) as f64;
    Ok(TraceDefects {
        lhs,
        rhs,
        identity: (lhs - rhs).abs(),
        averages: (sb / area - (p + 1) as f64 * qb / vol).abs(),
    })
}

/// Trace identity as a report; the margin is minus the larger defect.
pub fn check_trace_identity(
    space: &TensorSpace,
    f: &TensorFunction,
    q: &Cell,
    side: Side,
    w: &Polynomial,
) -> Result<InequalityReport> {
    let t = trace_identity(space, f, q, side, w)?;
    Ok(InequalityReport::new("trace", 1, -t.identity.max(t.averages), TRACE_TOL))
}

/// Values and gradients of `β` and of the next-level splines overlapping
/// `ω_β` at quadrature points covering `ω_β`.
struct WeightedSample {
    dim: usize,
    diameter: f64,
    fine: Vec<TensorFunction>,
    greville: Vec<[f64; MAX_DIM]>,
    /// `(weight · β, [(local index, value, gradient)])` per point.
    points: Vec<(f64, Vec<(usize, f64, [f64; MAX_DIM])>)>,
}

fn greville_point(space: &TensorSpace, f: &TensorFunction) -> [f64; MAX_DIM] {
    let mut g = [0.0; MAX_DIM];
    for i in 0..space.dim() {
        let dir = space.direction(i);
        let p = dir.degree() as u64;
        g[i] = (1..=p).map(|k| dir.knot(f.index[i] + k)).sum::<f64>() / p as f64;
    }
    g
}

impl WeightedSample {
    fn new(space: &TensorSpace, f: &TensorFunction) -> Self {
        let d = space.dim();
        let fine_space = space.refined();
        let (lo, hi) = space.support_box(f);
        let diameter = (0..d).map(|i| (hi[i] - lo[i]).powi(2)).sum::<f64>().sqrt();
        let mut ranges = [(0u64, 1u64); MAX_DIM];
        let coarse = space.support_cells(f);
        for i in 0..d {
            ranges[i] = (2 * coarse[i].0, 2 * coarse[i].1);
        }
        let p = space.direction(0).degree();
        let orders = vec![2 * p + 1; d];
        let mut local: FxHashMap<TensorFunction, usize> = FxHashMap::default();
        let mut fine = Vec::new();
        let mut points = Vec::new();
        for idx in box_indices(&ranges[..d]) {
            let cell = fine_space.cell(idx);
            let funcs = fine_space.functions_on_cell(&cell);
            for (x, wt) in fine_space.cell_quadrature(&cell, &orders) {
                let b = space.eval_function(f, &x[..d]).value;
                let vals = funcs
                    .iter()
                    .map(|g| {
                        let k = *local.entry(*g).or_insert_with(|| {
                            fine.push(*g);
                            fine.len() - 1
                        });
                        let e = fine_space.eval_function(g, &x[..d]);
                        (k, e.value, e.grad)
                    })
                    .collect();
                points.push((wt * b, vals));
            }
        }
        let greville = fine.iter().map(|g| greville_point(&fine_space, g)).collect();
        Self {
            dim: d,
            diameter,
            fine,
            greville,
            points,
        }
    }

    /// `(∫ v β, ∫ v² β, ∫ |∇v|² β, ∫ β)` for `v = Σ c_k B_k`.
    fn moments(&self, c: &[f64]) -> (f64, f64, f64, f64) {
        let (mut m0, mut m1, mut m2, mut g2) = (0.0, 0.0, 0.0, 0.0);
        for (wb, vals) in &self.points {
            let mut v = 0.0;
            let mut g = [0.0; MAX_DIM];
            for (k, val, grad) in vals {
                v += c[*k] * val;
                for i in 0..self.dim {
                    g[i] += c[*k] * grad[i];
                }
            }
            m0 += wb;
            m1 += wb * v;
            m2 += wb * v * v;
            g2 += wb * g[..self.dim].iter().map(|t| t * t).sum::<f64>();
        }
        (m1, m2, g2, m0)
    }

    /// Trial coefficients: odd trials are fully random, even trials sample a
    /// random quadratic at the Greville points (smooth trials).
    fn trial(&self, rng: &mut ChaCha8Rng, t: usize, lo: &[f64; MAX_DIM], hi: &[f64; MAX_DIM]) -> Vec<f64> {
        if t % 2 == 1 {
            return (0..self.fine.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        }
        let q = Polynomial::random(self.dim, 2, rng);
        self.greville
            .iter()
            .map(|g| {
                let mut s = [0.0; MAX_DIM];
                for i in 0..self.dim {
                    s[i] = (g[i] - lo[i]) / (hi[i] - lo[i]);
                }
                q.value(&s[..self.dim])
            })
            .collect()
    }
}

/// Weighted Poincaré bound with constant `diam(ω_β)/π` over random trial
/// splines one level finer.
#[derive(Debug, Clone, PartialEq)]
pub struct PoincareReport {
    pub report: InequalityReport,
    /// Largest `‖v − c_β‖ / (diam ‖∇v‖)` observed.
    pub max_ratio: f64,
}

pub fn check_poincare(space: &TensorSpace, f: &TensorFunction, trials: usize, seed: u64) -> Result<PoincareReport> {
    let sample = WeightedSample::new(space, f);
    let (lo, hi) = space.support_box(f);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    let mut max_ratio: f64 = 0.0;
    for t in 0..trials {
        let c = sample.trial(&mut rng, t, &lo, &hi);
        let (m1, m2, g2, m0) = sample.moments(&c);
        let cb = m1 / m0;
        let lhs = (m2 - 2.0 * cb * m1 + cb * cb * m0).max(0.0).sqrt();
        let grad = g2.sqrt();
        worst = worst.min(sample.diameter / PI * grad - lhs);
        if grad > 0.0 {
            max_ratio = max_ratio.max(lhs / (sample.diameter * grad));
        }
    }
    Ok(PoincareReport {
        report: InequalityReport::new("poincare", trials, worst, POINCARE_TOL),
        max_ratio,
    })
}

/// Faces `x_i = 0` or `x_i = 1` on which `β` does not vanish.
pub fn boundary_faces(space: &TensorSpace, f: &TensorFunction) -> Vec<Side> {
    let mut out = Vec::new();
    for i in 0..space.dim() {
        let n = space.direction(i).num_functions();
        if f.index[i] == 0 {
            out.push(Side { direction: i, upper: false });
        }
        if f.index[i] == n - 1 {
            out.push(Side { direction: i, upper: true });
        }
    }
    out
}

/// Empirical weighted Friedrichs constant `sup ‖v‖ / (diam ‖∇v‖)` over trial
/// splines one level finer vanishing where `ω_β` meets the boundary.
pub fn friedrichs_constant(space: &TensorSpace, f: &TensorFunction, trials: usize, seed: u64) -> Result<f64> {
    let faces = boundary_faces(space, f);
    if faces.is_empty() {
        return Err(Error::InvalidArgument("function has zero boundary trace".into()));
    }
    let sample = WeightedSample::new(space, f);
    let fine_space = space.refined();
    let (lo, hi) = space.support_box(f);
    let vanish: Vec<bool> = sample
        .fine
        .iter()
        .map(|g| {
            faces.iter().any(|s| {
                let n = fine_space.direction(s.direction).num_functions();
                g.index[s.direction] == if s.upper { n - 1 } else { 0 }
            })
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let mut c = sample.trial(&mut rng, t, &lo, &hi);
        for (k, v) in vanish.iter().enumerate() {
            if *v {
                c[k] = 0.0;
            }
        }
        let (_, m2, g2, _) = sample.moments(&c);
        if g2 > 0.0 {
            worst = worst.max(m2.sqrt() / (sample.diameter * g2.sqrt()));
        }
    }
    Ok(worst)
}

/// Friedrichs constants for one configuration per degree; the margin is the
/// smaller of `10 − C_max` and `3 − C_max / C_min`.
pub fn check_friedrichs(configs: &[(TensorSpace, TensorFunction)], trials: usize, seed: u64) -> Result<(InequalityReport, Vec<f64>)> {
    let consts = configs
        .iter()
        .enumerate()
        .map(|(k, (s, f))| friedrichs_constant(s, f, trials, seed + k as u64))
        .collect::<Result<Vec<f64>>>()?;
    let max = consts.iter().cloned().fold(0.0, f64::max);
    let min = consts.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = if min > 0.0 { max / min } else { f64::INFINITY };
    let margin = (FRIEDRICHS_BOUND - max).min(FRIEDRICHS_SPREAD - spread);
    Ok((
        InequalityReport::new("friedrichs", trials * configs.len(), margin, 0.0),
        consts,
    ))
}

/// `Π (a_i^d + b_i^d)^{1/d} − Π a_i − Π b_i` for tuples of length `d`.
pub fn generalized_cs_margin(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::InvalidArgument("tuples of equal positive length required".into()));
    }
    if a.iter().chain(b).any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidArgument("entries must be non-negative".into()));
    }
    let d = a.len() as f64;
    let lhs: f64 = a.iter().zip(b).map(|(x, y)| (x.powf(d) + y.powf(d)).powf(1.0 / d)).product();
    Ok(lhs - a.iter().product::<f64>() - b.iter().product::<f64>())
}

pub fn check_generalized_cs(d: usize, samples: usize, seed: u64) -> Result<InequalityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let a: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
        worst = worst.min(generalized_cs_margin(&a, &b)?);
    }
    Ok(InequalityReport::new("cauchy-schwarz", samples, worst, CS_TOL))
}

/// Space with random interior breakpoints of multiplicity one.
pub fn random_space(dim: usize, degree: usize, elements: usize, rng: &mut ChaCha8Rng) -> Result<TensorSpace> {
    let knots = (0..dim)
        .map(|_| {
            let mut b: Vec<f64> = (1..elements)
                .map(|k| (k as f64 + rng.gen_range(-0.35..0.35)) / elements as f64)
                .collect();
            b.insert(0, 0.0);
            b.push(1.0);
            KnotVector::from_breakpoints(degree, &b, &vec![1; elements - 1])
        })
        .collect::<Result<Vec<_>>>()?;
    TensorSpace::new(knots)
}

/// Names accepted by [`run_check`].
pub const CHECKS: [&str; 6] = [
    "concavity",
    "concavity-control",
    "trace",
    "poincare",
    "friedrichs",
    "cauchy-schwarz",
];

fn interior_function(space: &TensorSpace, rng: &mut ChaCha8Rng) -> TensorFunction {
    let n = space.functions_per_direction();
    let mut idx = [0u64; MAX_DIM];
    for i in 0..space.dim() {
        idx[i] = rng.gen_range(1..n[i] - 1);
    }
    space.function(idx)
}

fn run_trace(seed: u64) -> Result<InequalityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report: Option<InequalityReport> = None;
    for k in 0..50 {
        let p = 2 + k % 3;
        let d = if k % 10 == 9 { 3 } else { 2 };
        let space = random_space(d, p, p + 3, &mut rng)?;
        let side = Side {
            direction: rng.gen_range(0..d),
            upper: rng.gen_bool(0.5),
        };
        let n = space.functions_per_direction();
        let m = space.cells_per_direction();
        let mut idx = [0u64; MAX_DIM];
        let mut cidx = [0u64; MAX_DIM];
        for i in 0..d {
            idx[i] = if i == side.direction {
                if side.upper { n[i] - 1 } else { 0 }
            } else {
                rng.gen_range(0..n[i])
            };
        }
        let f = space.function(idx);
        let sup = space.support_cells(&f);
        for i in 0..d {
            cidx[i] = if i == side.direction {
                if side.upper { m[i] - 1 } else { 0 }
            } else {
                rng.gen_range(sup[i].0..sup[i].1)
            };
        }
        let w = if k == 0 {
            Polynomial::constant(1.0)
        } else if k < 4 {
            Polynomial::coordinate(side.direction)
        } else {
            Polynomial::random(d, 3, &mut rng)
        };
        let r = check_trace_identity(&space, &f, &space.cell(cidx), side, &w)?;
        report = Some(match report {
            Some(acc) => acc.merge(r),
            None => r,
        });
    }
    Ok(report.expect("fifty configurations"))
}

/// Runs one named check with its default configurations.
pub fn run_check(name: &str, seed: u64) -> Result<InequalityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match name {
        "concavity" => {
            let mut acc: Option<InequalityReport> = None;
            for (d, p, samples) in [(2, 2, 100_000), (2, 3, 20_000), (2, 4, 20_000), (3, 2, 20_000)] {
                let space = random_space(d, p, p + 3, &mut rng)?;
                let f = interior_function(&space, &mut rng);
                let r = check_concavity(&space, &f, samples, rng.gen())?;
                acc = Some(match acc {
                    Some(a) => a.merge(r),
                    None => r,
                });
            }
            Ok(acc.expect("configurations"))
        }
        "concavity-control" => {
            let space = TensorSpace::uniform(2, 2, &[6, 6])?;
            concavity_control(&space, &space.function([2, 2, 0]), 100_000, seed)
        }
        "trace" => run_trace(seed),
        "poincare" => {
            let mut acc: Option<InequalityReport> = None;
            for p in 2..=4 {
                let space = random_space(2, p, p + 3, &mut rng)?;
                let f = interior_function(&space, &mut rng);
                let r = check_poincare(&space, &f, 200, rng.gen())?.report;
                acc = Some(match acc {
                    Some(a) => a.merge(r),
                    None => r,
                });
            }
            Ok(acc.expect("configurations"))
        }
        "friedrichs" => {
            let configs = (2..=4)
                .map(|p| {
                    let space = TensorSpace::uniform(2, p, &[p + 3, p + 3])?;
                    let f = space.function([0, 2, 0]);
                    Ok((space, f))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(check_friedrichs(&configs, 200, seed)?.0)
        }
        "cauchy-schwarz" => Ok(check_generalized_cs(2, 100_000, seed)?.merge(check_generalized_cs(3, 100_000, seed + 1)?)),
        _ => Err(Error::InvalidArgument(format!("unknown check `{name}`"))),
    }
}

pub fn run_all(seed: u64) -> Result<Vec<InequalityReport>> {
    CHECKS.iter().map(|c| run_check(c, seed)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cauchy_schwarz_equality_and_degenerate_cases() {
        assert!(generalized_cs_margin(&[1.0, 1.0], &[1.0, 1.0]).unwrap().abs() < 1e-15);
        assert!(generalized_cs_margin(&[0.0, 0.0], &[0.3, 0.7]).unwrap().abs() < 1e-15);
        assert!(generalized_cs_margin(&[-1.0, 0.0], &[0.3, 0.7]).is_err());
    }

    #[test]
    fn polynomial_partials() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = Polynomial::random(2, 3, &mut rng);
        let x = [0.3, 0.6];
        let h = 1e-6;
        for i in 0..2 {
            let mut a = x;
            let mut b = x;
            a[i] += h;
            b[i] -= h;
            let fd = (q.value(&a) - q.value(&b)) / (2.0 * h);
            assert!((fd - q.partial(&x, i)).abs() < 1e-8);
        }
    }

    #[test]
    fn constant_weight_gives_zero_trace_defect() {
        let space = TensorSpace::uniform(2, 2, &[4, 4]).unwrap();
        let f = space.function([0, 1, 0]);
        let t = trace_identity(&space, &f, &space.cell([0, 1, 0]), Side { direction: 0, upper: false }, &Polynomial::constant(1.0)).unwrap();
        assert!(t.lhs.abs() < 1e-15 && t.rhs.abs() < 1e-15);
    }

    #[test]
    fn trace_rejects_bad_configurations() {
        let space = TensorSpace::uniform(2, 2, &[4, 4]).unwrap();
        let w = Polynomial::constant(1.0);
        let left = Side { direction: 0, upper: false };
        // interior side
        assert!(trace_identity(&space, &space.function([0, 1, 0]), &space.cell([1, 1, 0]), left, &w).is_err());
        // function vanishing on the side
        assert!(trace_identity(&space, &space.function([1, 1, 0]), &space.cell([0, 1, 0]), left, &w).is_err());
    }

    #[test]
    fn constant_trial_has_zero_poincare_lhs() {
        let space = TensorSpace::uniform(2, 2, &[5, 5]).unwrap();
        let f = space.function([2, 2, 0]);
        let s = WeightedSample::new(&space, &f);
        let (m1, m2, g2, m0) = s.moments(&vec![1.0; s.fine.len()]);
        let cb = m1 / m0;
        assert!((m2 - 2.0 * cb * m1 + cb * cb * m0).abs() < 1e-14);
        assert!(g2 < 1e-24);
    }

    #[test]
    fn friedrichs_rejects_interior_function() {
        let space = TensorSpace::uniform(2, 2, &[5, 5]).unwrap();
        assert!(friedrichs_constant(&space, &space.function([2, 2, 0]), 4, 0).is_err());
    }
}
