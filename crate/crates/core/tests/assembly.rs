use std::f64::consts::PI;
use std::sync::Arc;

use hbspline::assembly::{
    assemble, dirichlet_values, energy_error, galerkin_defects, physical_volume, seminorm_and_norm_squared, solve,
    Discretization, EllipticProblem, Point, ScalarFn,
};
use hbspline::geometry::{GeometryMap, MapKind};
use hbspline::hierarchy::{HierarchicalBasis, SubdomainHierarchy};
use hbspline::registry::{find, initial_space};
use hbspline::sparse::{self, norm, CsrMatrix, SolverOptions};
use hbspline::tensor::{TensorFunction, TensorSpace};
use hbspline::Error;

fn refined_disc(kind: MapKind, p: usize, k: usize, steps: usize) -> Discretization {
    let mut h = SubdomainHierarchy::new(initial_space(kind, p, k).unwrap());
    let mut b = HierarchicalBasis::build(h.clone());
    for s in 0..steps {
        // a few functions near one corner plus one in the middle
        let marked: Vec<TensorFunction> = b
            .functions()
            .iter()
            .filter(|f| f.level as usize == s)
            .enumerate()
            .filter(|(i, _)| i % 7 == 0 || *i < 3)
            .map(|(_, f)| *f)
            .collect();
        h = h.enlarge(&b, &marked).unwrap();
        b = b.refine(h.clone()).unwrap();
    }
    Discretization::new(b, GeometryMap::new(kind)).unwrap()
}

fn bubble_problem() -> EllipticProblem {
    EllipticProblem::poisson(
        2,
        |x: &Point| 2.0 * (x[0] * (1.0 - x[0]) + x[1] * (1.0 - x[1])),
        |_: &Point| 0.0,
    )
    .with_exact(
        |x: &Point| x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]),
        |x: &Point| {
            [
                (1.0 - 2.0 * x[0]) * x[1] * (1.0 - x[1]),
                x[0] * (1.0 - x[0]) * (1.0 - 2.0 * x[1]),
                0.0,
            ]
        },
    )
}

/// Quadratic B-spline on knots (0,0,0,1/2,1,1,1) by Cox–de Boor, value and slope.
fn oracle_b1(x: f64) -> (f64, f64) {
    let t = [0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0];
    let frac = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
    let b0 = |j: usize, x: f64| if t[j] <= x && x < t[j + 1] { 1.0 } else { 0.0 };
    let b1 = |j: usize, x: f64| frac(x - t[j], t[j + 1] - t[j]) * b0(j, x) + frac(t[j + 2] - x, t[j + 2] - t[j + 1]) * b0(j + 1, x);
    let v = frac(x - t[1], t[3] - t[1]) * b1(1, x) + frac(t[4] - x, t[4] - t[2]) * b1(2, x);
    let d = 2.0 * (frac(b1(1, x), t[3] - t[1]) - frac(b1(2, x), t[4] - t[2]));
    (v, d)
}

/// Composite Simpson on each knot span, `n` panels per span.
fn simpson(f: impl Fn(f64) -> f64, n: usize) -> f64 {
    let mut s = 0.0;
    for (a, b) in [(0.0, 0.5), (0.5, 1.0)] {
        let h = (b - a) / n as f64;
        for k in 0..n {
            let x0 = a + k as f64 * h;
            s += h / 6.0 * (f(x0) + 4.0 * f(x0 + h / 2.0) + f(x0 + h));
        }
    }
    s
}

#[test]
fn diagonal_entry_matches_dense_quadrature() {
    let space = TensorSpace::uniform(2, 2, &[2, 2]).unwrap();
    let disc = Discretization::new(HierarchicalBasis::build(SubdomainHierarchy::new(space)), GeometryMap::new(MapKind::Square)).unwrap();
    let sys = assemble(&disc, &bubble_problem()).unwrap();
    let i = disc.basis.index_of(&disc.basis.space(0).function([1, 1, 0])).unwrap();
    let mass = simpson(|x| oracle_b1(x).0.powi(2), 2000);
    let stiff = simpson(|x| oracle_b1(x).1.powi(2), 2000);
    let oracle = 2.0 * mass * stiff;
    assert!((sys.full.get(i, i) - oracle).abs() < 1e-10, "{} vs {}", sys.full.get(i, i), oracle);
}

#[test]
fn row_sums_vanish_and_matrix_is_symmetric() {
    for kind in [MapKind::Square, MapKind::Ring, MapKind::LShape] {
        let disc = refined_disc(kind, 2, 4, 2);
        let problem = EllipticProblem::poisson(2, |_: &Point| 1.0, |_: &Point| 0.0);
        let sys = assemble(&disc, &problem).unwrap();
        // the constant function is Σ a_β β
        let sums = sys.full.mul(disc.basis.weights());
        let worst = sums.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst < 1e-11, "{kind}: row sum {worst}");
        assert!(sys.full.asymmetry() < 1e-12 * sys.full.max_abs().max(1.0), "{kind}");
        assert!(sys.matrix.asymmetry() < 1e-12 * sys.matrix.max_abs().max(1.0));
    }
}

#[test]
fn patch_test_on_hierarchical_mesh() {
    let disc = refined_disc(MapKind::Square, 2, 4, 3);
    assert!(disc.basis.num_levels() >= 3);
    let problem = bubble_problem();
    let sys = assemble(&disc, &problem).unwrap();
    let (u, stats) = solve(&sys, &SolverOptions::default()).unwrap();
    let err = energy_error(&disc, &u, problem.exact_grad.as_ref().unwrap()).unwrap();
    assert!(err < 1e-9, "energy error {err}");
    let r = sys.matrix.mul(&sys.free.iter().map(|&i| u[i]).collect::<Vec<_>>());
    let res: Vec<f64> = r.iter().zip(&sys.rhs).map(|(a, b)| a - b).collect();
    assert!(norm(&res) <= 1e-12 * norm(&sys.rhs) * 10.0, "{stats:?}");
}

#[test]
fn galerkin_orthogonality_and_coercivity_on_ring() {
    let disc = refined_disc(MapKind::Ring, 3, 4, 2);
    let spec = find("ring").unwrap();
    let sys = assemble(&disc, &spec.problem).unwrap();
    let (u, _) = solve(&sys, &SolverOptions::default()).unwrap();
    let defects = galerkin_defects(&sys, &u);
    let worst = defects.iter().fold(0.0f64, |m, v| m.max(*v));
    assert!(worst <= 1e-9 * norm(&sys.rhs), "{worst}");
    let au = sys.full.mul(&u);
    let energy: f64 = u.iter().zip(&au).map(|(a, b)| a * b).sum();
    let (grad2, _) = seminorm_and_norm_squared(&disc, &u).unwrap();
    assert!(energy >= grad2 - 1e-9 * grad2.max(1.0), "{energy} < {grad2}");
}

#[test]
fn dirichlet_projection_reproduces_space_members() {
    let disc = refined_disc(MapKind::Square, 3, 4, 2);
    let boundary: Vec<usize> = (0..disc.num_dofs())
        .filter(|&i| disc.basis.is_boundary(&disc.basis.functions()[i]))
        .collect();
    let zero: ScalarFn = Arc::new(|_: &Point| 0.0);
    assert!(dirichlet_values(&disc, &zero, &boundary).unwrap().iter().all(|v| *v == 0.0));
    let coeffs: Vec<f64> = (0..disc.num_dofs()).map(|i| ((i * 37 % 11) as f64 - 5.0) / 7.0).collect();
    let basis = Arc::new(disc.basis.clone());
    let c = coeffs.clone();
    let g: ScalarFn = Arc::new(move |x: &Point| basis.eval_combination(&c, &x[..2]).unwrap().value);
    let vals = dirichlet_values(&disc, &g, &boundary).unwrap();
    for (k, &i) in boundary.iter().enumerate() {
        assert!((vals[k] - coeffs[i]).abs() < 1e-10, "function {i}: {} vs {}", vals[k], coeffs[i]);
    }
}

#[test]
fn singular_example_has_zero_boundary_data() {
    let spec = find("singular-square").unwrap();
    let disc = refined_disc(MapKind::Square, 3, 4, 1);
    let sys = assemble(&disc, &spec.problem).unwrap();
    assert!(sys.boundary_values.iter().all(|v| v.abs() < 1e-15));
}

#[test]
fn physical_volume_of_every_map() {
    for (kind, dim) in [(MapKind::Square, 2), (MapKind::Ring, 2), (MapKind::LShape, 2), (MapKind::Cube, 3)] {
        let disc = refined_disc(kind, 2, if dim == 3 { 2 } else { 4 }, 1);
        let v = physical_volume(&disc).unwrap();
        assert!((v - disc.map.volume()).abs() < 1e-12, "{kind}: {v}");
    }
    assert!((GeometryMap::new(MapKind::Ring).volume() - 0.75 * PI).abs() < 1e-14);
    assert_eq!(GeometryMap::new(MapKind::LShape).volume(), 3.0);
}

fn uniform_disc(kind: MapKind, p: usize, n: usize) -> Discretization {
    let space = initial_space(kind, p, n).unwrap();
    Discretization::new(HierarchicalBasis::build(SubdomainHierarchy::new(space)), GeometryMap::new(kind)).unwrap()
}

fn uniform_errors(problem: &EllipticProblem, kind: MapKind, p: usize, sizes: &[usize]) -> Vec<(usize, f64)> {
    sizes
        .iter()
        .map(|&n| {
            let disc = uniform_disc(kind, p, n);
            let sys = assemble(&disc, problem).unwrap();
            let (u, _) = solve(&sys, &SolverOptions::default()).unwrap();
            (disc.num_dofs(), energy_error(&disc, &u, problem.exact_grad.as_ref().unwrap()).unwrap())
        })
        .collect()
}

#[test]
fn uniform_convergence_order_for_smooth_solution() {
    let problem = EllipticProblem::poisson(
        2,
        |x: &Point| 2.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin(),
        |_: &Point| 0.0,
    )
    .with_exact(
        |x: &Point| (PI * x[0]).sin() * (PI * x[1]).sin(),
        |x: &Point| {
            [
                PI * (PI * x[0]).cos() * (PI * x[1]).sin(),
                PI * (PI * x[0]).sin() * (PI * x[1]).cos(),
                0.0,
            ]
        },
    );
    for p in [2, 3] {
        let errs = uniform_errors(&problem, MapKind::Square, p, &[32, 64, 128]);
        let pts: Vec<(f64, f64)> = errs.iter().map(|(n, e)| ((*n as f64).ln(), e.ln())).collect();
        let rate = hbspline::bench::slope(&pts);
        let expected = -(p as f64) / 2.0;
        assert!((rate - expected).abs() <= 0.1 * expected.abs(), "p={p}: rate {rate}");
        // halving h divides the error by about 2^p
        let ratio = errs[1].1 / errs[2].1;
        assert!((ratio / 2f64.powi(p as i32) - 1.0).abs() < 0.15, "p={p}: ratio {ratio}");
    }
}

#[test]
fn advection_reaction_manufactured_solution() {
    let spec = find("advection-check").unwrap();
    assert!(!spec.problem.is_symmetric());
    let errs = uniform_errors(&spec.problem, MapKind::Square, 2, &[8, 16, 32]);
    let r1 = errs[0].1 / errs[1].1;
    let r2 = errs[1].1 / errs[2].1;
    assert!(r1 > 3.5 && r2 > 3.7, "{errs:?}");
    assert!(errs[2].1 < 5e-3);
    let disc = uniform_disc(MapKind::Square, 2, 8);
    let sys = assemble(&disc, &spec.problem).unwrap();
    assert!(sys.full.asymmetry() > 1e-3);
    let (u, _) = solve(&sys, &SolverOptions::default()).unwrap();
    let worst = galerkin_defects(&sys, &u).into_iter().fold(0.0f64, f64::max);
    assert!(worst <= 1e-9 * norm(&sys.rhs));
}

#[test]
fn ellipticity_violations_abort_assembly() {
    let disc = uniform_disc(MapKind::Square, 2, 4);
    let wrong_bounds = EllipticProblem::poisson(2, |_: &Point| 1.0, |_: &Point| 0.0).with_diffusion(
        |_: &Point| [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        |_: &Point| [0.0; 3],
        (2.0, 3.0),
    );
    assert!(matches!(assemble(&disc, &wrong_bounds), Err(Error::Ellipticity(_))));
    let bad_reaction = EllipticProblem::poisson(2, |_: &Point| 1.0, |_: &Point| 0.0).with_reaction(|_: &Point| -1.0);
    assert!(matches!(assemble(&disc, &bad_reaction), Err(Error::Ellipticity(_))));
    let bad_advection = EllipticProblem::poisson(2, |_: &Point| 1.0, |_: &Point| 0.0)
        .with_advection(|x: &Point| [x[0], 0.0, 0.0], |_: &Point| 1.0);
    assert!(matches!(assemble(&disc, &bad_advection), Err(Error::Ellipticity(_))));
}

#[test]
fn one_by_one_system_and_export() {
    let a = CsrMatrix::from_triplets(1, 1, &[(0, 0, 4.0)]);
    let (x, _) = sparse::solve(&a, &[2.0], true, &SolverOptions::default()).unwrap();
    assert_eq!(x, vec![0.5]);
    let disc = uniform_disc(MapKind::Square, 2, 2);
    let sys = assemble(&disc, &bubble_problem()).unwrap();
    let mut out = Vec::new();
    sys.write_matrix(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().count(), sys.matrix.nnz());
    for line in text.lines() {
        let f: Vec<&str> = line.split_whitespace().collect();
        let (i, j, v): (usize, usize, f64) = (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap());
        assert_eq!(v, sys.matrix.get(i, j));
    }
}

#[test]
fn assembly_is_deterministic() {
    let disc = refined_disc(MapKind::LShape, 2, 4, 2);
    let spec = find("lshape").unwrap();
    let a = assemble(&disc, &spec.problem).unwrap();
    let b = assemble(&disc, &spec.problem).unwrap();
    assert_eq!(a.full, b.full);
    assert_eq!(a.rhs, b.rhs);
}
