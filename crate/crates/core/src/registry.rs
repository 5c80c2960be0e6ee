//! Model problems with known solutions.

use std::f64::consts::PI;

use crate::assembly::{EllipticProblem, Point};
use crate::error::{Error, Result};
use crate::geometry::{GeometryMap, MapKind, LSHAPE_BREAK};
use crate::splines::{KnotVector, MAX_DEGREE};
use crate::tensor::TensorSpace;

/// A registered model problem.
#[derive(Debug, Clone)]
pub struct ExampleSpec {
    pub name: &'static str,
    pub map: MapKind,
    pub problem: EllipticProblem,
    /// Level-0 elements per unit length of the parametric square.
    pub init_elems: usize,
    pub default_max_dofs: usize,
}

impl ExampleSpec {
    pub fn dim(&self) -> usize {
        self.problem.dim
    }

    pub fn geometry(&self) -> GeometryMap {
        GeometryMap::new(self.map)
    }
}

/// The six model problems, all for the Laplacian.
pub fn registry() -> Vec<ExampleSpec> {
    vec![
        gaussian_square(),
        diagonal_layer(),
        lshape(),
        singular_square(),
        ring(),
        gaussian_cube(),
    ]
}

/// Registered problems plus the advection-reaction check.
pub fn all_examples() -> Vec<ExampleSpec> {
    let mut v = registry();
    v.push(advection_check());
    v
}

pub fn find(name: &str) -> Result<ExampleSpec> {
    all_examples()
        .into_iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::UnknownExample(name.to_string()))
}

fn gaussian(x: &Point, dim: usize) -> f64 {
    let r2: f64 = (0..dim).map(|i| (x[i] - 0.5).powi(2)).sum();
    (-100.0 * r2).exp()
}

fn gaussian_problem(dim: usize) -> EllipticProblem {
    EllipticProblem::poisson(
        dim,
        move |x| {
            let r2: f64 = (0..dim).map(|i| (x[i] - 0.5).powi(2)).sum();
            (200.0 * dim as f64 - 40000.0 * r2) * gaussian(x, dim)
        },
        move |x| gaussian(x, dim),
    )
    .with_exact(
        move |x| gaussian(x, dim),
        move |x| {
            let u = gaussian(x, dim);
            let mut g = [0.0; 3];
            for i in 0..dim {
                g[i] = -200.0 * (x[i] - 0.5) * u;
            }
            g
        },
    )
}

fn gaussian_square() -> ExampleSpec {
    ExampleSpec {
        name: "gaussian-square",
        map: MapKind::Square,
        problem: gaussian_problem(2),
        init_elems: 2,
        default_max_dofs: 20_000,
    }
}

fn gaussian_cube() -> ExampleSpec {
    ExampleSpec {
        name: "gaussian-cube",
        map: MapKind::Cube,
        problem: gaussian_problem(3),
        init_elems: 4,
        default_max_dofs: 100_000,
    }
}

fn ring() -> ExampleSpec {
    ExampleSpec {
        name: "ring",
        map: MapKind::Ring,
        problem: gaussian_problem(2),
        init_elems: 4,
        default_max_dofs: 20_000,
    }
}

fn diagonal_layer() -> ExampleSpec {
    let problem = EllipticProblem::poisson(
        2,
        |x| {
            let s = 25.0 * (x[0] - x[1]);
            2500.0 * s / (1.0 + s * s).powi(2)
        },
        |x| (25.0 * (x[0] - x[1])).atan(),
    )
    .with_exact(
        |x| (25.0 * (x[0] - x[1])).atan(),
        |x| {
            let s = 25.0 * (x[0] - x[1]);
            let d = 25.0 / (1.0 + s * s);
            [d, -d, 0.0]
        },
    );
    ExampleSpec {
        name: "diagonal-layer",
        map: MapKind::Square,
        problem,
        init_elems: 8,
        default_max_dofs: 20_000,
    }
}

/// Polar angle in `[0, 2π)`, so that the L-shaped domain sees `φ ∈ [0, 3π/2]`.
fn angle(x: &Point) -> f64 {
    let phi = x[1].atan2(x[0]);
    if phi < 0.0 {
        phi + 2.0 * PI
    } else {
        phi
    }
}

fn corner_solution(x: &Point) -> f64 {
    let rho = x[0].hypot(x[1]);
    rho.powf(2.0 / 3.0) * (2.0 * angle(x) / 3.0).sin()
}

fn lshape() -> ExampleSpec {
    let problem = EllipticProblem::poisson(2, |_| 0.0, corner_solution).with_exact(corner_solution, |x| {
        let rho = x[0].hypot(x[1]);
        if rho == 0.0 {
            return [0.0; 3];
        }
        let phi = angle(x);
        let c = 2.0 / 3.0 * rho.powf(-1.0 / 3.0);
        [-c * (phi / 3.0).sin(), c * (phi / 3.0).cos(), 0.0]
    });
    ExampleSpec {
        name: "lshape",
        map: MapKind::LShape,
        problem,
        init_elems: 4,
        default_max_dofs: 20_000,
    }
}

fn singular_square() -> ExampleSpec {
    let f1 = |t: f64, a: f64| (t.powf(a) - t.powf(a + 1.0), a * t.powf(a - 1.0) - (a + 1.0) * t.powf(a));
    let f2 = |t: f64, a: f64| a * (a - 1.0) * t.powf(a - 2.0) - (a + 1.0) * a * t.powf(a - 1.0);
    let problem = EllipticProblem::poisson(
        2,
        move |x| {
            let (xv, _) = f1(x[0], 2.3);
            let (yv, _) = f1(x[1], 2.9);
            -(f2(x[0], 2.3) * yv + xv * f2(x[1], 2.9))
        },
        |_| 0.0,
    )
    .with_exact(
        move |x| f1(x[0], 2.3).0 * f1(x[1], 2.9).0,
        move |x| {
            let (xv, xd) = f1(x[0], 2.3);
            let (yv, yd) = f1(x[1], 2.9);
            [xd * yv, xv * yd, 0.0]
        },
    );
    ExampleSpec {
        name: "singular-square",
        map: MapKind::Square,
        problem,
        init_elems: 4,
        default_max_dofs: 20_000,
    }
}

/// `−Δu + (1,1)·∇u + u = f` with a smooth non-polynomial solution.
fn advection_check() -> ExampleSpec {
    let u = |x: &Point| (PI * x[0]).sin() * (PI * x[1]).sin() + x[0] * x[1];
    let grad = |x: &Point| {
        let (sx, cx) = (PI * x[0]).sin_cos();
        let (sy, cy) = (PI * x[1]).sin_cos();
        [PI * cx * sy + x[1], PI * sx * cy + x[0], 0.0]
    };
    let problem = EllipticProblem::poisson(
        2,
        move |x| {
            let g = grad(x);
            let s = (PI * x[0]).sin() * (PI * x[1]).sin();
            2.0 * PI * PI * s + g[0] + g[1] + u(x)
        },
        u,
    )
    .with_exact(u, grad)
    .with_advection(|_| [1.0, 1.0, 0.0], |_| 0.0)
    .with_reaction(|_| 1.0);
    ExampleSpec {
        name: "advection-check",
        map: MapKind::Square,
        problem,
        init_elems: 4,
        default_max_dofs: 20_000,
    }
}

/// Level-0 space of degree `p` for a geometry, with `k` elements per unit length.
///
/// The bent L-shape strip gets `2k × k` elements and a knot of multiplicity
/// `p` on its piece boundary.
pub fn initial_space(map: MapKind, degree: usize, k: usize) -> Result<TensorSpace> {
    if degree < 2 || degree > MAX_DEGREE {
        return Err(Error::InvalidArgument(format!(
            "degree must lie in 2..={MAX_DEGREE} (C¹ splines are required), got {degree}"
        )));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("at least one initial element is required".into()));
    }
    match map {
        MapKind::Square | MapKind::Ring => TensorSpace::uniform(2, degree, &[k, k]),
        MapKind::Cube => TensorSpace::uniform(3, degree, &[k, k, k]),
        MapKind::LShape => {
            let breaks: Vec<f64> = (0..=2 * k).map(|i| i as f64 / (2 * k) as f64).collect();
            let mults: Vec<usize> = (1..2 * k)
                .map(|i| if breaks[i] == LSHAPE_BREAK { degree } else { 1 })
                .collect();
            TensorSpace::new(vec![
                KnotVector::from_breakpoints(degree, &breaks, &mults)?,
                KnotVector::uniform(degree, k)?,
            ])
        }
    }
}

/// Largest `|L u − f|` over random points, relative to the size of the terms,
/// with the second derivatives of `u` taken by fourth-order central differences.
pub fn consistency_defect(spec: &ExampleSpec, samples: usize, seed: u64) -> Result<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let p = &spec.problem;
    let u = p.exact.as_ref().ok_or_else(|| Error::InsufficientData("no exact solution".into()))?;
    let grad = p.exact_grad.as_ref().unwrap();
    let map = spec.geometry();
    let d = spec.dim();
    let h = 1e-3;
    let mut worst: f64 = 0.0;
    let mut taken = 0;
    while taken < samples {
        let mut xi = [0.0; 3];
        for v in xi.iter_mut().take(d) {
            *v = rng.gen_range(0.05..0.95);
        }
        if (xi[0] - LSHAPE_BREAK).abs() < 1e-6 {
            continue;
        }
        let x = map.eval(&xi)?.point;
        if map.kind() == MapKind::LShape && x[0].hypot(x[1]) < 0.05 {
            continue;
        }
        taken += 1;
        let mut lap = 0.0;
        let mut scale = 0.0;
        let mut fd_grad = [0.0; 3];
        for i in 0..d {
            let at = |s: f64| {
                let mut y = x;
                y[i] += s;
                u(&y)
            };
            let second = (-at(2.0 * h) + 16.0 * at(h) - 30.0 * at(0.0) + 16.0 * at(-h) - at(-2.0 * h)) / (12.0 * h * h);
            fd_grad[i] = (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h);
            lap += second;
            scale += second.abs();
        }
        let g = grad(&x);
        let a = p.diffusion_at(&x);
        let b = p.advection_at(&x);
        let c = p.reaction_at(&x);
        let f = (p.source)(&x);
        let adv: f64 = (0..d).map(|i| b[i] * g[i]).sum();
        // Only A = I is exercised by the registry.
        let diff: f64 = (0..d).map(|i| a[i][i]).sum::<f64>() / d as f64;
        let lhs = -diff * lap + adv + c * u(&x);
        let gscale: f64 = g.iter().map(|v| v.abs()).sum::<f64>();
        let gdefect: f64 = (0..d).map(|i| (fd_grad[i] - g[i]).abs()).fold(0.0, f64::max);
        worst = worst
            .max((lhs - f).abs() / scale.max(f.abs()).max(1.0))
            .max(gdefect / gscale.max(1.0));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_and_defaults() {
        let names: Vec<&str> = registry().iter().map(|e| e.name).collect();
        assert_eq!(
            names,
            ["gaussian-square", "diagonal-layer", "lshape", "singular-square", "ring", "gaussian-cube"]
        );
        assert!(registry().iter().all(|e| e.problem.advection.is_none() && e.problem.reaction.is_none()));
        assert!(matches!(find("nope"), Err(Error::UnknownExample(_))));
        assert_eq!(find("gaussian-cube").unwrap().dim(), 3);
    }

    #[test]
    fn gaussian_source_at_centre() {
        let e = find("gaussian-square").unwrap();
        assert!(((e.problem.source)(&[0.5, 0.5, 0.0]) - 400.0).abs() < 1e-12);
        let e = find("gaussian-cube").unwrap();
        assert!(((e.problem.source)(&[0.5, 0.5, 0.5]) - 600.0).abs() < 1e-12);
    }

    #[test]
    fn singular_square_has_zero_boundary_data() {
        let e = find("singular-square").unwrap();
        for x in [[0.0, 0.3, 0.0], [1.0, 0.7, 0.0], [0.2, 0.0, 0.0], [0.9, 1.0, 0.0]] {
            assert_eq!((e.problem.dirichlet)(&x), 0.0);
            assert!((e.problem.exact.as_ref().unwrap())(&x).abs() < 1e-15);
        }
    }

    #[test]
    fn lshape_solution_is_harmonic_and_vanishes_on_corner_edges() {
        let e = find("lshape").unwrap();
        assert_eq!((e.problem.source)(&[0.3, 0.4, 0.0]), 0.0);
        let u = e.problem.exact.as_ref().unwrap();
        assert!(u(&[0.5, 0.0, 0.0]).abs() < 1e-15);
        assert!(u(&[0.0, -0.5, 0.0]).abs() < 1e-12);
        assert!(u(&[-0.5, 0.5, 0.0]) > 0.0);
    }

    #[test]
    fn every_example_is_consistent() {
        for e in all_examples() {
            let defect = consistency_defect(&e, 100, 1).unwrap();
            assert!(defect < 1e-5, "{}: {defect}", e.name);
        }
    }

    #[test]
    fn initial_spaces() {
        let s = initial_space(MapKind::LShape, 3, 2).unwrap();
        assert_eq!(s.direction(0).base().multiplicities(), &[4, 1, 3, 1, 4]);
        assert_eq!(s.direction(1).num_cells(), 2);
        assert!(initial_space(MapKind::Square, 1, 2).is_err());
        assert_eq!(initial_space(MapKind::Cube, 2, 2).unwrap().num_functions(), 64);
    }
}
