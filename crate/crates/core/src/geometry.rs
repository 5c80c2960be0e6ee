//! Parametric-to-physical maps and chain rules for pulled-back derivatives.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::tensor::MAX_DIM;

/// Available geometry maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MapKind {
    /// Identity on the unit square.
    Square,
    /// Identity on the unit cube.
    Cube,
    /// Quarter of the annulus `1 ≤ ρ ≤ 2`, `0 ≤ φ ≤ π/2`.
    Ring,
    /// `[−1,1]² \ (0,1)×(−1,0)` as a strip bent around the re-entrant corner.
    ///
    /// Two bilinear pieces meet along `ξ = 1/2`, which is mapped onto the
    /// diagonal of the square `[−1,0]×[0,1]`; `(1/2, 0)` goes to the corner.
    LShape,
}

impl MapKind {
    pub fn name(self) -> &'static str {
        match self {
            MapKind::Square => "square",
            MapKind::Cube => "cube",
            MapKind::Ring => "ring",
            MapKind::LShape => "lshape",
        }
    }
}

impl fmt::Display for MapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MapKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(MapKind::Square),
            "cube" => Ok(MapKind::Cube),
            "ring" => Ok(MapKind::Ring),
            "lshape" => Ok(MapKind::LShape),
            _ => Err(Error::InvalidArgument(format!("unknown geometry `{s}`"))),
        }
    }
}

/// Image point, Jacobian `J[i][a] = ∂F_i/∂ξ_a` and second derivatives
/// `H[i][a][b] = ∂²F_i/∂ξ_a∂ξ_b` of a map at one parametric point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapEval {
    pub dim: usize,
    pub point: [f64; MAX_DIM],
    pub jac: [[f64; MAX_DIM]; MAX_DIM],
    pub hess: [[[f64; MAX_DIM]; MAX_DIM]; MAX_DIM],
    pub det: f64,
    inv: [[f64; MAX_DIM]; MAX_DIM],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeometryMap {
    kind: MapKind,
}

/// Parametric location of the line where the bent strip changes piece.
pub const LSHAPE_BREAK: f64 = 0.5;

impl GeometryMap {
    pub fn new(kind: MapKind) -> Self {
        Self { kind }
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            MapKind::Cube => 3,
            _ => 2,
        }
    }

    /// Measure of the physical domain.
    pub fn volume(&self) -> f64 {
        match self.kind {
            MapKind::Square | MapKind::Cube => 1.0,
            MapKind::Ring => 3.0 * PI / 4.0,
            MapKind::LShape => 3.0,
        }
    }

    /// Interior level-0 breakpoints each direction must contain with
    /// multiplicity at least `p` so that cells never straddle a kink of the map.
    pub fn kink_lines(&self) -> [&'static [f64]; MAX_DIM] {
        match self.kind {
            MapKind::LShape => [&[LSHAPE_BREAK], &[], &[]],
            _ => [&[], &[], &[]],
        }
    }

    pub fn eval(&self, xi: &[f64]) -> Result<MapEval> {
        let d = self.dim();
        if let Some(&v) = xi[..d].iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::OutOfDomain(v));
        }
        let mut point = [0.0; MAX_DIM];
        let mut jac = [[0.0; MAX_DIM]; MAX_DIM];
        let mut hess = [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM];
        match self.kind {
            MapKind::Square | MapKind::Cube => {
                for i in 0..d {
                    point[i] = xi[i];
                    jac[i][i] = 1.0;
                }
            }
            MapKind::Ring => {
                let (r, a) = (1.0 + xi[0], FRAC_PI_2 * xi[1]);
                let (s, c) = a.sin_cos();
                point[0] = r * c;
                point[1] = r * s;
                jac[0] = [c, -FRAC_PI_2 * r * s, 0.0];
                jac[1] = [s, FRAC_PI_2 * r * c, 0.0];
                let w = FRAC_PI_2;
                hess[0][0][1] = -w * s;
                hess[0][1][0] = -w * s;
                hess[0][1][1] = -w * w * r * c;
                hess[1][0][1] = w * c;
                hess[1][1][0] = w * c;
                hess[1][1][1] = -w * w * r * s;
            }
            MapKind::LShape => {
                let (x, t) = (xi[0], xi[1]);
                if x == LSHAPE_BREAK {
                    return Err(Error::OnBreakLine(xi[..d].to_vec()));
                }
                if x < LSHAPE_BREAK {
                    // (s, t) ↦ (−t, −1 + s(1 + t)), s = 2ξ
                    let s = 2.0 * x;
                    point[0] = -t;
                    point[1] = -1.0 + s * (1.0 + t);
                    jac[0] = [0.0, -1.0, 0.0];
                    jac[1] = [2.0 * (1.0 + t), s, 0.0];
                    hess[1][0][1] = 2.0;
                    hess[1][1][0] = 2.0;
                } else {
                    // (s, t) ↦ (s(1 + t) − t, t), s = 2ξ − 1
                    let s = 2.0 * x - 1.0;
                    point[0] = s * (1.0 + t) - t;
                    point[1] = t;
                    jac[0] = [2.0 * (1.0 + t), s - 1.0, 0.0];
                    jac[1] = [0.0, 1.0, 0.0];
                    hess[0][0][1] = 2.0;
                    hess[0][1][0] = 2.0;
                }
            }
        }
        let mut m = Matrix3::identity();
        for i in 0..d {
            for a in 0..d {
                m[(i, a)] = jac[i][a];
            }
        }
        let det = m.determinant();
        if det.abs() <= 1e-14 || !det.is_finite() {
            return Err(Error::SingularJacobian(xi[..d].to_vec()));
        }
        let mi = m.try_inverse().ok_or_else(|| Error::SingularJacobian(xi[..d].to_vec()))?;
        let mut inv = [[0.0; MAX_DIM]; MAX_DIM];
        for a in 0..d {
            for i in 0..d {
                inv[a][i] = mi[(a, i)];
            }
        }
        Ok(MapEval {
            dim: d,
            point,
            jac,
            hess,
            det,
            inv,
        })
    }
}

impl MapEval {
    /// `J^{-1}`, entry `[a][i] = ∂ξ_a/∂x_i`.
    pub fn inverse(&self) -> &[[f64; MAX_DIM]; MAX_DIM] {
        &self.inv
    }

    /// `∇_x v = J^{-T} ∇_ξ v`.
    pub fn physical_gradient(&self, g: &[f64; MAX_DIM]) -> [f64; MAX_DIM] {
        let d = self.dim;
        let mut out = [0.0; MAX_DIM];
        for (i, o) in out.iter_mut().enumerate().take(d) {
            *o = (0..d).map(|a| self.inv[a][i] * g[a]).sum();
        }
        out
    }

    /// `H_x v = J^{-T} (H_ξ v − Σ_i (∇_x v)_i ∂²F_i) J^{-1}`.
    pub fn physical_hessian(&self, g: &[f64; MAX_DIM], h: &[[f64; MAX_DIM]; MAX_DIM]) -> [[f64; MAX_DIM]; MAX_DIM] {
        let d = self.dim;
        let gx = self.physical_gradient(g);
        let mut m = *h;
        for (i, gi) in gx.iter().enumerate().take(d) {
            if *gi == 0.0 {
                continue;
            }
            for a in 0..d {
                for b in 0..d {
                    m[a][b] -= gi * self.hess[i][a][b];
                }
            }
        }
        let mut out = [[0.0; MAX_DIM]; MAX_DIM];
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for a in 0..d {
                    for b in 0..d {
                        s += self.inv[a][i] * m[a][b] * self.inv[b][j];
                    }
                }
                out[i][j] = s;
            }
        }
        out
    }

    pub fn physical_laplacian(&self, g: &[f64; MAX_DIM], h: &[[f64; MAX_DIM]; MAX_DIM]) -> f64 {
        let hx = self.physical_hessian(g, h);
        (0..self.dim).map(|i| hx[i][i]).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const ALL: [MapKind; 4] = [MapKind::Square, MapKind::Cube, MapKind::Ring, MapKind::LShape];

    fn random_point(rng: &mut ChaCha8Rng, d: usize) -> [f64; 3] {
        let mut x: [f64; 3] = [0.0; 3];
        for v in x.iter_mut().take(d) {
            *v = rng.gen_range(0.02..0.98);
        }
        if (x[0] - 0.5).abs() < 0.02 {
            x[0] += 0.05;
        }
        x
    }

    #[test]
    fn identity_maps() {
        for kind in [MapKind::Square, MapKind::Cube] {
            let m = GeometryMap::new(kind);
            let e = m.eval(&[0.3, 0.7, 0.1]).unwrap();
            assert_eq!(e.point[..m.dim()], [0.3, 0.7, 0.1][..m.dim()]);
            assert_eq!(e.det, 1.0);
            assert_eq!(e.physical_gradient(&[1.0, 2.0, 3.0])[..2], [1.0, 2.0]);
            let h = [[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 0.0]];
            assert_eq!(e.physical_laplacian(&[0.6, 1.4, 0.0], &h), 4.0);
        }
    }

    #[test]
    fn ring_corners_and_radial_gradient() {
        let m = GeometryMap::new(MapKind::Ring);
        let e = m.eval(&[0.0, 0.0]).unwrap();
        assert!((e.point[0] - 1.0).abs() < 1e-15 && e.point[1].abs() < 1e-15);
        let e = m.eval(&[1.0, 1.0]).unwrap();
        assert!(e.point[0].abs() < 1e-15 && (e.point[1] - 2.0).abs() < 1e-15);
        let e = m.eval(&[0.5, 0.5]).unwrap();
        let g = e.physical_gradient(&[1.0, 0.0, 0.0]);
        assert!(((g[0] * g[0] + g[1] * g[1]).sqrt() - 1.0).abs() < 1e-14);
        assert!((e.det - FRAC_PI_2 * 1.5).abs() < 1e-14);
    }

    #[test]
    fn lshape_pieces_meet_and_reject_break_line() {
        let m = GeometryMap::new(MapKind::LShape);
        let a = m.eval(&[0.5 - 1e-13, 0.3]).unwrap();
        let b = m.eval(&[0.5 + 1e-13, 0.3]).unwrap();
        assert!((a.point[0] - b.point[0]).abs() < 1e-12 && (a.point[1] - b.point[1]).abs() < 1e-12);
        assert!(matches!(m.eval(&[0.5, 0.3]), Err(Error::OnBreakLine(_))));
        let c = m.eval(&[0.5 - 1e-15, 0.0]).unwrap();
        assert!(c.point[0].abs() < 1e-14 && c.point[1].abs() < 1e-14);
        assert!(matches!(m.eval(&[1.2, 0.3]), Err(Error::OutOfDomain(_))));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for kind in ALL {
            let m = GeometryMap::new(kind);
            let d = m.dim();
            for _ in 0..200 {
                let x = random_point(&mut rng, d);
                let e = m.eval(&x).unwrap();
                assert!(e.det > 0.0);
                for a in 0..d {
                    let h = 1e-6;
                    let (mut xp, mut xm) = (x, x);
                    xp[a] += h;
                    xm[a] -= h;
                    let (fp, fm) = (m.eval(&xp).unwrap(), m.eval(&xm).unwrap());
                    for i in 0..d {
                        let fd = (fp.point[i] - fm.point[i]) / (2.0 * h);
                        assert!((fd - e.jac[i][a]).abs() <= 1e-6 * e.jac[i][a].abs().max(1.0));
                        for b in 0..d {
                            let fd2 = (fp.jac[i][b] - fm.jac[i][b]) / (2.0 * h);
                            assert!((fd2 - e.hess[i][a][b]).abs() <= 1e-6 * e.hess[i][a][b].abs().max(1.0));
                        }
                    }
                }
            }
        }
    }

    /// Pulls back `u(x) = sin(x) e^{y} + x² y` (plus `z³` in 3-D) and compares
    /// the chain-rule Laplacian with the physical one.
    #[test]
    fn laplacian_chain_rule_matches_physical_derivatives() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for kind in ALL {
            let m = GeometryMap::new(kind);
            let d = m.dim();
            let u = |x: &[f64; 3]| x[0].sin() * x[1].exp() + x[0] * x[0] * x[1] + x[2].powi(3);
            let lap = |x: &[f64; 3]| 2.0 * x[1] + if d == 3 { 6.0 * x[2] } else { 0.0 };
            for _ in 0..100 {
                let xi = random_point(&mut rng, d);
                let e = m.eval(&xi).unwrap();
                let h = 1e-4;
                let v = |p: [f64; 3]| u(&m.eval(&p).unwrap().point);
                let mut g = [0.0; 3];
                let mut hs = [[0.0; 3]; 3];
                for a in 0..d {
                    let mut xp = xi;
                    let mut xm = xi;
                    xp[a] += h;
                    xm[a] -= h;
                    g[a] = (v(xp) - v(xm)) / (2.0 * h);
                    for b in 0..d {
                        let shift = |s1: f64, s2: f64| {
                            let mut p = xi;
                            p[a] += s1;
                            p[b] += s2;
                            v(p)
                        };
                        hs[a][b] = (shift(h, h) - shift(h, -h) - shift(-h, h) + shift(-h, -h)) / (4.0 * h * h);
                    }
                }
                let got = e.physical_laplacian(&g, &hs);
                let want = lap(&e.point);
                assert!((got - want).abs() <= 1e-5 * want.abs().max(1.0), "{kind}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn ring_radius_squared_has_laplacian_four() {
        let m = GeometryMap::new(MapKind::Ring);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let xi = [rng.gen::<f64>(), rng.gen::<f64>(), 0.0];
            let e = m.eval(&xi).unwrap();
            // ρ² = (1 + ξ)²: gradient (2(1 + ξ), 0), Hessian diag(2, 0)
            let r = 1.0 + xi[0];
            let g = [2.0 * r, 0.0, 0.0];
            let h = [[2.0, 0.0, 0.0], [0.0; 3], [0.0; 3]];
            assert!((e.physical_laplacian(&g, &h) - 4.0).abs() < 1e-8);
        }
    }

    #[test]
    fn parse_names() {
        for kind in ALL {
            assert_eq!(kind.name().parse::<MapKind>().unwrap(), kind);
        }
        assert!("disk".parse::<MapKind>().is_err());
    }
}
