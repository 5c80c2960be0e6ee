//! Univariate B-spline kernels on open knot vectors.
//!
//! Evaluation follows the Cox–de Boor recursion in the triangular form that
//! yields all non-zero basis functions and their derivatives on a span in one
//! pass. Refinement relations are computed numerically by local knot
//! insertion, so they hold for any nested pair of knot vectors, not only for
//! uniform dyadic ones.

use crate::error::{Error, Result};

/// Highest polynomial degree supported by the fixed-size evaluation buffers.
pub const MAX_DEGREE: usize = 8;
pub(crate) const MAX_BASIS: usize = MAX_DEGREE + 1;

/// Relative tolerance used when comparing knot values of different vectors.
const KNOT_TOL: f64 = 1e-12;

/// Open knot vector: both end knots repeated `degree + 1` times, knots in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    degree: usize,
    knots: Vec<f64>,
    breaks: Vec<f64>,
    mults: Vec<usize>,
}

impl KnotVector {
    pub fn new(degree: usize, knots: Vec<f64>) -> Result<Self> {
        if degree > MAX_DEGREE {
            return Err(Error::InvalidKnots(format!(
                "degree {degree} exceeds the supported maximum {MAX_DEGREE}"
            )));
        }
        if knots.len() < 2 * degree + 2 {
            return Err(Error::InvalidKnots(format!(
                "{} knots cannot carry a degree-{degree} basis",
                knots.len()
            )));
        }
        if knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidKnots("non-finite knot".into()));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidKnots("knots must be non-decreasing".into()));
        }
        let last = knots.len() - 1;
        if knots[0] != 0.0 || knots[last] != 1.0 {
            return Err(Error::InvalidKnots("knots must start at 0 and end at 1".into()));
        }
        if knots[degree] != 0.0 || knots[degree + 1] == 0.0 {
            return Err(Error::InvalidKnots(format!(
                "first knot must be repeated exactly {} times",
                degree + 1
            )));
        }
        if knots[last - degree] != 1.0 || knots[last - degree - 1] == 1.0 {
            return Err(Error::InvalidKnots(format!(
                "last knot must be repeated exactly {} times",
                degree + 1
            )));
        }
        let mut breaks: Vec<f64> = Vec::new();
        let mut mults: Vec<usize> = Vec::new();
        for &k in &knots {
            match breaks.last() {
                Some(&b) if b == k => *mults.last_mut().unwrap() += 1,
                _ => {
                    breaks.push(k);
                    mults.push(1);
                }
            }
        }
        if mults[1..mults.len() - 1].iter().any(|&m| m > degree + 1) {
            return Err(Error::InvalidKnots(format!(
                "interior multiplicity exceeds {}",
                degree + 1
            )));
        }
        Ok(Self {
            degree,
            knots,
            breaks,
            mults,
        })
    }

    /// Builds an open knot vector from strictly increasing breakpoints and the
    /// multiplicities of the interior ones.
    pub fn from_breakpoints(degree: usize, breaks: &[f64], interior_mults: &[usize]) -> Result<Self> {
        if breaks.len() < 2 || interior_mults.len() != breaks.len() - 2 {
            return Err(Error::InvalidKnots(
                "need at least two breakpoints and one multiplicity per interior breakpoint".into(),
            ));
        }
        if breaks.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidKnots("breakpoints must be strictly increasing".into()));
        }
        if interior_mults.iter().any(|&m| m == 0) {
            return Err(Error::InvalidKnots("multiplicities must be positive".into()));
        }
        let mut knots = vec![breaks[0]; degree + 1];
        for (b, &m) in breaks[1..breaks.len() - 1].iter().zip(interior_mults) {
            knots.extend(std::iter::repeat(*b).take(m));
        }
        knots.extend(std::iter::repeat(breaks[breaks.len() - 1]).take(degree + 1));
        Self::new(degree, knots)
    }

    /// Uniform open knot vector with `num_elements` equal spans and simple interior knots.
    pub fn uniform(degree: usize, num_elements: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidKnots(
                "degree 0 is not supported: the residual estimator needs C1 splines".into(),
            ));
        }
        if num_elements == 0 {
            return Err(Error::InvalidKnots("at least one element is required".into()));
        }
        let breaks: Vec<f64> = (0..=num_elements)
            .map(|i| i as f64 / num_elements as f64)
            .collect();
        Self::from_breakpoints(degree, &breaks, &vec![1; num_elements - 1])
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breaks
    }

    pub fn multiplicities(&self) -> &[usize] {
        &self.mults
    }

    /// Number of B-splines `n`.
    pub fn num_functions(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    pub fn num_elements(&self) -> usize {
        self.breaks.len() - 1
    }

    /// Largest element length.
    pub fn meshsize(&self) -> f64 {
        self.breaks
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Support `[ξ_j, ξ_{j+p+1}]` of the `j`-th function.
    pub fn support(&self, j: usize) -> (f64, f64) {
        (self.knots[j], self.knots[j + self.degree + 1])
    }

    /// Knot index `s` of the non-empty span `[ξ_s, ξ_{s+1})` containing `x`.
    /// Right-continuous, except that `x = 1` falls into the last span.
    pub fn find_span(&self, x: f64) -> usize {
        let n = self.num_functions();
        if x >= self.knots[n] {
            return n - 1;
        }
        self.knots.partition_point(|&k| k <= x) - 1
    }

    /// Values and derivatives up to `max_deriv` of the `p + 1` functions that
    /// may be non-zero at `x`.
    pub fn eval_all(&self, x: f64, max_deriv: usize) -> Result<BasisEval> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutOfDomain(x));
        }
        if max_deriv > 2 {
            return Err(Error::InvalidArgument(format!(
                "derivatives up to order 2 are supported, got {max_deriv}"
            )));
        }
        let p = self.degree;
        let s = self.find_span(x);
        let mut out = [[0.0; MAX_BASIS]; 3];
        basis_ders(&self.knots[s - p..=s + p + 1], p, x, max_deriv, &mut out);
        Ok(BasisEval {
            first: s - p,
            ders: out[..=max_deriv].iter().map(|r| r[..=p].to_vec()).collect(),
        })
    }

    /// Inserts the midpoint of every non-empty span once.
    pub fn dyadic_refine(&self) -> KnotVector {
        let mut knots = Vec::with_capacity(self.knots.len() + self.num_elements());
        for (i, (&b, &m)) in self.breaks.iter().zip(&self.mults).enumerate() {
            if i > 0 {
                knots.push(0.5 * (self.breaks[i - 1] + b));
            }
            knots.extend(std::iter::repeat(b).take(m));
        }
        Self::new(self.degree, knots).expect("refinement of a valid knot vector is valid")
    }

    /// Greville abscissae, the averages of the `p` interior local knots.
    pub fn greville(&self) -> Vec<f64> {
        let p = self.degree;
        (0..self.num_functions())
            .map(|j| {
                if p == 0 {
                    0.5 * (self.knots[j] + self.knots[j + 1])
                } else {
                    self.knots[j + 1..=j + p].iter().sum::<f64>() / p as f64
                }
            })
            .collect()
    }
}

/// Non-zero basis functions at a point: `ders[k][i]` is the `k`-th derivative
/// of function `first + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisEval {
    pub first: usize,
    pub ders: Vec<Vec<f64>>,
}

impl BasisEval {
    pub fn values(&self) -> &[f64] {
        &self.ders[0]
    }

    pub fn derivative(&self, order: usize) -> &[f64] {
        &self.ders[order]
    }

    /// Span index (knot index of the span's left end).
    pub fn span(&self) -> usize {
        self.first + self.ders[0].len() - 1
    }
}

/// All non-zero basis functions and derivatives (up to `nd`, at most 2) on one span.
///
/// `window` holds the `2p + 2` knots `ξ_{s-p} ..= ξ_{s+p+1}` around span `s`,
/// which must be non-empty. `out[k][i]` receives the `k`-th derivative of the
/// `i`-th function of the span.
pub(crate) fn basis_ders(window: &[f64], p: usize, x: f64, nd: usize, out: &mut [[f64; MAX_BASIS]; 3]) {
    debug_assert_eq!(window.len(), 2 * p + 2);
    let u = |k: isize| window[(p as isize + k) as usize];
    let mut ndu = [[0.0; MAX_BASIS]; MAX_BASIS];
    let mut left = [0.0; MAX_BASIS];
    let mut right = [0.0; MAX_BASIS];
    ndu[0][0] = 1.0;
    for j in 1..=p {
        left[j] = x - u(1 - j as isize);
        right[j] = u(j as isize) - x;
        let mut saved = 0.0;
        for r in 0..j {
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }
    for j in 0..=p {
        out[0][j] = ndu[j][p];
    }
    for row in out.iter_mut().take(nd + 1).skip(1) {
        row[..=p].fill(0.0);
    }
    let n = nd.min(p);
    let mut a = [[0.0; MAX_BASIS]; 2];
    for r in 0..=p {
        let (mut s1, mut s2) = (0usize, 1usize);
        a[0][0] = 1.0;
        for k in 1..=n {
            let mut d = 0.0;
            let rk = r as isize - k as isize;
            let pk = p - k;
            if rk >= 0 {
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                d = a[s2][0] * ndu[rk as usize][pk];
            }
            let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
            let j2 = if r as isize - 1 <= pk as isize { k - 1 } else { p - r };
            for j in j1..=j2 {
                let idx = (rk + j as isize) as usize;
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                d += a[s2][j] * ndu[idx][pk];
            }
            if r <= pk {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            out[k][r] = d;
            std::mem::swap(&mut s1, &mut s2);
        }
    }
    let mut factor = p as f64;
    for k in 1..=n {
        for j in 0..=p {
            out[k][j] *= factor;
        }
        factor *= (p - k) as f64;
    }
}

/// Coefficients of a single B-spline with local knots `local` (length `p + 2`)
/// after inserting the sorted knots `inserts` (all strictly inside the support)
/// by repeated single-knot insertion.
pub(crate) fn refine_local(local: &[f64], inserts: &[f64], p: usize) -> Vec<f64> {
    let mut t: Vec<f64> = local.to_vec();
    let mut coef = vec![1.0];
    for &u in inserts {
        let k = t.partition_point(|&v| v <= u) - 1;
        let len = coef.len();
        let at = |i: isize| -> f64 {
            if i < 0 || i as usize >= len {
                0.0
            } else {
                coef[i as usize]
            }
        };
        let mut next = Vec::with_capacity(len + 1);
        for i in 0..=len {
            let q = if i + p <= k {
                at(i as isize)
            } else if i > k {
                at(i as isize - 1)
            } else {
                let alpha = (u - t[i]) / (t[i + p] - t[i]);
                alpha * at(i as isize) + (1.0 - alpha) * at(i as isize - 1)
            };
            next.push(q);
        }
        t.insert(k + 1, u);
        coef = next;
    }
    coef
}

/// Sparse refinement matrix: column `i` lists `(k, C[k, i])` with
/// `coarse_i = Σ_k C[k, i] · fine_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoScaleMatrix {
    pub num_fine: usize,
    pub columns: Vec<Vec<(usize, f64)>>,
}

impl TwoScaleMatrix {
    pub fn num_coarse(&self) -> usize {
        self.columns.len()
    }

    pub fn get(&self, fine: usize, coarse: usize) -> f64 {
        self.columns[coarse]
            .iter()
            .find(|(k, _)| *k == fine)
            .map_or(0.0, |(_, c)| *c)
    }
}

fn same_knot(a: f64, b: f64) -> bool {
    (a - b).abs() <= KNOT_TOL * (1.0 + a.abs().max(b.abs()))
}

/// Two-scale relation between a knot vector and one of its refinements.
pub fn two_scale_matrix(coarse: &KnotVector, fine: &KnotVector) -> Result<TwoScaleMatrix> {
    let p = coarse.degree();
    if fine.degree() != p {
        return Err(Error::NotNested(format!(
            "degrees differ ({} vs {})",
            p,
            fine.degree()
        )));
    }
    for (&b, &m) in coarse.breakpoints().iter().zip(coarse.multiplicities()) {
        let found = fine
            .breakpoints()
            .iter()
            .position(|&f| same_knot(f, b))
            .map(|i| fine.multiplicities()[i]);
        match found {
            Some(mf) if mf >= m => {}
            _ => {
                return Err(Error::NotNested(format!(
                    "coarse knot {b} with multiplicity {m} missing from the fine vector"
                )))
            }
        }
    }
    let fk = fine.knots();
    let mut columns = Vec::with_capacity(coarse.num_functions());
    for j in 0..coarse.num_functions() {
        let local = &coarse.knots()[j..=j + p + 1];
        let (t0, t1) = (local[0], local[p + 1]);
        // Fine knots strictly inside the support, minus the local interior knots.
        let mut inserts: Vec<f64> = Vec::new();
        let interior: Vec<f64> = local
            .iter()
            .copied()
            .filter(|&v| !same_knot(v, t0) && !same_knot(v, t1))
            .collect();
        let mut it = interior.iter().peekable();
        for &v in fk.iter().filter(|&&v| v > t0 && v < t1 && !same_knot(v, t0) && !same_knot(v, t1)) {
            match it.peek() {
                Some(&&w) if same_knot(v, w) => {
                    it.next();
                }
                _ => inserts.push(v),
            }
        }
        let coef = refine_local(local, &inserts, p);
        let copies = local.iter().take_while(|&&v| same_knot(v, t0)).count();
        let last_t0 = fk.iter().rposition(|&v| same_knot(v, t0)).expect("nested");
        let first = last_t0 + 1 - copies;
        if first + coef.len() > fine.num_functions() {
            return Err(Error::NotNested(format!("function {j} does not fit the fine basis")));
        }
        columns.push(
            coef.into_iter()
                .enumerate()
                .map(|(i, c)| (first + i, c))
                .collect(),
        );
    }
    Ok(TwoScaleMatrix {
        num_fine: fine.num_functions(),
        columns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Textbook recursive Cox–de Boor, used as an independent oracle.
    fn cox_de_boor(knots: &[f64], p: usize, j: usize, x: f64, last: bool) -> f64 {
        if p == 0 {
            let (a, b) = (knots[j], knots[j + 1]);
            if (a <= x && x < b) || (last && x == b && a < b && b == 1.0) {
                1.0
            } else {
                0.0
            }
        } else {
            let mut v = 0.0;
            let d1 = knots[j + p] - knots[j];
            if d1 > 0.0 {
                v += (x - knots[j]) / d1 * cox_de_boor(knots, p - 1, j, x, last);
            }
            let d2 = knots[j + p + 1] - knots[j + 1];
            if d2 > 0.0 {
                v += (knots[j + p + 1] - x) / d2 * cox_de_boor(knots, p - 1, j + 1, x, last);
            }
            v
        }
    }

    #[test]
    fn uniform_sizes() {
        let kv = KnotVector::uniform(2, 256).unwrap();
        assert_eq!(kv.num_functions(), 258);
        assert_eq!(258 * 258, 66564);
        let kv = KnotVector::uniform(3, 256).unwrap();
        assert_eq!(kv.num_functions() * kv.num_functions(), 67081);
        let kv = KnotVector::uniform(1, 1).unwrap();
        assert_eq!(kv.knots(), &[0.0, 0.0, 1.0, 1.0]);
        assert_eq!(kv.num_functions(), 2);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(KnotVector::uniform(0, 4).is_err());
        assert!(KnotVector::uniform(2, 0).is_err());
        assert!(KnotVector::new(2, vec![0.0, 0.0, 0.5, 1.0, 1.0, 1.0]).is_err());
        assert!(KnotVector::new(1, vec![0.0, 0.0, 0.5, 0.5, 0.5, 1.0, 1.0]).is_err());
        let kv = KnotVector::uniform(2, 3).unwrap();
        assert!(matches!(kv.eval_all(1.5, 0), Err(Error::OutOfDomain(_))));
        assert!(kv.eval_all(-1e-9, 0).is_err());
    }

    #[test]
    fn hat_functions() {
        let kv = KnotVector::uniform(1, 1).unwrap();
        let e = kv.eval_all(0.5, 1).unwrap();
        assert_eq!(e.values(), &[0.5, 0.5]);
    }

    #[test]
    fn quadratic_at_breakpoint() {
        // Frozen from the recursive oracle: b_1(0.5) = 0.5, b_0'(x) = -4(1 - 2x) on [0, 0.5).
        let kv = KnotVector::new(2, vec![0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0]).unwrap();
        let e = kv.eval_all(0.5, 1).unwrap();
        // right-continuous: span [0.5, 1), functions 1..=3
        assert_eq!(e.first, 1);
        assert!((e.values()[0] - 0.5).abs() < 1e-15);
        let oracle = cox_de_boor(kv.knots(), 2, 1, 0.5, false);
        assert!((oracle - 0.5).abs() < 1e-15);
        // first function of the span, 2(1 - x)^2 on [0.5, 1)
        assert!((e.derivative(1)[0] + 2.0).abs() < 1e-14);
        let e0 = kv.eval_all(0.0, 1).unwrap();
        assert!((e0.derivative(1)[0] + 4.0).abs() < 1e-14);
        // derivative of the first function at 0.25 is -2
        let e = kv.eval_all(0.25, 1).unwrap();
        assert_eq!(e.first, 0);
        assert!((e.derivative(1)[0] + 2.0).abs() < 1e-14);
    }

    #[test]
    fn matches_recursive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let vectors = vec![
            KnotVector::uniform(2, 5).unwrap(),
            KnotVector::uniform(3, 4).unwrap(),
            KnotVector::from_breakpoints(3, &[0.0, 0.2, 0.5, 0.6, 1.0], &[1, 3, 2]).unwrap(),
            KnotVector::from_breakpoints(4, &[0.0, 0.3, 1.0], &[5]).unwrap(),
        ];
        for kv in &vectors {
            for _ in 0..200 {
                let x: f64 = rng.gen();
                let e = kv.eval_all(x, 0).unwrap();
                for j in 0..kv.num_functions() {
                    let want = cox_de_boor(kv.knots(), kv.degree(), j, x, false);
                    let got = if j >= e.first && j <= e.span() {
                        e.values()[j - e.first]
                    } else {
                        0.0
                    };
                    assert!((want - got).abs() < 1e-13, "j={j} x={x}");
                }
            }
        }
    }

    #[test]
    fn right_continuity_and_endpoint() {
        let kv = KnotVector::uniform(2, 4).unwrap();
        assert_eq!(kv.find_span(0.25), 3);
        assert_eq!(kv.find_span(1.0), kv.num_functions() - 1);
        let e = kv.eval_all(1.0, 0).unwrap();
        assert!((e.values()[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let kv = KnotVector::from_breakpoints(3, &[0.0, 0.25, 0.4, 0.7, 1.0], &[1, 2, 1]).unwrap();
        let h = 1e-6;
        for _ in 0..300 {
            let x: f64 = rng.gen_range(0.01..0.99);
            if kv.breakpoints().iter().any(|b| (b - x).abs() < 1e-4) {
                continue;
            }
            let e = kv.eval_all(x, 2).unwrap();
            let ep = kv.eval_all(x + h, 1).unwrap();
            let em = kv.eval_all(x - h, 1).unwrap();
            for i in 0..=3 {
                let fd = (ep.values()[i] - em.values()[i]) / (2.0 * h);
                let d = e.derivative(1)[i];
                assert!((fd - d).abs() <= 1e-5 * d.abs().max(1.0), "first derivative");
                let fd2 = (ep.derivative(1)[i] - em.derivative(1)[i]) / (2.0 * h);
                let d2 = e.derivative(2)[i];
                assert!((fd2 - d2).abs() <= 1e-4 * d2.abs().max(1.0), "second derivative");
            }
        }
    }

    #[test]
    fn dyadic_refinement() {
        let kv = KnotVector::uniform(1, 1).unwrap();
        assert_eq!(kv.dyadic_refine().knots(), &[0.0, 0.0, 0.5, 1.0, 1.0]);
        let kv = KnotVector::uniform(2, 2).unwrap();
        let r = kv.dyadic_refine();
        assert_eq!(kv.num_functions(), 4);
        assert_eq!(r.num_functions(), 6);
        assert_eq!(r, KnotVector::uniform(2, 4).unwrap());
        assert_eq!(r.meshsize(), kv.meshsize() / 2.0);
        let kv = KnotVector::from_breakpoints(3, &[0.0, 0.5, 1.0], &[3]).unwrap();
        let r = kv.dyadic_refine();
        assert_eq!(r.multiplicities(), &[4, 1, 3, 1, 4]);
    }

    #[test]
    fn two_scale_examples() {
        // p = 1, one element: hat at 0 = fine_0 + 1/2 fine_1.
        let c = KnotVector::uniform(1, 1).unwrap();
        let m = two_scale_matrix(&c, &c.dyadic_refine()).unwrap();
        assert_eq!(m.columns[0], vec![(0, 1.0), (1, 0.5)]);
        // p = 2 interior function: (1/4, 3/4, 3/4, 1/4).
        let c = KnotVector::uniform(2, 4).unwrap();
        let m = two_scale_matrix(&c, &c.dyadic_refine()).unwrap();
        let col: Vec<f64> = m.columns[2].iter().map(|x| x.1).collect();
        for (a, b) in col.iter().zip([0.25, 0.75, 0.75, 0.25]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(m.columns[2][0].0, 2);
    }

    #[test]
    fn two_scale_rejects_non_nested() {
        let a = KnotVector::uniform(2, 3).unwrap();
        let b = KnotVector::uniform(2, 4).unwrap();
        assert!(two_scale_matrix(&a, &b).is_err());
        assert!(two_scale_matrix(&a, &KnotVector::uniform(3, 6).unwrap()).is_err());
    }

    fn check_reconstruction(coarse: &KnotVector, fine: &KnotVector) {
        let m = two_scale_matrix(coarse, fine).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x: f64 = rng.gen();
            let ec = coarse.eval_all(x, 0).unwrap();
            let ef = fine.eval_all(x, 0).unwrap();
            let fine_val = |k: usize| {
                if k >= ef.first && k <= ef.span() {
                    ef.values()[k - ef.first]
                } else {
                    0.0
                }
            };
            for (i, col) in m.columns.iter().enumerate() {
                let c = if i >= ec.first && i <= ec.span() {
                    ec.values()[i - ec.first]
                } else {
                    0.0
                };
                let f: f64 = col.iter().map(|&(k, w)| w * fine_val(k)).sum();
                assert!((c - f).abs() < 1e-12);
                assert!(col.iter().all(|&(_, w)| w >= 0.0));
                assert!(col.len() <= 2 * coarse.degree() + 2);
            }
        }
    }

    #[test]
    fn two_scale_reconstructs_coarse_functions() {
        let kv = KnotVector::from_breakpoints(3, &[0.0, 0.3, 0.5, 1.0], &[2, 1]).unwrap();
        check_reconstruction(&kv, &kv.dyadic_refine());
        let kv = KnotVector::uniform(4, 3).unwrap();
        check_reconstruction(&kv, &kv.dyadic_refine().dyadic_refine());
        let coarse = KnotVector::uniform(2, 2).unwrap();
        let fine = KnotVector::from_breakpoints(2, &[0.0, 0.2, 0.5, 0.9, 1.0], &[1, 2, 1]).unwrap();
        check_reconstruction(&coarse, &fine);
    }

    #[test]
    fn greville_points() {
        assert_eq!(KnotVector::uniform(1, 1).unwrap().greville(), vec![0.0, 1.0]);
        let kv = KnotVector::new(2, vec![0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(kv.greville(), vec![0.0, 0.25, 0.75, 1.0]);
        let g = KnotVector::uniform(3, 7).unwrap().greville();
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert_eq!((g[0], g[g.len() - 1]), (0.0, 1.0));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn knot_vector() -> impl Strategy<Value = KnotVector> {
            (1usize..=5, 1usize..=9).prop_map(|(p, n)| KnotVector::uniform(p, n).unwrap())
        }

        proptest! {
            #[test]
            fn partition_of_unity(kv in knot_vector(), x in 0.0f64..=1.0) {
                let e = kv.eval_all(x, 1).unwrap();
                let s: f64 = e.values().iter().sum();
                let ds: f64 = e.derivative(1).iter().sum();
                prop_assert!((s - 1.0).abs() <= 1e-13);
                prop_assert!(ds.abs() <= 1e-9 * (kv.num_elements() as f64).powi(1));
                prop_assert!(e.values().iter().all(|&v| v >= -1e-15));
            }

            #[test]
            fn support_is_exact(kv in knot_vector(), x in 0.0f64..1.0) {
                let e = kv.eval_all(x, 0).unwrap();
                for (i, v) in e.values().iter().enumerate() {
                    let (a, b) = kv.support(e.first + i);
                    prop_assert!(a <= x && x <= b);
                    if *v > 0.0 {
                        prop_assert!(x >= a && x < b);
                    }
                }
            }
        }
    }
}
