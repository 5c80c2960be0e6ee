//! Subdomain hierarchies, hierarchical spline bases and their meshes.

use std::collections::{BTreeMap, BTreeSet};

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::splines::MAX_BASIS;
use crate::tensor::{
    box_indices, tensor_combine, Cell, MultiIndex, PointEval, TensorFunction, TensorSpace, MAX_DIM,
};

/// Default cap on the number of levels of a hierarchy.
pub const DEFAULT_MAX_DEPTH: usize = 30;

/// Refinement ratio between consecutive levels.
pub const REFINEMENT_RATIO: f64 = 2.0;

/// Nested subdomains `Ω_0 ⊃ Ω_1 ⊃ … ⊃ Ω_n = ∅`.
///
/// `Ω_{ℓ+1}` is stored as the set of level-`ℓ` cells it is made of; `Ω_0` is
/// the whole parametric domain.
#[derive(Debug, Clone)]
pub struct SubdomainHierarchy {
    base: TensorSpace,
    refined: Vec<BTreeSet<MultiIndex>>,
    max_depth: usize,
}

impl PartialEq for SubdomainHierarchy {
    fn eq(&self, other: &Self) -> bool {
        self.base.same_family(&other.base) && self.refined == other.refined
    }
}

impl SubdomainHierarchy {
    /// Single-level hierarchy over a level-0 space.
    pub fn new(base: TensorSpace) -> Self {
        Self {
            base: base.at_level(0),
            refined: Vec::new(),
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }

    /// Builds a hierarchy from `sets[ℓ]` = level-`ℓ` cells forming `Ω_{ℓ+1}`.
    pub fn from_sets(base: TensorSpace, sets: Vec<BTreeSet<MultiIndex>>) -> Result<Self> {
        let mut h = Self::new(base);
        h.refined = sets;
        while h.refined.last().is_some_and(|s| s.is_empty()) {
            h.refined.pop();
        }
        h.validate()?;
        Ok(h)
    }

    pub fn with_max_depth(mut self, max_depth: usize) -> Result<Self> {
        if max_depth == 0 || self.depth() > max_depth {
            return Err(Error::DepthExceeded(max_depth));
        }
        self.max_depth = max_depth;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if self.depth() > self.max_depth {
            return Err(Error::DepthExceeded(self.max_depth));
        }
        let d = self.base.dim();
        for (l, set) in self.refined.iter().enumerate() {
            let n = self.space(l as u32).cells_per_direction();
            for c in set {
                if (0..d).any(|i| c[i] >= n[i]) || (d..MAX_DIM).any(|i| c[i] != 0) {
                    return Err(Error::InvalidHierarchy(format!(
                        "cell {:?} is outside the level-{l} grid",
                        &c[..d]
                    )));
                }
                if l > 0 && !self.refined[l - 1].contains(&parent(c, d)) {
                    return Err(Error::InvalidHierarchy(format!(
                        "level-{l} cell {:?} of subdomain {} is not inside subdomain {l}",
                        &c[..d],
                        l + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// Number of levels `n`.
    pub fn depth(&self) -> usize {
        self.refined.len() + 1
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn base(&self) -> &TensorSpace {
        &self.base
    }

    pub fn space(&self, level: u32) -> TensorSpace {
        self.base.at_level(level)
    }

    /// Level-`ℓ` cells whose union is `Ω_{ℓ+1}`.
    pub fn refined_cells(&self, level: usize) -> Option<&BTreeSet<MultiIndex>> {
        self.refined.get(level)
    }

    /// Whether a level-`ℓ` cell lies in `Ω_{ℓ+1}`.
    pub fn is_refined(&self, level: usize, cell: &MultiIndex) -> bool {
        self.refined.get(level).is_some_and(|s| s.contains(cell))
    }

    /// Whether `cell` (of level ≥ `m − 1`) lies in `Ω_m`.
    pub fn cell_in_subdomain(&self, m: usize, cell: &Cell) -> bool {
        if m == 0 {
            return true;
        }
        let l = cell.level as usize;
        assert!(l + 1 >= m, "cell level too coarse for subdomain test");
        let a = ancestor(&cell.index, l - (m - 1), self.dim());
        self.is_refined(m - 1, &a)
    }

    /// Whether the support of a level-`ℓ` function lies in `Ω_{ℓ+1}`.
    pub fn support_refined(&self, f: &TensorFunction) -> bool {
        let l = f.level as usize;
        let Some(set) = self.refined.get(l) else {
            return false;
        };
        let space = self.space(f.level);
        let r = space.support_cells(f);
        box_indices(&r[..self.dim()]).iter().all(|c| set.contains(c))
    }

    /// Enlargement `Ω*_{ℓ+1} = Ω_{ℓ+1} ∪ ⋃ ω_β` over marked level-`ℓ` functions.
    pub fn enlarge(&self, basis: &HierarchicalBasis, marked: &[TensorFunction]) -> Result<Self> {
        let mut out = self.clone();
        let d = self.dim();
        for f in marked {
            if !basis.is_active(f) {
                return Err(Error::InactiveFunction(format!("level {} {:?}", f.level, &f.index[..d])));
            }
            let l = f.level as usize;
            if l + 2 > self.max_depth {
                return Err(Error::DepthExceeded(self.max_depth));
            }
            while out.refined.len() <= l {
                out.refined.push(BTreeSet::new());
            }
            let r = self.space(f.level).support_cells(f);
            out.refined[l].extend(box_indices(&r[..d]));
        }
        Ok(out)
    }

    /// Adds the given level-`ℓ` cells to `Ω_{ℓ+1}`; parents must already be refined.
    pub fn refine_cells(&self, level: usize, cells: impl IntoIterator<Item = MultiIndex>) -> Result<Self> {
        if level + 2 > self.max_depth {
            return Err(Error::DepthExceeded(self.max_depth));
        }
        let mut out = self.clone();
        while out.refined.len() <= level {
            out.refined.push(BTreeSet::new());
        }
        out.refined[level].extend(cells);
        while out.refined.last().is_some_and(|s| s.is_empty()) {
            out.refined.pop();
        }
        out.validate()?;
        Ok(out)
    }

    /// Whether every `Ω_ℓ` of `self` is contained in the corresponding subdomain of `other`.
    pub fn is_contained_in(&self, other: &SubdomainHierarchy) -> bool {
        self.refined.iter().enumerate().all(|(l, s)| {
            other
                .refined
                .get(l)
                .is_some_and(|t| s.iter().all(|c| t.contains(c)))
        })
    }

    fn flatten(&self, level: u32, c: &MultiIndex) -> u64 {
        let n = self.space(level).cells_per_direction();
        (0..self.dim()).fold(0, |acc, i| acc * n[i] + c[i])
    }

    fn unflatten(&self, level: u32, mut k: u64) -> Result<MultiIndex> {
        let n = self.space(level).cells_per_direction();
        let d = self.dim();
        let mut c = [0; MAX_DIM];
        for i in (0..d).rev() {
            c[i] = k % n[i];
            k /= n[i];
        }
        if k != 0 {
            return Err(Error::Parse(format!("cell index out of range at level {level}")));
        }
        Ok(c)
    }

    /// Line-oriented text form: `level ℓ: i1 i2 …` for `ℓ = 1..n−1`, listing the
    /// row-major flattened level-`(ℓ−1)` cells of `Ω_ℓ`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (l, set) in self.refined.iter().enumerate() {
            let mut ids: Vec<u64> = set.iter().map(|c| self.flatten(l as u32, c)).collect();
            ids.sort_unstable();
            s.push_str(&format!("level {}:", l + 1));
            for k in ids {
                s.push_str(&format!(" {k}"));
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(base: TensorSpace, text: &str) -> Result<Self> {
        let h = Self::new(base);
        let mut sets = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (head, rest) = line
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("missing ':' in `{line}`")))?;
            let level: usize = head
                .strip_prefix("level")
                .map(str::trim)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Parse(format!("bad level header `{head}`")))?;
            if level != sets.len() + 1 {
                return Err(Error::Parse(format!("expected level {}, found {level}", sets.len() + 1)));
            }
            let mut set = BTreeSet::new();
            for tok in rest.split_whitespace() {
                let k: u64 = tok.parse().map_err(|_| Error::Parse(format!("bad cell index `{tok}`")))?;
                set.insert(h.unflatten(level as u32 - 1, k)?);
            }
            sets.push(set);
        }
        Self::from_sets(h.base, sets)
    }
}

pub(crate) fn parent(c: &MultiIndex, d: usize) -> MultiIndex {
    ancestor(c, 1, d)
}

pub(crate) fn ancestor(c: &MultiIndex, up: usize, d: usize) -> MultiIndex {
    let mut a = [0; MAX_DIM];
    for i in 0..d {
        a[i] = c[i] >> up;
    }
    a
}

/// Hierarchical basis `H` with partition-of-unity coefficients `a_β`.
#[derive(Debug, Clone)]
pub struct HierarchicalBasis {
    hierarchy: SubdomainHierarchy,
    spaces: Vec<TensorSpace>,
    active: Vec<BTreeMap<MultiIndex, f64>>,
    deactivated: Vec<BTreeMap<MultiIndex, f64>>,
    functions: Vec<TensorFunction>,
    weights: Vec<f64>,
    numbering: FxHashMap<TensorFunction, usize>,
}

impl HierarchicalBasis {
    /// Builds `H` recursively: `H_0 = B_0`, then functions with support in
    /// `Ω_{ℓ+1}` are replaced by their children.
    pub fn build(hierarchy: SubdomainHierarchy) -> Self {
        let base = hierarchy.space(0);
        let n = base.functions_per_direction();
        let d = base.dim();
        let mut ranges = [(0, 1); MAX_DIM];
        for i in 0..d {
            ranges[i] = (0, n[i]);
        }
        let level0: BTreeMap<MultiIndex, f64> = box_indices(&ranges[..d]).into_iter().map(|i| (i, 1.0)).collect();
        let mut b = Self {
            spaces: vec![base],
            active: vec![level0],
            deactivated: vec![BTreeMap::new()],
            hierarchy,
            functions: Vec::new(),
            weights: Vec::new(),
            numbering: FxHashMap::default(),
        };
        b.deactivate_from(0);
        b.renumber();
        b
    }

    /// Basis of an enlarged hierarchy, updated incrementally from `self`.
    pub fn refine(&self, hierarchy: SubdomainHierarchy) -> Result<Self> {
        if !self.hierarchy.is_contained_in(&hierarchy) || !self.hierarchy.base.same_family(&hierarchy.base) {
            return Err(Error::InvalidHierarchy("new hierarchy does not enlarge the old one".into()));
        }
        let mut b = self.clone();
        b.hierarchy = hierarchy;
        b.deactivate_from(0);
        b.renumber();
        Ok(b)
    }

    fn ensure_level(&mut self, l: usize) {
        while self.spaces.len() <= l {
            let next = self.spaces.last().unwrap().refined();
            self.spaces.push(next);
            self.active.push(BTreeMap::new());
            self.deactivated.push(BTreeMap::new());
        }
    }

    fn deactivate_from(&mut self, start: usize) {
        let mut l = start;
        while l < self.active.len() {
            let to_remove: Vec<MultiIndex> = self.active[l]
                .keys()
                .filter(|idx| self.hierarchy.support_refined(&TensorFunction { level: l as u32, index: **idx }))
                .copied()
                .collect();
            if !to_remove.is_empty() {
                self.ensure_level(l + 1);
            }
            for idx in to_remove {
                let a = self.active[l].remove(&idx).unwrap();
                self.deactivated[l].insert(idx, a);
                let f = TensorFunction { level: l as u32, index: idx };
                for (c, w) in self.spaces[l].children_unchecked(&f) {
                    self.add_weight(c, a * w);
                }
            }
            l += 1;
        }
        while self.active.len() > 1 && self.active.last().unwrap().is_empty() && self.deactivated.last().unwrap().is_empty() {
            self.active.pop();
            self.deactivated.pop();
            self.spaces.pop();
        }
    }

    fn add_weight(&mut self, f: TensorFunction, w: f64) {
        let l = f.level as usize;
        self.ensure_level(l);
        if let Some(a) = self.deactivated[l].get_mut(&f.index) {
            *a += w;
            for (c, cw) in self.spaces[l].children_unchecked(&f) {
                self.add_weight(c, w * cw);
            }
        } else {
            *self.active[l].entry(f.index).or_insert(0.0) += w;
        }
    }

    fn renumber(&mut self) {
        self.functions.clear();
        self.weights.clear();
        self.numbering.clear();
        for (l, set) in self.active.iter().enumerate() {
            for (idx, a) in set {
                let f = TensorFunction { level: l as u32, index: *idx };
                self.numbering.insert(f, self.functions.len());
                self.functions.push(f);
                self.weights.push(*a);
            }
        }
    }

    pub fn hierarchy(&self) -> &SubdomainHierarchy {
        &self.hierarchy
    }

    pub fn dim(&self) -> usize {
        self.hierarchy.dim()
    }

    /// Number of levels that hold active or deactivated functions.
    pub fn num_levels(&self) -> usize {
        self.active.len()
    }

    pub fn space(&self, level: u32) -> TensorSpace {
        self.spaces
            .get(level as usize)
            .cloned()
            .unwrap_or_else(|| self.hierarchy.space(level))
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    /// Active functions in global numbering order.
    pub fn functions(&self) -> &[TensorFunction] {
        &self.functions
    }

    /// Partition-of-unity coefficients `a_β`, aligned with [`Self::functions`].
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn index_of(&self, f: &TensorFunction) -> Option<usize> {
        self.numbering.get(f).copied()
    }

    pub fn is_active(&self, f: &TensorFunction) -> bool {
        self.numbering.contains_key(f)
    }

    pub fn is_deactivated(&self, f: &TensorFunction) -> bool {
        self.deactivated
            .get(f.level as usize)
            .is_some_and(|s| s.contains_key(&f.index))
    }

    /// Active level-`ℓ` functions with their `a_β`.
    pub fn active_level(&self, level: usize) -> impl Iterator<Item = (TensorFunction, f64)> + '_ {
        self.active
            .get(level)
            .into_iter()
            .flatten()
            .map(move |(i, a)| (TensorFunction { level: level as u32, index: *i }, *a))
    }

    /// Deactivated level-`ℓ` functions.
    pub fn deactivated_level(&self, level: usize) -> impl Iterator<Item = TensorFunction> + '_ {
        self.deactivated
            .get(level)
            .into_iter()
            .flatten()
            .map(move |(i, _)| TensorFunction { level: level as u32, index: *i })
    }

    /// Whether the function touches the boundary of the parametric domain.
    pub fn is_boundary(&self, f: &TensorFunction) -> bool {
        let n = self.space(f.level).functions_per_direction();
        (0..self.dim()).any(|i| f.index[i] == 0 || f.index[i] + 1 == n[i])
    }

    /// Meshsize `h_β = h_ℓ`.
    pub fn function_meshsize(&self, f: &TensorFunction) -> f64 {
        self.space(f.level).meshsize()
    }

    pub fn children(&self, f: &TensorFunction) -> Vec<(TensorFunction, f64)> {
        self.space(f.level).children_unchecked(f)
    }

    /// Active cell containing `x` (right-continuous, except at the upper boundary).
    pub fn locate(&self, x: &[f64]) -> Result<Cell> {
        let d = self.dim();
        if let Some(&v) = x[..d].iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::OutOfDomain(v));
        }
        let mut l = 0u32;
        loop {
            let c = self.space(l).cell_of(x);
            if !self.hierarchy.is_refined(l as usize, &c.index) {
                return Ok(c);
            }
            l += 1;
        }
    }

    /// Active functions non-zero on an active cell, with global indices.
    pub fn cell_functions(&self, cell: &Cell) -> Vec<(usize, TensorFunction)> {
        let d = self.dim();
        let mut out = Vec::new();
        for k in 0..=cell.level {
            if self.active.get(k as usize).is_none_or(|s| s.is_empty()) {
                continue;
            }
            let space = self.space(k);
            let a = space.cell(ancestor(&cell.index, (cell.level - k) as usize, d));
            for f in space.functions_on_cell(&a) {
                if let Some(i) = self.index_of(&f) {
                    out.push((i, f));
                }
            }
        }
        out
    }

    /// Evaluates all active functions at a point.
    pub fn eval_point(&self, x: &[f64]) -> Result<Vec<(usize, PointEval)>> {
        let cell = self.locate(x)?;
        Ok(self
            .cell_functions(&cell)
            .into_iter()
            .map(|(i, f)| (i, self.space(f.level).eval_function(&f, x)))
            .collect())
    }

    /// `Σ_β c_β β(x)` with value, gradient and Hessian.
    pub fn eval_combination(&self, coeffs: &[f64], x: &[f64]) -> Result<PointEval> {
        let mut e = PointEval::default();
        for (i, v) in self.eval_point(x)? {
            let c = coeffs[i];
            e.value += c * v.value;
            for a in 0..MAX_DIM {
                e.grad[a] += c * v.grad[a];
                for b in 0..MAX_DIM {
                    e.hess[a][b] += c * v.hess[a][b];
                }
            }
        }
        Ok(e)
    }

    /// `Σ_β a_β β(x)`, identically one.
    pub fn partition_of_unity(&self, x: &[f64]) -> Result<f64> {
        self.eval_combination(&self.weights, x).map(|e| e.value)
    }

    /// Weight function `H²(x) = Σ_β a_β h_β² β(x)`.
    pub fn h2_weight(&self, x: &[f64]) -> Result<f64> {
        Ok(self
            .eval_point(x)?
            .into_iter()
            .map(|(i, v)| {
                let h = self.function_meshsize(&self.functions[i]);
                self.weights[i] * h * h * v.value
            })
            .sum())
    }

    /// Coefficients of `f` (active or deactivated here) in this basis.
    pub fn expand_function(&self, f: &TensorFunction) -> Result<Vec<(usize, f64)>> {
        let mut acc: FxHashMap<usize, f64> = FxHashMap::default();
        self.push_expansion(f, 1.0, &mut acc)?;
        let mut v: Vec<(usize, f64)> = acc.into_iter().collect();
        v.sort_unstable_by_key(|x| x.0);
        Ok(v)
    }

    fn push_expansion(&self, f: &TensorFunction, w: f64, acc: &mut FxHashMap<usize, f64>) -> Result<()> {
        if let Some(i) = self.index_of(f) {
            *acc.entry(i).or_insert(0.0) += w;
            return Ok(());
        }
        if !self.is_deactivated(f) {
            return Err(Error::InactiveFunction(format!(
                "level {} {:?} is neither active nor refined",
                f.level,
                &f.index[..self.dim()]
            )));
        }
        for (c, cw) in self.children(f) {
            self.push_expansion(&c, w * cw, acc)?;
        }
        Ok(())
    }

    /// Re-expresses `Σ coeffs_β β` over `target`, whose hierarchy encloses this one.
    pub fn expand_into(&self, coeffs: &[f64], target: &HierarchicalBasis) -> Result<Vec<f64>> {
        let mut out = vec![0.0; target.len()];
        // Push level by level so that shared descendants are visited once.
        let mut pending: Vec<BTreeMap<MultiIndex, f64>> = Vec::new();
        for (f, c) in self.functions.iter().zip(coeffs) {
            let l = f.level as usize;
            if pending.len() <= l {
                pending.resize_with(l + 1, BTreeMap::new);
            }
            *pending[l].entry(f.index).or_insert(0.0) += c;
        }
        let mut l = 0;
        while l < pending.len() {
            let level = std::mem::take(&mut pending[l]);
            for (idx, c) in level {
                let f = TensorFunction { level: l as u32, index: idx };
                if let Some(i) = target.index_of(&f) {
                    out[i] += c;
                } else if target.is_deactivated(&f) {
                    for (ch, w) in target.children(&f) {
                        if pending.len() <= l + 1 {
                            pending.resize_with(l + 2, BTreeMap::new);
                        }
                        *pending[l + 1].entry(ch.index).or_insert(0.0) += c * w;
                    }
                } else {
                    return Err(Error::InvalidHierarchy(
                        "target basis does not contain the source space".into(),
                    ));
                }
            }
            l += 1;
        }
        Ok(out)
    }

    /// Active functions of `self` that are no longer active in `refined`.
    pub fn refined_functions(&self, refined: &HierarchicalBasis) -> Vec<TensorFunction> {
        self.functions.iter().filter(|f| !refined.is_active(f)).copied().collect()
    }

    /// Per-cell evaluation of every active function at a tensor Gauss rule.
    pub fn eval_cell(&self, cell: &Cell, points_per_dir: usize, nd: usize) -> CellEval {
        let d = self.dim();
        let space = self.space(cell.level);
        let (lo, hi) = space.cell_bounds(cell);
        let rule = GaussLegendre::new(points_per_dir);
        let nodes: Vec<Vec<f64>> = (0..d).map(|i| rule.mapped(lo[i], hi[i]).0).collect();
        let wts: Vec<Vec<f64>> = (0..d).map(|i| rule.mapped(lo[i], hi[i]).1).collect();
        let q = points_per_dir;
        let qranges: Vec<(u64, u64)> = (0..d).map(|_| (0, q as u64)).collect();
        let qidx = box_indices(&qranges);
        let nq = qidx.len();
        let mut points = Vec::with_capacity(nq);
        let mut weights = Vec::with_capacity(nq);
        for m in &qidx {
            let mut x = [0.0; MAX_DIM];
            let mut w = 1.0;
            for i in 0..d {
                x[i] = nodes[i][m[i] as usize];
                w *= wts[i][m[i] as usize];
            }
            points.push(x);
            weights.push(w);
        }
        let mut functions = Vec::new();
        let mut indices = Vec::new();
        let mut values = Vec::new();
        let mut grads = Vec::new();
        let mut hess = Vec::new();
        // tables[i][node] = [derivative][local function]
        let mut tables: Vec<Vec<[[f64; MAX_BASIS]; 3]>> = vec![vec![[[0.0; MAX_BASIS]; 3]; q]; d];
        for k in 0..=cell.level {
            if self.active.get(k as usize).is_none_or(|s| s.is_empty()) {
                continue;
            }
            let sk = self.space(k);
            let anc = ancestor(&cell.index, (cell.level - k) as usize, d);
            let mut first = [0u64; MAX_DIM];
            let mut ranges = [(0u64, 1u64); MAX_DIM];
            for i in 0..d {
                let dir = sk.direction(i);
                for (t, x) in nodes[i].iter().enumerate() {
                    first[i] = dir.eval_on_cell(anc[i], *x, nd.min(2), &mut tables[i][t]);
                }
                ranges[i] = (first[i], first[i] + dir.degree() as u64 + 1);
            }
            for idx in box_indices(&ranges[..d]) {
                let f = TensorFunction { level: k, index: idx };
                let Some(gi) = self.index_of(&f) else { continue };
                functions.push(f);
                indices.push(gi);
                for m in &qidx {
                    let mut uni = [[0.0; 3]; MAX_DIM];
                    for i in 0..d {
                        let t = &tables[i][m[i] as usize];
                        let a = (idx[i] - first[i]) as usize;
                        uni[i] = [t[0][a], t[1][a], t[2][a]];
                    }
                    let e = tensor_combine(&uni[..d]);
                    values.push(e.value);
                    grads.push(e.grad);
                    if nd >= 2 {
                        hess.push(e.hess);
                    }
                }
            }
        }
        CellEval {
            cell: *cell,
            dim: d,
            points,
            weights,
            functions,
            indices,
            values,
            grads,
            hess,
        }
    }
}

/// Values of the active functions of one cell at its quadrature points.
///
/// Entry `(f, q)` of the value, gradient and Hessian tables is stored at
/// position `f * num_points + q`.
#[derive(Debug, Clone)]
pub struct CellEval {
    pub cell: Cell,
    pub dim: usize,
    pub points: Vec<[f64; MAX_DIM]>,
    pub weights: Vec<f64>,
    pub functions: Vec<TensorFunction>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    pub grads: Vec<[f64; MAX_DIM]>,
    pub hess: Vec<[[f64; MAX_DIM]; MAX_DIM]>,
}

impl CellEval {
    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    pub fn num_functions(&self) -> usize {
        self.functions.len()
    }

    /// Value, gradient and Hessian of `Σ c_i β_i` at quadrature point `q`.
    pub fn combine(&self, coeffs: &[f64], q: usize) -> PointEval {
        let nq = self.num_points();
        let mut e = PointEval::default();
        for (f, &gi) in self.indices.iter().enumerate() {
            let c = coeffs[gi];
            if c == 0.0 {
                continue;
            }
            let k = f * nq + q;
            e.value += c * self.values[k];
            for a in 0..self.dim {
                e.grad[a] += c * self.grads[k][a];
                if !self.hess.is_empty() {
                    for b in 0..self.dim {
                        e.hess[a][b] += c * self.hess[k][a][b];
                    }
                }
            }
        }
        e
    }
}

/// Active cells `Q ∈ Q_ℓ` with `Q ⊂ Ω_ℓ` and `Q ⊄ Ω_{ℓ+1}`.
#[derive(Debug, Clone)]
pub struct HierarchicalMesh {
    cells: Vec<Cell>,
    meshsizes: Vec<f64>,
}

impl HierarchicalMesh {
    pub fn new(hierarchy: &SubdomainHierarchy) -> Self {
        let d = hierarchy.dim();
        let base = hierarchy.space(0);
        let n = base.cells_per_direction();
        let mut ranges = [(0, 1); MAX_DIM];
        for i in 0..d {
            ranges[i] = (0, n[i]);
        }
        let mut cells: Vec<Cell> = box_indices(&ranges[..d])
            .into_iter()
            .filter(|c| !hierarchy.is_refined(0, c))
            .map(|index| Cell { level: 0, index })
            .collect();
        let kids: Vec<(u64, u64)> = (0..d).map(|_| (0, 2)).collect();
        let offsets = box_indices(&kids);
        for l in 1..hierarchy.depth() {
            let mut level_cells = Vec::new();
            for p in hierarchy.refined_cells(l - 1).unwrap() {
                for o in &offsets {
                    let mut c = [0; MAX_DIM];
                    for i in 0..d {
                        c[i] = 2 * p[i] + o[i];
                    }
                    if !hierarchy.is_refined(l, &c) {
                        level_cells.push(Cell { level: l as u32, index: c });
                    }
                }
            }
            level_cells.sort_unstable();
            cells.extend(level_cells);
        }
        let meshsizes = (0..hierarchy.depth()).map(|l| hierarchy.space(l as u32).meshsize()).collect();
        Self { cells, meshsizes }
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// `h_ℓ`, the largest cell diameter of level `ℓ`.
    pub fn meshsize(&self, level: usize) -> f64 {
        self.meshsizes[level]
    }

    pub fn num_levels(&self) -> usize {
        self.meshsizes.len()
    }

    /// Active cells contained in the support of an active function.
    pub fn active_cells_in_support(&self, basis: &HierarchicalBasis, f: &TensorFunction) -> Result<Vec<Cell>> {
        if !basis.is_active(f) {
            return Err(Error::InactiveFunction(format!("level {} {:?}", f.level, &f.index[..basis.dim()])));
        }
        let h = basis.hierarchy();
        let d = h.dim();
        let r = basis.space(f.level).support_cells(f);
        let mut out = Vec::new();
        let mut stack: Vec<Cell> = box_indices(&r[..d])
            .into_iter()
            .map(|index| Cell { level: f.level, index })
            .collect();
        let kids: Vec<(u64, u64)> = (0..d).map(|_| (0, 2)).collect();
        let offsets = box_indices(&kids);
        while let Some(c) = stack.pop() {
            if h.is_refined(c.level as usize, &c.index) {
                for o in &offsets {
                    let mut k = [0; MAX_DIM];
                    for i in 0..d {
                        k[i] = 2 * c.index[i] + o[i];
                    }
                    stack.push(Cell { level: c.level + 1, index: k });
                }
            } else {
                out.push(c);
            }
        }
        out.sort_unstable();
        Ok(out)
    }
}
