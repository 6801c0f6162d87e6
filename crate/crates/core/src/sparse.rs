//! Symmetric sparse matrices on a fixed mesh pattern and a sparse Cholesky
//! factorization with geometric nested-dissection ordering.
//!
//! Every operator assembled on one mesh (mass, stiffness, reaction, and the
//! Crank–Nicolson combinations of them) shares the vertex-adjacency pattern,
//! so the symbolic analysis is done once per mesh and every refactorization
//! only repeats the numeric phase.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

/// Compressed row pattern of a structurally symmetric matrix (diagonal
/// included, columns sorted).
#[derive(Debug, Clone, PartialEq)]
pub struct SparsePattern {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    diag: Vec<usize>,
}

impl SparsePattern {
    /// Pattern from sorted neighbor lists (self loops excluded).
    pub fn from_neighbors(neighbors: &[Vec<usize>]) -> Self {
        let n = neighbors.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut diag = Vec::with_capacity(n);
        row_ptr.push(0);
        for (i, nb) in neighbors.iter().enumerate() {
            let mut placed = false;
            for &j in nb {
                if !placed && j > i {
                    diag.push(cols.len());
                    cols.push(i);
                    placed = true;
                }
                cols.push(j);
            }
            if !placed {
                diag.push(cols.len());
                cols.push(i);
            }
            row_ptr.push(cols.len());
        }
        Self { n, row_ptr, cols, diag }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, i: usize) -> core::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    pub fn col(&self, k: usize) -> usize {
        self.cols[k]
    }

    pub fn diag_slot(&self, i: usize) -> usize {
        self.diag[i]
    }

    /// Storage slot of entry `(i, j)`.
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.row(i);
        self.cols[r.clone()].binary_search(&j).ok().map(|k| r.start + k)
    }
}

/// Symmetric matrix stored in full on a shared pattern.
#[derive(Debug, Clone)]
pub struct SymMatrix {
    pub pattern: Arc<SparsePattern>,
    pub values: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(pattern: Arc<SparsePattern>) -> Self {
        let nnz = pattern.nnz();
        Self {
            pattern,
            values: vec![0.0; nnz],
        }
    }

    pub fn dim(&self) -> usize {
        self.pattern.dim()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.find(i, j).map_or(0.0, |k| self.values[k])
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self
                .pattern
                .row(i)
                .map(|k| self.values[k] * x[self.pattern.cols[k]])
                .sum();
        }
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.dim())
            .map(|i| {
                x[i] * self
                    .pattern
                    .row(i)
                    .map(|k| self.values[k] * y[self.pattern.cols[k]])
                    .sum::<f64>()
            })
            .sum()
    }

    /// `self = a·A + b·B` on the shared pattern.
    pub fn combine(a: f64, lhs: &SymMatrix, b: f64, rhs: &SymMatrix) -> SymMatrix {
        debug_assert!(Arc::ptr_eq(&lhs.pattern, &rhs.pattern) || lhs.pattern == rhs.pattern);
        SymMatrix {
            pattern: lhs.pattern.clone(),
            values: lhs.values.iter().zip(&rhs.values).map(|(x, y)| a * x + b * y).collect(),
        }
    }

    /// `self += a·B`.
    pub fn add_scaled(&mut self, a: f64, other: &SymMatrix) {
        for (x, y) in self.values.iter_mut().zip(&other.values) {
            *x += a * y;
        }
    }

    /// Largest `|A_ij − A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim() {
            for k in self.pattern.row(i) {
                let j = self.pattern.cols[k];
                worst = worst.max((self.values[k] - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Replaces the rows and columns of `fixed` vertices by identity rows.
    pub fn constrain(&mut self, fixed: &[bool]) {
        for i in 0..self.dim() {
            for k in self.pattern.row(i) {
                let j = self.pattern.cols[k];
                if fixed[i] || fixed[j] {
                    self.values[k] = if i == j { 1.0 } else { 0.0 };
                }
            }
        }
    }
}

/// Fill-reducing symbolic analysis shared by every factorization on one pattern.
#[derive(Debug, Clone)]
pub struct SymbolicCholesky {
    n: usize,
    /// New index → original index.
    perm: Vec<usize>,
    /// Upper triangle of the permuted matrix in compressed-column form.
    cp: Vec<usize>,
    ci: Vec<usize>,
    /// Source slot in the original matrix for each entry of `ci`.
    cmap: Vec<usize>,
    parent: Vec<usize>,
    lp: Vec<usize>,
}

impl SymbolicCholesky {
    /// Analyzes `pattern` with the given elimination order (new → original).
    pub fn new(pattern: &SparsePattern, perm: Vec<usize>) -> Self {
        let n = pattern.dim();
        assert_eq!(perm.len(), n, "permutation length");
        let mut pinv = vec![NONE; n];
        for (new, &old) in perm.iter().enumerate() {
            pinv[old] = new;
        }

        let mut counts = vec![0usize; n + 1];
        for i in 0..n {
            for k in pattern.row(i) {
                let (pi, pj) = (pinv[i], pinv[pattern.cols[k]]);
                if pi <= pj {
                    counts[pj] += 1;
                }
            }
        }
        let mut cp = vec![0usize; n + 1];
        for j in 0..n {
            cp[j + 1] = cp[j] + counts[j];
        }
        let mut next = cp.clone();
        let mut ci = vec![0usize; cp[n]];
        let mut cmap = vec![0usize; cp[n]];
        for i in 0..n {
            for k in pattern.row(i) {
                let (pi, pj) = (pinv[i], pinv[pattern.cols[k]]);
                if pi <= pj {
                    ci[next[pj]] = pi;
                    cmap[next[pj]] = k;
                    next[pj] += 1;
                }
            }
        }

        // elimination tree
        let mut parent = vec![NONE; n];
        let mut ancestor = vec![NONE; n];
        for k in 0..n {
            for &row in &ci[cp[k]..cp[k + 1]] {
                let mut i = row;
                while i != NONE && i < k {
                    let inext = ancestor[i];
                    ancestor[i] = k;
                    if inext == NONE {
                        parent[i] = k;
                    }
                    i = inext;
                }
            }
        }

        // column counts from the row subtrees
        let mut colcount = vec![1usize; n];
        let mut stack = vec![0usize; n];
        let mut mark = vec![NONE; n];
        for k in 0..n {
            let top = ereach(&cp, &ci, k, &parent, &mut stack, &mut mark);
            for &i in &stack[top..n] {
                colcount[i] += 1;
            }
        }
        let mut lp = vec![0usize; n + 1];
        for j in 0..n {
            lp[j + 1] = lp[j] + colcount[j];
        }

        Self {
            n,
            perm,
            cp,
            ci,
            cmap,
            parent,
            lp,
        }
    }

    /// Nested-dissection analysis for a mesh-vertex pattern.
    pub fn for_mesh(pattern: &SparsePattern, coords: &[[f64; 2]]) -> Self {
        let perm = nested_dissection(pattern, coords);
        Self::new(pattern, perm)
    }

    pub fn factor_nnz(&self) -> usize {
        self.lp[self.n]
    }
}

/// Nonzero pattern of row `k` of L, returned in `stack[top..n]`.
fn ereach(cp: &[usize], ci: &[usize], k: usize, parent: &[usize], stack: &mut [usize], mark: &mut [usize]) -> usize {
    let n = parent.len();
    let mut top = n;
    mark[k] = k;
    for &row in &ci[cp[k]..cp[k + 1]] {
        let mut i = row;
        if i > k {
            continue;
        }
        let mut len = 0;
        while mark[i] != k {
            stack[len] = i;
            len += 1;
            mark[i] = k;
            i = parent[i];
        }
        while len > 0 {
            len -= 1;
            top -= 1;
            stack[top] = stack[len];
        }
    }
    top
}

/// Numeric Cholesky factor `P A Pᵀ = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    symbolic: Arc<SymbolicCholesky>,
    li: Vec<usize>,
    lx: Vec<f64>,
}

impl CholeskyFactor {
    /// Up-looking factorization of `matrix` (whose pattern was analyzed by `symbolic`).
    pub fn factor(symbolic: Arc<SymbolicCholesky>, matrix: &SymMatrix) -> Result<Self> {
        let s = &*symbolic;
        let n = s.n;
        let nnz = s.lp[n];
        let mut li = vec![0usize; nnz];
        let mut lx = vec![0.0; nnz];
        let mut c: Vec<usize> = s.lp[..n].to_vec();
        let mut x = vec![0.0; n];
        let mut stack = vec![0usize; n];
        let mut mark = vec![NONE; n];

        for k in 0..n {
            let top = ereach(&s.cp, &s.ci, k, &s.parent, &mut stack, &mut mark);
            x[k] = 0.0;
            for p in s.cp[k]..s.cp[k + 1] {
                x[s.ci[p]] = matrix.values[s.cmap[p]];
            }
            let mut d = x[k];
            x[k] = 0.0;
            for &i in &stack[top..n] {
                let lki = x[i] / lx[s.lp[i]];
                x[i] = 0.0;
                for p in s.lp[i] + 1..c[i] {
                    x[li[p]] -= lx[p] * lki;
                }
                d -= lki * lki;
                let p = c[i];
                c[i] += 1;
                li[p] = k;
                lx[p] = lki;
            }
            if !(d > 0.0) {
                return Err(Error::NotPositiveDefinite {
                    pivot: s.perm[k],
                    value: d,
                });
            }
            let p = c[k];
            c[k] += 1;
            li[p] = k;
            lx[p] = d.sqrt();
        }
        Ok(Self { symbolic, li, lx })
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64], work: &mut Vec<f64>) {
        let s = &*self.symbolic;
        let n = s.n;
        work.clear();
        work.extend(s.perm.iter().map(|&old| b[old]));
        // L y = P b
        for j in 0..n {
            let start = s.lp[j];
            work[j] /= self.lx[start];
            let yj = work[j];
            for p in start + 1..s.lp[j + 1] {
                work[self.li[p]] -= self.lx[p] * yj;
            }
        }
        // Lᵀ x = y
        for j in (0..n).rev() {
            let start = s.lp[j];
            let mut acc = work[j];
            for p in start + 1..s.lp[j + 1] {
                acc -= self.lx[p] * work[self.li[p]];
            }
            work[j] = acc / self.lx[start];
        }
        for (new, &old) in s.perm.iter().enumerate() {
            b[old] = work[new];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        let mut work = Vec::with_capacity(b.len());
        self.solve_in_place(&mut x, &mut work);
        x
    }
}

/// Geometric nested dissection: recursive median bisection along the longer
/// bounding-box axis, with the vertices adjacent to the cut ordered last.
pub fn nested_dissection(pattern: &SparsePattern, coords: &[[f64; 2]]) -> Vec<usize> {
    let n = pattern.dim();
    let mut order = Vec::with_capacity(n);
    let mut stamp = vec![0usize; n];
    let mut counter = 0usize;
    enum Task {
        Split(Vec<usize>),
        Emit(Vec<usize>),
    }
    let mut tasks = vec![Task::Split((0..n).collect())];
    while let Some(task) = tasks.pop() {
        let mut set = match task {
            Task::Emit(sep) => {
                order.extend(sep);
                continue;
            }
            Task::Split(set) => set,
        };
        if set.len() <= 48 {
            order.extend(set);
            continue;
        }
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for &v in &set {
            for a in 0..2 {
                lo[a] = lo[a].min(coords[v][a]);
                hi[a] = hi[a].max(coords[v][a]);
            }
        }
        let axis = if hi[0] - lo[0] >= hi[1] - lo[1] { 0 } else { 1 };
        set.sort_by(|&a, &b| {
            coords[a][axis]
                .partial_cmp(&coords[b][axis])
                .unwrap_or(core::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let right = set.split_off(set.len() / 2);
        counter += 1;
        for &v in &right {
            stamp[v] = counter;
        }
        let (separator, left): (Vec<usize>, Vec<usize>) = set
            .into_iter()
            .partition(|&v| pattern.row(v).any(|k| stamp[pattern.col(k)] == counter));
        // processed in reverse push order: left, right, then separator
        tasks.push(Task::Emit(separator));
        tasks.push(Task::Split(right));
        tasks.push(Task::Split(left));
    }
    order
}
