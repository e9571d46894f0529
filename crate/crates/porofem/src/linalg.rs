//! Sparse and dense linear algebra used by the solver.
//!
//! Sparse systems are stored in CSR form, reordered with reverse
//! Cuthill-McKee, and factored with a banded LU with partial pivoting
//! (LAPACK-style band storage). Direct solves perform one step of iterative
//! refinement and verify the residual. Dense helpers (LU, Cholesky, cyclic
//! Jacobi eigenvalues) support the inf-sup estimate, which needs the
//! smallest generalized eigenvalue of a dense Schur complement.

use crate::error::{Error, Result};
use std::io::Write;

/// Relative residual tolerance enforced by [`DirectSolver::solve`].
const SOLVE_TOL: f64 = 1e-10;

// ---------------------------------------------------------------------------
// Triplets and CSR
// ---------------------------------------------------------------------------

/// Coordinate-format accumulator; duplicate entries are summed on conversion.
#[derive(Debug, Clone)]
pub struct Triplets {
    pub n_rows: usize,
    pub n_cols: usize,
    entries: Vec<(u32, u32, f64)>,
}

impl Triplets {
    pub fn new(n_rows: usize, n_cols: usize) -> Triplets {
        Triplets { n_rows, n_cols, entries: Vec::new() }
    }

    pub fn with_capacity(n_rows: usize, n_cols: usize, cap: usize) -> Triplets {
        Triplets { n_rows, n_cols, entries: Vec::with_capacity(cap) }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n_rows && col < self.n_cols);
        self.entries.push((row as u32, col as u32, value));
    }

    /// Appends `scale * block` at offset `(row_off, col_off)`.
    pub fn push_block(&mut self, block: &CsrMatrix, row_off: usize, col_off: usize, scale: f64) {
        for i in 0..block.n_rows {
            for k in block.row_ptr[i]..block.row_ptr[i + 1] {
                self.push(row_off + i, col_off + block.col_idx[k] as usize, scale * block.values[k]);
            }
        }
    }

    /// Appends `scale * block^T` at offset `(row_off, col_off)`.
    pub fn push_block_transposed(
        &mut self,
        block: &CsrMatrix,
        row_off: usize,
        col_off: usize,
        scale: f64,
    ) {
        for i in 0..block.n_rows {
            for k in block.row_ptr[i]..block.row_ptr[i + 1] {
                self.push(row_off + block.col_idx[k] as usize, col_off + i, scale * block.values[k]);
            }
        }
    }

    pub fn extend_from(&mut self, entries: Vec<(u32, u32, f64)>) {
        self.entries.extend(entries);
    }

    /// Drops all entries whose row index fails the predicate, so a block
    /// row can be replaced after the standard blocks were pushed.
    pub fn retain_rows(&mut self, keep: impl Fn(usize) -> bool) {
        self.entries.retain(|&(r, _, _)| keep(r as usize));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<u32>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds CSR from triplets, summing duplicates. The stable sort adds
    /// equal-position contributions in insertion order, which keeps parallel
    /// and sequential assembly bitwise identical.
    pub fn from_triplets(t: &Triplets) -> CsrMatrix {
        let mut entries = t.entries.clone();
        entries.sort_by_key(|&(i, j, _)| ((i as u64) << 32) | j as u64);
        let mut col_idx: Vec<u32> = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut row_counts = vec![0usize; t.n_rows];
        let mut last: Option<(u32, u32)> = None;
        for &(i, j, v) in &entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_counts[i as usize] += 1;
                last = Some((i, j));
            }
        }
        let mut row_ptr = vec![0usize; t.n_rows + 1];
        for i in 0..t.n_rows {
            row_ptr[i + 1] = row_ptr[i] + row_counts[i];
        }
        CsrMatrix { n_rows: t.n_rows, n_cols: t.n_cols, row_ptr, col_idx, values }
    }

    pub fn n_nnz(&self) -> usize {
        self.values.len()
    }

    /// Entry lookup (zero if absent).
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        match self.col_idx[lo..hi].binary_search(&(j as u32)) {
            Ok(k) => self.values[lo + k],
            Err(_) => 0.0,
        }
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `y = A x` into a caller buffer.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for i in 0..self.n_rows {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k] as usize];
            }
            y[i] = s;
        }
    }

    /// `y += scale * A x`.
    pub fn add_mul_vec(&self, x: &[f64], y: &mut [f64], scale: f64) {
        for i in 0..self.n_rows {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k] as usize];
            }
            y[i] += scale * s;
        }
    }

    /// Bilinear form `x^T A y`.
    pub fn quad_form(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut total = 0.0;
        for i in 0..self.n_rows {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * y[self.col_idx[k] as usize];
            }
            total += x[i] * s;
        }
        total
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut t = Triplets::with_capacity(self.n_cols, self.n_rows, self.n_nnz());
        for i in 0..self.n_rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                t.push(self.col_idx[k] as usize, i, self.values[k]);
            }
        }
        CsrMatrix::from_triplets(&t)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n_rows)
            .map(|i| {
                self.values[self.row_ptr[i]..self.row_ptr[i + 1]]
                    .iter()
                    .map(|v| v.abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Dense copy (tests and small Schur complements only).
    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                d.set(i, self.col_idx[k] as usize, self.values[k]);
            }
        }
        d
    }
}

/// Writes a CSR matrix in MatrixMarket coordinate format (1-based indices).
pub fn write_matrix_market<W: Write>(a: &CsrMatrix, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(out, "{} {} {}", a.n_rows, a.n_cols, a.n_nnz())?;
    for i in 0..a.n_rows {
        for k in a.row_ptr[i]..a.row_ptr[i + 1] {
            writeln!(out, "{} {} {:.16e}", i + 1, a.col_idx[k] + 1, a.values[k])?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Reverse Cuthill-McKee
// ---------------------------------------------------------------------------

/// Returns a fill-reducing ordering: position `k` holds the original index
/// placed there. Works on the symmetrized sparsity pattern.
pub fn rcm_ordering(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n_rows;
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
    for i in 0..n {
        for k in a.row_ptr[i]..a.row_ptr[i + 1] {
            let j = a.col_idx[k] as usize;
            if i != j {
                adj[i].push(j as u32);
                adj[j].push(i as u32);
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(|l| l.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    loop {
        // Start each component from a minimum-degree vertex.
        let start = match (0..n).filter(|&i| !visited[i]).min_by_key(|&i| (degree[i], i)) {
            Some(s) => s,
            None => break,
        };
        visited[start] = true;
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut nbrs: Vec<u32> =
                adj[u].iter().copied().filter(|&v| !visited[v as usize]).collect();
            nbrs.sort_by_key(|&v| (degree[v as usize], v));
            for v in nbrs {
                visited[v as usize] = true;
                queue.push_back(v as usize);
            }
        }
    }
    order.reverse();
    order
}

// ---------------------------------------------------------------------------
// Banded LU
// ---------------------------------------------------------------------------

/// Banded LU factorization with partial pivoting, using LAPACK band storage
/// with `ldab = 2*kl + ku + 1` and `kl` extra fill rows.
struct BandLu {
    n: usize,
    kl: usize,
    kv: usize,
    ldab: usize,
    data: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandLu {
    fn factor(a: &CsrMatrix, kl: usize, ku: usize) -> Result<BandLu> {
        let n = a.n_rows;
        let kv = kl + ku;
        let ldab = 2 * kl + ku + 1;
        let mut data = vec![0.0; ldab * n];
        for i in 0..n {
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                let j = a.col_idx[k] as usize;
                data[j * ldab + kv + i - j] = a.values[k];
            }
        }
        let mut ipiv = vec![0usize; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let col = j * ldab + kv;
            let mut jp = 0usize;
            let mut best = data[col].abs();
            for off in 1..=km {
                let v = data[col + off].abs();
                if v > best {
                    best = v;
                    jp = off;
                }
            }
            ipiv[j] = j + jp;
            if best == 0.0 {
                return Err(Error::SingularMatrix { step: j });
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for jj in j..=ju {
                    let base = jj * ldab + kv;
                    data.swap(base + j - jj, base + j + jp - jj);
                }
            }
            if km > 0 {
                let pivot = data[col];
                for off in 1..=km {
                    data[col + off] /= pivot;
                }
                for jj in (j + 1)..=ju {
                    let base = jj * ldab + kv;
                    let t = data[base + j - jj];
                    if t != 0.0 {
                        for off in 1..=km {
                            data[base + j + off - jj] -= t * data[col + off];
                        }
                    }
                }
            }
        }
        Ok(BandLu { n, kl, kv, ldab, data, ipiv })
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        if n == 0 {
            return;
        }
        for j in 0..n.saturating_sub(1) {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let km = self.kl.min(n - 1 - j);
            let col = j * self.ldab + self.kv;
            let bj = b[j];
            for off in 1..=km {
                b[j + off] -= self.data[col + off] * bj;
            }
        }
        for j in (0..n).rev() {
            let col = j * self.ldab + self.kv;
            b[j] /= self.data[col];
            let bj = b[j];
            let top = j.saturating_sub(self.kv);
            for i in top..j {
                b[i] -= self.data[col + i - j] * bj;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Direct solver (RCM + band LU + refinement)
// ---------------------------------------------------------------------------

/// Factors a sparse matrix once and solves repeatedly with residual control.
pub struct DirectSolver {
    a: CsrMatrix,
    /// `order[k]` = original index placed at position `k`.
    order: Vec<usize>,
    lu: BandLu,
    norm_a: f64,
}

impl DirectSolver {
    pub fn new(a: CsrMatrix) -> Result<DirectSolver> {
        assert_eq!(a.n_rows, a.n_cols, "direct solver needs a square matrix");
        let n = a.n_rows;
        let order = rcm_ordering(&a);
        let mut position = vec![0usize; n];
        for (k, &old) in order.iter().enumerate() {
            position[old] = k;
        }
        let mut t = Triplets::with_capacity(n, n, a.n_nnz());
        for i in 0..n {
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                t.push(position[i], position[a.col_idx[k] as usize], a.values[k]);
            }
        }
        let ap = CsrMatrix::from_triplets(&t);
        let mut kl = 0usize;
        let mut ku = 0usize;
        for i in 0..n {
            for k in ap.row_ptr[i]..ap.row_ptr[i + 1] {
                let j = ap.col_idx[k] as usize;
                if i > j {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        let lu = BandLu::factor(&ap, kl, ku)?;
        let norm_a = a.norm_inf();
        Ok(DirectSolver { a, order, lu, norm_a })
    }

    /// Bandwidths `(kl, ku)` after reordering.
    pub fn bandwidths(&self) -> (usize, usize) {
        (self.lu.kl, self.lu.kv - self.lu.kl)
    }

    fn solve_raw(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut bp = vec![0.0; n];
        for k in 0..n {
            bp[k] = b[self.order[k]];
        }
        self.lu.solve(&mut bp);
        let mut x = vec![0.0; n];
        for k in 0..n {
            x[self.order[k]] = bp[k];
        }
        x
    }

    /// Solves `A x = b` with one step of iterative refinement, then checks
    /// the residual against `1e-10 (|A| |x| + |b|)`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = self.solve_raw(b);
        // One refinement pass.
        let mut r = b.to_vec();
        self.a.add_mul_vec(&x, &mut r, -1.0);
        let dx = self.solve_raw(&r);
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
        let mut r2 = b.to_vec();
        self.a.add_mul_vec(&x, &mut r2, -1.0);
        let res = r2.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let xn = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let bn = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let bound = SOLVE_TOL * (self.norm_a * xn + bn);
        if res > bound && res > 1e-300 {
            return Err(Error::SolveTolerance { residual: res, tolerance: bound });
        }
        Ok(x)
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.a
    }
}

/// One-shot sparse direct solve.
pub fn solve_direct(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    DirectSolver::new(a.clone())?.solve(b)
}

// ---------------------------------------------------------------------------
// Dirichlet elimination
// ---------------------------------------------------------------------------

fn constraint_values(n: usize, constraints: &[(usize, f64)]) -> Result<Vec<Option<f64>>> {
    let mut fixed: Vec<Option<f64>> = vec![None; n];
    for &(dof, value) in constraints {
        match fixed[dof] {
            None => fixed[dof] = Some(value),
            Some(prev) => {
                let tol = 1e-12 * prev.abs().max(1.0);
                if (prev - value).abs() > tol {
                    return Err(Error::ConflictingConstraint { dof, first: prev, second: value });
                }
            }
        }
    }
    Ok(fixed)
}

/// Symmetric Dirichlet elimination: zeroes constrained rows and columns,
/// places 1 on the diagonal, and moves column contributions to the
/// right-hand side. Returns the modified pair.
pub fn apply_dirichlet(
    a: &CsrMatrix,
    rhs: &[f64],
    constraints: &[(usize, f64)],
) -> Result<(CsrMatrix, Vec<f64>)> {
    let fixed = constraint_values(a.n_rows, constraints)?;
    let mut t = Triplets::with_capacity(a.n_rows, a.n_cols, a.n_nnz() + constraints.len());
    let mut out = rhs.to_vec();
    for i in 0..a.n_rows {
        if fixed[i].is_some() {
            continue;
        }
        for k in a.row_ptr[i]..a.row_ptr[i + 1] {
            let j = a.col_idx[k] as usize;
            match fixed[j] {
                Some(v) => out[i] -= a.values[k] * v,
                None => t.push(i, j, a.values[k]),
            }
        }
    }
    for (i, f) in fixed.iter().enumerate() {
        if let Some(v) = f {
            t.push(i, i, 1.0);
            out[i] = *v;
        }
    }
    Ok((CsrMatrix::from_triplets(&t), out))
}

/// A matrix with a fixed set of constrained dofs, factored once; constraint
/// values may change between solves (time-dependent boundary data).
pub struct ConstrainedSystem {
    solver: DirectSolver,
    dofs: Vec<usize>,
    /// Original columns of the constrained dofs restricted to free rows,
    /// used to shift boundary values to the right-hand side.
    columns: CsrMatrix,
}

impl ConstrainedSystem {
    /// `dofs` must be sorted and unique.
    pub fn new(a: &CsrMatrix, dofs: &[usize]) -> Result<ConstrainedSystem> {
        debug_assert!(dofs.windows(2).all(|w| w[0] < w[1]), "constrained dofs must be sorted unique");
        let n = a.n_rows;
        let mut is_fixed = vec![false; n];
        for &d in dofs {
            is_fixed[d] = true;
        }
        let mut tm = Triplets::with_capacity(n, n, a.n_nnz());
        let mut tc = Triplets::new(n, n);
        for i in 0..n {
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                let j = a.col_idx[k] as usize;
                match (is_fixed[i], is_fixed[j]) {
                    (false, false) => tm.push(i, j, a.values[k]),
                    (false, true) => tc.push(i, j, a.values[k]),
                    _ => {}
                }
            }
        }
        for &d in dofs {
            tm.push(d, d, 1.0);
        }
        let solver = DirectSolver::new(CsrMatrix::from_triplets(&tm))?;
        Ok(ConstrainedSystem { solver, dofs: dofs.to_vec(), columns: CsrMatrix::from_triplets(&tc) })
    }

    /// Solves with the given constraint values (aligned with the dof list).
    pub fn solve(&self, rhs: &[f64], values: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(values.len(), self.dofs.len());
        let mut b = rhs.to_vec();
        if !self.dofs.is_empty() {
            let mut v_full = vec![0.0; b.len()];
            for (&d, &v) in self.dofs.iter().zip(values) {
                v_full[d] = v;
            }
            self.columns.add_mul_vec(&v_full, &mut b, -1.0);
            for (&d, &v) in self.dofs.iter().zip(values) {
                b[d] = v;
            }
        }
        self.solver.solve(&b)
    }

    pub fn constrained_dofs(&self) -> &[usize] {
        &self.dofs
    }
}

// ---------------------------------------------------------------------------
// Dense kit
// ---------------------------------------------------------------------------

/// Row-major dense matrix.
#[derive(Debug, Clone)]
pub struct DenseMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> DenseMatrix {
        DenseMatrix { n_rows, n_cols, data: vec![0.0; n_rows * n_cols] }
    }

    pub fn from_rows(rows: &[&[f64]]) -> DenseMatrix {
        let n_rows = rows.len();
        let n_cols = rows[0].len();
        let mut m = DenseMatrix::zeros(n_rows, n_cols);
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n_cols + j] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n_cols + j] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        for i in 0..self.n_rows {
            let row = &self.data[i * self.n_cols..(i + 1) * self.n_cols];
            y[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        y
    }

    /// LU factorization with partial pivoting.
    pub fn lu(&self) -> Result<DenseLu> {
        assert_eq!(self.n_rows, self.n_cols);
        let n = self.n_rows;
        let mut a = self.data.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = a[k * n + k].abs();
            for i in (k + 1)..n {
                let v = a[i * n + k].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(Error::SingularMatrix { step: k });
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                piv.swap(k, p);
            }
            let pivot = a[k * n + k];
            for i in (k + 1)..n {
                let m = a[i * n + k] / pivot;
                a[i * n + k] = m;
                if m != 0.0 {
                    for j in (k + 1)..n {
                        a[i * n + j] -= m * a[k * n + j];
                    }
                }
            }
        }
        Ok(DenseLu { n, data: a, piv })
    }

    /// Cholesky factor `L` (lower) of a symmetric positive definite matrix.
    pub fn cholesky(&self) -> Result<DenseMatrix> {
        assert_eq!(self.n_rows, self.n_cols);
        let n = self.n_rows;
        let mut l = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l.get(i, k) * l.get(j, k);
                }
                if i == j {
                    if s <= 0.0 {
                        return Err(Error::SingularMatrix { step: i });
                    }
                    l.set(i, j, s.sqrt());
                } else {
                    l.set(i, j, s / l.get(j, j));
                }
            }
        }
        Ok(l)
    }
}

/// Dense LU factors.
pub struct DenseLu {
    n: usize,
    data: Vec<f64>,
    piv: Vec<usize>,
}

impl DenseLu {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = vec![0.0; n];
        for i in 0..n {
            x[i] = b[self.piv[i]];
        }
        for i in 0..n {
            for k in 0..i {
                x[i] -= self.data[i * n + k] * x[k];
            }
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                x[i] -= self.data[i * n + k] * x[k];
            }
            x[i] /= self.data[i * n + i];
        }
        x
    }
}

/// Forward substitution `L x = b` for a lower-triangular dense matrix.
fn forward_solve(l: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = l.n_rows;
    let mut x = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            let lik = l.get(i, k);
            x[i] -= lik * x[k];
        }
        x[i] /= l.get(i, i);
    }
    x
}

/// Eigenvalues of a symmetric dense matrix by cyclic Jacobi rotations.
pub fn sym_eigenvalues(a: &DenseMatrix) -> Vec<f64> {
    assert_eq!(a.n_rows, a.n_cols);
    let n = a.n_rows;
    let mut m = a.clone();
    // Symmetrize defensively; callers pass numerically symmetric input.
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m.get(i, j) + m.get(j, i));
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    let norm: f64 = (0..n).map(|i| m.get(i, i).abs()).fold(0.0, f64::max).max(1e-300);
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(m.get(i, j).abs());
            }
        }
        if off <= 1e-14 * norm {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m.get(k, p);
                    let akq = m.get(k, q);
                    m.set(k, p, c * akp - s * akq);
                    m.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = m.get(p, k);
                    let aqk = m.get(q, k);
                    m.set(p, k, c * apk - s * aqk);
                    m.set(q, k, s * apk + c * aqk);
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| m.get(i, i)).collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    eigs
}

/// Smallest eigenvalue of the generalized problem `S z = mu M z`, optionally
/// restricted to the subspace `{z : c^T z = 0}`. `S` must be symmetric and
/// `M` symmetric positive definite.
pub fn smallest_generalized_eig(
    s: &DenseMatrix,
    m: &DenseMatrix,
    constraint: Option<&[f64]>,
) -> Result<f64> {
    assert_eq!(s.n_rows, s.n_cols);
    assert_eq!(m.n_rows, m.n_cols);
    assert_eq!(s.n_rows, m.n_rows);
    let n = s.n_rows;
    let l = m.cholesky()?;
    // B = L^{-1} S L^{-T}, via two rounds of forward solves.
    let mut t = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let col: Vec<f64> = (0..n).map(|i| s.get(i, j)).collect();
        let x = forward_solve(&l, &col);
        for i in 0..n {
            t.set(i, j, x[i]);
        }
    }
    let mut b = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let row: Vec<f64> = (0..n).map(|j| t.get(i, j)).collect();
        let x = forward_solve(&l, &row);
        for j in 0..n {
            b.set(i, j, x[j]);
        }
    }
    let reduced = match constraint {
        None => b,
        Some(c) => {
            // Constraint c^T z = 0 with z = L^{-T} w becomes d^T w = 0 where
            // d = L^{-1} c. Use a Householder reflection mapping d to e_0 and
            // drop the first row and column.
            let d = forward_solve(&l, c);
            let dn = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            if dn == 0.0 {
                return Err(Error::InvalidParameter(
                    "degenerate eigenvalue constraint vector".into(),
                ));
            }
            let sign = if d[0] >= 0.0 { 1.0 } else { -1.0 };
            let mut u = d.clone();
            u[0] += dn * sign;
            let un2: f64 = u.iter().map(|v| v * v).sum();
            // H = I - 2 u u^T / (u^T u); form H B H and take the trailing block.
            let hb = |mat: &DenseMatrix, from_left: bool| -> DenseMatrix {
                let mut out = mat.clone();
                if from_left {
                    // rows: out = H * mat
                    for j in 0..n {
                        let dot: f64 = (0..n).map(|i| u[i] * mat.get(i, j)).sum();
                        let f = 2.0 * dot / un2;
                        for i in 0..n {
                            out.set(i, j, mat.get(i, j) - f * u[i]);
                        }
                    }
                } else {
                    for i in 0..n {
                        let dot: f64 = (0..n).map(|j| u[j] * mat.get(i, j)).sum();
                        let f = 2.0 * dot / un2;
                        for j in 0..n {
                            out.set(i, j, mat.get(i, j) - f * u[j]);
                        }
                    }
                }
                out
            };
            let hbh = hb(&hb(&b, true), false);
            let mut sub = DenseMatrix::zeros(n - 1, n - 1);
            for i in 1..n {
                for j in 1..n {
                    sub.set(i - 1, j - 1, hbh.get(i, j));
                }
            }
            sub
        }
    };
    let eigs = sym_eigenvalues(&reduced);
    eigs.first()
        .copied()
        .ok_or_else(|| Error::InvalidParameter("empty eigenvalue problem".into()))
}
