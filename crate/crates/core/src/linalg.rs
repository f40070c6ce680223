//! Minimal dense/CSR matrices and the vector kernels the solvers need.
//!
//! The solvers only ever touch `A` through [`LinearOperator`], so a
//! matrix-free operator can be dropped in without changing them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `x ↦ Ax` and `y ↦ Aᵀy`, plus the same with `|A|` (entrywise absolute value).
///
/// Implementations must be re-entrant: they are shared between solver runs.
pub trait LinearOperator: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `out = A x`
    fn apply(&self, x: &[f64], out: &mut [f64]);
    /// `out = Aᵀ y`
    fn adjoint(&self, y: &[f64], out: &mut [f64]);
    /// `out = |A| x`
    fn abs_apply(&self, x: &[f64], out: &mut [f64]);
    /// `out = |A|ᵀ y`
    fn abs_adjoint(&self, y: &[f64], out: &mut [f64]);
    /// Calls `visit(i, j, a_ij)` for every stored entry.
    fn for_each_entry(&self, visit: &mut dyn FnMut(usize, usize, f64));
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "dense matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * ncols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != ncols {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {ncols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols: ncols,
            data,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Euclidean norm of column `j`.
    pub fn column_norm(&self, j: usize) -> f64 {
        (0..self.rows)
            .map(|i| self.get(i, j).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Scales every column to unit Euclidean norm; zero columns are left alone.
    pub fn normalize_columns(&mut self) {
        for j in 0..self.cols {
            let norm = self.column_norm(j);
            if norm > 0.0 {
                for i in 0..self.rows {
                    self.data[i * self.cols + j] /= norm;
                }
            }
        }
    }
}

impl TryFrom<Vec<Vec<f64>>> for DenseMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<DenseMatrix> for Vec<Vec<f64>> {
    fn from(m: DenseMatrix) -> Self {
        (0..m.rows).map(|i| m.row(i).to_vec()).collect()
    }
}

impl LinearOperator for DenseMatrix {
    fn nrows(&self) -> usize {
        self.rows
    }

    fn ncols(&self) -> usize {
        self.cols
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), x);
        }
    }

    fn adjoint(&self, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (i, &yi) in y.iter().enumerate() {
            if yi != 0.0 {
                axpy(yi, self.row(i), out);
            }
        }
    }

    fn abs_apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).iter().zip(x).map(|(a, v)| a.abs() * v).sum();
        }
    }

    fn abs_adjoint(&self, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (i, &yi) in y.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a.abs() * yi;
            }
        }
    }

    fn for_each_entry(&self, visit: &mut dyn FnMut(usize, usize, f64)) {
        for i in 0..self.rows {
            for (j, &a) in self.row(i).iter().enumerate() {
                visit(i, j, a);
            }
        }
    }
}

/// Compressed sparse row matrix with 0-based indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CsrParts", into = "CsrParts")]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CsrParts {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl TryFrom<CsrParts> for CsrMatrix {
    type Error = Error;

    fn try_from(p: CsrParts) -> Result<Self> {
        CsrMatrix::new(p.rows, p.cols, p.indptr, p.indices, p.values)
    }
}

impl From<CsrMatrix> for CsrParts {
    fn from(m: CsrMatrix) -> Self {
        CsrParts {
            rows: m.rows,
            cols: m.cols,
            indptr: m.indptr,
            indices: m.indices,
            values: m.values,
        }
    }
}

impl CsrMatrix {
    pub fn new(
        rows: usize,
        cols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if indptr.len() != rows + 1 || indptr[0] != 0 {
            return Err(Error::DimensionMismatch(format!(
                "indptr must have {} entries starting at 0",
                rows + 1
            )));
        }
        if indptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidParameter("indptr must be nondecreasing".into()));
        }
        let nnz = indptr[rows];
        if indices.len() != nnz || values.len() != nnz {
            return Err(Error::DimensionMismatch(format!(
                "indptr declares {nnz} entries, got {} indices and {} values",
                indices.len(),
                values.len()
            )));
        }
        if let Some(&bad) = indices.iter().find(|&&j| j >= cols) {
            return Err(Error::InvalidParameter(format!(
                "column index {bad} out of range for {cols} columns"
            )));
        }
        Ok(Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        })
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted = triplets.to_vec();
        sorted.sort_by_key(|&(i, j, _)| (i, j));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, v) in &sorted {
            if i >= rows || j >= cols {
                return Err(Error::InvalidParameter(format!(
                    "entry ({i}, {j}) outside a {rows}x{cols} matrix"
                )));
            }
            if last == Some((i, j)) {
                *values.last_mut().expect("duplicate follows an entry") += v;
                continue;
            }
            indptr[i + 1] += 1;
            indices.push(j);
            values.push(v);
            last = Some((i, j));
        }
        for i in 0..rows {
            indptr[i + 1] += indptr[i];
        }
        Self::new(rows, cols, indptr, indices, values)
    }

    fn row_entries(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.indptr[i]..self.indptr[i + 1];
        self.indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }
}

impl LinearOperator for CsrMatrix {
    fn nrows(&self) -> usize {
        self.rows
    }

    fn ncols(&self) -> usize {
        self.cols
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row_entries(i).map(|(j, a)| a * x[j]).sum();
        }
    }

    fn adjoint(&self, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (i, &yi) in y.iter().enumerate() {
            for (j, a) in self.row_entries(i) {
                out[j] += a * yi;
            }
        }
    }

    fn abs_apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row_entries(i).map(|(j, a)| a.abs() * x[j]).sum();
        }
    }

    fn abs_adjoint(&self, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (i, &yi) in y.iter().enumerate() {
            for (j, a) in self.row_entries(i) {
                out[j] += a.abs() * yi;
            }
        }
    }

    fn for_each_entry(&self, visit: &mut dyn FnMut(usize, usize, f64)) {
        for i in 0..self.rows {
            for (j, a) in self.row_entries(i) {
                visit(i, j, a);
            }
        }
    }
}

/// Either storage format; this is what loss models hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matrix {
    Dense(DenseMatrix),
    Csr(CsrMatrix),
}

impl From<DenseMatrix> for Matrix {
    fn from(m: DenseMatrix) -> Self {
        Matrix::Dense(m)
    }
}

impl From<CsrMatrix> for Matrix {
    fn from(m: CsrMatrix) -> Self {
        Matrix::Csr(m)
    }
}

macro_rules! dispatch {
    ($self:ident, $m:ident => $e:expr) => {
        match $self {
            Matrix::Dense($m) => $e,
            Matrix::Csr($m) => $e,
        }
    };
}

impl LinearOperator for Matrix {
    fn nrows(&self) -> usize {
        dispatch!(self, m => m.nrows())
    }
    fn ncols(&self) -> usize {
        dispatch!(self, m => m.ncols())
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        dispatch!(self, m => m.apply(x, out))
    }
    fn adjoint(&self, y: &[f64], out: &mut [f64]) {
        dispatch!(self, m => m.adjoint(y, out))
    }
    fn abs_apply(&self, x: &[f64], out: &mut [f64]) {
        dispatch!(self, m => m.abs_apply(x, out))
    }
    fn abs_adjoint(&self, y: &[f64], out: &mut [f64]) {
        dispatch!(self, m => m.abs_adjoint(y, out))
    }
    fn for_each_entry(&self, visit: &mut dyn FnMut(usize, usize, f64)) {
        dispatch!(self, m => m.for_each_entry(visit))
    }
}

const POWER_ITERATIONS: usize = 50;
const POWER_RTOL: f64 = 1e-8;
const POWER_SEED: u64 = 0x5e_ed0f_5157;

/// Largest singular value of `A` by power iteration on `AᵀA`.
///
/// Runs at most 50 iterations or until the estimate changes by less than
/// 1e-8 relative. The start vector comes from a fixed seed so the result is
/// reproducible.
pub fn spectral_norm(op: &dyn LinearOperator) -> f64 {
    let (m, n) = (op.nrows(), op.ncols());
    if m == 0 || n == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_SEED);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let norm = norm2(&v);
    scale(1.0 / norm, &mut v);
    let mut av = vec![0.0; m];
    let mut w = vec![0.0; n];
    let mut estimate = 0.0_f64;
    for _ in 0..POWER_ITERATIONS {
        op.apply(&v, &mut av);
        op.adjoint(&av, &mut w);
        let next = norm2(&w);
        if next == 0.0 {
            return 0.0;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / next;
        }
        let converged = (next - estimate).abs() <= POWER_RTOL * next;
        estimate = next;
        if converged {
            break;
        }
    }
    estimate.sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm1(a: &[f64]) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    for v in x {
        *v *= alpha;
    }
}

/// `‖a − b‖₂`
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
