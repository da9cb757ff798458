//! Compressed sparse column storage for the design matrix and the kernels the
//! centered normal equations reduce to: weighted column sums, the weighted
//! Gram `MᵀWM` (upper triangle only) and `Mᵀv`.
//!
//! Every accumulation runs in ascending row order so results are reproducible
//! bit for bit, independent of how many workers build the Gram.

pub mod market;
mod symmetric;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use crate::error::{check_finite, check_len, check_weights, Error, Result};

pub use symmetric::SymMatrix;

/// Environment variable holding the default worker count for the Gram kernel.
pub const THREADS_ENV: &str = "CENTERED_OLS_THREADS";

/// Sparse `n x p` design matrix in compressed column form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDesign {
    n_rows: usize,
    n_cols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<u32>,
    values: Vec<f64>,
}

impl SparseDesign {
    /// Assembles a matrix from `(row, col, value)` triplets. Duplicate
    /// positions are summed; the result has sorted row indices per column.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        entries: &[(usize, usize, f64)],
    ) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::EmptyShape { n_rows, n_cols });
        }
        if n_rows > u32::MAX as usize {
            return Err(Error::InvalidStructure(format!(
                "{n_rows} rows exceed the 32-bit row index range"
            )));
        }
        for (index, &(row, col, _)) in entries.iter().enumerate() {
            if row >= n_rows || col >= n_cols {
                return Err(Error::IndexOutOfRange {
                    index,
                    row,
                    col,
                    n_rows,
                    n_cols,
                });
            }
        }

        let mut counts = vec![0usize; n_cols];
        for &(_, col, _) in entries {
            counts[col] += 1;
        }
        let mut col_ptr = Vec::with_capacity(n_cols + 1);
        col_ptr.push(0);
        for c in &counts {
            col_ptr.push(col_ptr.last().unwrap() + c);
        }
        // Counting sort by column, then a stable sort by row inside each column
        // so duplicates are summed in input order.
        let mut next = col_ptr.clone();
        let mut staged = vec![(0u32, 0.0f64); entries.len()];
        for &(row, col, value) in entries {
            staged[next[col]] = (row as u32, value);
            next[col] += 1;
        }

        let mut out_ptr = Vec::with_capacity(n_cols + 1);
        let mut row_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        out_ptr.push(0);
        for j in 0..n_cols {
            let column = &mut staged[col_ptr[j]..col_ptr[j + 1]];
            column.sort_by_key(|&(r, _)| r);
            for &(r, v) in column.iter() {
                if row_idx.len() > out_ptr[j] && *row_idx.last().unwrap() == r {
                    *values.last_mut().unwrap() += v;
                } else {
                    row_idx.push(r);
                    values.push(v);
                }
            }
            out_ptr.push(row_idx.len());
        }

        Ok(SparseDesign {
            n_rows,
            n_cols,
            col_ptr: out_ptr,
            row_idx,
            values,
        })
    }

    /// Takes ownership of raw CSC arrays after checking every structural invariant.
    pub fn from_csc(
        n_rows: usize,
        n_cols: usize,
        col_ptr: Vec<usize>,
        row_idx: Vec<u32>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::EmptyShape { n_rows, n_cols });
        }
        let bad = |msg: String| Err(Error::InvalidStructure(msg));
        if col_ptr.len() != n_cols + 1 {
            return bad(format!(
                "column pointer has length {}, expected {}",
                col_ptr.len(),
                n_cols + 1
            ));
        }
        if col_ptr[0] != 0 || col_ptr[n_cols] != row_idx.len() || row_idx.len() != values.len() {
            return bad("column pointer does not span the stored entries".into());
        }
        for j in 0..n_cols {
            if col_ptr[j] > col_ptr[j + 1] {
                return bad(format!("column pointer decreases at column {j}"));
            }
            let rows = &row_idx[col_ptr[j]..col_ptr[j + 1]];
            if rows.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("row indices of column {j} are not strictly increasing"));
            }
            if rows.last().is_some_and(|&r| r as usize >= n_rows) {
                return bad(format!("row index out of range in column {j}"));
            }
        }
        Ok(SparseDesign {
            n_rows,
            n_cols,
            col_ptr,
            row_idx,
            values,
        })
    }

    /// Builds from dense rows, storing only nonzero entries.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.len());
        let mut entries = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            check_len("dense row length", n_cols, row.len())?;
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        Self::from_triplets(n_rows, n_cols, &entries)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn density(&self) -> f64 {
        self.nnz() as f64 / (self.n_rows as f64 * self.n_cols as f64)
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_indices(&self) -> &[u32] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Row indices and values of column `j`.
    #[inline]
    pub fn column(&self, j: usize) -> (&[u32], &[f64]) {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.row_idx[range.clone()], &self.values[range])
    }

    /// Entries in column-major order as `(row, col, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_cols).flat_map(move |j| {
            let (rows, vals) = self.column(j);
            rows.iter().zip(vals).map(move |(&r, &v)| (r as usize, j, v))
        })
    }

    /// Dense copy, row-major. Test and oracle use only.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows * self.n_cols];
        for (i, j, v) in self.triplets() {
            out[i * self.n_cols + j] += v;
        }
        out
    }

    /// `M v` for a length-`p` vector, accumulating column by column.
    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("vector length against matrix columns", self.n_cols, v.len())?;
        let mut out = vec![0.0; self.n_rows];
        for (j, &coef) in v.iter().enumerate() {
            let (rows, vals) = self.column(j);
            for (&r, &x) in rows.iter().zip(vals) {
                out[r as usize] += x * coef;
            }
        }
        Ok(out)
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        check_finite("matrix values", &self.values)
    }
}

/// `out[j] = Σ_i w_i M[i, j]`, i.e. `MᵀW1`.
pub fn weighted_column_sums(m: &SparseDesign, w: &[f64]) -> Result<Vec<f64>> {
    check_len("weights against matrix rows", m.n_rows, w.len())?;
    Ok((0..m.n_cols)
        .map(|j| {
            let (rows, vals) = m.column(j);
            rows.iter()
                .zip(vals)
                .fold(0.0, |acc, (&r, &x)| acc + w[r as usize] * x)
        })
        .collect())
}

/// `Mᵀv` over stored entries only.
pub fn transpose_apply(m: &SparseDesign, v: &[f64]) -> Result<Vec<f64>> {
    check_len("vector against matrix rows", m.n_rows, v.len())?;
    Ok((0..m.n_cols)
        .map(|j| {
            let (rows, vals) = m.column(j);
            rows.iter()
                .zip(vals)
                .fold(0.0, |acc, (&r, &x)| acc + x * v[r as usize])
        })
        .collect())
}

/// Upper triangle of `MᵀWM` using the default worker count.
pub fn weighted_gram_upper(m: &SparseDesign, w: &[f64]) -> Result<SymMatrix> {
    weighted_gram_upper_with(m, w, default_workers())
}

/// Upper triangle of `MᵀWM`, partitioning output rows over `workers` threads.
///
/// Rows of `M` are visited in ascending order, a block at a time; each block
/// is regrouped by row and every stored pair `(j, k)`, `j <= k`, of a row adds
/// `(w_i M[i,j]) M[i,k]` to entry `(j, k)`. Cost is `Σ_i nnz_i²/2` plus one
/// pass over the entries. Entry `(j, k)` is therefore always the row-ordered
/// sum over rows where both columns are stored, whichever thread owns it
/// (worker `t` owns the rows `j ≡ t mod workers`), so the output does not
/// depend on `workers`.
pub fn weighted_gram_upper_with(m: &SparseDesign, w: &[f64], workers: usize) -> Result<SymMatrix> {
    check_len("weights against matrix rows", m.n_rows, w.len())?;
    check_weights(w)?;

    let p = m.n_cols;
    let mut gram = SymMatrix::zeros(p);
    if m.nnz() == 0 {
        return Ok(gram);
    }
    let workers = workers.clamp(1, p);
    let mut shares: Vec<Vec<&mut [f64]>> = (0..workers).map(|_| Vec::new()).collect();
    let mut rest = gram.packed_mut();
    for j in 0..p {
        let (head, tail) = rest.split_at_mut(p - j);
        shares[j % workers].push(head);
        rest = tail;
    }

    let mut block = RowBlock::default();
    let mut cursor = m.col_ptr[..p].to_vec();
    let block_rows = (BLOCK_ENTRIES * m.n_rows)
        .div_ceil(m.nnz())
        .clamp(1, MAX_BLOCK_ROWS.min(m.n_rows));
    let pool = (workers > 1).then(|| worker_pool(workers));
    for r0 in (0..m.n_rows).step_by(block_rows) {
        let r1 = (r0 + block_rows).min(m.n_rows);
        block.fill(m, r0, r1, &mut cursor);
        let w = &w[r0..r1];
        match &pool {
            None => block.accumulate(w, &mut shares[0], 0, 1),
            Some(pool) => pool.install(|| {
                shares
                    .par_iter_mut()
                    .enumerate()
                    .for_each(|(t, rows)| block.accumulate(w, rows, t, workers))
            }),
        }
    }
    Ok(gram)
}

/// Target stored entries per row block.
const BLOCK_ENTRIES: usize = 1 << 16;
const MAX_BLOCK_ROWS: usize = 1 << 16;

/// A run of consecutive rows regrouped row-major, columns ascending in each row.
#[derive(Default)]
struct RowBlock {
    row_ptr: Vec<usize>,
    next: Vec<usize>,
    ends: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl RowBlock {
    /// Loads rows `r0..r1`; `cursor[j]` is the first unread entry of column
    /// `j` and is advanced past the block.
    fn fill(&mut self, m: &SparseDesign, r0: usize, r1: usize, cursor: &mut [usize]) {
        let len = r1 - r0;
        self.row_ptr.clear();
        self.row_ptr.resize(len + 1, 0);
        self.ends.clear();
        for (j, &c) in cursor.iter().enumerate() {
            let rows = &m.row_idx[c..m.col_ptr[j + 1]];
            let end = c + rows.partition_point(|&r| (r as usize) < r1);
            for &r in &m.row_idx[c..end] {
                self.row_ptr[r as usize - r0 + 1] += 1;
            }
            self.ends.push(end);
        }
        for i in 0..len {
            self.row_ptr[i + 1] += self.row_ptr[i];
        }
        let total = self.row_ptr[len];
        self.cols.resize(total, 0);
        self.vals.resize(total, 0.0);
        self.next.clear();
        self.next.extend_from_slice(&self.row_ptr[..len]);
        for (j, c) in cursor.iter_mut().enumerate() {
            for e in *c..self.ends[j] {
                let slot = &mut self.next[m.row_idx[e] as usize - r0];
                self.cols[*slot] = j as u32;
                self.vals[*slot] = m.values[e];
                *slot += 1;
            }
            *c = self.ends[j];
        }
    }

    /// Adds this block's contributions to the Gram rows owned by worker `t`;
    /// `rows[l]` is Gram row `l * workers + t`, starting at its diagonal.
    fn accumulate(&self, w: &[f64], rows: &mut [&mut [f64]], t: usize, workers: usize) {
        for (i, &wi) in w.iter().enumerate() {
            let range = self.row_ptr[i]..self.row_ptr[i + 1];
            let cols = &self.cols[range.clone()];
            let vals = &self.vals[range];
            for a in 0..cols.len() {
                let j = cols[a] as usize;
                if j % workers != t {
                    continue;
                }
                let out = &mut *rows[j / workers];
                let wa = wi * vals[a];
                for (&k, &v) in cols[a..].iter().zip(&vals[a..]) {
                    out[k as usize - j] += wa * v;
                }
            }
        }
    }
}

/// Worker count from [`THREADS_ENV`], else the available parallelism.
pub fn default_workers() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

fn worker_pool(workers: usize) -> Arc<rayon::ThreadPool> {
    static POOLS: OnceLock<Mutex<HashMap<usize, Arc<rayon::ThreadPool>>>> = OnceLock::new();
    let mut pools = POOLS
        .get_or_init(Default::default)
        .lock()
        .unwrap_or_else(|e| e.into_inner());
    pools
        .entry(workers)
        .or_insert_with(|| {
            Arc::new(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .thread_name(|i| format!("gram-{i}"))
                    .build()
                    .expect("failed to start Gram worker pool"),
            )
        })
        .clone()
}
