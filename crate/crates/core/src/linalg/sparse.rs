//! Compressed sparse row matrices.

/// Real sparse matrix in CSR form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    /// Set by constructors that produce symmetric matrices by construction.
    pub symmetric: bool,
}

/// Coordinate-format accumulator; duplicates are summed on `build`.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(u32, u32, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self::with_capacity(nrows, ncols, 0)
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        assert!(nrows < u32::MAX as usize && ncols < u32::MAX as usize);
        TripletBuilder {
            nrows,
            ncols,
            entries: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.nrows && j < self.ncols);
        self.entries.push((i as u32, j as u32, v));
    }

    /// Adds `scale · m` with its origin shifted to `(row0, col0)` and index
    /// maps applied, e.g. to interleave component operators.
    pub fn push_operator(
        &mut self,
        m: &SparseOperator,
        scale: f64,
        row_map: impl Fn(usize) -> usize,
        col_map: impl Fn(usize) -> usize,
    ) {
        for i in 0..m.nrows {
            let ri = row_map(i);
            for p in m.indptr[i]..m.indptr[i + 1] {
                self.push(ri, col_map(m.indices[p]), scale * m.values[p]);
            }
        }
    }

    /// Moves all entries of `other` into `self`.
    pub fn append(&mut self, mut other: TripletBuilder) {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        self.entries.append(&mut other.entries);
    }

    pub fn build(self, symmetric: bool) -> SparseOperator {
        let n = self.nrows;
        // two stable counting sorts (column, then row), so rows come out
        // column-sorted and duplicates are summed in push order
        let mut col_start = vec![0usize; self.ncols + 1];
        for &(_, j, _) in &self.entries {
            col_start[j as usize + 1] += 1;
        }
        for j in 0..self.ncols {
            col_start[j + 1] += col_start[j];
        }
        let mut by_col = vec![(0u32, 0u32, 0.0f64); self.entries.len()];
        for &e in &self.entries {
            let p = &mut col_start[e.1 as usize];
            by_col[*p] = e;
            *p += 1;
        }
        drop(self.entries);
        let mut start = vec![0usize; n + 1];
        for &(i, _, _) in &by_col {
            start[i as usize + 1] += 1;
        }
        for i in 0..n {
            start[i + 1] += start[i];
        }
        let mut next = start.clone();
        let mut bucket = vec![(0u32, 0.0f64); by_col.len()];
        for &(i, j, v) in &by_col {
            let p = &mut next[i as usize];
            bucket[*p] = (j, v);
            *p += 1;
        }
        drop(by_col);
        let mut indptr = vec![0usize; n + 1];
        let mut indices = Vec::with_capacity(bucket.len());
        let mut values: Vec<f64> = Vec::with_capacity(bucket.len());
        for i in 0..n {
            let mut last = u32::MAX;
            for &(j, v) in &bucket[start[i]..start[i + 1]] {
                if j == last {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(j as usize);
                    values.push(v);
                    last = j;
                }
            }
            indptr[i + 1] = indices.len();
        }
        SparseOperator {
            nrows: n,
            ncols: self.ncols,
            indptr,
            indices,
            values,
            symmetric,
        }
    }
}

impl SparseOperator {
    pub fn identity(n: usize) -> Self {
        Self::diagonal_matrix(&vec![1.0; n])
    }

    pub fn diagonal_matrix(d: &[f64]) -> Self {
        let n = d.len();
        SparseOperator {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: d.to_vec(),
            symmetric: true,
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseOperator {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
            symmetric: nrows == ncols,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.indptr[i]..self.indptr[i + 1]).map(move |p| (self.indices[p], self.values[p]))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let cols = &self.indices[self.indptr[i]..self.indptr[i + 1]];
        match cols.binary_search(&j) {
            Ok(p) => self.values[self.indptr[i] + p],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols, "matvec dimension mismatch");
        for (i, yi) in y.iter_mut().enumerate().take(self.nrows) {
            let mut s = 0.0;
            for p in self.indptr[i]..self.indptr[i + 1] {
                s += self.values[p] * x[self.indices[p]];
            }
            *yi = s;
        }
    }

    /// `Aᵀ x`.
    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (i, xi) in x.iter().enumerate() {
            for p in self.indptr[i]..self.indptr[i + 1] {
                y[self.indices[p]] += self.values[p] * xi;
            }
        }
        y
    }

    pub fn transpose(&self) -> SparseOperator {
        let mut b = TripletBuilder::with_capacity(self.ncols, self.nrows, self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                b.push(j, i, v);
            }
        }
        b.build(self.symmetric)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows)
            .map(|i| self.row(i).map(|(_, v)| v).sum())
            .collect()
    }

    pub fn scaled(&self, s: f64) -> SparseOperator {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= s);
        m
    }

    /// `a·self + b·other`.
    pub fn lin_comb(&self, a: f64, other: &SparseOperator, b: f64) -> SparseOperator {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.nnz().max(other.nnz()));
        let mut values = Vec::with_capacity(indices.capacity());
        for i in 0..self.nrows {
            let (mut p, pe) = (self.indptr[i], self.indptr[i + 1]);
            let (mut q, qe) = (other.indptr[i], other.indptr[i + 1]);
            while p < pe || q < qe {
                let cp = if p < pe { self.indices[p] } else { usize::MAX };
                let cq = if q < qe { other.indices[q] } else { usize::MAX };
                if cp < cq {
                    indices.push(cp);
                    values.push(a * self.values[p]);
                    p += 1;
                } else if cq < cp {
                    indices.push(cq);
                    values.push(b * other.values[q]);
                    q += 1;
                } else {
                    indices.push(cp);
                    values.push(a * self.values[p] + b * other.values[q]);
                    p += 1;
                    q += 1;
                }
            }
            indptr[i + 1] = indices.len();
        }
        SparseOperator {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            values,
            symmetric: self.symmetric && other.symmetric,
        }
    }

    /// Sparse product `self · other`.
    pub fn matmul(&self, other: &SparseOperator) -> SparseOperator {
        assert_eq!(self.ncols, other.nrows);
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        let mut acc = vec![0.0; other.ncols];
        let mut mark = vec![usize::MAX; other.ncols];
        let mut cols: Vec<usize> = Vec::new();
        for i in 0..self.nrows {
            cols.clear();
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = 0.0;
                        cols.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            cols.sort_unstable();
            for &j in &cols {
                indices.push(j);
                values.push(acc[j]);
            }
            indptr[i + 1] = indices.len();
        }
        SparseOperator {
            nrows: self.nrows,
            ncols: other.ncols,
            indptr,
            indices,
            values,
            symmetric: false,
        }
    }

    /// `max |A_ij − A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Verifies the symmetry flag against the entries.
    pub fn check_symmetric(&self, tol: f64) -> bool {
        !self.symmetric || (self.nrows == self.ncols && self.asymmetry() <= tol)
    }

    /// Dense copy (tests and tiny problems only).
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut d = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                d[(i, j)] += v;
            }
        }
        d
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.matvec(y))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
