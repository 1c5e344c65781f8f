//! Compressed sparse row storage. Duplicates are summed in insertion order,
//! so assembly is deterministic for a fixed element loop.

use std::fmt::Write as _;

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseMatrix {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn from_triplets(nrows: usize, ncols: usize, triplets: Vec<(usize, usize, f64)>) -> Self {
        debug_assert!(triplets.iter().all(|&(r, c, _)| r < nrows && c < ncols));
        // bucket by row, then a stable sort within each row: equal keys keep
        // insertion order
        let mut start = vec![0usize; nrows + 1];
        for &(r, _, _) in &triplets {
            start[r + 1] += 1;
        }
        for i in 0..nrows {
            start[i + 1] += start[i];
        }
        let mut fill = start.clone();
        let mut bucket = vec![(0usize, 0.0f64); triplets.len()];
        for (r, c, v) in triplets {
            bucket[fill[r]] = (c, v);
            fill[r] += 1;
        }
        let mut indptr = vec![0; nrows + 1];
        let mut indices = Vec::with_capacity(bucket.len());
        let mut values = Vec::with_capacity(bucket.len());
        for r in 0..nrows {
            let row = &mut bucket[start[r]..start[r + 1]];
            row.sort_by_key(|&(c, _)| c);
            let mut last = None;
            for &(c, v) in row.iter() {
                if last == Some(c) {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    values.push(v);
                    indptr[r + 1] += 1;
                    last = Some(c);
                }
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        SparseMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Stored entries of row `i` as (column, value).
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.indptr[i]..self.indptr[i + 1];
        match self.indices[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// (indptr, indices, values); column indices are sorted within rows.
    pub(crate) fn into_parts(self) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        (self.indptr, self.indices, self.values)
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(
            self.ncols,
            self.nrows,
            self.triplets().map(|(i, j, v)| (j, i, v)).collect(),
        )
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &SparseMatrix, b: f64) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let t = self
            .triplets()
            .map(|(i, j, v)| (i, j, a * v))
            .chain(other.triplets().map(|(i, j, v)| (i, j, b * v)))
            .collect();
        Self::from_triplets(self.nrows, self.ncols, t)
    }

    pub fn scale(&self, a: f64) -> Self {
        SparseMatrix {
            values: self.values.iter().map(|v| a * v).collect(),
            ..self.clone()
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut d = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            d[(i, j)] += v;
        }
        d
    }

    /// MatrixMarket coordinate format, for debugging dumps.
    pub fn to_matrix_market(&self) -> String {
        let mut out = String::new();
        writeln!(out, "%%MatrixMarket matrix coordinate real general").unwrap();
        writeln!(out, "{} {} {}", self.nrows, self.ncols, self.nnz()).unwrap();
        for (i, j, v) in self.triplets() {
            writeln!(out, "{} {} {:e}", i + 1, j + 1, v).unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let m = SparseMatrix::from_triplets(2, 3, vec![(0, 2, 1.0), (1, 0, 2.0), (0, 2, 0.5), (0, 0, -1.0)]);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(0, 2), 1.5);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.mul_vec(&[1.0, 1.0, 2.0]), vec![2.0, 2.0]);
        let t = m.transpose();
        assert_eq!(t.get(2, 0), 1.5);
        assert_eq!(t.nrows(), 3);
    }

    #[test]
    fn combine_and_dump() {
        let a = SparseMatrix::identity(2);
        let b = SparseMatrix::from_triplets(2, 2, vec![(0, 1, 3.0)]);
        let c = a.combine(2.0, &b, -1.0);
        assert_eq!(c.to_dense(), nalgebra::DMatrix::from_row_slice(2, 2, &[2.0, -3.0, 0.0, 2.0]));
        let mm = c.to_matrix_market();
        assert!(mm.starts_with("%%MatrixMarket"));
        assert_eq!(mm.lines().count(), 5);
    }
}
