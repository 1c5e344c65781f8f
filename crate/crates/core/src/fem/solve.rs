//! Sparse direct solve: faer LU with partial pivoting, followed by
//! iterative refinement against the CSR residual.

use std::sync::Once;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, SymbolicSparseColMat};

use super::sparse::SparseMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_SOLVER_TOL: f64 = 1e-10;

const MAX_REFINEMENTS: usize = 4;

static SEQUENTIAL: Once = Once::new();

/// Reuses the symbolic factorization across systems with identical sparsity
/// (the mesh connectivity never changes during a run).
#[derive(Default)]
pub struct LuCache {
    pattern: Option<(Vec<usize>, Vec<usize>)>,
    symbolic: Option<SymbolicLu<usize>>,
}

impl LuCache {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Solves `A x = b`, requiring ‖Ax − b‖ ≤ tol·‖b‖.
pub fn solve_sparse(matrix: &SparseMatrix, rhs: &[f64], tol: f64) -> Result<Vec<f64>> {
    solve_sparse_ctx(matrix, rhs, tol, "linear solve", None)
}

fn singular(context: &'static str, detail: impl Into<String>) -> Error {
    Error::SingularMatrix {
        context,
        detail: detail.into(),
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn solve_sparse_ctx(
    matrix: &SparseMatrix,
    rhs: &[f64],
    tol: f64,
    context: &'static str,
    cache: Option<&mut LuCache>,
) -> Result<Vec<f64>> {
    let n = matrix.nrows();
    if matrix.ncols() != n || rhs.len() != n {
        return Err(singular(
            context,
            format!("shape {}x{} with rhs {}", n, matrix.ncols(), rhs.len()),
        ));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    SEQUENTIAL.call_once(|| faer::set_global_parallelism(faer::Par::Seq));

    // CSC of A is CSR of Aᵀ
    let (col_ptr, row_idx, values) = matrix.transpose().into_parts();
    let a = SparseColMat::<usize, f64>::new(SymbolicSparseColMat::new_checked(n, n, col_ptr, None, row_idx), values);

    let symbolic = match cache {
        Some(cache) => {
            let sym = a.symbolic();
            let same = cache
                .pattern
                .as_ref()
                .is_some_and(|(cp, ri)| cp == sym.col_ptr() && ri == sym.row_idx());
            if !same || cache.symbolic.is_none() {
                cache.symbolic = Some(
                    SymbolicLu::try_new(sym).map_err(|e| singular(context, format!("{e:?}")))?,
                );
                cache.pattern = Some((sym.col_ptr().to_vec(), sym.row_idx().to_vec()));
            }
            cache.symbolic.clone().unwrap()
        }
        None => SymbolicLu::try_new(a.symbolic()).map_err(|e| singular(context, format!("{e:?}")))?,
    };
    let lu = Lu::try_new_with_symbolic(symbolic, a.as_ref())
        .map_err(|e| singular(context, format!("{e:?}")))?;

    let bnorm = norm(rhs);
    let mut x = rhs.to_vec();
    lu.solve_in_place(faer::col::ColMut::from_slice_mut(&mut x).as_mat_mut());
    let mut best = x.clone();
    let mut best_rel = f64::INFINITY;
    for it in 0..=MAX_REFINEMENTS {
        if x.iter().any(|v| !v.is_finite()) {
            break;
        }
        let ax = matrix.mul_vec(&x);
        let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, y)| b - y).collect();
        let rel = if bnorm > 0.0 { norm(&r) / bnorm } else { norm(&r) };
        if rel < best_rel {
            best_rel = rel;
            best.copy_from_slice(&x);
        } else {
            break;
        }
        // refine past the tolerance until roundoff stagnates
        if rel <= tol * 1e-3 || it == MAX_REFINEMENTS {
            break;
        }
        lu.solve_in_place(faer::col::ColMut::from_slice_mut(&mut r).as_mat_mut());
        for (xi, di) in x.iter_mut().zip(&r) {
            *xi += di;
        }
    }
    if !best_rel.is_finite() || best.iter().any(|v| !v.is_finite()) {
        return Err(singular(context, "factorization produced non-finite values"));
    }
    if !(best_rel <= tol) {
        return Err(singular(
            context,
            format!("relative residual {best_rel:e} exceeds tolerance {tol:e}"),
        ));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_two_by_two() {
        let b = vec![1.0, -2.0, 3.5];
        assert_eq!(solve_sparse(&SparseMatrix::identity(3), &b, 1e-10).unwrap(), b);
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0)]);
        let x = solve_sparse(&a, &[3.0, 3.0], 1e-10).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]);
        assert!(matches!(
            solve_sparse(&a, &[1.0, 0.0], 1e-10),
            Err(Error::SingularMatrix { .. })
        ));
        let empty_row = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0)]);
        assert!(solve_sparse(&empty_row, &[1.0, 1.0], 1e-10).is_err());
    }

    #[test]
    fn cache_reuse_is_deterministic() {
        let a = SparseMatrix::from_triplets(
            3,
            3,
            vec![(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0), (2, 2, 2.0), (1, 2, -1.0)],
        );
        let b = [1.0, 2.0, 3.0];
        let mut cache = LuCache::new();
        let x1 = solve_sparse_ctx(&a, &b, 1e-12, "t", Some(&mut cache)).unwrap();
        let x2 = solve_sparse_ctx(&a, &b, 1e-12, "t", Some(&mut cache)).unwrap();
        let x3 = solve_sparse(&a, &b, 1e-12).unwrap();
        assert_eq!(x1, x2);
        assert_eq!(x1, x3);
    }
}
