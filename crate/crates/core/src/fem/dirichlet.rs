use super::sparse::SparseMatrix;
use crate::error::{Error, Result};

/// Prescribed value of one degree of freedom.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constraint {
    pub field: usize,
    pub vertex: usize,
    pub value: f64,
}

/// Numbering of `nfields × nvertices` unknowns (global index
/// `field * nvertices + vertex`) into free indices, with the stored value of
/// every constrained unknown.
#[derive(Clone, Debug)]
pub struct DofMap {
    nfields: usize,
    nvertices: usize,
    free: Vec<Option<usize>>,
    fixed: Vec<f64>,
    nfree: usize,
}

impl DofMap {
    pub fn new(nfields: usize, nvertices: usize, constraints: &[Constraint]) -> Result<Self> {
        let n = nfields * nvertices;
        let mut value: Vec<Option<f64>> = vec![None; n];
        for c in constraints {
            assert!(c.field < nfields && c.vertex < nvertices, "constraint out of range");
            let g = c.field * nvertices + c.vertex;
            match value[g] {
                Some(v) if v != c.value => {
                    return Err(Error::ConflictingConstraint {
                        field: c.field,
                        vertex: c.vertex,
                        first: v,
                        second: c.value,
                    })
                }
                _ => value[g] = Some(c.value),
            }
        }
        let mut free = vec![None; n];
        let mut fixed = vec![0.0; n];
        let mut nfree = 0;
        for g in 0..n {
            match value[g] {
                Some(v) => fixed[g] = v,
                None => {
                    free[g] = Some(nfree);
                    nfree += 1;
                }
            }
        }
        Ok(DofMap {
            nfields,
            nvertices,
            free,
            fixed,
            nfree,
        })
    }

    pub fn global(&self, field: usize, vertex: usize) -> usize {
        field * self.nvertices + vertex
    }

    pub fn len(&self) -> usize {
        self.nfields * self.nvertices
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_free(&self) -> usize {
        self.nfree
    }

    pub fn free_index(&self, global: usize) -> Option<usize> {
        self.free[global]
    }

    /// Constrained value, `None` for free unknowns.
    pub fn fixed_value(&self, global: usize) -> Option<f64> {
        match self.free[global] {
            Some(_) => None,
            None => Some(self.fixed[global]),
        }
    }

    /// Full vector from free values plus stored boundary data.
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nfree);
        (0..self.len())
            .map(|g| match self.free[g] {
                Some(i) => x[i],
                None => self.fixed[g],
            })
            .collect()
    }
}

/// Square system over the free unknowns of a [`DofMap`].
#[derive(Clone, Debug)]
pub struct SparseLinearSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    pub dofs: DofMap,
}

impl SparseLinearSystem {
    /// Eliminates constrained rows and columns while assembling from global
    /// triplets; constrained column contributions move to the right side.
    pub fn from_triplets(
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
        rhs: &[f64],
        dofs: DofMap,
    ) -> Self {
        assert_eq!(rhs.len(), dofs.len());
        let mut b: Vec<f64> = (0..dofs.len())
            .filter(|&g| dofs.free[g].is_some())
            .map(|g| rhs[g])
            .collect();
        let mut t = Vec::new();
        for (r, c, v) in triplets {
            let Some(i) = dofs.free[r] else { continue };
            match dofs.free[c] {
                Some(j) => t.push((i, j, v)),
                None => b[i] -= v * dofs.fixed[c],
            }
        }
        let n = dofs.num_free();
        SparseLinearSystem {
            matrix: SparseMatrix::from_triplets(n, n, t),
            rhs: b,
            dofs,
        }
    }

    /// Solves and returns the full vector including constrained values.
    pub fn solve(&self, tol: f64, context: &'static str) -> Result<Vec<f64>> {
        let x = super::solve::solve_sparse_ctx(&self.matrix, &self.rhs, tol, context, None)?;
        Ok(self.dofs.expand(&x))
    }

    pub fn solve_cached(
        &self,
        tol: f64,
        context: &'static str,
        cache: &mut super::solve::LuCache,
    ) -> Result<Vec<f64>> {
        let x = super::solve::solve_sparse_ctx(&self.matrix, &self.rhs, tol, context, Some(cache))?;
        Ok(self.dofs.expand(&x))
    }
}

pub fn eliminate_dirichlet(matrix: &SparseMatrix, rhs: &[f64], dofs: DofMap) -> SparseLinearSystem {
    assert_eq!(matrix.nrows(), dofs.len());
    assert_eq!(matrix.ncols(), dofs.len());
    SparseLinearSystem::from_triplets(matrix.triplets(), rhs, dofs)
}
