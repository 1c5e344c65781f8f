//! Linear systems of the two stages and of the initial curvature solve.

use crate::error::{Error, Result};
use crate::fem::{Constraint, DofMap, FemSpace, LuCache, SparseLinearSystem};
use crate::mesh::{BoundaryCondition, Point, SimplicialSurface};

use super::TangentialMode;

/// Approximation of |∇_s ν|² entering stage 1.
#[derive(Clone, Debug)]
pub enum WeightField {
    /// piecewise constant, from the normalized vertex normals
    Element(Vec<f64>),
    /// nodal values, interpolated linearly
    Nodal(Vec<f64>),
}

impl WeightField {
    fn at(&self, fs: &FemSpace, j: usize, b: &[f64; 3]) -> f64 {
        match self {
            WeightField::Element(w) => w[j],
            WeightField::Nodal(w) => fs.eval(j, w, b),
        }
    }
}

/// Inputs of stage 1 on Γ^m.
pub struct Stage1Input<'a> {
    pub mesh: &'a SimplicialSurface,
    /// ϰ^m carried to Γ^m
    pub curvature: &'a [f64],
    pub weight: &'a WeightField,
    /// per-element √J^m
    pub sqrt_jacobian: &'a [f64],
    /// nodal 𝒱^m = (id_m − id_{m−1}) / Δt
    pub mesh_velocity: &'a [Point],
    pub kappa_bar: f64,
    pub dt: f64,
}

/// Normal velocity V^{m+1} and curvature ϰ^{m+1}, both nodal on Γ^m, plus
/// the energy terms of the stability bound evaluated with the exact inner
/// product on Γ^m.
#[derive(Clone, Debug)]
pub struct Stage1Output {
    pub velocity: Vec<f64>,
    pub curvature: Vec<f64>,
    /// ½ ‖ϰ^{m+1} − κ̄‖²_m
    pub energy: f64,
    /// Δt ‖V^{m+1}‖²_m
    pub dissipation: f64,
}

const V: usize = 0;
const U: usize = 1;

/// Builds the stage-1 system in the unknowns (V, u = ϰ − κ̄). Rows of the V
/// block are the tests φ ∈ V_0, rows of the u block the tests χ ∈ V_∂1.
pub fn stage1_system(input: &Stage1Input) -> Result<SparseLinearSystem> {
    let mesh = input.mesh;
    let fs = FemSpace::new(mesh)?;
    let k = mesh.num_vertices();
    let d = mesh.ambient_dim();
    let kb = input.kappa_bar;
    let dt = input.dt;
    let shifted: Vec<f64> = input.curvature.iter().map(|x| x - kb).collect();

    let mut constraints = Vec::new();
    for q in mesh.boundary_vertices() {
        constraints.push(Constraint { field: V, vertex: q, value: 0.0 });
        if mesh.vertex_condition(q) == Some(BoundaryCondition::Navier) {
            constraints.push(Constraint { field: U, vertex: q, value: 0.0 });
        }
    }
    let dofs = DofMap::new(2, k, &constraints)?;

    let mut rhs = vec![0.0; 2 * k];
    let mut t = Vec::with_capacity(4 * d * d * mesh.num_simplices());
    for (j, s) in mesh.simplices().enumerate() {
        let m = fs.local_mass(j, |_| 1.0);
        let st = fs.local_stiffness(j);
        let mc = fs.local_mass(j, |b| {
            let km = fs.eval(j, input.curvature, b);
            input.weight.at(&fs, j, b) - 0.5 * (km - kb) * km
        });
        let c = fs.local_convective(j, input.mesh_velocity);
        for a in 0..d {
            let (va, ua) = (V * k + s[a], U * k + s[a]);
            for bb in 0..d {
                let (vb, ub) = (V * k + s[bb], U * k + s[bb]);
                let b_ab = -st[a][bb] + mc[a][bb];
                t.push((va, vb, m[a][bb]));
                t.push((va, ub, b_ab));
                t.push((ua, vb, -b_ab));
                t.push((ua, ub, m[a][bb] / dt - 0.5 * (c[a][bb] - c[bb][a])));
                rhs[ua] += input.sqrt_jacobian[j] * m[a][bb] * shifted[s[bb]] / dt;
            }
        }
    }
    Ok(SparseLinearSystem::from_triplets(t, &rhs, dofs))
}

pub fn stage1_solve(input: &Stage1Input, tol: f64, cache: Option<&mut LuCache>) -> Result<Stage1Output> {
    let sys = stage1_system(input)?;
    let x = match cache {
        Some(c) => sys.solve_cached(tol, "stage 1", c)?,
        None => sys.solve(tol, "stage 1")?,
    };
    let k = input.mesh.num_vertices();
    let (velocity, u) = (x[..k].to_vec(), &x[k..]);
    let fs = FemSpace::new(input.mesh)?;
    let energy = 0.5 * fs.exact_inner_product(u, u);
    let dissipation = input.dt * fs.exact_inner_product(&velocity, &velocity);
    let curvature = u.iter().map(|u| u + input.kappa_bar).collect();
    Ok(Stage1Output {
        velocity,
        curvature,
        energy,
        dissipation,
    })
}

/// New vertex positions and the multiplier κ^{m+1}.
#[derive(Clone, Debug)]
pub struct Stage2Output {
    pub positions: Vec<Point>,
    pub kappa: Vec<f64>,
}

/// Builds the stage-2 system. Unknowns are the d components of the
/// displacement X − id (BGN) or of the velocity (X − id)/Δt (MDR),
/// followed by κ. `velocity = None` gives zero normal velocity.
pub fn stage2_system(
    mesh: &SimplicialSurface,
    velocity: Option<&[f64]>,
    dt: f64,
    mode: TangentialMode,
    kappa_bar: f64,
) -> Result<SparseLinearSystem> {
    let fs = FemSpace::new(mesh)?;
    let k = mesh.num_vertices();
    let d = mesh.ambient_dim();
    let kf = d; // field index of κ

    let mut constraints = Vec::new();
    for q in mesh.boundary_vertices() {
        for c in 0..d {
            constraints.push(Constraint { field: c, vertex: q, value: 0.0 });
        }
        constraints.push(Constraint { field: kf, vertex: q, value: kappa_bar });
    }
    let dofs = DofMap::new(d + 1, k, &constraints)?;

    let mut rhs = vec![0.0; (d + 1) * k];
    let mut t = Vec::with_capacity(d * d * d * mesh.num_simplices() + 2 * d * k);
    for (j, s) in mesh.simplices().enumerate() {
        let st = fs.local_stiffness(j);
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    t.push((c * k + s[a], c * k + s[b], st[a][b]));
                    if mode == TangentialMode::Bgn {
                        rhs[c * k + s[a]] -= st[a][b] * mesh.vertex(s[b])[c];
                    }
                }
            }
        }
        if let Some(v) = velocity {
            let m = fs.local_mass(j, |_| 1.0);
            for a in 0..d {
                for b in 0..d {
                    let scale = if mode == TangentialMode::Bgn { dt } else { 1.0 };
                    rhs[kf * k + s[a]] += scale * m[a][b] * v[s[b]];
                }
            }
        }
    }
    for (q, n) in fs.normal_coupling().iter().enumerate() {
        for c in 0..d {
            t.push((c * k + q, kf * k + q, n[c]));
            t.push((kf * k + q, c * k + q, n[c]));
        }
    }
    Ok(SparseLinearSystem::from_triplets(t, &rhs, dofs))
}

pub fn stage2_solve(
    mesh: &SimplicialSurface,
    velocity: Option<&[f64]>,
    dt: f64,
    mode: TangentialMode,
    kappa_bar: f64,
    tol: f64,
    cache: Option<&mut LuCache>,
) -> Result<Stage2Output> {
    let sys = stage2_system(mesh, velocity, dt, mode, kappa_bar)?;
    let solved = match cache {
        Some(c) => sys.solve_cached(tol, "stage 2", c),
        None => sys.solve(tol, "stage 2"),
    };
    let x = solved.map_err(|e| match e {
        Error::SingularMatrix { context, detail } => Error::SingularMatrix {
            context,
            detail: format!(
                "{detail}; assumption A1 {}",
                if mesh.assumption_a1() { "holds" } else { "fails" }
            ),
        },
        other => other,
    })?;
    let k = mesh.num_vertices();
    let d = mesh.ambient_dim();
    let scale = if mode == TangentialMode::Bgn { 1.0 } else { dt };
    let positions = (0..k)
        .map(|q| {
            let mut p = *mesh.vertex(q);
            if !mesh.is_boundary(q) {
                for c in 0..d {
                    p[c] += scale * x[c * k + q];
                }
            }
            p
        })
        .collect();
    Ok(Stage2Output {
        positions,
        kappa: x[d * k..].to_vec(),
    })
}
