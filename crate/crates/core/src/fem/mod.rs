//! P1 finite elements on simplicial curves and surfaces.

mod dirichlet;
mod quadrature;
mod solve;
mod sparse;

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::mesh::{Point, SimplicialSurface};

pub use dirichlet::{eliminate_dirichlet, Constraint, DofMap, SparseLinearSystem};
pub use quadrature::{QuadratureRule, MAX_DEGREE};
pub use solve::{solve_sparse, LuCache, DEFAULT_SOLVER_TOL};
pub use sparse::SparseMatrix;

/// Per-simplex surface gradients of the local hat functions, constant on
/// each simplex and tangential to it.
#[derive(Clone, Debug)]
pub struct SurfaceGradientTable {
    dim: usize,
    grads: Vec<Point>,
}

impl SurfaceGradientTable {
    pub fn new(mesh: &SimplicialSurface) -> Result<Self> {
        let d = mesh.ambient_dim();
        mesh.measures()?;
        let mut grads = Vec::with_capacity(d * mesh.num_simplices());
        for j in 0..mesh.num_simplices() {
            let s = mesh.simplex(j);
            let p0 = mesh.vertex(s[0]);
            if d == 2 {
                let e = mesh.vertex(s[1]) - p0;
                let g = e / e.norm_squared();
                grads.push(-g);
                grads.push(g);
            } else {
                // rows of the pseudo-inverse (EᵀE)⁻¹Eᵀ of E = [e1 e2]
                let e1 = mesh.vertex(s[1]) - p0;
                let e2 = mesh.vertex(s[2]) - p0;
                let gram = Matrix2::new(e1.dot(&e1), e1.dot(&e2), e2.dot(&e1), e2.dot(&e2));
                let inv = gram.try_inverse().ok_or_else(|| Error::DegenerateElement {
                    simplex: j,
                    measure: 0.0,
                    threshold: mesh.geom_tolerance(),
                })?;
                let g1 = inv[(0, 0)] * e1 + inv[(0, 1)] * e2;
                let g2 = inv[(1, 0)] * e1 + inv[(1, 1)] * e2;
                grads.push(-g1 - g2);
                grads.push(g1);
                grads.push(g2);
            }
        }
        Ok(SurfaceGradientTable { dim: d, grads })
    }

    pub fn gradients(&self, j: usize) -> &[Point] {
        &self.grads[j * self.dim..(j + 1) * self.dim]
    }
}

/// Coefficient factor in a weighted mass matrix.
#[derive(Clone, Copy, Debug)]
pub enum Coefficient<'a> {
    /// one value per simplex
    Element(&'a [f64]),
    /// one value per vertex, interpolated linearly
    Nodal(&'a [f64]),
}

/// Geometry needed for assembly on one mesh: measures, gradients, normals
/// and the quadrature rule.
pub struct FemSpace<'a> {
    mesh: &'a SimplicialSurface,
    measures: Vec<f64>,
    normals: Vec<Point>,
    grads: SurfaceGradientTable,
    rule: QuadratureRule,
}

type Local = [[f64; 3]; 3];

impl<'a> FemSpace<'a> {
    pub fn new(mesh: &'a SimplicialSurface) -> Result<Self> {
        Ok(FemSpace {
            mesh,
            measures: mesh.measures()?,
            normals: mesh.normals()?,
            grads: SurfaceGradientTable::new(mesh)?,
            rule: QuadratureRule::for_simplex(mesh.ambient_dim(), MAX_DEGREE)?,
        })
    }

    pub fn mesh(&self) -> &SimplicialSurface {
        self.mesh
    }

    pub fn measures(&self) -> &[f64] {
        &self.measures
    }

    pub fn normals(&self) -> &[Point] {
        &self.normals
    }

    pub fn gradients(&self) -> &SurfaceGradientTable {
        &self.grads
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    fn d(&self) -> usize {
        self.mesh.ambient_dim()
    }

    fn n(&self) -> usize {
        self.mesh.num_vertices()
    }

    /// Vertex weights of the lumped inner product: (1/d) Σ_{σ∋q} |σ|.
    pub fn lumped_masses(&self) -> Vec<f64> {
        let d = self.d() as f64;
        let mut m = vec![0.0; self.n()];
        for (j, s) in self.mesh.simplices().enumerate() {
            for &q in s {
                m[q] += self.measures[j] / d;
            }
        }
        m
    }

    /// Lumped integral of a function given by its one-sided vertex limits
    /// `f(simplex, local_vertex)`.
    pub fn lumped_integral(&self, f: impl Fn(usize, usize) -> f64) -> f64 {
        let d = self.d();
        (0..self.mesh.num_simplices())
            .map(|j| self.measures[j] / d as f64 * (0..d).map(|k| f(j, k)).sum::<f64>())
            .sum()
    }

    pub fn lumped_inner_product(&self, u: &[f64], v: &[f64]) -> f64 {
        self.lumped_integral(|j, k| {
            let q = self.mesh.simplex(j)[k];
            u[q] * v[q]
        })
    }

    /// Quadrature integral of `f(simplex, barycentric)`; exact for
    /// polynomial integrands up to `degree` per simplex.
    pub fn exact_integral(&self, degree: usize, f: impl Fn(usize, &[f64; 3]) -> f64) -> Result<f64> {
        if degree > MAX_DEGREE {
            return Err(Error::UnsupportedDegree(degree));
        }
        Ok((0..self.mesh.num_simplices())
            .map(|j| {
                self.measures[j]
                    * self
                        .rule
                        .points
                        .iter()
                        .zip(&self.rule.weights)
                        .map(|(p, w)| w * f(j, p))
                        .sum::<f64>()
            })
            .sum())
    }

    /// Exact L² inner product of two nodal fields.
    pub fn exact_inner_product(&self, u: &[f64], v: &[f64]) -> f64 {
        self.exact_integral(2, |j, b| self.eval(j, u, b) * self.eval(j, v, b))
            .expect("degree 2 is supported")
    }

    /// Value at barycentric point `b` of simplex `j` of a nodal field.
    pub fn eval(&self, j: usize, f: &[f64], b: &[f64; 3]) -> f64 {
        self.mesh
            .simplex(j)
            .iter()
            .enumerate()
            .map(|(k, &q)| b[k] * f[q])
            .sum()
    }

    fn coefficient_at(&self, j: usize, coeffs: &[Coefficient], b: &[f64; 3]) -> f64 {
        coeffs
            .iter()
            .map(|c| match c {
                Coefficient::Element(e) => e[j],
                Coefficient::Nodal(f) => self.eval(j, f, b),
            })
            .product()
    }

    /// ∫_σ c φ_b φ_a for the local hats of simplex `j`.
    pub fn local_mass(&self, j: usize, c: impl Fn(&[f64; 3]) -> f64) -> Local {
        let d = self.d();
        let mut out = [[0.0; 3]; 3];
        for (p, w) in self.rule.points.iter().zip(&self.rule.weights) {
            let cw = w * self.measures[j] * c(p);
            for a in 0..d {
                for b in 0..d {
                    out[a][b] += cw * p[a] * p[b];
                }
            }
        }
        out
    }

    pub fn local_stiffness(&self, j: usize) -> Local {
        let g = self.grads.gradients(j);
        let mut out = [[0.0; 3]; 3];
        for a in 0..g.len() {
            for b in 0..g.len() {
                out[a][b] = self.measures[j] * g[a].dot(&g[b]);
            }
        }
        out
    }

    /// ∫_σ (η·∇_s φ_b) φ_a with η a nodal vector field.
    pub fn local_convective(&self, j: usize, eta: &[Point]) -> Local {
        let d = self.d();
        let s = self.mesh.simplex(j);
        let g = self.grads.gradients(j);
        // ∫ φ_c φ_a = |σ| (1 + δ_ca) / (d (d + 1))
        let base = self.measures[j] / (d * (d + 1)) as f64;
        let mut out = [[0.0; 3]; 3];
        for a in 0..d {
            for b in 0..d {
                out[a][b] = (0..d)
                    .map(|c| {
                        let m = if c == a { 2.0 * base } else { base };
                        m * eta[s[c]].dot(&g[b])
                    })
                    .sum();
            }
        }
        out
    }

    fn assemble(&self, local: impl Fn(usize) -> Local) -> SparseMatrix {
        let d = self.d();
        let mut t = Vec::with_capacity(d * d * self.mesh.num_simplices());
        for (j, s) in self.mesh.simplices().enumerate() {
            let l = local(j);
            for a in 0..d {
                for b in 0..d {
                    t.push((s[a], s[b], l[a][b]));
                }
            }
        }
        SparseMatrix::from_triplets(self.n(), self.n(), t)
    }

    /// S_ij = (∇_s φ_j, ∇_s φ_i).
    pub fn stiffness(&self) -> SparseMatrix {
        self.assemble(|j| self.local_stiffness(j))
    }

    /// Consistent mass matrix.
    pub fn mass(&self) -> SparseMatrix {
        self.assemble(|j| self.local_mass(j, |_| 1.0))
    }

    /// M_ij = ∫ c φ_j φ_i where c is the pointwise product of `coeffs`;
    /// `degree` bounds the polynomial degree of the full integrand.
    pub fn weighted_mass(&self, coeffs: &[Coefficient], degree: usize) -> Result<SparseMatrix> {
        let nodal = coeffs.iter().filter(|c| matches!(c, Coefficient::Nodal(_))).count();
        let needed = 2 + nodal;
        if degree > MAX_DEGREE || needed > MAX_DEGREE {
            return Err(Error::UnsupportedDegree(degree.max(needed)));
        }
        Ok(self.assemble(|j| self.local_mass(j, |b| self.coefficient_at(j, coeffs, b))))
    }

    /// B_ij = (η·∇_s φ_j, φ_i).
    pub fn convective(&self, eta: &[Point]) -> SparseMatrix {
        self.assemble(|j| self.local_convective(j, eta))
    }

    /// A_ij = (η·∇_s φ_j, φ_i) − (η·∇_s φ_i, φ_j), exactly antisymmetric.
    pub fn antisym(&self, eta: &[Point]) -> SparseMatrix {
        let b = self.convective(eta);
        b.combine(1.0, &b.transpose(), -1.0)
    }

    /// Lumped normal coupling (χ ν, η)^h per vertex: (1/d) Σ_{σ∋q} |σ| ν_σ,
    /// which equals the lumped mass times the vertex normal.
    pub fn normal_coupling(&self) -> Vec<Point> {
        let d = self.d() as f64;
        let mut out = vec![Point::zeros(); self.n()];
        for (j, s) in self.mesh.simplices().enumerate() {
            for &q in s {
                out[q] += self.measures[j] / d * self.normals[j];
            }
        }
        out
    }

    /// Per-element surface divergence of a nodal vector field.
    pub fn divergence(&self, v: &[Point]) -> Vec<f64> {
        (0..self.mesh.num_simplices())
            .map(|j| {
                let s = self.mesh.simplex(j);
                self.grads
                    .gradients(j)
                    .iter()
                    .zip(s)
                    .map(|(g, &q)| g.dot(&v[q]))
                    .sum()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate, GeneratorSpec};

    fn p(x: f64, y: f64, z: f64) -> Point {
        Point::new(x, y, z)
    }

    fn unit_segment() -> SimplicialSurface {
        SimplicialSurface::new(2, vec![p(0., 0., 0.), p(1., 0., 0.)], vec![0, 1]).unwrap()
    }

    fn unit_triangle() -> SimplicialSurface {
        SimplicialSurface::new(3, vec![p(0., 0., 0.), p(1., 0., 0.), p(0., 1., 0.)], vec![0, 1, 2])
            .unwrap()
    }

    #[test]
    fn gradient_table_invariants() {
        for mesh in [
            generate(&GeneratorSpec::Sphere { level: 2, radius: 1.3 }).unwrap(),
            generate(&GeneratorSpec::Torus {
                target_elements: 400,
                major: 2.0,
                minor: 0.5,
            })
            .unwrap(),
            generate(&GeneratorSpec::Circle { segments: 7, radius: 0.4 }).unwrap(),
        ] {
            let t = SurfaceGradientTable::new(&mesh).unwrap();
            let nus = mesh.normals().unwrap();
            for j in 0..mesh.num_simplices() {
                let g = t.gradients(j);
                let sum: Point = g.iter().sum();
                let scale = g.iter().map(|v| v.norm()).fold(0.0, f64::max);
                assert!(sum.norm() <= 1e-13 * scale);
                for v in g {
                    assert!(v.dot(&nus[j]).abs() <= 1e-13 * scale);
                }
                // ∇φ_a · (q_b − q_0) = δ_ab − δ_a0
                let s = mesh.simplex(j);
                for (a, ga) in g.iter().enumerate() {
                    for b in 1..s.len() {
                        let e = mesh.vertex(s[b]) - mesh.vertex(s[0]);
                        let want = (a == b) as i32 as f64 - (a == 0) as i32 as f64;
                        assert!((ga.dot(&e) - want).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn lumped_inner_products() {
        let seg = unit_segment();
        let fs = FemSpace::new(&seg).unwrap();
        assert_eq!(fs.lumped_inner_product(&[1.0, 0.0], &[1.0, 0.0]), 0.5);
        let tri = unit_triangle();
        let ft = FemSpace::new(&tri).unwrap();
        assert!((ft.lumped_inner_product(&[1., 0., 0.], &[1., 0., 0.]) - 1.0 / 6.0).abs() < 1e-16);
        let sphere = generate(&GeneratorSpec::Sphere { level: 2, radius: 1.0 }).unwrap();
        let f = FemSpace::new(&sphere).unwrap();
        let one = vec![1.0; sphere.num_vertices()];
        let total = sphere.total_measure().unwrap();
        assert!((f.lumped_inner_product(&one, &one) - total).abs() < 1e-13 * total);
    }

    #[test]
    fn exact_inner_products() {
        let seg = unit_segment();
        let fs = FemSpace::new(&seg).unwrap();
        let hat = [1.0, 0.0];
        assert!((fs.exact_inner_product(&hat, &hat) - 1.0 / 3.0).abs() < 1e-15);
        let quartic = fs.exact_integral(4, |j, b| fs.eval(j, &hat, b).powi(4)).unwrap();
        assert!((quartic - 0.2).abs() < 1e-15);
        assert!(matches!(fs.exact_integral(5, |_, _| 1.0), Err(Error::UnsupportedDegree(5))));

        let tri = unit_triangle();
        let ft = FemSpace::new(&tri).unwrap();
        let v = ft.exact_inner_product(&[1., 0., 0.], &[0., 1., 0.]);
        assert!((v - 1.0 / 24.0).abs() < 1e-16);
    }

    #[test]
    fn stiffness_examples() {
        let two = SimplicialSurface::new(
            2,
            vec![p(0., 0., 0.), p(0.5, 0., 0.), p(1., 0., 0.)],
            vec![0, 1, 1, 2],
        )
        .unwrap();
        let s = FemSpace::new(&two).unwrap().stiffness();
        assert!((s.get(1, 1) - 4.0).abs() < 1e-14);

        let tri = unit_triangle();
        let st = FemSpace::new(&tri).unwrap().stiffness();
        let diag = [st.get(0, 0), st.get(1, 1), st.get(2, 2)];
        for (a, b) in diag.iter().zip([1.0, 0.5, 0.5]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(st.row_sums().iter().all(|r| r.abs() < 1e-15));

        let torus = generate(&GeneratorSpec::Torus {
            target_elements: 800,
            major: 2.0,
            minor: 0.5,
        })
        .unwrap();
        let s = FemSpace::new(&torus).unwrap().stiffness();
        let ones = vec![1.0; torus.num_vertices()];
        let r = s.mul_vec(&ones);
        assert!(r.iter().all(|x| x.abs() <= 1e-12 * s.max_abs()));
        assert!((s.combine(1.0, &s.transpose(), -1.0)).max_abs() < 1e-14 * s.max_abs());
    }

    #[test]
    fn weighted_masses() {
        let seg = unit_segment();
        let fs = FemSpace::new(&seg).unwrap();
        let m = fs.mass();
        let two = fs.weighted_mass(&[Coefficient::Element(&[2.0])], 2).unwrap();
        assert!(two.combine(1.0, &m, -2.0).max_abs() < 1e-15);
        // row sums equal lumped masses
        let sphere = generate(&GeneratorSpec::Sphere { level: 2, radius: 0.7 }).unwrap();
        let f = FemSpace::new(&sphere).unwrap();
        let rs = f.mass().row_sums();
        for (a, b) in rs.iter().zip(f.lumped_masses()) {
            assert!((a - b).abs() < 1e-13 * b);
        }
        let k = vec![1.0; sphere.num_vertices()];
        assert!(f
            .weighted_mass(&[Coefficient::Nodal(&k), Coefficient::Nodal(&k), Coefficient::Nodal(&k)], 5)
            .is_err());
    }

    #[test]
    fn nodal_weighted_mass_on_segment_matches_moments() {
        // c = (k − kb) k with k linear from k0 to k1; integrate in closed
        // form via ∫ λ0^a λ1^b = a! b! / (a + b + 1)!.
        let seg = unit_segment();
        let fs = FemSpace::new(&seg).unwrap();
        let (k0, k1, kb) = (-1.3, 0.4, -0.5);
        let k = [k0, k1];
        let shifted = [k0 - kb, k1 - kb];
        let m = fs
            .weighted_mass(&[Coefficient::Nodal(&shifted), Coefficient::Nodal(&k)], 4)
            .unwrap();
        let mom = |a: u32, b: u32| {
            let f = |n: u32| (1..=n).map(f64::from).product::<f64>();
            f(a) * f(b) / f(a + b + 1)
        };
        // c φ_0 φ_0 expanded in λ0, λ1 monomials
        let (s0, s1) = (shifted[0], shifted[1]);
        let c00 = s0 * k0;
        let c11 = s1 * k1;
        let c01 = s0 * k1 + s1 * k0;
        let entry = |a: u32, b: u32| c00 * mom(a + 2, b) + c01 * mom(a + 1, b + 1) + c11 * mom(a, b + 2);
        assert!((m.get(0, 0) - entry(2, 0)).abs() < 1e-14);
        assert!((m.get(0, 1) - entry(1, 1)).abs() < 1e-14);
        assert!((m.get(1, 1) - entry(0, 2)).abs() < 1e-14);
    }

    #[test]
    fn antisym_examples() {
        let seg = unit_segment();
        let fs = FemSpace::new(&seg).unwrap();
        let c = 0.7;
        let a = fs.antisym(&[p(c, 0., 0.), p(c, 0., 0.)]);
        assert!((a.get(0, 1) - c).abs() < 1e-15);
        assert!((a.get(1, 0) + c).abs() < 1e-15);
        let zero = fs.antisym(&[Point::zeros(); 2]);
        assert_eq!(zero.max_abs(), 0.0);

        let sphere = generate(&GeneratorSpec::Sphere { level: 2, radius: 1.0 }).unwrap();
        let f = FemSpace::new(&sphere).unwrap();
        let eta: Vec<Point> = sphere.vertices().iter().map(|v| p(v.y * v.z, -v.x, v.x * v.x)).collect();
        let a = f.antisym(&eta);
        let sum = a.combine(1.0, &a.transpose(), 1.0);
        assert_eq!(sum.max_abs(), 0.0);
        let x: Vec<f64> = (0..sphere.num_vertices()).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let ax = a.mul_vec(&x);
        let q: f64 = x.iter().zip(&ax).map(|(a, b)| a * b).sum();
        assert!(q.abs() < 1e-13 * a.max_abs() * x.iter().map(|v| v * v).sum::<f64>());
    }

    #[test]
    fn normal_coupling_matches_vertex_normals() {
        let flat = SimplicialSurface::new(
            3,
            vec![p(0., 0., 0.), p(1., 0., 0.), p(0., 1., 0.), p(1., 1., 0.)],
            vec![0, 1, 2, 1, 3, 2],
        )
        .unwrap();
        let f = FemSpace::new(&flat).unwrap();
        for (n, m) in f.normal_coupling().iter().zip(f.lumped_masses()) {
            assert_eq!(n.x, 0.0);
            assert_eq!(n.y, 0.0);
            assert!((n.z - m).abs() < 1e-16);
        }
        let poly = generate(&GeneratorSpec::Circle { segments: 24, radius: 1.0 }).unwrap();
        let f = FemSpace::new(&poly).unwrap();
        let omega = poly.vertex_normals();
        for ((n, m), w) in f.normal_coupling().iter().zip(f.lumped_masses()).zip(&omega) {
            assert!((n / m - w).norm() < 1e-15);
        }
    }

    #[test]
    fn vertex_normal_projection_identity() {
        // (ω, η)^h = (ν, η)^h for every nodal basis vector η
        let mesh = generate(&GeneratorSpec::Torus {
            target_elements: 300,
            major: 2.0,
            minor: 0.7,
        })
        .unwrap();
        let f = FemSpace::new(&mesh).unwrap();
        let omega = mesh.vertex_normals();
        let nus = mesh.normals().unwrap();
        for q in (0..mesh.num_vertices()).step_by(7) {
            for c in 0..3 {
                let lhs = f.lumped_integral(|j, k| {
                    if mesh.simplex(j)[k] == q {
                        omega[q][c]
                    } else {
                        0.0
                    }
                });
                let rhs = f.lumped_integral(|j, k| if mesh.simplex(j)[k] == q { nus[j][c] } else { 0.0 });
                assert!((lhs - rhs).abs() < 1e-14);
            }
        }
    }
}
