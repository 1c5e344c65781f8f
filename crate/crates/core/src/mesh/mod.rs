//! Oriented simplicial meshes for polygonal curves in R² and triangulated
//! surfaces in R³.
//!
//! A [`SimplicialSurface`] always stores points as 3-vectors; for curves the
//! third coordinate is zero and ignored by all geometric queries. Simplices
//! are stored flat, `ambient_dim` vertex indices per simplex, in the order
//! that defines their orientation.

mod generate;
mod io;

use std::collections::{BTreeMap, HashMap};

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::fem::SurfaceGradientTable;

pub use generate::{generate, GeneratorSpec};
pub use io::{
    format_mesh, load_boundary_labels, load_mesh, parse_mesh, save_boundary_labels, save_mesh, MeshFormat,
};

pub type Point = Vector3<f64>;

/// Relative factor for degenerate-element detection, scaled by
/// `diam^(d-1)` of the mesh bounding box.
pub const GEOM_EPS_FACTOR: f64 = 1e-14;

/// Vertex normals shorter than this are rejected.
pub const NORMAL_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryCondition {
    /// Fixed boundary, curvature equal to the spontaneous curvature.
    Navier,
    /// Fixed boundary, conormal derivative of the normal velocity vanishes.
    Clamped,
}

impl BoundaryCondition {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryCondition::Navier => "navier",
            BoundaryCondition::Clamped => "clamped",
        }
    }
}

impl std::str::FromStr for BoundaryCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "navier" => Ok(BoundaryCondition::Navier),
            "clamped" => Ok(BoundaryCondition::Clamped),
            other => Err(Error::InvalidConfig(format!(
                "unknown boundary condition '{other}' (expected navier or clamped)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VertexLabel {
    Interior,
    Boundary(usize),
}

#[derive(Clone, Debug)]
pub struct SimplicialSurface {
    dim: usize,
    vertices: Vec<Point>,
    simplices: Vec<usize>,
    labels: Vec<VertexLabel>,
    conditions: BTreeMap<usize, BoundaryCondition>,
}

impl SimplicialSurface {
    /// Builds and validates a mesh. Every boundary vertex is tagged with
    /// boundary part 0, which is assigned the Navier condition.
    pub fn new(dim: usize, vertices: Vec<Point>, simplices: Vec<usize>) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidMesh(format!("ambient dimension {dim} not in {{2, 3}}")));
        }
        if simplices.len() % dim != 0 {
            return Err(Error::InvalidMesh(format!(
                "simplex index list of length {} is not a multiple of {dim}",
                simplices.len()
            )));
        }
        let mut vertices = vertices;
        if dim == 2 {
            for v in &mut vertices {
                v.z = 0.0;
            }
        }
        let mut mesh = SimplicialSurface {
            dim,
            labels: vec![VertexLabel::Interior; vertices.len()],
            vertices,
            simplices,
            conditions: BTreeMap::new(),
        };
        mesh.check_connectivity()?;
        for q in mesh.boundary_vertex_set() {
            mesh.labels[q] = VertexLabel::Boundary(0);
        }
        if mesh.labels.iter().any(|l| *l != VertexLabel::Interior) {
            mesh.conditions.insert(0, BoundaryCondition::Navier);
        }
        mesh.check_measures()?;
        Ok(mesh)
    }

    /// Replaces the boundary labels. Boundary vertices must be exactly the
    /// vertices lying on boundary facets.
    pub fn with_labels(mut self, labels: Vec<VertexLabel>) -> Result<Self> {
        if labels.len() != self.vertices.len() {
            return Err(Error::InvalidMesh(format!(
                "{} labels for {} vertices",
                labels.len(),
                self.vertices.len()
            )));
        }
        let on_boundary = self.boundary_vertex_set();
        for (q, label) in labels.iter().enumerate() {
            let tagged = matches!(label, VertexLabel::Boundary(_));
            if tagged != on_boundary.contains(&q) {
                return Err(Error::InvalidMesh(format!(
                    "vertex {q} labelled {label:?} but {} a boundary facet",
                    if tagged { "lies on no" } else { "lies on" }
                )));
            }
        }
        self.labels = labels;
        let parts = self.boundary_parts();
        self.conditions.retain(|p, _| parts.contains(p));
        for p in parts {
            self.conditions.entry(p).or_insert(BoundaryCondition::Navier);
        }
        Ok(self)
    }

    /// Relabels boundary vertices so that each connected component of the
    /// boundary gets its own part id, numbered by smallest vertex index.
    pub fn split_boundary_components(self) -> Self {
        let k = self.vertices.len();
        let mut parent: Vec<usize> = (0..k).collect();
        fn find(parent: &mut [usize], mut a: usize) -> usize {
            while parent[a] != a {
                parent[a] = parent[parent[a]];
                a = parent[a];
            }
            a
        }
        for facet in self.boundary_facets() {
            if let [a, b] = facet[..] {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
        let mut ids: BTreeMap<usize, usize> = BTreeMap::new();
        let mut labels = self.labels.clone();
        for q in 0..k {
            if let VertexLabel::Boundary(_) = self.labels[q] {
                let root = find(&mut parent, q);
                let next = ids.len();
                let id = *ids.entry(root).or_insert(next);
                labels[q] = VertexLabel::Boundary(id);
            }
        }
        self.with_labels(labels)
            .expect("relabelling preserves the boundary vertex set")
    }

    pub fn with_condition(mut self, part: usize, condition: BoundaryCondition) -> Result<Self> {
        if !self.boundary_parts().contains(&part) {
            return Err(Error::InvalidMesh(format!("mesh has no boundary part {part}")));
        }
        self.conditions.insert(part, condition);
        Ok(self)
    }

    pub fn with_all_conditions(mut self, condition: BoundaryCondition) -> Self {
        for c in self.conditions.values_mut() {
            *c = condition;
        }
        self
    }

    /// Same connectivity and labels, new vertex positions.
    pub fn with_vertices(&self, vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::InvalidMesh(format!(
                "{} positions for {} vertices",
                vertices.len(),
                self.vertices.len()
            )));
        }
        let mut mesh = SimplicialSurface {
            vertices,
            ..self.clone()
        };
        if mesh.dim == 2 {
            for v in &mut mesh.vertices {
                v.z = 0.0;
            }
        }
        Ok(mesh)
    }

    pub fn ambient_dim(&self) -> usize {
        self.dim
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_simplices(&self) -> usize {
        self.simplices.len() / self.dim
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, q: usize) -> &Point {
        &self.vertices[q]
    }

    pub fn simplex(&self, j: usize) -> &[usize] {
        &self.simplices[j * self.dim..(j + 1) * self.dim]
    }

    pub fn simplices(&self) -> impl Iterator<Item = &[usize]> {
        self.simplices.chunks_exact(self.dim)
    }

    pub fn labels(&self) -> &[VertexLabel] {
        &self.labels
    }

    pub fn label(&self, q: usize) -> VertexLabel {
        self.labels[q]
    }

    pub fn conditions(&self) -> &BTreeMap<usize, BoundaryCondition> {
        &self.conditions
    }

    /// Boundary condition of a vertex, `None` for interior vertices.
    pub fn vertex_condition(&self, q: usize) -> Option<BoundaryCondition> {
        match self.labels[q] {
            VertexLabel::Interior => None,
            VertexLabel::Boundary(p) => Some(
                self.conditions
                    .get(&p)
                    .copied()
                    .unwrap_or(BoundaryCondition::Navier),
            ),
        }
    }

    pub fn is_boundary(&self, q: usize) -> bool {
        matches!(self.labels[q], VertexLabel::Boundary(_))
    }

    pub fn has_boundary(&self) -> bool {
        self.labels.iter().any(|l| matches!(l, VertexLabel::Boundary(_)))
    }

    pub fn boundary_parts(&self) -> Vec<usize> {
        let mut parts: Vec<usize> = self
            .labels
            .iter()
            .filter_map(|l| match l {
                VertexLabel::Boundary(p) => Some(*p),
                VertexLabel::Interior => None,
            })
            .collect();
        parts.sort_unstable();
        parts.dedup();
        parts
    }

    pub fn boundary_vertices(&self) -> Vec<usize> {
        (0..self.num_vertices()).filter(|&q| self.is_boundary(q)).collect()
    }

    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.num_vertices()).filter(|&q| !self.is_boundary(q)).collect()
    }

    /// Facets (vertices for curves, edges for surfaces) that belong to exactly
    /// one simplex, in the orientation induced by that simplex.
    pub fn boundary_facets(&self) -> Vec<Vec<usize>> {
        let mut count: HashMap<Vec<usize>, (usize, Vec<usize>)> = HashMap::new();
        for s in self.simplices() {
            for (_, facet) in oriented_facets(s) {
                let mut key = facet.clone();
                key.sort_unstable();
                let e = count.entry(key).or_insert((0, facet));
                e.0 += 1;
            }
        }
        let mut out: Vec<Vec<usize>> = count
            .into_values()
            .filter(|(n, _)| *n == 1)
            .map(|(_, f)| f)
            .collect();
        out.sort();
        out
    }

    fn boundary_vertex_set(&self) -> std::collections::BTreeSet<usize> {
        self.boundary_facets().into_iter().flatten().collect()
    }

    fn check_connectivity(&self) -> Result<()> {
        let k = self.vertices.len();
        let mut seen = std::collections::HashSet::new();
        for (j, s) in self.simplices().enumerate() {
            if let Some(&bad) = s.iter().find(|&&q| q >= k) {
                return Err(Error::InvalidMesh(format!(
                    "simplex {j} references vertex {bad}, mesh has {k}"
                )));
            }
            let mut key = s.to_vec();
            key.sort_unstable();
            if key.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidMesh(format!("simplex {j} repeats a vertex")));
            }
            if !seen.insert(key) {
                return Err(Error::InvalidMesh(format!("simplex {j} is a duplicate")));
            }
        }
        // Interior facets must be shared by exactly two simplices inducing
        // opposite orientations.
        let mut induced: HashMap<Vec<usize>, Vec<i8>> = HashMap::new();
        for s in self.simplices() {
            for (sign, facet) in oriented_facets(s) {
                let (key, parity) = sorted_with_parity(&facet);
                induced.entry(key).or_default().push(sign * parity);
            }
        }
        for (facet, signs) in induced {
            match signs.len() {
                1 => {}
                2 if signs[0] != signs[1] => {}
                2 => {
                    return Err(Error::InvalidMesh(format!(
                        "inconsistent orientation across facet {facet:?}"
                    )))
                }
                n => {
                    return Err(Error::InvalidMesh(format!(
                        "non-manifold facet {facet:?} shared by {n} simplices"
                    )))
                }
            }
        }
        Ok(())
    }

    fn check_measures(&self) -> Result<()> {
        self.measures().map(|_| ())
    }

    pub fn bounding_box_diameter(&self) -> f64 {
        let mut lo = Point::repeat(f64::INFINITY);
        let mut hi = Point::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        if self.vertices.is_empty() {
            0.0
        } else {
            (hi - lo).norm()
        }
    }

    /// Degeneracy threshold for element measures.
    pub fn geom_tolerance(&self) -> f64 {
        GEOM_EPS_FACTOR * self.bounding_box_diameter().powi(self.dim as i32 - 1)
    }

    /// The wedge product of the edge vectors of simplex `j`. For curves this
    /// is the edge vector rotated clockwise by 90°, so a counterclockwise
    /// curve has outward normals.
    pub fn orientation_vector(&self, j: usize) -> Point {
        let s = self.simplex(j);
        let p0 = self.vertices[s[0]];
        let e1 = self.vertices[s[1]] - p0;
        if self.dim == 2 {
            Point::new(e1.y, -e1.x, 0.0)
        } else {
            e1.cross(&(self.vertices[s[2]] - p0))
        }
    }

    fn raw_measure(&self, j: usize) -> f64 {
        let n = self.orientation_vector(j).norm();
        if self.dim == 2 {
            n
        } else {
            0.5 * n
        }
    }

    pub fn element_measure(&self, j: usize) -> Result<f64> {
        self.checked_measure(j, self.geom_tolerance())
    }

    fn checked_measure(&self, j: usize, threshold: f64) -> Result<f64> {
        let m = self.raw_measure(j);
        if !(m > threshold) {
            return Err(Error::DegenerateElement {
                simplex: j,
                measure: m,
                threshold,
            });
        }
        Ok(m)
    }

    pub fn element_normal(&self, j: usize) -> Result<Point> {
        self.element_measure(j)?;
        let n = self.orientation_vector(j);
        Ok(n / n.norm())
    }

    pub fn measures(&self) -> Result<Vec<f64>> {
        let tol = self.geom_tolerance();
        (0..self.num_simplices()).map(|j| self.checked_measure(j, tol)).collect()
    }

    pub fn normals(&self) -> Result<Vec<Point>> {
        self.measures()?;
        Ok((0..self.num_simplices())
            .map(|j| {
                let n = self.orientation_vector(j);
                n / n.norm()
            })
            .collect())
    }

    pub fn total_measure(&self) -> Result<f64> {
        Ok(self.measures()?.iter().sum())
    }

    /// Mass-lumped L² projection of the piecewise constant normal onto
    /// continuous piecewise linears: the area-weighted average of the normals
    /// of the simplices around each vertex. Not unit length in general.
    pub fn vertex_normals(&self) -> Vec<Point> {
        let mut num = vec![Point::zeros(); self.num_vertices()];
        let mut den = vec![0.0; self.num_vertices()];
        for j in 0..self.num_simplices() {
            let n = self.orientation_vector(j);
            let m = self.raw_measure(j);
            let nu = if m > 0.0 { n / n.norm() } else { Point::zeros() };
            for &q in self.simplex(j) {
                num[q] += m * nu;
                den[q] += m;
            }
        }
        num.iter()
            .zip(&den)
            .map(|(n, &d)| if d > 0.0 { n / d } else { Point::zeros() })
            .collect()
    }

    pub fn normalized_vertex_normals(&self) -> Result<Vec<Point>> {
        self.vertex_normals()
            .into_iter()
            .enumerate()
            .map(|(q, w)| {
                let norm = w.norm();
                if norm > NORMAL_EPS {
                    Ok(w / norm)
                } else {
                    Err(Error::DegenerateVertexNormal { vertex: q, norm })
                }
            })
            .collect()
    }

    /// Per-element `|∇_s v|²` of the normalized vertex normal field `v`.
    pub fn w_field(&self, v: &[Point]) -> Result<Vec<f64>> {
        let table = SurfaceGradientTable::new(self)?;
        Ok((0..self.num_simplices())
            .map(|j| {
                let s = self.simplex(j);
                let grads = table.gradients(j);
                // G[a][b] = Σ_k v_k[a] (∇φ_k)[b]
                let mut g = nalgebra::Matrix3::<f64>::zeros();
                for (k, &q) in s.iter().enumerate() {
                    g += v[q] * grads[k].transpose();
                }
                g.norm_squared()
            })
            .collect())
    }

    pub fn mesh_ratio(&self) -> Result<f64> {
        let m = self.measures()?;
        let max = m.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = m.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(max / min)
    }

    pub fn min_element_measure(&self) -> Result<f64> {
        Ok(self.measures()?.into_iter().fold(f64::INFINITY, f64::min))
    }

    /// Solvability condition for the position update: a nonempty boundary, or
    /// vertex normals at interior vertices that span the ambient space.
    pub fn assumption_a1(&self) -> bool {
        if self.has_boundary() {
            return true;
        }
        self.vertex_normal_span() == self.dim
    }

    /// Dimension of the span of the vertex normals at interior vertices.
    pub fn vertex_normal_span(&self) -> usize {
        let omega = self.vertex_normals();
        let mut gram = nalgebra::Matrix3::<f64>::zeros();
        let mut scale: f64 = 0.0;
        for q in self.interior_vertices() {
            gram += omega[q] * omega[q].transpose();
            scale = scale.max(omega[q].norm_squared());
        }
        if scale == 0.0 {
            return 0;
        }
        let eig = gram.symmetric_eigenvalues();
        eig.iter().filter(|&&l| l > 1e-10 * scale).count().min(self.dim)
    }
}

/// Facets of an oriented simplex with their induced orientation sign.
fn oriented_facets(s: &[usize]) -> Vec<(i8, Vec<usize>)> {
    match s.len() {
        2 => vec![(-1, vec![s[0]]), (1, vec![s[1]])],
        3 => vec![
            (1, vec![s[0], s[1]]),
            (1, vec![s[1], s[2]]),
            (1, vec![s[2], s[0]]),
        ],
        _ => unreachable!("simplices have 2 or 3 vertices"),
    }
}

fn sorted_with_parity(facet: &[usize]) -> (Vec<usize>, i8) {
    let mut key = facet.to_vec();
    let mut parity = 1;
    if key.len() == 2 && key[0] > key[1] {
        key.swap(0, 1);
        parity = -1;
    }
    (key, parity)
}
