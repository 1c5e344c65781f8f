use std::collections::HashMap;
use std::f64::consts::PI;

use super::{Point, SimplicialSurface};
use crate::error::{Error, Result};

/// Built-in geometries. Curves are traversed counterclockwise and surfaces
/// are oriented with outward normals.
#[derive(Clone, Debug, PartialEq)]
pub enum GeneratorSpec {
    /// Regular polygon inscribed in a circle.
    Circle { segments: usize, radius: f64 },
    /// Unit circle sampled at the angles `θ(ρ) = 2πρ + 0.1 sin(2πρ)`,
    /// `ρ = j/J`: the nonuniform node distribution used for the circle
    /// benchmarks.
    CircleNonuniform { segments: usize },
    /// Circular arc of the given central angle, symmetric about the +y axis.
    CircleSegment {
        segments: usize,
        radius: f64,
        angle: f64,
    },
    /// Icosahedron refined `level` times with projection onto the sphere.
    Sphere { level: usize, radius: f64 },
    /// Spherical cap around the +z pole with the given polar half-angle.
    SphereCap {
        level: usize,
        radius: f64,
        polar_angle: f64,
    },
    /// Flat regular hexagon in the xy-plane refined `level` times.
    Hexagon { level: usize, radius: f64 },
    /// Flat disk: the refined hexagon stretched radially onto a circle.
    Disk { level: usize, radius: f64 },
    /// Torus around the z axis, structured grid with about
    /// `target_elements` triangles.
    Torus {
        target_elements: usize,
        major: f64,
        minor: f64,
    },
    /// Cylinder with hemispherical caps along the x axis, total extent
    /// `length × diameter × diameter`.
    Cigar {
        target_elements: usize,
        length: f64,
        diameter: f64,
    },
}

pub fn generate(spec: &GeneratorSpec) -> Result<SimplicialSurface> {
    match *spec {
        GeneratorSpec::Circle { segments, radius } => {
            check_count("segments", segments, 3)?;
            check_positive("radius", radius)?;
            closed_polygon(segments, |t| radius * Point::new(t.cos(), t.sin(), 0.0), |j, n| {
                2.0 * PI * j as f64 / n as f64
            })
        }
        GeneratorSpec::CircleNonuniform { segments } => {
            check_count("segments", segments, 3)?;
            closed_polygon(segments, |t| Point::new(t.cos(), t.sin(), 0.0), |j, n| {
                let rho = j as f64 / n as f64;
                2.0 * PI * rho + 0.1 * (2.0 * PI * rho).sin()
            })
        }
        GeneratorSpec::CircleSegment {
            segments,
            radius,
            angle,
        } => {
            check_count("segments", segments, 1)?;
            check_positive("radius", radius)?;
            if !(angle > 0.0 && angle < 2.0 * PI) {
                return Err(Error::InvalidSpec(format!("arc angle {angle} not in (0, 2π)")));
            }
            let start = 0.5 * PI - 0.5 * angle;
            let vertices = (0..=segments)
                .map(|j| {
                    let t = start + angle * j as f64 / segments as f64;
                    radius * Point::new(t.cos(), t.sin(), 0.0)
                })
                .collect();
            let simplices = (0..segments).flat_map(|j| [j, j + 1]).collect();
            SimplicialSurface::new(2, vertices, simplices)
        }
        GeneratorSpec::Sphere { level, radius } => {
            check_positive("radius", radius)?;
            check_level(level)?;
            let (v, f) = icosahedron();
            let (v, f) = refine_projected(v, f, level, |p| p.normalize());
            SimplicialSurface::new(3, v.into_iter().map(|p| radius * p).collect(), f)
        }
        GeneratorSpec::Hexagon { level, radius } => {
            check_positive("radius", radius)?;
            check_level(level)?;
            let (v, f) = refine_projected(hexagon_fan(), hexagon_faces(), level, |p| p);
            SimplicialSurface::new(3, v.into_iter().map(|p| radius * p).collect(), f)
        }
        GeneratorSpec::Disk { level, radius } => {
            check_positive("radius", radius)?;
            check_level(level)?;
            let (v, f) = unit_disk(level);
            SimplicialSurface::new(3, v.into_iter().map(|p| radius * p).collect(), f)
        }
        GeneratorSpec::SphereCap {
            level,
            radius,
            polar_angle,
        } => {
            check_positive("radius", radius)?;
            check_level(level)?;
            if !(polar_angle > 0.0 && polar_angle < PI) {
                return Err(Error::InvalidSpec(format!(
                    "polar angle {polar_angle} not in (0, π)"
                )));
            }
            let (v, f) = unit_disk(level);
            let v = v
                .into_iter()
                .map(|p| {
                    let rho = p.xy().norm().min(1.0);
                    let phi = p.y.atan2(p.x);
                    let theta = polar_angle * rho;
                    radius
                        * Point::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
                })
                .collect();
            SimplicialSurface::new(3, v, f)
        }
        GeneratorSpec::Torus {
            target_elements,
            major,
            minor,
        } => {
            check_positive("major radius", major)?;
            check_positive("minor radius", minor)?;
            if minor >= major {
                return Err(Error::InvalidSpec(format!(
                    "minor radius {minor} must be below major radius {major}"
                )));
            }
            check_count("target_elements", target_elements, 18)?;
            let nv = ((target_elements as f64 * minor / (2.0 * major)).sqrt().round() as usize).max(3);
            let nu = ((nv as f64 * major / minor).round() as usize).max(3);
            torus(nu, nv, major, minor)
        }
        GeneratorSpec::Cigar {
            target_elements,
            length,
            diameter,
        } => {
            check_positive("diameter", diameter)?;
            if !(length > diameter) {
                return Err(Error::InvalidSpec(format!(
                    "cigar length {length} must exceed its diameter {diameter}"
                )));
            }
            check_count("target_elements", target_elements, 8)?;
            cigar(target_elements, length, diameter)
        }
    }
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!("{name} must be positive, got {value}")))
    }
}

fn check_count(name: &str, value: usize, min: usize) -> Result<()> {
    if value >= min {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!("{name} must be at least {min}, got {value}")))
    }
}

fn check_level(level: usize) -> Result<()> {
    if level <= 8 {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!("refinement level {level} exceeds 8")))
    }
}

fn closed_polygon(
    n: usize,
    point: impl Fn(f64) -> Point,
    angle: impl Fn(usize, usize) -> f64,
) -> Result<SimplicialSurface> {
    let vertices = (0..n).map(|j| point(angle(j, n))).collect();
    let simplices = (0..n).flat_map(|j| [j, (j + 1) % n]).collect();
    SimplicialSurface::new(2, vertices, simplices)
}

fn icosahedron() -> (Vec<Point>, Vec<usize>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let v: Vec<Point> = [
        (-1., t, 0.),
        (1., t, 0.),
        (-1., -t, 0.),
        (1., -t, 0.),
        (0., -1., t),
        (0., 1., t),
        (0., -1., -t),
        (0., 1., -t),
        (t, 0., -1.),
        (t, 0., 1.),
        (-t, 0., -1.),
        (-t, 0., 1.),
    ]
    .iter()
    .map(|&(x, y, z)| Point::new(x, y, z).normalize())
    .collect();
    let mut f = vec![
        0, 11, 5, 0, 5, 1, 0, 1, 7, 0, 7, 10, 0, 10, 11, 1, 5, 9, 5, 11, 4, 11, 10, 2, 10, 7, 6, 7,
        1, 8, 3, 9, 4, 3, 4, 2, 3, 2, 6, 3, 6, 8, 3, 8, 9, 4, 9, 5, 2, 4, 11, 6, 2, 10, 8, 6, 7, 9,
        8, 1,
    ];
    orient_outward(&v, &mut f, Point::zeros());
    (v, f)
}

fn octahedron() -> (Vec<Point>, Vec<usize>) {
    let v = vec![
        Point::new(1., 0., 0.),
        Point::new(0., 1., 0.),
        Point::new(-1., 0., 0.),
        Point::new(0., -1., 0.),
        Point::new(0., 0., 1.),
        Point::new(0., 0., -1.),
    ];
    let mut f = vec![
        0, 1, 4, 1, 2, 4, 2, 3, 4, 3, 0, 4, 1, 0, 5, 2, 1, 5, 3, 2, 5, 0, 3, 5,
    ];
    orient_outward(&v, &mut f, Point::zeros());
    (v, f)
}

/// Flips triangles of a star-shaped closed surface so their normals point
/// away from `center`.
fn orient_outward(v: &[Point], f: &mut [usize], center: Point) {
    for t in f.chunks_exact_mut(3) {
        let (a, b, c) = (v[t[0]], v[t[1]], v[t[2]]);
        let n = (b - a).cross(&(c - a));
        if n.dot(&((a + b + c) / 3.0 - center)) < 0.0 {
            t.swap(1, 2);
        }
    }
}

fn hexagon_fan() -> Vec<Point> {
    let mut v = vec![Point::zeros()];
    v.extend((0..6).map(|k| {
        let t = PI / 3.0 * k as f64;
        Point::new(t.cos(), t.sin(), 0.0)
    }));
    v
}

fn hexagon_faces() -> Vec<usize> {
    (0..6).flat_map(|k| [0, 1 + k, 1 + (k + 1) % 6]).collect()
}

/// Regular midpoint subdivision; every new vertex is passed through
/// `project`.
fn refine_projected(
    mut v: Vec<Point>,
    mut f: Vec<usize>,
    levels: usize,
    project: impl Fn(Point) -> Point,
) -> (Vec<Point>, Vec<usize>) {
    for _ in 0..levels {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(f.len() * 4);
        let mut midpoint = |a: usize, b: usize, v: &mut Vec<Point>| -> usize {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                v.push(project(0.5 * (v[a] + v[b])));
                v.len() - 1
            })
        };
        for t in f.chunks_exact(3) {
            let (a, b, c) = (t[0], t[1], t[2]);
            let ab = midpoint(a, b, &mut v);
            let bc = midpoint(b, c, &mut v);
            let ca = midpoint(c, a, &mut v);
            next.extend_from_slice(&[a, ab, ca, ab, b, bc, ca, bc, c, ab, bc, ca]);
        }
        f = next;
    }
    (v, f)
}

fn unit_disk(level: usize) -> (Vec<Point>, Vec<usize>) {
    let (v, f) = refine_projected(hexagon_fan(), hexagon_faces(), level, |p| p);
    let apothem = (PI / 6.0).cos();
    let v = v
        .into_iter()
        .map(|p| {
            let rho = p.xy().norm();
            if rho == 0.0 {
                return p;
            }
            let phi = p.y.atan2(p.x).rem_euclid(PI / 3.0);
            let hex_radius = apothem / (phi - PI / 6.0).cos();
            let scale = 1.0 / hex_radius;
            let q = p * scale;
            // Snap the boundary exactly onto the unit circle.
            if (rho - hex_radius).abs() < 1e-12 {
                q / q.norm()
            } else {
                q
            }
        })
        .collect();
    (v, f)
}

fn torus(nu: usize, nv: usize, major: f64, minor: f64) -> Result<SimplicialSurface> {
    let idx = |i: usize, j: usize| (i % nu) * nv + (j % nv);
    let mut vertices = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let u = 2.0 * PI * i as f64 / nu as f64;
        for j in 0..nv {
            let w = 2.0 * PI * j as f64 / nv as f64;
            let rho = major + minor * w.cos();
            vertices.push(Point::new(rho * u.cos(), rho * u.sin(), minor * w.sin()));
        }
    }
    let mut simplices = Vec::with_capacity(6 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            simplices.extend_from_slice(&[a, b, c, a, c, d]);
        }
    }
    SimplicialSurface::new(3, vertices, simplices)
}

fn cigar(target: usize, length: f64, diameter: f64) -> Result<SimplicialSurface> {
    let radius = 0.5 * diameter;
    let cylinder = length - diameter;
    let count = |level: usize| {
        let n = 4usize << level;
        let nz = ((cylinder / (2.0 * PI * radius / n as f64)).round() as usize).max(1);
        (8usize << (2 * level), n, nz)
    };
    let level = (0..=6)
        .min_by_key(|&l| {
            let (caps, n, nz) = count(l);
            (caps + 2 * n * nz).abs_diff(target)
        })
        .expect("nonempty range");
    let (_, n, nz) = count(level);

    let (sv, sf) = octahedron();
    let (sv, sf) = refine_projected(sv, sf, level, |p| p.normalize());

    let mut vertices: Vec<Point> = Vec::new();
    let mut simplices: Vec<usize> = Vec::new();
    let half = 0.5 * cylinder;
    for (shift, upper) in [(half, true), (-half, false)] {
        let base = vertices.len();
        vertices.extend(sv.iter().map(|p| radius * p + Point::new(0.0, 0.0, shift)));
        for t in sf.chunks_exact(3) {
            let cz = (sv[t[0]].z + sv[t[1]].z + sv[t[2]].z) / 3.0;
            if (cz > 0.0) == upper {
                simplices.extend(t.iter().map(|&q| base + q));
            }
        }
    }
    let base = vertices.len();
    for i in 0..=nz {
        let z = -half + cylinder * i as f64 / nz as f64;
        for k in 0..n {
            let phi = 2.0 * PI * k as f64 / n as f64;
            vertices.push(Point::new(radius * phi.cos(), radius * phi.sin(), z));
        }
    }
    let ring = |i: usize, k: usize| base + i * n + k % n;
    for i in 0..nz {
        for k in 0..n {
            let (a, b, c, d) = (ring(i, k), ring(i, k + 1), ring(i + 1, k + 1), ring(i + 1, k));
            simplices.extend_from_slice(&[a, b, c, a, c, d]);
        }
    }

    let (vertices, simplices) = weld(vertices, simplices, 1e-9);
    // Axis along x.
    let vertices = vertices.into_iter().map(|p| Point::new(p.z, p.x, p.y)).collect();
    SimplicialSurface::new(3, vertices, simplices)
}

/// Merges vertices closer than `tol` and drops unreferenced ones.
fn weld(vertices: Vec<Point>, simplices: Vec<usize>, tol: f64) -> (Vec<Point>, Vec<usize>) {
    let cell = |p: &Point| {
        (
            (p.x / tol).floor() as i64,
            (p.y / tol).floor() as i64,
            (p.z / tol).floor() as i64,
        )
    };
    let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    let mut remap = vec![usize::MAX; vertices.len()];
    let mut kept: Vec<Point> = Vec::new();
    for (q, p) in vertices.iter().enumerate() {
        let (cx, cy, cz) = cell(p);
        let mut found = None;
        'search: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(list) = grid.get(&(cx + dx, cy + dy, cz + dz)) {
                        if let Some(&k) = list.iter().find(|&&k| (kept[k] - p).norm() < tol) {
                            found = Some(k);
                            break 'search;
                        }
                    }
                }
            }
        }
        remap[q] = found.unwrap_or_else(|| {
            kept.push(*p);
            grid.entry((cx, cy, cz)).or_default().push(kept.len() - 1);
            kept.len() - 1
        });
    }
    // Drop vertices no simplex references (sphere equator copies are all used,
    // but stay general).
    let mut used = vec![false; kept.len()];
    let simplices: Vec<usize> = simplices.into_iter().map(|q| remap[q]).collect();
    for &q in &simplices {
        used[q] = true;
    }
    let mut compact = vec![usize::MAX; kept.len()];
    let mut out = Vec::new();
    for (k, p) in kept.into_iter().enumerate() {
        if used[k] {
            compact[k] = out.len();
            out.push(p);
        }
    }
    let simplices = simplices.into_iter().map(|q| compact[q]).collect();
    (out, simplices)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arc_endpoints_and_chord() {
        let m = generate(&GeneratorSpec::CircleSegment {
            segments: 128,
            radius: 1.0,
            angle: 2.0 * PI / 3.0,
        })
        .unwrap();
        assert_eq!(m.boundary_vertices(), vec![0, 128]);
        let chord = (m.vertex(128) - m.vertex(0)).norm();
        assert!((chord - 3f64.sqrt()).abs() < 1e-14);
        // The apex sits on +y and normals point away from the arc center.
        assert!((m.vertex(64) - Point::new(0.0, 1.0, 0.0)).norm() < 1e-14);
        for (j, n) in m.normals().unwrap().iter().enumerate() {
            let s = m.simplex(j);
            let mid = 0.5 * (m.vertex(s[0]) + m.vertex(s[1]));
            assert!(n.dot(&mid) > 0.0);
        }
    }

    #[test]
    fn nonuniform_circle_ratio() {
        let m = generate(&GeneratorSpec::CircleNonuniform { segments: 128 }).unwrap();
        let r = m.mesh_ratio().unwrap();
        assert!((r / (1.1 / 0.9) - 1.0).abs() < 0.05, "ratio {r}");
        for v in m.vertices() {
            assert!((v.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn sphere_vertices_on_sphere_and_outward() {
        for level in 0..4 {
            let m = generate(&GeneratorSpec::Sphere { level, radius: 2.0 }).unwrap();
            assert_eq!(m.num_simplices(), 20 << (2 * level));
            assert!(!m.has_boundary());
            for v in m.vertices() {
                assert!((v.norm() - 2.0).abs() < 1e-14);
            }
            for (j, n) in m.normals().unwrap().iter().enumerate() {
                let c: Point = m.simplex(j).iter().map(|&q| m.vertex(q)).sum::<Point>() / 3.0;
                assert!(n.dot(&c) > 0.0);
            }
        }
    }

    #[test]
    fn sphere_area_converges() {
        let mut errs = Vec::new();
        for level in 2..6 {
            let m = generate(&GeneratorSpec::Sphere { level, radius: 1.0 }).unwrap();
            errs.push((4.0 * PI - m.total_measure().unwrap()).abs());
        }
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn circle_length_converges() {
        let e = |n| {
            let m = generate(&GeneratorSpec::Circle { segments: n, radius: 1.0 }).unwrap();
            (2.0 * PI - m.total_measure().unwrap()).abs()
        };
        let ratio = e(64) / e(128);
        assert!((ratio - 4.0).abs() < 0.05);
    }

    #[test]
    fn torus_points_on_surface() {
        let m = generate(&GeneratorSpec::Torus {
            target_elements: 2000,
            major: 2.0,
            minor: 0.5,
        })
        .unwrap();
        assert!(!m.has_boundary());
        for v in m.vertices() {
            let rho = (v.x * v.x + v.y * v.y).sqrt();
            assert!(((rho - 2.0).powi(2) + v.z * v.z - 0.25).abs() < 1e-12);
        }
        for (j, n) in m.normals().unwrap().iter().enumerate() {
            let c: Point = m.simplex(j).iter().map(|&q| m.vertex(q)).sum::<Point>() / 3.0;
            let axis = Point::new(c.x, c.y, 0.0).normalize() * 2.0;
            assert!(n.dot(&(c - axis)) > 0.0);
        }
        let j = m.num_simplices() as f64;
        assert!((j / 2000.0 - 1.0).abs() < 0.5);
    }

    #[test]
    fn cigar_dimensions() {
        let m = generate(&GeneratorSpec::Cigar {
            target_elements: 9216,
            length: 4.0,
            diameter: 1.0,
        })
        .unwrap();
        assert!(!m.has_boundary());
        let j = m.num_simplices() as f64;
        assert!((0.5..2.0).contains(&(j / 9216.0)), "J = {j}");
        let (mut lo, mut hi) = (Point::repeat(f64::MAX), Point::repeat(f64::MIN));
        for v in m.vertices() {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        let ext = hi - lo;
        assert!((ext.x - 4.0).abs() < 1e-12);
        assert!((ext.y - 1.0).abs() < 1e-12 && (ext.z - 1.0).abs() < 1e-12);
        // Euler characteristic of a sphere.
        let edges = 3 * m.num_simplices() / 2;
        assert_eq!(m.num_vertices() + m.num_simplices() - edges, 2);
        for (jj, n) in m.normals().unwrap().iter().enumerate() {
            let c: Point = m.simplex(jj).iter().map(|&q| m.vertex(q)).sum::<Point>() / 3.0;
            let axis = Point::new(c.x.clamp(-1.5, 1.5), 0.0, 0.0);
            assert!(n.dot(&(c - axis)) > 0.0);
        }
    }

    #[test]
    fn cap_and_disk() {
        let cap = generate(&GeneratorSpec::SphereCap {
            level: 3,
            radius: 1.0,
            polar_angle: PI / 2.0,
        })
        .unwrap();
        assert_eq!(cap.boundary_vertices().len(), 48);
        for q in cap.boundary_vertices() {
            assert!(cap.vertex(q).z.abs() < 1e-15);
        }
        for v in cap.vertices() {
            assert!((v.norm() - 1.0).abs() < 1e-14);
        }
        for n in cap.normals().unwrap() {
            assert!(n.z > -1.0);
        }
        let disk = generate(&GeneratorSpec::Disk { level: 2, radius: 3.0 }).unwrap();
        for q in disk.boundary_vertices() {
            assert!((disk.vertex(q).norm() - 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(generate(&GeneratorSpec::Circle { segments: 8, radius: -1.0 }).is_err());
        assert!(generate(&GeneratorSpec::Circle { segments: 2, radius: 1.0 }).is_err());
        assert!(generate(&GeneratorSpec::Torus {
            target_elements: 100,
            major: 1.0,
            minor: 2.0
        })
        .is_err());
    }
}
