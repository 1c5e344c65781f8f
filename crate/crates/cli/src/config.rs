//! Flat `key = value` run configuration. Geometry parameters use dotted
//! keys (`geometry.torus.major = 2.0`); `#` starts a comment.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use wilflow::bench::DEFAULT_MD_RESOLUTION;
use wilflow::fem::DEFAULT_SOLVER_TOL;
use wilflow::flow::{InitialCurvature, SolverConfig, TangentialMode, WMode};
use wilflow::mesh::{
    generate, load_boundary_labels, load_mesh, BoundaryCondition, GeneratorSpec, MeshFormat, SimplicialSurface,
};

#[derive(Clone, Debug, PartialEq)]
pub enum Geometry {
    Generated(GeneratorSpec),
    File { path: PathBuf, boundary: Option<PathBuf> },
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub geometry: Geometry,
    pub kappa_bar: f64,
    pub dt: f64,
    pub t_end: f64,
    pub tangential_mode: TangentialMode,
    pub w_mode: WMode,
    /// boundary part → condition; `default` covers unlisted parts
    pub boundary: BTreeMap<usize, BoundaryCondition>,
    pub boundary_default: BoundaryCondition,
    pub analytic_sphere_radius: Option<f64>,
    pub output_dir: PathBuf,
    /// 0 disables frames
    pub frame_every: usize,
    pub solver_tol: f64,
    pub md_resolution: usize,
    pub check_stability: bool,
}

/// Geometry names with their parameters and defaults.
const GEOMETRIES: &[(&str, &[(&str, f64)])] = &[
    ("circle", &[("segments", 64.0), ("radius", 1.0)]),
    ("circle_nonuniform", &[("segments", 64.0)]),
    ("circle_segment", &[("segments", 128.0), ("radius", 1.0), ("angle", 2.0 * PI / 3.0)]),
    ("sphere", &[("level", 3.0), ("radius", 1.0)]),
    ("sphere_cap", &[("level", 3.0), ("radius", 1.0), ("polar_angle", PI / 3.0)]),
    ("hexagon", &[("level", 3.0), ("radius", 1.0)]),
    ("disk", &[("level", 3.0), ("radius", 1.0)]),
    ("torus", &[("target_elements", 11040.0), ("major", 2.0), ("minor", 0.5)]),
    ("cigar", &[("target_elements", 9216.0), ("length", 4.0), ("diameter", 1.0)]),
];

/// All problems found in a config file, one message each.
#[derive(Debug)]
pub struct ConfigErrors(pub Vec<String>);

impl std::fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0.join("; "))
    }
}

fn split_lines(text: &str, errors: &mut Vec<String>) -> BTreeMap<String, (usize, String)> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            errors.push(format!("line {}: expected 'key = value'", i + 1));
            continue;
        };
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if k.is_empty() {
            errors.push(format!("line {}: empty key", i + 1));
        } else if let Some((first, _)) = map.get(&k) {
            errors.push(format!("line {}: duplicate key '{k}' (first on line {first})", i + 1));
        } else {
            map.insert(k, (i + 1, v));
        }
    }
    map
}

struct Fields {
    map: BTreeMap<String, (usize, String)>,
    errors: Vec<String>,
}

impl Fields {
    fn take(&mut self, key: &str) -> Option<String> {
        self.map.remove(key).map(|(_, v)| v)
    }

    fn parse<T: FromStr>(&mut self, key: &str) -> Option<T>
    where
        T::Err: std::fmt::Display,
    {
        let v = self.take(key)?;
        match v.parse::<T>() {
            Ok(x) => Some(x),
            Err(e) => {
                self.errors.push(format!("{key}: cannot parse '{v}': {e}"));
                None
            }
        }
    }

    fn required<T: FromStr>(&mut self, key: &str) -> Option<T>
    where
        T::Err: std::fmt::Display,
    {
        if !self.map.contains_key(key) {
            self.errors.push(format!("missing required key '{key}'"));
            return None;
        }
        self.parse(key)
    }
}

impl RunConfig {
    /// Parses a config; relative paths are resolved against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigErrors> {
        let mut errors = Vec::new();
        let map = split_lines(text, &mut errors);
        let mut f = Fields { map, errors };

        let geometry = Self::parse_geometry(&mut f, base_dir);
        let kappa_bar = f.parse("kappa_bar").unwrap_or(0.0);
        let dt = f.required("dt").unwrap_or(f64::NAN);
        let t_end = f.required("t_end").unwrap_or(f64::NAN);
        let tangential_mode = f.parse("tangential_mode").unwrap_or(TangentialMode::Bgn);
        let w_mode = f.parse("w_mode").unwrap_or(WMode::VertexNormal);
        let analytic_sphere_radius = f.parse("analytic_sphere_radius");
        let output_dir = base_dir.join(f.take("output_dir").unwrap_or_else(|| "output".into()));
        let frame_every = f.parse("frame_every").unwrap_or(0);
        let solver_tol = f.parse("solver_tol").unwrap_or(DEFAULT_SOLVER_TOL);
        let md_resolution = f.parse("md_resolution").unwrap_or(DEFAULT_MD_RESOLUTION);
        let check_stability = f.parse("check_stability").unwrap_or(true);

        let mut boundary = BTreeMap::new();
        let mut boundary_default = BoundaryCondition::Navier;
        let bkeys: Vec<String> = f.map.keys().filter(|k| k.starts_with("boundary.")).cloned().collect();
        for key in bkeys {
            let part = key["boundary.".len()..].to_string();
            let Some(bc) = f.parse::<BoundaryCondition>(&key) else { continue };
            if part == "default" {
                boundary_default = bc;
            } else {
                match part.parse::<usize>() {
                    Ok(p) => {
                        boundary.insert(p, bc);
                    }
                    Err(_) => f.errors.push(format!("{key}: boundary part must be an integer or 'default'")),
                }
            }
        }

        for (k, (line, _)) in &f.map {
            f.errors.push(format!("line {line}: unknown key '{k}'"));
        }

        if !(dt > 0.0) && !dt.is_nan() {
            f.errors.push(format!("dt must be positive, got {dt}"));
        }
        if !(t_end >= 0.0) && !t_end.is_nan() {
            f.errors.push(format!("t_end must be nonnegative, got {t_end}"));
        }
        if !(solver_tol > 0.0) {
            f.errors.push(format!("solver_tol must be positive, got {solver_tol}"));
        }
        if md_resolution == 0 {
            f.errors.push("md_resolution must be positive".into());
        }
        if let Some(r) = analytic_sphere_radius {
            if !(r > 0.0) {
                f.errors.push(format!("analytic_sphere_radius must be positive, got {r}"));
            }
        }

        match (geometry, f.errors.is_empty()) {
            (Some(geometry), true) => Ok(Self {
                geometry,
                kappa_bar,
                dt,
                t_end,
                tangential_mode,
                w_mode,
                boundary,
                boundary_default,
                analytic_sphere_radius,
                output_dir,
                frame_every,
                solver_tol,
                md_resolution,
                check_stability,
            }),
            _ => Err(ConfigErrors(f.errors)),
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigErrors> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigErrors(vec![format!("{}: {e}", path.display())]))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn parse_geometry(f: &mut Fields, base_dir: &Path) -> Option<Geometry> {
        let Some(name) = f.take("geometry") else {
            f.errors.push("missing required key 'geometry'".into());
            return None;
        };
        if name == "file" {
            let path = f.take("geometry.file.path");
            let boundary = f.take("geometry.file.boundary").map(|b| base_dir.join(b));
            let Some(path) = path else {
                f.errors.push("geometry = file needs geometry.file.path".into());
                return None;
            };
            return Some(Geometry::File {
                path: base_dir.join(path),
                boundary,
            });
        }
        let Some((_, params)) = GEOMETRIES.iter().find(|(n, _)| *n == name) else {
            let names: Vec<&str> = GEOMETRIES.iter().map(|(n, _)| *n).chain(["file"]).collect();
            f.errors.push(format!("unknown geometry '{name}' (expected one of {})", names.join(", ")));
            return None;
        };
        let mut values = BTreeMap::new();
        for (p, default) in params.iter() {
            let v = f.parse::<f64>(&format!("geometry.{name}.{p}")).unwrap_or(*default);
            values.insert(*p, v);
        }
        let count = |f: &mut Fields, p: &str| -> usize {
            let v = values[p];
            if v < 0.0 || v.fract() != 0.0 {
                f.errors.push(format!("geometry.{name}.{p} must be a nonnegative integer, got {v}"));
                return 0;
            }
            v as usize
        };
        let spec = match name.as_str() {
            "circle" => GeneratorSpec::Circle { segments: count(f, "segments"), radius: values["radius"] },
            "circle_nonuniform" => GeneratorSpec::CircleNonuniform { segments: count(f, "segments") },
            "circle_segment" => GeneratorSpec::CircleSegment {
                segments: count(f, "segments"),
                radius: values["radius"],
                angle: values["angle"],
            },
            "sphere" => GeneratorSpec::Sphere { level: count(f, "level"), radius: values["radius"] },
            "sphere_cap" => GeneratorSpec::SphereCap {
                level: count(f, "level"),
                radius: values["radius"],
                polar_angle: values["polar_angle"],
            },
            "hexagon" => GeneratorSpec::Hexagon { level: count(f, "level"), radius: values["radius"] },
            "disk" => GeneratorSpec::Disk { level: count(f, "level"), radius: values["radius"] },
            "torus" => GeneratorSpec::Torus {
                target_elements: count(f, "target_elements"),
                major: values["major"],
                minor: values["minor"],
            },
            "cigar" => GeneratorSpec::Cigar {
                target_elements: count(f, "target_elements"),
                length: values["length"],
                diameter: values["diameter"],
            },
            _ => unreachable!(),
        };
        Some(Geometry::Generated(spec))
    }

    /// Builds the initial mesh with boundary parts and conditions applied.
    /// Without a label sidecar each connected boundary component is a part,
    /// numbered by its smallest vertex index.
    pub fn build_mesh(&self) -> wilflow::Result<SimplicialSurface> {
        let mesh = match &self.geometry {
            Geometry::Generated(spec) => generate(spec)?.split_boundary_components(),
            Geometry::File { path, boundary } => {
                let mesh = load_mesh(path, MeshFormat::from_path(path)?)?;
                match boundary {
                    Some(b) => load_boundary_labels(mesh, b)?,
                    None => mesh.split_boundary_components(),
                }
            }
        };
        let mut mesh = mesh.with_all_conditions(self.boundary_default);
        for (&part, &bc) in &self.boundary {
            mesh = mesh.with_condition(part, bc)?;
        }
        Ok(mesh)
    }

    pub fn solver_config(&self) -> SolverConfig {
        let mut c = SolverConfig::new(self.kappa_bar, self.dt, self.t_end)
            .with_tangential_mode(self.tangential_mode)
            .with_w_mode(self.w_mode);
        if let Some(radius) = self.analytic_sphere_radius {
            c = c.with_initial_curvature(InitialCurvature::AnalyticSphere { radius });
        }
        c.solver_tol = self.solver_tol;
        c.check_stability = self.check_stability;
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, ConfigErrors> {
        RunConfig::parse(text, Path::new("/base"))
    }

    #[test]
    fn minimal_and_full_configs() {
        let c = parse("geometry = circle\ndt = 0.01\nt_end = 0\n").unwrap();
        assert_eq!(c.geometry, Geometry::Generated(GeneratorSpec::Circle { segments: 64, radius: 1.0 }));
        assert_eq!(c.output_dir, Path::new("/base/output"));
        assert_eq!(c.solver_tol, DEFAULT_SOLVER_TOL);

        let c = parse(
            "# torus run\ngeometry = torus\ngeometry.torus.major = 3.0 # R\n\
             kappa_bar = -0.5\ndt = 1e-3\nt_end = 1\ntangential_mode = mdr\n\
             boundary.1 = clamped\nboundary.default = clamped\nframe_every = 10\nsolver_tol = 1e-11\n",
        )
        .unwrap();
        assert_eq!(
            c.geometry,
            Geometry::Generated(GeneratorSpec::Torus { target_elements: 11040, major: 3.0, minor: 0.5 })
        );
        assert_eq!(c.tangential_mode, TangentialMode::Mdr);
        assert_eq!(c.boundary.get(&1), Some(&BoundaryCondition::Clamped));
        assert_eq!(c.boundary_default, BoundaryCondition::Clamped);
        assert_eq!(c.frame_every, 10);
        let s = c.solver_config();
        assert_eq!((s.kappa_bar, s.dt, s.t_end, s.solver_tol), (-0.5, 1e-3, 1.0, 1e-11));
    }

    #[test]
    fn all_violations_are_listed() {
        let err = parse("geometry = circle\ngeometry.sphere.level = 2\ncolour = red\ndt = -1\nbogus line\n").unwrap_err();
        let all = err.to_string();
        for needle in ["unknown key 'colour'", "unknown key 'geometry.sphere.level'", "missing required key 't_end'", "dt must be positive", "line 5"] {
            assert!(all.contains(needle), "{needle} not in {all}");
        }
        assert!(parse("geometry = blob\ndt = 1\nt_end = 1\n").unwrap_err().to_string().contains("unknown geometry"));
        assert!(parse("geometry = circle\ndt = 1\ndt = 2\nt_end = 1\n").unwrap_err().to_string().contains("duplicate"));
        assert!(parse("geometry = circle\ngeometry.circle.segments = 2.5\ndt = 1\nt_end = 1\n").is_err());
    }

    #[test]
    fn mixed_boundary_assignment() {
        let c = parse("geometry = circle_segment\ngeometry.circle_segment.segments = 16\ndt = 0.01\nt_end = 0.1\nboundary.1 = clamped\n")
            .unwrap();
        let mesh = c.build_mesh().unwrap();
        assert_eq!(mesh.vertex_condition(0), Some(BoundaryCondition::Navier));
        assert_eq!(mesh.vertex_condition(16), Some(BoundaryCondition::Clamped));
        let bad = parse("geometry = circle_segment\ndt = 0.01\nt_end = 0.1\nboundary.7 = clamped\n").unwrap();
        assert!(bad.build_mesh().is_err());
    }

    #[test]
    fn file_geometry_paths_are_relative_to_the_config() {
        let c = parse("geometry = file\ngeometry.file.path = m.off\ngeometry.file.boundary = m.bnd\ndt = 1\nt_end = 1\n").unwrap();
        assert_eq!(
            c.geometry,
            Geometry::File { path: "/base/m.off".into(), boundary: Some("/base/m.bnd".into()) }
        );
        assert!(parse("geometry = file\ndt = 1\nt_end = 1\n").is_err());
    }
}
