//! OFF, OBJ and legacy VTK (ASCII POLYDATA) readers and writers, plus the
//! `.bnd` boundary-label sidecar (`index part_id` per boundary vertex).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Point, SimplicialSurface, VertexLabel};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
    Vtk,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("off") => Ok(MeshFormat::Off),
            Some("obj") => Ok(MeshFormat::Obj),
            Some("vtk") => Ok(MeshFormat::Vtk),
            _ => Err(Error::UnsupportedFormat(path.display().to_string())),
        }
    }
}

impl std::str::FromStr for MeshFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "off" => Ok(MeshFormat::Off),
            "obj" => Ok(MeshFormat::Obj),
            "vtk" => Ok(MeshFormat::Vtk),
            other => Err(Error::UnsupportedFormat(other.to_string())),
        }
    }
}

pub fn load_mesh(path: impl AsRef<Path>, format: MeshFormat) -> Result<SimplicialSurface> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mesh(&text, format)
}

pub fn save_mesh(mesh: &SimplicialSurface, path: impl AsRef<Path>, format: MeshFormat) -> Result<()> {
    let path = path.as_ref();
    let text = format_mesh(mesh, format, &[])?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn parse_mesh(text: &str, format: MeshFormat) -> Result<SimplicialSurface> {
    let (dim, vertices, simplices) = match format {
        MeshFormat::Off => parse_off(text)?,
        MeshFormat::Obj => parse_obj(text)?,
        MeshFormat::Vtk => parse_vtk(text)?,
    };
    SimplicialSurface::new(dim, vertices, simplices)
}

/// Serializes a mesh. `point_scalars` are appended as VTK point data
/// (ignored for OFF and OBJ).
pub fn format_mesh(
    mesh: &SimplicialSurface,
    format: MeshFormat,
    point_scalars: &[(&str, &[f64])],
) -> Result<String> {
    let mut out = String::new();
    let d = mesh.ambient_dim();
    match format {
        MeshFormat::Off => {
            if d != 3 {
                return Err(Error::UnsupportedFormat(
                    "OFF output holds triangle meshes only; use OBJ or VTK for curves".into(),
                ));
            }
            writeln!(out, "OFF").unwrap();
            writeln!(out, "{} {} 0", mesh.num_vertices(), mesh.num_simplices()).unwrap();
            for v in mesh.vertices() {
                writeln!(out, "{} {} {}", v.x, v.y, v.z).unwrap();
            }
            for s in mesh.simplices() {
                writeln!(out, "3 {} {} {}", s[0], s[1], s[2]).unwrap();
            }
        }
        MeshFormat::Obj => {
            for v in mesh.vertices() {
                writeln!(out, "v {} {} {}", v.x, v.y, v.z).unwrap();
            }
            let tag = if d == 2 { "l" } else { "f" };
            for s in mesh.simplices() {
                write!(out, "{tag}").unwrap();
                for q in s {
                    write!(out, " {}", q + 1).unwrap();
                }
                out.push('\n');
            }
        }
        MeshFormat::Vtk => {
            writeln!(out, "# vtk DataFile Version 3.0").unwrap();
            writeln!(out, "wilflow mesh").unwrap();
            writeln!(out, "ASCII").unwrap();
            writeln!(out, "DATASET POLYDATA").unwrap();
            writeln!(out, "POINTS {} double", mesh.num_vertices()).unwrap();
            for v in mesh.vertices() {
                writeln!(out, "{} {} {}", v.x, v.y, v.z).unwrap();
            }
            let j = mesh.num_simplices();
            let kw = if d == 2 { "LINES" } else { "POLYGONS" };
            writeln!(out, "{kw} {j} {}", j * (d + 1)).unwrap();
            for s in mesh.simplices() {
                write!(out, "{d}").unwrap();
                for q in s {
                    write!(out, " {q}").unwrap();
                }
                out.push('\n');
            }
            if !point_scalars.is_empty() {
                writeln!(out, "POINT_DATA {}", mesh.num_vertices()).unwrap();
                for (name, values) in point_scalars {
                    writeln!(out, "SCALARS {name} double 1").unwrap();
                    writeln!(out, "LOOKUP_TABLE default").unwrap();
                    for x in values.iter() {
                        writeln!(out, "{x}").unwrap();
                    }
                }
            }
        }
    }
    Ok(out)
}

type Parsed = (usize, Vec<Point>, Vec<usize>);

fn perr(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_f64(tok: Option<&str>, line: usize) -> Result<f64> {
    let tok = tok.ok_or_else(|| perr(line, "missing coordinate"))?;
    tok.parse::<f64>()
        .map_err(|_| perr(line, format!("invalid number '{tok}'")))
}

fn parse_usize(tok: Option<&str>, line: usize) -> Result<usize> {
    let tok = tok.ok_or_else(|| perr(line, "missing integer"))?;
    tok.parse::<usize>()
        .map_err(|_| perr(line, format!("invalid integer '{tok}'")))
}

/// Non-empty, non-comment lines with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_off(text: &str) -> Result<Parsed> {
    let mut lines = content_lines(text);
    let (ln, header) = lines.next().ok_or_else(|| perr(1, "empty file"))?;
    let mut counts_inline = None;
    if let Some(rest) = header.strip_prefix("OFF") {
        if !rest.trim().is_empty() {
            counts_inline = Some((ln, rest.trim()));
        }
    } else {
        return Err(perr(ln, "missing OFF header"));
    }
    let (cl, counts) = match counts_inline {
        Some(c) => c,
        None => lines.next().ok_or_else(|| perr(ln + 1, "missing count line"))?,
    };
    let mut toks = counts.split_whitespace();
    let nv = parse_usize(toks.next(), cl)?;
    let nf = parse_usize(toks.next(), cl)?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (l, s) = lines.next().ok_or_else(|| perr(cl, "unexpected end of vertex list"))?;
        let mut t = s.split_whitespace();
        vertices.push(Point::new(
            parse_f64(t.next(), l)?,
            parse_f64(t.next(), l)?,
            parse_f64(t.next(), l)?,
        ));
    }
    let mut simplices = Vec::with_capacity(3 * nf);
    let mut dim = None;
    for _ in 0..nf {
        let (l, s) = lines.next().ok_or_else(|| perr(cl, "unexpected end of face list"))?;
        let mut t = s.split_whitespace();
        let n = parse_usize(t.next(), l)?;
        if n != 2 && n != 3 {
            return Err(perr(l, format!("{n}-gon faces are not supported")));
        }
        if *dim.get_or_insert(n) != n {
            return Err(perr(l, "mixed segment and triangle records"));
        }
        for _ in 0..n {
            simplices.push(parse_usize(t.next(), l)?);
        }
    }
    Ok((dim.unwrap_or(3), vertices, simplices))
}

fn parse_obj(text: &str) -> Result<Parsed> {
    let mut vertices = Vec::new();
    let mut simplices = Vec::new();
    let mut dim = None;
    for (l, s) in content_lines(text) {
        let mut t = s.split_whitespace();
        match t.next() {
            Some("v") => vertices.push(Point::new(
                parse_f64(t.next(), l)?,
                parse_f64(t.next(), l)?,
                t.next().map(|z| parse_f64(Some(z), l)).transpose()?.unwrap_or(0.0),
            )),
            Some(kw @ ("f" | "l")) => {
                let n = if kw == "f" { 3 } else { 2 };
                let d = if kw == "f" { 3 } else { 2 };
                if *dim.get_or_insert(d) != d {
                    return Err(perr(l, "mixed face and line records"));
                }
                let idx: Vec<&str> = t.collect();
                if idx.len() != n {
                    return Err(perr(l, format!("expected {n} indices, found {}", idx.len())));
                }
                for tok in idx {
                    // f v/vt/vn
                    let head = tok.split('/').next().unwrap_or("");
                    let i = parse_usize(Some(head), l)?;
                    if i == 0 {
                        return Err(perr(l, "OBJ indices are 1-based"));
                    }
                    simplices.push(i - 1);
                }
            }
            _ => {}
        }
    }
    Ok((dim.unwrap_or(3), vertices, simplices))
}

fn parse_vtk(text: &str) -> Result<Parsed> {
    let mut lines = content_lines(text).peekable();
    let mut vertices = Vec::new();
    let mut simplices = Vec::new();
    let mut dim = None;
    // Header: version line (a comment, skipped), title, ASCII, DATASET.
    while let Some((l, s)) = lines.next() {
        let mut t = s.split_whitespace();
        match t.next().map(|k| k.to_ascii_uppercase()).as_deref() {
            Some("BINARY") => return Err(Error::UnsupportedFormat("binary VTK".into())),
            Some("DATASET") => {
                if t.next().map(|k| k.to_ascii_uppercase()).as_deref() != Some("POLYDATA") {
                    return Err(perr(l, "only POLYDATA datasets are supported"));
                }
            }
            Some("POINTS") => {
                let n = parse_usize(t.next(), l)?;
                let mut coords = Vec::with_capacity(3 * n);
                while coords.len() < 3 * n {
                    let (l2, s2) = lines
                        .next()
                        .ok_or_else(|| perr(l, "unexpected end of POINTS"))?;
                    for tok in s2.split_whitespace() {
                        coords.push(parse_f64(Some(tok), l2)?);
                    }
                }
                vertices = coords
                    .chunks_exact(3)
                    .map(|c| Point::new(c[0], c[1], c[2]))
                    .collect();
            }
            Some(kw @ ("LINES" | "POLYGONS")) => {
                let d = if kw == "LINES" { 2 } else { 3 };
                dim = Some(d);
                let n = parse_usize(t.next(), l)?;
                for _ in 0..n {
                    let (l2, s2) = lines
                        .next()
                        .ok_or_else(|| perr(l, format!("unexpected end of {kw}")))?;
                    let mut t2 = s2.split_whitespace();
                    let count = parse_usize(t2.next(), l2)?;
                    if count != d {
                        return Err(perr(l2, format!("{kw} cell with {count} points")));
                    }
                    for _ in 0..d {
                        simplices.push(parse_usize(t2.next(), l2)?);
                    }
                }
            }
            Some("POINT_DATA" | "CELL_DATA") => break,
            _ => {}
        }
    }
    Ok((dim.unwrap_or(3), vertices, simplices))
}

/// Reads a `.bnd` sidecar and applies it to the mesh.
pub fn load_boundary_labels(
    mesh: SimplicialSurface,
    path: impl AsRef<Path>,
) -> Result<SimplicialSurface> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut labels = vec![VertexLabel::Interior; mesh.num_vertices()];
    for (l, s) in content_lines(&text) {
        let mut t = s.split_whitespace();
        let q = parse_usize(t.next(), l)?;
        let p = parse_usize(t.next(), l)?;
        if q >= labels.len() {
            return Err(perr(l, format!("vertex {q} out of range")));
        }
        labels[q] = VertexLabel::Boundary(p);
    }
    mesh.with_labels(labels)
}

pub fn save_boundary_labels(mesh: &SimplicialSurface, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for (q, l) in mesh.labels().iter().enumerate() {
        if let VertexLabel::Boundary(p) = l {
            writeln!(out, "{q} {p}").unwrap();
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
