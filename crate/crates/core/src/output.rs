//! Plot-ready run outputs: the diagnostics CSV and VTK frames.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::flow::{FlowState, StepDiagnostics};
use crate::mesh::{format_mesh, MeshFormat};

pub const DIAGNOSTICS_HEADER: &str = "step,time,energy,dissipation,mesh_ratio,min_element,stability_slack";

/// One CSV row; floats carry 17 significant digits.
pub fn diagnostics_row(d: &StepDiagnostics) -> String {
    format!(
        "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
        d.step, d.time, d.energy, d.dissipation, d.mesh_ratio, d.min_element, d.stability_slack
    )
}

pub struct DiagnosticsWriter<W: Write> {
    out: W,
}

impl<W: Write> DiagnosticsWriter<W> {
    pub fn new(mut out: W) -> std::io::Result<Self> {
        writeln!(out, "{DIAGNOSTICS_HEADER}")?;
        Ok(Self { out })
    }

    pub fn write(&mut self, d: &StepDiagnostics) -> std::io::Result<()> {
        writeln!(self.out, "{}", diagnostics_row(d))
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn frame_path(dir: &Path, step: usize) -> PathBuf {
    dir.join(format!("frame_{step}.vtk"))
}

/// Writes Γ^m with ϰ^m and κ^m as point data.
pub fn write_frame(dir: &Path, state: &FlowState) -> Result<PathBuf> {
    let text = format_mesh(
        &state.mesh,
        MeshFormat::Vtk,
        &[("curvature", &state.curvature), ("multiplier", &state.multiplier)],
    )?;
    let path = frame_path(dir, state.step);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{initialize, SolverConfig};
    use crate::mesh::{generate, load_mesh, GeneratorSpec};

    #[test]
    fn row_precision_round_trips() {
        let d = StepDiagnostics {
            step: 3,
            time: 0.1 + 0.2,
            energy: std::f64::consts::PI,
            dissipation: 1e-300,
            mesh_ratio: 1.0,
            min_element: 2.0 / 3.0,
            stability_slack: -1.234_567_890_123_456_7e-12,
        };
        let row = diagnostics_row(&d);
        let fields: Vec<f64> = row.split(',').skip(1).map(|f| f.parse().unwrap()).collect();
        assert_eq!(fields, vec![d.time, d.energy, d.dissipation, d.mesh_ratio, d.min_element, d.stability_slack]);
        let mut w = DiagnosticsWriter::new(Vec::new()).unwrap();
        w.write(&d).unwrap();
        let text = String::from_utf8(w.finish().unwrap()).unwrap();
        assert_eq!(text.lines().next(), Some(DIAGNOSTICS_HEADER));
    }

    #[test]
    fn frames_reload_with_identical_connectivity() {
        let dir = tempfile::tempdir().unwrap();
        for mesh in [
            generate(&GeneratorSpec::Sphere { level: 1, radius: 1.0 }).unwrap(),
            generate(&GeneratorSpec::CircleNonuniform { segments: 12 }).unwrap(),
        ] {
            let state = initialize(&mesh, &SolverConfig::new(0.0, 1e-3, 0.0)).unwrap();
            let path = write_frame(dir.path(), &state).unwrap();
            assert!(path.ends_with("frame_0.vtk"));
            let back = load_mesh(&path, MeshFormat::Vtk).unwrap();
            assert_eq!(back.ambient_dim(), mesh.ambient_dim());
            assert!(back.simplices().eq(state.mesh.simplices()));
            assert_eq!(back.vertices(), state.mesh.vertices());
        }
    }
}
