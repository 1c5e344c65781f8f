mod config;

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wilflow::bench::{convergence_study, default_threads, BenchCase, StudySpec, DEFAULT_MD_RESOLUTION};
use wilflow::flow::{run, FlowState, StepDiagnostics, TangentialMode};
use wilflow::output::{write_frame, DiagnosticsWriter};
use wilflow::Error;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "wilflow", version, about = "Willmore flow of curves and surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation described by a config file.
    Run { config: PathBuf },
    /// Check a config file and its mesh without running.
    Validate { config: PathBuf },
    /// Convergence study: closed_circle, segment_navier or segment_clamped.
    Converge {
        case: String,
        /// defaults to -0.5 for the circle and -2 for segments
        #[arg(long, allow_hyphen_values = true)]
        kappa_bar: Option<f64>,
        #[arg(long, default_value_t = 4)]
        levels: usize,
        /// segment count of the coarsest level
        #[arg(long, default_value_t = 32)]
        base_segments: usize,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long, default_value = "bgn")]
        tangential_mode: String,
        #[arg(long, default_value_t = DEFAULT_MD_RESOLUTION)]
        md_resolution: usize,
        /// CSV path, default `<case>.csv`
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// Failure with the exit code it maps to: 2 for configuration problems,
/// 1 for runtime failures.
struct Failure {
    code: u8,
    kind: String,
    step: Option<usize>,
    time: Option<f64>,
    message: String,
}

impl Failure {
    fn config(kind: &str, message: impl Into<String>) -> Self {
        Self {
            code: 2,
            kind: kind.into(),
            step: None,
            time: None,
            message: message.into(),
        }
    }

    fn from_error(code: u8, e: &Error) -> Self {
        let (step, time) = match e {
            Error::Step { step, time, .. } => (Some(*step), Some(*time)),
            _ => (None, None),
        };
        Self {
            code,
            kind: e.kind().into(),
            step,
            time,
            message: e.to_string(),
        }
    }

    fn report(&self) -> ExitCode {
        let step = self.step.map_or("-".into(), |s| s.to_string());
        let time = self.time.map_or("-".into(), |t| format!("{t:e}"));
        eprintln!(
            "error: kind={} step={step} time={time} message=\"{}\"",
            self.kind,
            self.message.replace('"', "'")
        );
        ExitCode::from(self.code)
    }
}

fn io_failure(code: u8, path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code,
        kind: "io".into(),
        step: None,
        time: None,
        message: format!("{}: {e}", path.display()),
    }
}

fn load(path: &Path) -> Result<(RunConfig, wilflow::mesh::SimplicialSurface), Failure> {
    let cfg = RunConfig::load(path).map_err(|e| Failure::config("invalid_config", e.to_string()))?;
    let mesh = cfg.build_mesh().map_err(|e| Failure::from_error(2, &e))?;
    cfg.solver_config()
        .validate(mesh.ambient_dim())
        .map_err(|e| Failure::from_error(2, &e))?;
    Ok((cfg, mesh))
}

fn cmd_run(path: &Path) -> Result<(), Failure> {
    let (cfg, mesh) = load(path)?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| io_failure(1, dir, e))?;
    let csv = dir.join("diagnostics.csv");
    let file = fs::File::create(&csv).map_err(|e| io_failure(1, &csv, e))?;
    let mut writer = DiagnosticsWriter::new(BufWriter::new(file)).map_err(|e| io_failure(1, &csv, e))?;
    let every = cfg.frame_every;
    let result = run(&mesh, &cfg.solver_config(), &mut |s: &FlowState, d: &StepDiagnostics| {
        writer.write(d).map_err(|e| Error::Io { path: csv.clone(), source: e })?;
        if every > 0 && s.step % every == 0 {
            write_frame(dir, s)?;
        }
        Ok(())
    });
    writer.finish().map_err(|e| io_failure(1, &csv, e))?;
    let (state, series) = result.map_err(|e| Failure::from_error(1, &e))?;
    let last = series.last().expect("run reports the initial state");
    println!(
        "steps={} t={} energy={:.10e} min_slack={:e} output={}",
        state.step,
        state.time,
        last.energy,
        series.iter().map(|d| d.stability_slack).fold(f64::INFINITY, f64::min),
        dir.display()
    );
    Ok(())
}

fn cmd_validate(path: &Path) -> Result<(), Failure> {
    let cfg = RunConfig::load(path).map_err(|e| Failure::config("invalid_config", e.0.join("\n  ")))?;
    let mut problems = Vec::new();
    let mesh = match cfg.build_mesh() {
        Ok(m) => Some(m),
        Err(e) => {
            problems.push(e.to_string());
            None
        }
    };
    if let Some(mesh) = &mesh {
        if let Err(e) = cfg.solver_config().validate(mesh.ambient_dim()) {
            problems.push(e.to_string());
        }
        if let Err(e) = mesh.min_element_measure() {
            problems.push(e.to_string());
        }
    } else if let Err(e) = cfg.solver_config().num_steps() {
        problems.push(e.to_string());
    }
    if !problems.is_empty() {
        return Err(Failure::config("invalid_config", problems.join("\n  ")));
    }
    let mesh = mesh.expect("checked above");
    println!("OK");
    println!("dimension: {}", mesh.ambient_dim());
    println!("J (elements): {}", mesh.num_simplices());
    println!("K (vertices): {}", mesh.num_vertices());
    if mesh.has_boundary() {
        for part in mesh.boundary_parts() {
            let verts: Vec<usize> = mesh
                .boundary_vertices()
                .into_iter()
                .filter(|&q| mesh.label(q) == wilflow::mesh::VertexLabel::Boundary(part))
                .collect();
            let bc = mesh.vertex_condition(verts[0]).expect("boundary vertex");
            println!("boundary part {part}: {} vertices, {}", verts.len(), bc.as_str());
        }
    } else {
        println!("boundary: empty");
    }
    println!(
        "assumption A1: {}",
        if mesh.assumption_a1() { "satisfied" } else { "violated (stage 2 may be singular)" }
    );
    println!("steps: {}", cfg.solver_config().num_steps().unwrap_or(0));
    println!("md_resolution: {}", cfg.md_resolution);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_converge(
    case: &str,
    kappa_bar: Option<f64>,
    levels: usize,
    base_segments: usize,
    t_end: Option<f64>,
    tangential_mode: &str,
    md_resolution: usize,
    output: Option<PathBuf>,
) -> Result<(), Failure> {
    let case: BenchCase = case.parse().map_err(|e: Error| Failure::from_error(2, &e))?;
    let mode: TangentialMode = tangential_mode.parse().map_err(|e: Error| Failure::from_error(2, &e))?;
    let kb = kappa_bar.unwrap_or(if case.is_segment() { -2.0 } else { -0.5 });
    let mut spec = StudySpec::new(case, kb, levels);
    spec.base_segments = base_segments;
    spec.t_end = t_end;
    spec.tangential_mode = mode;
    spec.md_resolution = md_resolution;
    spec.threads = default_threads();
    let report = convergence_study(&spec).map_err(|e| {
        let code = if matches!(e, Error::Level { .. }) { 1 } else { 2 };
        Failure::from_error(code, &e)
    })?;
    let path = output.unwrap_or_else(|| PathBuf::from(format!("{}.csv", case.name())));
    fs::write(&path, report.to_csv()).map_err(|e| io_failure(1, &path, e))?;
    println!("{} kappa_bar={} T={}", case.name(), kb, report.t_end);
    print!("{}", report.table());
    if report.levels.iter().any(|l| l.self_intersecting) {
        println!("warning: some sampled curves self-intersect; manifold distances use the even-odd rule");
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config } => cmd_run(&config),
        Command::Validate { config } => cmd_validate(&config),
        Command::Converge {
            case,
            kappa_bar,
            levels,
            base_segments,
            t_end,
            tangential_mode,
            md_resolution,
            output,
        } => cmd_converge(
            &case,
            kappa_bar,
            levels,
            base_segments,
            t_end,
            &tangential_mode,
            md_resolution,
            output,
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}
