//! Reference solutions, error metrics and the convergence harness for the
//! shrinking/expanding circle and the circle segment.

mod md;

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::flow::{run, FlowState, InitialCurvature, SolverConfig, StepDiagnostics, TangentialMode};
use crate::mesh::{generate, BoundaryCondition, GeneratorSpec, Point, SimplicialSurface};

pub use md::{curve_polygon, is_self_intersecting, manifold_distance, ManifoldDistance, DEFAULT_MD_RESOLUTION};

/// Radius of a circle evolving under the flow, from the implicit relation
/// κ̄⁴t + κ̄²(r² − r₀²) + ln((1 − κ̄²r²)/(1 − κ̄²r₀²)) = 0 (bisection), or
/// the closed form (r₀⁴ + 2t)^{1/4} when κ̄ = 0.
pub fn circle_radius_reference(r0: f64, kappa_bar: f64, t: f64) -> Result<f64> {
    if !(r0 > 0.0) || !(t >= 0.0) {
        return Err(Error::InvalidConfig(format!("need r0 > 0 and t >= 0, got r0 = {r0}, t = {t}")));
    }
    if kappa_bar == 0.0 {
        return Ok((r0.powi(4) + 2.0 * t).powf(0.25));
    }
    let k2 = kappa_bar * kappa_bar;
    let critical = 1.0 / kappa_bar.abs();
    let s0 = 1.0 - k2 * r0 * r0;
    if s0.abs() <= 1e-14 {
        return Ok(r0);
    }
    let f = |r: f64| k2 * k2 * t + k2 * (r * r - r0 * r0) + ((1.0 - k2 * r * r) / s0).ln();
    // the root lies between r0 and the critical radius, approached monotonically
    let (mut lo, mut hi) = if r0 < critical { (r0, critical) } else { (critical, r0) };
    let inner_is_positive = r0 < critical; // sign of f at the r0 end is ≥ 0
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        if !v.is_finite() {
            // log argument underflowed to 0: mid is on the critical side
            if inner_is_positive { hi = mid } else { lo = mid }
            continue;
        }
        let move_lo = if inner_is_positive { v > 0.0 } else { v < 0.0 };
        if move_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // the critical-side end must have left 1/|κ̄| with a definite sign change
    let (r, far) = if inner_is_positive { (lo, hi) } else { (hi, lo) };
    let v = f(far);
    if far == critical || !(v.is_finite() && v <= 0.0) {
        return Err(Error::BranchCrossing {
            critical,
            detail: format!("r0 = {r0}, t = {t}: root not separated from the critical radius"),
        });
    }
    Ok(r)
}

/// RK4 integration of r′ = (1/(2r))(1/r − κ̄)(1/r + κ̄), used to cross-check
/// the implicit relation.
pub fn circle_radius_ode(r0: f64, kappa_bar: f64, t: f64, steps: usize) -> f64 {
    let rhs = |r: f64| (1.0 / r - kappa_bar) * (1.0 / r + kappa_bar) / (2.0 * r);
    let h = t / steps.max(1) as f64;
    let mut r = r0;
    for _ in 0..steps.max(1) {
        let k1 = rhs(r);
        let k2 = rhs(r + 0.5 * h * k1);
        let k3 = rhs(r + 0.5 * h * k2);
        let k4 = rhs(r + h * k3);
        r += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    r
}

/// Max-over-time, max-over-vertex errors of a circle run against the
/// exact radius r(t) and curvature −1/r(t); the initial state is excluded.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CircleErrors {
    pub e_x: f64,
    pub e_k1: f64,
    pub e_k2: f64,
}

impl CircleErrors {
    pub fn update(&mut self, state: &FlowState, radius: f64) {
        if state.step == 0 {
            return;
        }
        let kappa = -1.0 / radius;
        for q in 0..state.mesh.num_vertices() {
            self.e_x = self.e_x.max((state.mesh.vertex(q).norm() - radius).abs());
            self.e_k1 = self.e_k1.max((state.curvature[q] - kappa).abs());
            self.e_k2 = self.e_k2.max((state.multiplier[q] - kappa).abs());
        }
    }
}

pub fn circle_errors<'a>(
    states: impl IntoIterator<Item = &'a FlowState>,
    reference: impl Fn(f64) -> Result<f64>,
) -> Result<CircleErrors> {
    let mut e = CircleErrors::default();
    for s in states {
        e.update(s, reference(s.time)?);
    }
    Ok(e)
}

/// Vertex positions recorded every `stride` steps, evaluated in time by the
/// piecewise linear interpolant between consecutive frames.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub dt: f64,
    pub stride: usize,
    pub frames: Vec<Vec<Point>>,
}

impl Trajectory {
    pub fn new(dt: f64, stride: usize) -> Self {
        Self {
            dt,
            stride: stride.max(1),
            frames: Vec::new(),
        }
    }

    pub fn record(&mut self, state: &FlowState) {
        if state.step % self.stride == 0 {
            self.frames.push(state.mesh.vertices().to_vec());
        }
    }

    pub fn end_time(&self) -> f64 {
        (self.frames.len().saturating_sub(1) * self.stride) as f64 * self.dt
    }

    pub fn at(&self, t: f64) -> Vec<Point> {
        let s = t / (self.dt * self.stride as f64);
        let last = self.frames.len() - 1;
        let mut m = s.floor().max(0.0) as usize;
        let mut theta = s - m as f64;
        // snap to frames within rounding of the sample times
        if theta > 1.0 - 1e-6 {
            m += 1;
            theta = 0.0;
        }
        if m >= last {
            return self.frames[last].clone();
        }
        if theta < 1e-6 {
            return self.frames[m].clone();
        }
        self.frames[m]
            .iter()
            .zip(&self.frames[m + 1])
            .map(|(a, b)| a * (1.0 - theta) + b * theta)
            .collect()
    }
}

/// e_i → log(e_i/e_{i+1}) / log(h_i/h_{i+1}).
pub fn eoc(errors: &[f64], h: &[f64]) -> Vec<f64> {
    errors
        .windows(2)
        .zip(h.windows(2))
        .map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BenchCase {
    ClosedCircle,
    SegmentNavier,
    SegmentClamped,
}

impl BenchCase {
    pub fn name(self) -> &'static str {
        match self {
            BenchCase::ClosedCircle => "closed_circle",
            BenchCase::SegmentNavier => "segment_navier",
            BenchCase::SegmentClamped => "segment_clamped",
        }
    }

    pub fn is_segment(self) -> bool {
        self != BenchCase::ClosedCircle
    }

    /// Length scale per segment count: 1/J for the circle, arc length/J
    /// for the segment of angle 2π/3.
    pub fn mesh_size(self, segments: usize) -> f64 {
        match self {
            BenchCase::ClosedCircle => 1.0 / segments as f64,
            _ => SEGMENT_ANGLE / segments as f64,
        }
    }

    pub fn mesh(self, segments: usize) -> Result<SimplicialSurface> {
        match self {
            BenchCase::ClosedCircle => generate(&GeneratorSpec::CircleNonuniform { segments }),
            _ => {
                let arc = generate(&GeneratorSpec::CircleSegment {
                    segments,
                    radius: 1.0,
                    angle: SEGMENT_ANGLE,
                })?
                .split_boundary_components();
                let bc = if self == BenchCase::SegmentClamped {
                    BoundaryCondition::Clamped
                } else {
                    BoundaryCondition::Navier
                };
                Ok(arc.with_all_conditions(bc))
            }
        }
    }
}

const SEGMENT_ANGLE: f64 = 2.0 * PI / 3.0;

impl std::str::FromStr for BenchCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed_circle" => Ok(BenchCase::ClosedCircle),
            "segment_navier" => Ok(BenchCase::SegmentNavier),
            "segment_clamped" => Ok(BenchCase::SegmentClamped),
            other => Err(Error::InvalidConfig(format!(
                "unknown case '{other}' (expected closed_circle, segment_navier or segment_clamped)"
            ))),
        }
    }
}

/// Δt = (2⁵h/5)².
pub fn coupled_dt(h: f64) -> f64 {
    (32.0 * h / 5.0).powi(2)
}

/// Worker count: `WILFLOW_THREADS` if set, else the available parallelism.
pub fn default_threads() -> usize {
    std::env::var("WILFLOW_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[derive(Clone, Debug)]
pub struct StudySpec {
    pub case: BenchCase,
    pub kappa_bar: f64,
    /// number of error rows; segment studies run one extra, finer level
    pub levels: usize,
    pub base_segments: usize,
    /// defaults: 2 for the circle; the multiple of the coarsest Δt nearest
    /// 0.5 for segments
    pub t_end: Option<f64>,
    pub tangential_mode: TangentialMode,
    pub md_resolution: usize,
    pub threads: usize,
}

impl StudySpec {
    pub fn new(case: BenchCase, kappa_bar: f64, levels: usize) -> Self {
        Self {
            case,
            kappa_bar,
            levels,
            base_segments: 32,
            t_end: None,
            tangential_mode: TangentialMode::Bgn,
            md_resolution: DEFAULT_MD_RESOLUTION,
            threads: default_threads(),
        }
    }

    pub fn segments(&self, level: usize) -> usize {
        self.base_segments << level
    }

    pub fn num_runs(&self) -> usize {
        self.levels + usize::from(self.case.is_segment())
    }

    pub fn end_time(&self) -> f64 {
        if let Some(t) = self.t_end {
            return t;
        }
        match self.case {
            BenchCase::ClosedCircle => 2.0,
            _ => {
                let dt0 = coupled_dt(self.case.mesh_size(self.base_segments));
                (0.5 / dt0).round().max(1.0) * dt0
            }
        }
    }

    fn config(&self, level: usize) -> SolverConfig {
        let dt = coupled_dt(self.case.mesh_size(self.segments(level)));
        let steps = (self.end_time() / dt).round();
        SolverConfig::new(self.kappa_bar, dt, steps * dt)
            .with_tangential_mode(self.tangential_mode)
            .with_initial_curvature(InitialCurvature::AnalyticSphere { radius: 1.0 })
    }

    fn validate(&self) -> Result<()> {
        if self.levels < 2 {
            return Err(Error::InvalidConfig("need ≥ 2 levels for EOC".into()));
        }
        if self.base_segments < 3 {
            return Err(Error::InvalidConfig("base segment count must be at least 3".into()));
        }
        let t = self.end_time();
        if !(t > 0.0) {
            return Err(Error::InvalidConfig(format!("t_end must be positive, got {t}")));
        }
        // the coarsest level must hit t_end exactly, the finer ones follow
        let dt0 = coupled_dt(self.case.mesh_size(self.base_segments));
        SolverConfig::new(self.kappa_bar, dt0, t).num_steps()?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct LevelResult {
    pub segments: usize,
    pub h: f64,
    pub dt: f64,
    pub errors: Vec<f64>,
    /// circle only: max_q ||X^M(q)| − r(T)|
    pub final_radius_error: Option<f64>,
    /// segments only: some sampled polygon crossed itself
    pub self_intersecting: bool,
}

#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub case: BenchCase,
    pub kappa_bar: f64,
    pub t_end: f64,
    pub columns: Vec<&'static str>,
    pub levels: Vec<LevelResult>,
    /// orders[i][c]: EOC of column c between levels i and i + 1
    pub orders: Vec<Vec<f64>>,
}

impl ConvergenceReport {
    fn assemble(spec: &StudySpec, levels: Vec<LevelResult>) -> Self {
        let columns = if spec.case.is_segment() {
            vec!["md"]
        } else {
            vec!["e_x", "e_k1", "e_k2"]
        };
        let h: Vec<f64> = levels.iter().map(|l| l.h).collect();
        let per_col: Vec<Vec<f64>> = (0..columns.len())
            .map(|c| eoc(&levels.iter().map(|l| l.errors[c]).collect::<Vec<_>>(), &h))
            .collect();
        let orders = (0..levels.len().saturating_sub(1))
            .map(|i| per_col.iter().map(|c| c[i]).collect())
            .collect();
        Self {
            case: spec.case,
            kappa_bar: spec.kappa_bar,
            t_end: spec.end_time(),
            columns,
            levels,
            orders,
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.columns.iter().position(|&n| n == name)?;
        Some(self.levels.iter().map(|l| l.errors[c]).collect())
    }

    pub fn order_column(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.columns.iter().position(|&n| n == name)?;
        Some(self.orders.iter().map(|o| o[c]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if self.case.is_segment() {
            let _ = writeln!(
                out,
                "# h = arc_length / J, arc_length = {:.16e}, kappa_bar = {}, T = {:.16e}",
                SEGMENT_ANGLE, self.kappa_bar, self.t_end
            );
            out.push_str("h,dt,md,eoc\n");
        } else {
            let _ = writeln!(out, "# h = 1 / J, kappa_bar = {}, T = {:.16e}", self.kappa_bar, self.t_end);
            out.push_str("h,dt,e_x,e_k1,e_k2,eoc_x,eoc_k1,eoc_k2\n");
        }
        for (i, l) in self.levels.iter().enumerate() {
            let _ = write!(out, "{:.16e},{:.16e}", l.h, l.dt);
            for e in &l.errors {
                let _ = write!(out, ",{e:.16e}");
            }
            for c in 0..self.columns.len() {
                if i == 0 {
                    out.push(',');
                } else {
                    let _ = write!(out, ",{:.16e}", self.orders[i - 1][c]);
                }
            }
            out.push('\n');
        }
        out
    }

    /// Fixed-width table for terminals.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:>6} {:>12} {:>12}", "J", "h", "dt");
        for c in &self.columns {
            let _ = write!(out, " {:>12} {:>7}", c, "eoc");
        }
        out.push('\n');
        for (i, l) in self.levels.iter().enumerate() {
            let _ = write!(out, "{:>6} {:>12.4e} {:>12.4e}", l.segments, l.h, l.dt);
            for (c, e) in l.errors.iter().enumerate() {
                let o = if i == 0 {
                    "-".to_string()
                } else {
                    format!("{:.3}", self.orders[i - 1][c])
                };
                let _ = write!(out, " {e:>12.4e} {o:>7}");
            }
            out.push('\n');
        }
        out
    }
}

enum RunResult {
    Circle(CircleErrors, f64),
    Segment(Trajectory),
}

fn run_level(spec: &StudySpec, level: usize) -> Result<RunResult> {
    let segments = spec.segments(level);
    let mesh = spec.case.mesh(segments)?;
    let config = spec.config(level);
    let annotate = |e| Error::Level {
        level,
        source: Box::new(e),
    };
    if spec.case.is_segment() {
        // the finest run is only sampled at the coarser run's half steps
        let stride = if level + 1 == spec.num_runs() { 2 } else { 1 };
        let mut traj = Trajectory::new(config.dt, stride);
        run(&mesh, &config, &mut |s: &FlowState, _: &StepDiagnostics| {
            traj.record(s);
            Ok(())
        })
        .map_err(annotate)?;
        Ok(RunResult::Segment(traj))
    } else {
        let (kb, mut errors) = (spec.kappa_bar, CircleErrors::default());
        let (last, _) = run(&mesh, &config, &mut |s: &FlowState, _: &StepDiagnostics| {
            errors.update(s, circle_radius_reference(1.0, kb, s.time)?);
            Ok(())
        })
        .map_err(annotate)?;
        let r = circle_radius_reference(1.0, kb, last.time).map_err(annotate)?;
        let final_err = last
            .mesh
            .vertices()
            .iter()
            .map(|p| (p.norm() - r).abs())
            .fold(0.0, f64::max);
        Ok(RunResult::Circle(errors, final_err))
    }
}

/// max over t = kΔt/2 ∈ [0, T] of MD between a level and its refinement.
fn segment_error(coarse: &Trajectory, fine: &Trajectory, resolution: usize) -> (f64, bool) {
    let samples = 2 * (coarse.frames.len() - 1);
    let mut worst = 0.0f64;
    let mut crossed = false;
    for k in 0..=samples {
        let t = k as f64 * coarse.dt / 2.0;
        let md = manifold_distance(&coarse.at(t), &fine.at(t), resolution);
        worst = worst.max(md.value);
        crossed |= md.self_intersecting;
    }
    (worst, crossed)
}

/// Runs all levels (in parallel up to `spec.threads`) and assembles the
/// report in level order.
pub fn convergence_study(spec: &StudySpec) -> Result<ConvergenceReport> {
    spec.validate()?;
    let n = spec.num_runs();
    let slots: Vec<Mutex<Option<Result<RunResult>>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = spec.threads.clamp(1, n);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                // finest (slowest) levels first
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let level = n - 1 - i;
                let r = run_level(spec, level);
                *slots[level].lock().unwrap() = Some(r);
            });
        }
    });
    let mut runs = Vec::with_capacity(n);
    for slot in slots {
        runs.push(slot.into_inner().unwrap().expect("every level ran")?);
    }

    let mut levels = Vec::with_capacity(spec.levels);
    for i in 0..spec.levels {
        let segments = spec.segments(i);
        let h = spec.case.mesh_size(segments);
        let dt = coupled_dt(h);
        let row = match (&runs[i], runs.get(i + 1)) {
            (RunResult::Circle(e, fin), _) => LevelResult {
                segments,
                h,
                dt,
                errors: vec![e.e_x, e.e_k1, e.e_k2],
                final_radius_error: Some(*fin),
                self_intersecting: false,
            },
            (RunResult::Segment(c), Some(RunResult::Segment(f))) => {
                let (md, crossed) = segment_error(c, f, spec.md_resolution);
                LevelResult {
                    segments,
                    h,
                    dt,
                    errors: vec![md],
                    final_radius_error: None,
                    self_intersecting: crossed,
                }
            }
            _ => unreachable!("segment studies run one extra level"),
        };
        levels.push(row);
    }
    Ok(ConvergenceReport::assemble(spec, levels))
}
