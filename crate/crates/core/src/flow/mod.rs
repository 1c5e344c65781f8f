//! The two-stage time stepper: stage 1 solves for the normal velocity and
//! the gradient-flow curvature, stage 2 moves the vertices with the BGN or
//! MDR tangential motion.

mod stages;

use crate::error::{Error, Result};
use crate::fem::{FemSpace, LuCache, DEFAULT_SOLVER_TOL};
use crate::mesh::{BoundaryCondition, Point, SimplicialSurface};

pub use stages::{
    stage1_solve, stage1_system, stage2_solve, stage2_system, Stage1Input, Stage1Output, Stage2Output,
    WeightField,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TangentialMode {
    Bgn,
    Mdr,
}

impl std::str::FromStr for TangentialMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bgn" => Ok(TangentialMode::Bgn),
            "mdr" => Ok(TangentialMode::Mdr),
            other => Err(Error::InvalidConfig(format!(
                "unknown tangential_mode '{other}' (expected bgn or mdr)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WMode {
    VertexNormal,
    /// (ϰ^m)², curves only
    KappaSquared,
}

impl std::str::FromStr for WMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vertex_normal" => Ok(WMode::VertexNormal),
            "kappa_squared" => Ok(WMode::KappaSquared),
            other => Err(Error::InvalidConfig(format!(
                "unknown w_mode '{other}' (expected vertex_normal or kappa_squared)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialCurvature {
    /// BGN curvature of the initial mesh with zero normal velocity
    Discrete,
    /// ϰ⁰ = −(d−1)/r₀ for (part of) a sphere of radius r₀
    AnalyticSphere { radius: f64 },
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub kappa_bar: f64,
    pub dt: f64,
    pub t_end: f64,
    pub tangential_mode: TangentialMode,
    pub w_mode: WMode,
    pub initial_curvature: InitialCurvature,
    pub solver_tol: f64,
    /// fail the step when the stability slack drops below −tol_stab
    pub check_stability: bool,
}

impl SolverConfig {
    pub fn new(kappa_bar: f64, dt: f64, t_end: f64) -> Self {
        SolverConfig {
            kappa_bar,
            dt,
            t_end,
            tangential_mode: TangentialMode::Bgn,
            w_mode: WMode::VertexNormal,
            initial_curvature: InitialCurvature::Discrete,
            solver_tol: DEFAULT_SOLVER_TOL,
            check_stability: true,
        }
    }

    pub fn with_tangential_mode(mut self, mode: TangentialMode) -> Self {
        self.tangential_mode = mode;
        self
    }

    pub fn with_w_mode(mut self, mode: WMode) -> Self {
        self.w_mode = mode;
        self
    }

    pub fn with_initial_curvature(mut self, init: InitialCurvature) -> Self {
        self.initial_curvature = init;
        self
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return bad(format!("t_end must be nonnegative, got {}", self.t_end));
        }
        if !self.kappa_bar.is_finite() {
            return bad("kappa_bar must be finite".into());
        }
        if !(self.solver_tol > 0.0) {
            return bad(format!("solver_tol must be positive, got {}", self.solver_tol));
        }
        if self.w_mode == WMode::KappaSquared && dim != 2 {
            return bad("w_mode = kappa_squared is only valid for curves (d = 2)".into());
        }
        if let InitialCurvature::AnalyticSphere { radius } = self.initial_curvature {
            if !(radius > 0.0) {
                return bad(format!("analytic sphere radius must be positive, got {radius}"));
            }
        }
        self.num_steps().map(|_| ())
    }

    /// M = T/Δt, which must be an integer up to rounding.
    pub fn num_steps(&self) -> Result<usize> {
        let ratio = self.t_end / self.dt;
        let m = ratio.round();
        if (ratio - m).abs() > 1e-9 * m.max(1.0) {
            return Err(Error::InvalidConfig(format!(
                "t_end = {} is not an integer multiple of dt = {}",
                self.t_end, self.dt
            )));
        }
        Ok(m as usize)
    }

    pub fn stability_tolerance(&self, initial_energy: f64) -> f64 {
        1e-9 * initial_energy.max(1.0)
    }
}

/// Time-stepping state at t_m.
#[derive(Clone, Debug)]
pub struct FlowState {
    /// Γ^m
    pub mesh: SimplicialSurface,
    /// Γ^{m−1}, same connectivity
    pub previous: SimplicialSurface,
    /// ϰ^m carried to Γ^m
    pub curvature: Vec<f64>,
    /// κ^m from the last position update (the initial curvature at m = 0)
    pub multiplier: Vec<f64>,
    pub step: usize,
    pub time: f64,
    /// ½‖ϰ^m − κ̄‖²_{m−1}
    pub energy: f64,
    pub initial_energy: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub time: f64,
    pub energy: f64,
    pub dissipation: f64,
    pub mesh_ratio: f64,
    pub min_element: f64,
    pub stability_slack: f64,
}

impl FlowState {
    pub fn diagnostics(&self) -> Result<StepDiagnostics> {
        Ok(StepDiagnostics {
            step: self.step,
            time: self.time,
            energy: self.energy,
            dissipation: 0.0,
            mesh_ratio: self.mesh.mesh_ratio()?,
            min_element: self.mesh.min_element_measure()?,
            stability_slack: 0.0,
        })
    }

    /// (id_m − id_{m−1}) / Δt at the vertices.
    pub fn mesh_velocity(&self, dt: f64) -> Vec<Point> {
        self.mesh
            .vertices()
            .iter()
            .zip(self.previous.vertices())
            .map(|(a, b)| (a - b) / dt)
            .collect()
    }
}

/// Builds Γ⁰ and ϰ⁰ from the initial mesh Γ_Y.
pub fn initialize(mesh: &SimplicialSurface, config: &SolverConfig) -> Result<FlowState> {
    config.validate(mesh.ambient_dim())?;
    let d = mesh.ambient_dim();
    let kb = config.kappa_bar;
    let (gamma0, curvature) = match config.initial_curvature {
        InitialCurvature::AnalyticSphere { radius } => {
            let k0 = -((d - 1) as f64) / radius;
            let curv = (0..mesh.num_vertices())
                .map(|q| match mesh.vertex_condition(q) {
                    Some(BoundaryCondition::Navier) => kb,
                    _ => k0,
                })
                .collect();
            (mesh.clone(), curv)
        }
        InitialCurvature::Discrete => {
            let out = stage2_solve(mesh, None, config.dt, TangentialMode::Bgn, kb, config.solver_tol, None)?;
            (mesh.with_vertices(out.positions)?, out.kappa)
        }
    };
    gamma0.measures()?;
    let fs = FemSpace::new(&gamma0)?;
    let shifted: Vec<f64> = curvature.iter().map(|x: &f64| x - kb).collect();
    let energy = 0.5 * fs.exact_inner_product(&shifted, &shifted);
    Ok(FlowState {
        previous: gamma0.clone(),
        mesh: gamma0,
        multiplier: curvature.clone(),
        curvature,
        step: 0,
        time: 0.0,
        energy,
        initial_energy: energy,
    })
}

/// Per element √J^m = (|σ^{m−1}| / |σ^m|)^{1/2}.
pub fn sqrt_jacobian(previous: &SimplicialSurface, current: &SimplicialSurface) -> Result<Vec<f64>> {
    let a = previous.measures()?;
    let b = current.measures()?;
    Ok(a.iter().zip(&b).map(|(p, c)| (p / c).sqrt()).collect())
}

pub fn weight_field(state: &FlowState, mode: WMode) -> Result<WeightField> {
    Ok(match mode {
        WMode::VertexNormal => {
            let v = state.mesh.normalized_vertex_normals()?;
            WeightField::Element(state.mesh.w_field(&v)?)
        }
        WMode::KappaSquared => WeightField::Nodal(state.curvature.iter().map(|k| k * k).collect()),
    })
}

/// Everything computed in one step, for callers that need the raw fields.
#[derive(Clone, Debug)]
pub struct StepOutput {
    pub state: FlowState,
    pub diagnostics: StepDiagnostics,
    pub velocity: Vec<f64>,
}

/// Stepper owning the reusable symbolic factorizations of both stages.
pub struct Simulation {
    pub config: SolverConfig,
    pub state: FlowState,
    cache1: LuCache,
    cache2: LuCache,
}

impl Simulation {
    pub fn new(mesh: &SimplicialSurface, config: SolverConfig) -> Result<Self> {
        let state = initialize(mesh, &config)?;
        Ok(Self::from_state(state, config))
    }

    pub fn from_state(state: FlowState, config: SolverConfig) -> Self {
        Simulation {
            config,
            state,
            cache1: LuCache::new(),
            cache2: LuCache::new(),
        }
    }

    pub fn step(&mut self) -> Result<StepOutput> {
        let out = advance(&self.state, &self.config, Some((&mut self.cache1, &mut self.cache2)))
            .map_err(|e| Error::Step {
                step: self.state.step + 1,
                time: self.state.time + self.config.dt,
                source: Box::new(e),
            })?;
        self.state = out.state.clone();
        Ok(out)
    }
}

/// One step of the scheme from `state`.
pub fn step(state: &FlowState, config: &SolverConfig) -> Result<(FlowState, StepDiagnostics)> {
    let out = advance(state, config, None)?;
    Ok((out.state, out.diagnostics))
}

fn advance(
    state: &FlowState,
    config: &SolverConfig,
    caches: Option<(&mut LuCache, &mut LuCache)>,
) -> Result<StepOutput> {
    let dt = config.dt;
    let weight = weight_field(state, config.w_mode)?;
    let sqrt_j = sqrt_jacobian(&state.previous, &state.mesh)?;
    let eta = state.mesh_velocity(dt);
    let input = Stage1Input {
        mesh: &state.mesh,
        curvature: &state.curvature,
        weight: &weight,
        sqrt_jacobian: &sqrt_j,
        mesh_velocity: &eta,
        kappa_bar: config.kappa_bar,
        dt,
    };
    let (c1, c2) = match caches {
        Some((a, b)) => (Some(a), Some(b)),
        None => (None, None),
    };
    let s1 = stage1_solve(&input, config.solver_tol, c1)?;
    let slack = state.energy - s1.energy - s1.dissipation;
    let tol = config.stability_tolerance(state.initial_energy);
    if config.check_stability && slack < -tol {
        return Err(Error::StabilityViolation { slack, tolerance: tol });
    }
    let s2 = stage2_solve(
        &state.mesh,
        Some(&s1.velocity),
        dt,
        config.tangential_mode,
        config.kappa_bar,
        config.solver_tol,
        c2,
    )?;
    let mesh = state.mesh.with_vertices(s2.positions)?;
    let new = FlowState {
        previous: state.mesh.clone(),
        mesh,
        curvature: s1.curvature,
        multiplier: s2.kappa,
        step: state.step + 1,
        time: (state.step + 1) as f64 * dt,
        energy: s1.energy,
        initial_energy: state.initial_energy,
    };
    let diagnostics = StepDiagnostics {
        step: new.step,
        time: new.time,
        energy: s1.energy,
        dissipation: s1.dissipation,
        mesh_ratio: new.mesh.mesh_ratio()?,
        min_element: new.mesh.min_element_measure()?,
        stability_slack: slack,
    };
    Ok(StepOutput {
        state: new,
        diagnostics,
        velocity: s1.velocity,
    })
}

/// Receives the initial state and every subsequent step of a run.
pub trait FlowObserver {
    fn observe(&mut self, state: &FlowState, diagnostics: &StepDiagnostics) -> Result<()>;
}

impl<F: FnMut(&FlowState, &StepDiagnostics) -> Result<()>> FlowObserver for F {
    fn observe(&mut self, state: &FlowState, diagnostics: &StepDiagnostics) -> Result<()> {
        self(state, diagnostics)
    }
}

/// Initializes and runs M = T/Δt steps, streaming every state (starting with
/// the initial one) to `observer`.
pub fn run(
    mesh: &SimplicialSurface,
    config: &SolverConfig,
    observer: &mut dyn FlowObserver,
) -> Result<(FlowState, Vec<StepDiagnostics>)> {
    let steps = config.num_steps()?;
    let mut sim = Simulation::new(mesh, config.clone()).map_err(|e| Error::Step {
        step: 0,
        time: 0.0,
        source: Box::new(e),
    })?;
    let d0 = sim.state.diagnostics()?;
    observer.observe(&sim.state, &d0)?;
    let mut series = vec![d0];
    for _ in 0..steps {
        let out = sim.step()?;
        observer.observe(&out.state, &out.diagnostics)?;
        series.push(out.diagnostics);
    }
    Ok((sim.state, series))
}
