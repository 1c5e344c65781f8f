use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate element {simplex}: measure {measure:e} below threshold {threshold:e}")]
    DegenerateElement {
        simplex: usize,
        measure: f64,
        threshold: f64,
    },

    #[error("degenerate vertex normal at vertex {vertex}: |omega| = {norm:e}")]
    DegenerateVertexNormal { vertex: usize, norm: f64 },

    #[error("invalid generator parameters: {0}")]
    InvalidSpec(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported mesh format: {0}")]
    UnsupportedFormat(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("quadrature degree {0} is not supported (maximum 4)")]
    UnsupportedDegree(usize),

    #[error("conflicting constraints on field {field}, vertex {vertex}: {first} vs {second}")]
    ConflictingConstraint {
        field: usize,
        vertex: usize,
        first: f64,
        second: f64,
    },

    #[error("singular system in {context}: {detail}")]
    SingularMatrix {
        context: &'static str,
        detail: String,
    },

    #[error("energy stability violated: slack {slack:e} < -{tolerance:e}")]
    StabilityViolation { slack: f64, tolerance: f64 },

    #[error("radius trajectory crosses 1/|kappa_bar| = {critical}: {detail}")]
    BranchCrossing { critical: f64, detail: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("step {step} (t = {time}): {source}")]
    Step {
        step: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("convergence level {level}: {source}")]
    Level {
        level: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DegenerateElement { .. } => "degenerate_element",
            Error::DegenerateVertexNormal { .. } => "degenerate_vertex_normal",
            Error::InvalidSpec(_) => "invalid_spec",
            Error::InvalidMesh(_) => "invalid_mesh",
            Error::Parse { .. } => "parse_error",
            Error::UnsupportedFormat(_) => "unsupported_format",
            Error::Io { .. } => "io",
            Error::UnsupportedDegree(_) => "unsupported_degree",
            Error::ConflictingConstraint { .. } => "conflicting_constraint",
            Error::SingularMatrix { .. } => "singular_matrix",
            Error::StabilityViolation { .. } => "stability_violation",
            Error::BranchCrossing { .. } => "branch_crossing",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Step { source, .. } | Error::Level { source, .. } => source.kind(),
        }
    }
}
