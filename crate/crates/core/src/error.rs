use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by sampling, reconstruction, assembly and solves.
#[derive(Debug, Error)]
pub enum Error {
    #[error("target spacing {target_h} yields only {count} points (need at least 50)")]
    TargetTooCoarse { target_h: f64, count: usize },

    #[error("repulsion relaxation did not reach the spacing tolerance after {iterations} iterations ({violations} points outside the band)")]
    NonConvergedRelaxation { iterations: usize, violations: usize },

    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),

    #[error("point cloud has no analytic shape to project onto")]
    NoProjectionAvailable,

    #[error("no radius up to the cloud diameter gives every point {required} neighbors")]
    NoFeasibleRadius { required: usize },

    #[error("degenerate neighborhood at point {index}: {reason}")]
    DegenerateNeighborhood { index: usize, reason: String },

    #[error("surface is not a graph over the tangent plane at point {index}")]
    GraphFailure { index: usize },

    #[error("input vector field is not tangent at point {index} (normal component {normal_component:e})")]
    NonTangentInput { index: usize, normal_component: f64 },

    #[error("{count} point(s) failed, first at index {first}: {source}")]
    PointFailures {
        count: usize,
        first: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("chart singularity at the requested point")]
    ChartSingularity,

    #[error("reference field has zero norm")]
    ZeroReference,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("linear system is singular (zero pivot in block {block})")]
    SingularSystem { block: usize },

    #[error("iterative solver stalled after {iterations} iterations, relative residual {residual:e}")]
    SolverDiverged {
        iterations: usize,
        residual: f64,
        trace: Vec<f64>,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error in {what}: {detail}")]
    Parse { what: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn at_stage(self, stage: impl Into<String>) -> Error {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    pub fn degenerate(index: usize, reason: impl Into<String>) -> Error {
        Error::DegenerateNeighborhood {
            index,
            reason: reason.into(),
        }
    }

    /// Innermost error, skipping stage labels and per-point aggregation.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } | Error::PointFailures { source, .. } => source.root(),
            other => other,
        }
    }
}

/// Collect per-point results, reporting how many failed and the first failure.
pub(crate) fn collect_points<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(results.len());
    let mut first: Option<(usize, Error)> = None;
    let mut count = 0;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => out.push(v),
            Err(e) => {
                count += 1;
                if first.is_none() {
                    first = Some((i, e));
                }
            }
        }
    }
    match first {
        None => Ok(out),
        Some((first, source)) => Err(Error::PointFailures {
            count,
            first,
            source: Box::new(source),
        }),
    }
}
