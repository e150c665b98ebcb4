use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
    #[error("degenerate curve: metric speed {speed:e} at node {node}")]
    DegenerateCurve { node: usize, speed: f64 },
    #[error("interpolation failure: {0}")]
    InterpolationFailure(String),
    #[error("curvature blowup: max |H| = {max_curvature:e} exceeds cap {cap:e}")]
    BlowupDetected { max_curvature: f64, cap: f64 },
    #[error("step rejected: {0}")]
    StepRejected(String),
    #[error("convexity lost at time {time}")]
    ConvexityLost { time: f64 },
    #[error("flow is not shrinking: {0}")]
    NotShrinking(String),
    #[error("time {time} is not before the singular time {singular_time}")]
    TimeOutOfRange { time: f64, singular_time: f64 },
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("not a normal graph at base node {node}: {reason}")]
    NotAGraph { node: usize, reason: String },
    #[error("no frame at time {time}")]
    FrameMissing { time: f64 },
    #[error("energy {energy:e} below floor")]
    EnergyUnderflow { energy: f64 },
    #[error("eigensolver did not converge")]
    ConvergenceFailure,
    #[error("fit window too short: {frames} frames, need {required}")]
    WindowTooShort { frames: usize, required: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("io: {0}")]
    Io(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
