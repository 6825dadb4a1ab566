use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("invalid beam: {0}")]
    Beam(String),
    #[error("invalid fin: {0}")]
    Fin(String),
    #[error("invalid body: {0}")]
    Body(String),
    #[error("no barrier to trigger")]
    NoBarrier,
    #[error("bistability lost")]
    BistabilityLost,
    #[error("design does not fire (max latch/trigger ratio {max_tilt:.4})")]
    DoesNotFire { max_tilt: f64 },
    #[error("chatter: {snaps} snaps in one cycle")]
    Chatter { snaps: usize },
    #[error("integrator unstable at t = {t:.6} s: {detail}")]
    Unstable { t: f64, detail: String },
    #[error("infeasible design: {0}")]
    Infeasible(String),
    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("steering script error at line {line}: {msg}")]
    Script { line: usize, msg: String },
    #[error("{0}")]
    Input(String),
    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Script { .. } | Error::Input(_) | Error::Io(_) => 2,
            Error::Infeasible(_) | Error::Geometry(_) | Error::Beam(_) | Error::Fin(_) | Error::Body(_) => 4,
            _ => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Geometry(_) => "geometry",
            Error::Beam(_) => "beam",
            Error::Fin(_) => "fin",
            Error::Body(_) => "body",
            Error::NoBarrier => "no_barrier",
            Error::BistabilityLost => "bistability_lost",
            Error::DoesNotFire { .. } => "does_not_fire",
            Error::Chatter { .. } => "chatter",
            Error::Unstable { .. } => "unstable",
            Error::Infeasible(_) => "infeasible",
            Error::Config { .. } => "config",
            Error::Script { .. } => "script",
            Error::Input(_) => "input",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
