use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("reflection |r| = {magnitude} at detuning {detuning} rad/s exceeds unity")]
    ReflectionExceedsUnity { detuning: f64, magnitude: f64 },

    #[error("reflectivity R = {0} exceeds unity")]
    UnphysicalReflectivity(f64),

    #[error("detuning grid is empty")]
    EmptyGrid,

    #[error("detuning grid is not strictly increasing at index {0}")]
    GridNotIncreasing(usize),

    #[error("array lengths differ: {0} detunings, {1} values")]
    LengthMismatch(usize, usize),

    #[error("reflection grid [{grid_min}, {grid_max}] does not cover sweep [{sweep_min}, {sweep_max}] rad/s")]
    GridDoesNotCoverSweep {
        grid_min: f64,
        grid_max: f64,
        sweep_min: f64,
        sweep_max: f64,
    },

    #[error(
        "sample rate {sample_rate} Hz violates Nyquist for carriers up to {max_carrier_hz} Hz"
    )]
    Nyquist {
        sample_rate: f64,
        max_carrier_hz: f64,
    },

    #[error("trace of {len} samples is too short for a {taps}-tap filter")]
    TraceTooShort { len: usize, taps: usize },

    #[error("too few zero crossings ({0}) to count phase")]
    TooFewZeroCrossings(usize),

    #[error("unknown window `{0}`")]
    UnknownWindow(String),

    #[error("transfer matrix is singular (|1 - i zeta| = {0:e})")]
    SingularCoupling(f64),

    #[error("grids share no detuning points")]
    DisjointGrids,

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
