use thiserror::Error;

use crate::fit_engine::FitResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("unstable geometry: g_{axis} = {g:.6} (need -1 < g < 1)")]
    UnstableGeometry { axis: char, g: f64 },

    #[error("invalid mode indices: {0}")]
    InvalidModeIndices(String),

    #[error("temperature must be positive, got {0} K")]
    NonPositiveTemperature(f64),

    #[error("temperature {value} K outside the BCS model range (0, {max}] K")]
    TemperatureOutOfRange { value: f64, max: f64 },

    #[error("{name} must be positive, got {value}")]
    NonPositiveInput { name: &'static str, value: f64 },

    #[error("surface roughness is zero; scattering loss is unbounded")]
    ZeroRoughness,

    #[error("cannot combine an empty list of quality factors")]
    EmptyList,

    #[error("damping time must be positive, got {0} s")]
    NonPositiveTc(f64),

    #[error("field energy must be non-negative, got {0}")]
    NegativeEnergy(f64),

    #[error("invalid probe model: {0}")]
    InvalidProbeModel(String),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate regime: {0}")]
    DegenerateRegime(String),

    #[error("identifiability: {0}")]
    Identifiability(String),

    #[error("shifted curves share no time overlap (attenuations {a_db} dB and {b_db} dB)")]
    NonOverlappingSupport { a_db: f64, b_db: f64 },

    #[error("fit did not converge after {} iterations (ssr {:e})", .0.iterations, .0.ssr)]
    FitDidNotConverge(Box<FitResult>),

    #[error("non-finite residual at parameters {0:?}")]
    NonFiniteResidual(Vec<f64>),

    #[error("singular jacobian; null-space direction {direction:?}")]
    SingularJacobian { direction: Vec<f64> },

    #[error("{0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
