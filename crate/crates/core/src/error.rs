use thiserror::Error;

/// Errors raised by grid construction, field algebra and the solver entry points.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("grid spacing must be positive, got h = {0}")]
    NonPositiveSpacing(f64),
    #[error("truncation radius must be positive, got R = {0}")]
    NonPositiveRadius(f64),
    #[error("domain too coarse: R/h = {ratio} < 8")]
    DomainTooCoarse { ratio: f64 },
    #[error("spacing h = {h} does not divide 2R = {two_r}")]
    NonConformingSpacing { h: f64, two_r: f64 },
    #[error("unsupported dimension {0}, expected 1 or 2")]
    UnsupportedDimension(usize),
    #[error("field does not live on this grid")]
    GridMismatch,
    #[error("cannot extend from R = {from} to the smaller R = {to}")]
    ShrinkingDomain { from: f64, to: f64 },
    #[error("grids have different spacing or dimension ({0} vs {1})")]
    SpacingMismatch(f64, f64),
    #[error("first well must sit at the origin, got {0:?}")]
    MissingOriginWell(Vec<f64>),
    #[error("v_inf = {0} must exceed min V = 1")]
    FlatPotential(f64),
    #[error("wells {0} and {1} coincide")]
    DuplicateWells(usize, usize),
    #[error("well list is empty")]
    NoWells,
    #[error("well {index} has {got} coordinates, expected {dim}")]
    WellDimension {
        index: usize,
        got: usize,
        dim: usize,
    },
    #[error("well width must be positive, got {0}")]
    NonPositiveWidth(f64),
    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("delta = {0} outside (0, e^(-3/2)] (cap 0.22313016014842982 keeps F1 convex)")]
    InvalidDelta(f64),
    #[error("growth exponent p = {0} must satisfy 2 < p < inf")]
    InvalidExponent(f64),
    #[error("field vanishes identically")]
    ZeroField,
    #[error("domain too small: {0}")]
    DomainTooSmall(String),
    #[error(
        "seed for well {well} has barycenter {distance:.6} away from its well (rho0 = {rho0})"
    )]
    SeedOutsideRegion {
        well: usize,
        distance: f64,
        rho0: f64,
    },
    #[error("well index {0} out of range")]
    WellIndex(usize),
    #[error("{0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
