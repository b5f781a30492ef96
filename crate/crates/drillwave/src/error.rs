use num_complex::Complex64;
use thiserror::Error;

/// Errors raised across the crate.
///
/// The CLI maps every variant onto an exit code: bad input is 1, a failed
/// certificate is 2 and anything numerical is 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sector violated at omega = {omega} (psi = {psi})")]
    SectorViolation { omega: f64, psi: f64 },

    #[error("evaluation point {s} is numerically a pole (|d| underflows)")]
    PoleHit { s: Complex64 },

    #[error("s + C/S vanishes numerically at {s}")]
    NumericalPole { s: Complex64 },

    #[error("transfer function is not well-posed at {s}")]
    NotWellPosed { s: Complex64 },

    #[error("image curve passes within {min_modulus:e} of the origin near s = {at}")]
    ZeroCrossingOnContour { min_modulus: f64, at: Complex64 },

    #[error("winding number changed under radius doubling ({at_r} at R, {at_2r} at 2R)")]
    RadiusTooSmall { at_r: i64, at_2r: i64 },

    #[error("contour phase could not be resolved near s = {at}")]
    ContourUnresolved { at: Complex64 },

    #[error("point lies on a zone boundary: {0}")]
    OnBoundary(String),

    #[error("alpha = 0 needs the reduced boundary row; enable it explicitly")]
    AlphaZeroUnsupported,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("feedback interconnection is ill-posed (I + D_K D_yu singular)")]
    IllPosedLoop,

    #[error("system is not stable (spectral abscissa {abscissa:e})")]
    UnstableSystem { abscissa: f64 },

    #[error("controller is not stable (spectral abscissa {abscissa:e})")]
    UnstableController { abscissa: f64 },

    #[error("H2 norm needs a strictly proper system (D != 0)")]
    NotStrictlyProper,

    #[error("1 + K G passes within {min_modulus:e} of the origin")]
    ImageNearOrigin { min_modulus: f64 },

    #[error("controller does not stabilize the {which} loop (winding {winding}, expected {expected})")]
    NotStabilizing {
        which: String,
        winding: i64,
        expected: i64,
    },

    #[error("simulation blew up at t = {t}")]
    BlowUp { t: f64 },

    #[error("implicit step failed at t = {t}; reduce dt")]
    StepTooLarge { t: f64 },

    #[error("no stabilizing controller found (best spectral abscissa {best_abscissa:e})")]
    NoStabilizerFound { best_abscissa: f64 },

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("unknown name: {0}")]
    UnknownName(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by bad user input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::DimensionMismatch(_)
                | Error::UnknownName(_)
                | Error::AlphaZeroUnsupported
                | Error::Io(_)
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}
