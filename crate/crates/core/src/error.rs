use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid sublevel index {0}, expected -1 or +1")]
    InvalidSublevel(i32),

    #[error("Bessel J_{order}({x}) is outside the supported range")]
    BesselRange { order: i64, x: f64 },

    #[error("comb tooth {0} is not present in the spectrum")]
    MissingTooth(i64),

    #[error("singular system: pivot {magnitude:e} at column {index} is below threshold {threshold:e}")]
    Singular {
        index: usize,
        magnitude: f64,
        threshold: f64,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("ellipticity {0} is too close to ±π/4, observables have a vanishing denominator")]
    DegenerateEllipticity(f64),

    #[error("grid is not uniform: {0}")]
    NonUniformGrid(String),

    #[error("position {position} kHz is outside the scan range [{start}, {stop}]")]
    OutsideGrid { position: f64, start: f64, stop: f64 },

    #[error("scan aborted: {failed} of {total} points failed (first failure at index {first})")]
    ScanFailed {
        failed: usize,
        total: usize,
        first: usize,
    },

    #[error("integrator precondition violated: {0}")]
    StepSize(String),

    #[error("trace drift {drift:e} at t = {time} exceeds 1e-6")]
    TraceDrift { drift: f64, time: f64 },

    #[error("trajectory is not periodic: defect {defect:e} over the last period")]
    NotPeriodic { defect: f64 },

    #[error("invalid period sampling: {0}")]
    Sampling(String),
}
