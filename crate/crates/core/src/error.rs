//! Error types shared across the kernel.

use thiserror::Error;

/// Errors raised by geometric queries and the reconstruction pipeline.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// A one-sided quantity was requested at a corner through the two-sided API.
    #[error("parameter {0} lies on a corner; request a one-sided frame instead")]
    CornerPoint(f64),

    /// The ray leaves the boundary tangentially; no transversal exit exists.
    #[error("ray from alpha = {alpha} is tangent to the boundary (dir . M_in = {dot:.3e})")]
    TangentRay { alpha: f64, dot: f64 },

    /// Root finding for the ray exit failed; boundary data is inconsistent.
    #[error("no boundary exit found for ray from alpha = {0}")]
    NoExit(f64),

    /// |n'| vanishes, so no ruling direction is defined at this parameter.
    #[error("normal derivative vanishes at alpha = {0}; no ruling there")]
    ZeroNormalDerivative(f64),

    /// One-sided extrapolation of the ruling field failed to settle.
    #[error("one-sided ruling limits diverge near alpha = {0}")]
    LimitDivergence(f64),

    /// The ruled parameterization lost regularity (g_m - beta G <= 0).
    #[error("singular ruling at alpha = {alpha}, beta = {beta}: jacobian = {jacobian:.3e}")]
    SingularRuling { alpha: f64, beta: f64, jacobian: f64 },

    /// The reduced energy integrand failed the integrability screen.
    #[error("reduced energy diverges on interval [{0}, {1}]")]
    DivergentEnergy(f64, f64),

    /// A planar component could not be fit by a rigid motion within tolerance.
    #[error("planar gap fit failed: residual {residual:.3e} exceeds {tol:.3e}")]
    GapMismatch { residual: f64, tol: f64 },

    /// The normal varies over a region that should map rigidly.
    #[error("normal varies by {0:.3e} over a planar gap")]
    NonPlanarGap(f64),

    /// Point location failed; the chord decomposition is inconsistent.
    #[error("point location failed at ({0}, {1})")]
    LocationFailure(f64, f64),

    /// The pulled-back normal has no gradient on this ruling.
    #[error("normal gradient undefined on the junction ruling through ({0}, {1})")]
    UndefinedOnL3(f64, f64),

    /// A curve-family generator produced a degenerate curve.
    #[error("curve family generator failed: {0}")]
    GeneratorFailure(String),

    /// The query point lies outside the closed region.
    #[error("point ({0}, {1}) lies outside the region")]
    OutsideRegion(f64, f64),

    /// Malformed sampled-curve input.
    #[error("invalid sampled curve: {0}")]
    InvalidSamples(String),
}

pub type Result<T> = std::result::Result<T, Error>;
