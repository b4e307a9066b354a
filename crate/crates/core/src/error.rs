use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A filter's `kappa * dt` is too large for the sampling grid.
    GridTooCoarse { kappa: f64, dt: f64 },
    /// A constructor argument broke a documented invariant.
    InvalidParameter(&'static str),
    /// Normalization was requested on a histogram without counts.
    EmptyInput,
    /// The model is identically zero over the histogram.
    DegenerateModel,
    /// The pulse does not overlap the analysis window.
    ZeroMode,
    /// Too few windows or points for the requested statistic.
    InsufficientData { needed: usize, got: usize },
    /// The variance trace shows no excess above the noise margin.
    NoSignal { peak_excess: f64, threshold: f64 },
    /// Fock order beyond the supported truncation.
    UnsupportedOrder(usize),
    /// All quadrature points are identical.
    Degenerate,
    /// Two arrays that must share a length do not.
    LengthMismatch { expected: usize, got: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::GridTooCoarse { kappa, dt } => write!(
                f,
                "grid too coarse: kappa*dt = {} >= 0.5 (kappa = {kappa} rad/ns, dt = {dt} ns)",
                kappa * dt
            ),
            Error::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
            Error::EmptyInput => write!(f, "empty input: no counts to normalize"),
            Error::DegenerateModel => write!(f, "degenerate model: identically zero"),
            Error::ZeroMode => write!(f, "mode function vanishes on the window"),
            Error::InsufficientData { needed, got } => {
                write!(f, "insufficient data: need at least {needed}, got {got}")
            }
            Error::NoSignal {
                peak_excess,
                threshold,
            } => write!(
                f,
                "no signal: peak variance excess {peak_excess:.4} does not exceed noise margin {threshold:.4}"
            ),
            Error::UnsupportedOrder(n) => {
                write!(f, "Fock order {n} exceeds the supported truncation")
            }
            Error::Degenerate => write!(f, "degenerate data: all points identical"),
            Error::LengthMismatch { expected, got } => {
                write!(f, "length mismatch: expected {expected}, got {got}")
            }
        }
    }
}

impl core::error::Error for Error {}
