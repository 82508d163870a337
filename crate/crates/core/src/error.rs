use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("weight M_{n} is not positive (log M_n = -inf or NaN)")]
    NonPositiveWeight { n: usize },
    #[error("log M_{n} = +inf occurs before finite entries")]
    DegenerateInfinite { n: usize },
    #[error("weight table too short for the requested rule ({len} entries)")]
    TableTooShort { len: usize },
    #[error("weight table has no value at n = {n} and no tail rule")]
    OutOfRange { n: usize },
    #[error("sequence is not log-convex at n = {n}")]
    NotLogConvex { n: usize },
    #[error("kappa(p, M) diverges; tail of the associated sequence is infinite")]
    DivergentTail,
    #[error("kappa(p, M) is not finite")]
    DivergentKappa,
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("inconclusive: {0}")]
    Inconclusive(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("box width must be positive, got {0}")]
    NonPositiveWidth(f64),
    #[error("degree {degree} exceeds cap {cap}")]
    DegreeCapExceeded { degree: usize, cap: usize },
    #[error("breakpoints must be strictly increasing and finite")]
    BadBreakpoints,
    #[error("coefficients must be finite")]
    NonFiniteCoefficient,
    #[error("root isolation failed in [{lo}, {hi}]")]
    RootIsolationFailure { lo: f64, hi: f64 },
    #[error("quadrature did not converge (estimate {value}, error {error})")]
    QuadratureNonConvergence { value: f64, error: f64 },
    #[error("derivative of order {order} has a singular part below the requested order")]
    DistributionalDerivative { order: usize },
    #[error("width a_{index} underflows (log a = {log_width})")]
    UnderflowWidth { index: usize, log_width: f64 },
    #[error("certificate failed: {quantity} measured {measured} exceeds bound {bound}")]
    CertificateFailure {
        quantity: String,
        measured: f64,
        bound: f64,
    },
    #[error("no K up to {k_max} satisfies the mollifier requirements")]
    KExhausted { k_max: usize },
    #[error("no ratio bound rho < 1 certified on the window")]
    RhoNotFound,
    #[error("sawtooth period invalid: need eps_j < 1/j")]
    BadPeriod,
    #[error("partition depth exhausted")]
    DepthExhausted,
}

pub type Result<T> = std::result::Result<T, Error>;
