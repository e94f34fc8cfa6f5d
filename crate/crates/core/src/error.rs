use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty simplex list")]
    EmptyComplex,
    #[error("simplex {0:?} is listed more than once")]
    DuplicateSimplex(Vec<usize>),
    #[error("simplex {0:?} does not have strictly increasing vertices")]
    BadSimplex(Vec<usize>),
    #[error("expected {expected} filter values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("not a filtration: f({face:?}) > f({coface:?})")]
    NotAFiltration { face: Vec<usize>, coface: Vec<usize> },
    #[error("gap radius is undefined on a complex with fewer than two simplices")]
    Undefined,
    #[error("order is not compatible with face inclusion at simplex {0}")]
    OrderViolation(usize),
    #[error("degree {degree} is out of range for a complex of dimension {max}")]
    BadDegree { degree: usize, max: usize },
    #[error("wasserstein exponent must be positive, got {0}")]
    BadExponent(f64),
    #[error("shape mismatch: {0}")]
    ShapeError(String),
    #[error("direction is not a unit vector (norm {0})")]
    NotOnSphere(f64),
    #[error("covariance matrix {0} is not positive definite")]
    NotPositiveDefinite(usize),
    #[error("persistence images are only defined on barcodes without infinite bars")]
    InfiniteBarsUnsupported,
    #[error("parameter is singular: {} non-structural ties", .ties.len())]
    SingularParameter { ties: Vec<(usize, usize)> },
    #[error("pre-order along the probe direction did not stabilize")]
    UnstableDirection,
    #[error("optimization stalled at a singular parameter")]
    StalledAtSingularity,
    #[error("complex has {0} simplices, above the oracle limit of 64")]
    OracleTooLarge(usize),
    #[error("loss is infinite: infinite-bar counts differ from the target")]
    InfiniteLoss,
    #[error("invalid input: {0}")]
    Invalid(String),
}
