use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("degree budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("invalid truncation budget: {0}")]
    InvalidBudget(String),
    #[error("Blaschke zero {0} is not inside the unit disk")]
    ZeroOutsideDisk(String),
    #[error("outer symbol constant must be nonzero")]
    ZeroConstant,
    #[error("tail bound {bound:e} exceeds tolerance {eps:e} at order {order}")]
    TailBudgetUnreachable { order: usize, bound: f64, eps: f64 },
    #[error("no covered theorem for this symbol class: {0}")]
    UnsupportedSymbolClass(String),
    #[error("vector is not in the kernel (residual {0:e})")]
    NotInKernel(f64),
    #[error("vector does not vanish at the origin (value modulus {0:e})")]
    OriginValueNonzero(f64),
    #[error("S*v vanishes, rank-one analysis needs S*v != 0")]
    DegenerateV,
    #[error("unrecognized kernel case: {0}")]
    UnrecognizedCase(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
