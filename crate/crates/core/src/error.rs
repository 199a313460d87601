use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix contains NaN or infinite entries")]
    NonFinite,
    #[error("SVD did not converge")]
    SvdNoConvergence,
    #[error("matrix is not Hermitian (skew norm {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not positive semidefinite (eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("equalizer row for {0} is all zeros")]
    DegenerateEqualizer(String),
    #[error("negative SINR {0}")]
    NegativeSinr(f64),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("rank-deficient beam selection: {0}")]
    RankDeficient(String),
    #[error("no admissible beam selection")]
    NoAdmissibleSelection,
    #[error("effective gain is zero for {0}")]
    ZeroGain(String),
}

pub type Result<T> = std::result::Result<T, Error>;
