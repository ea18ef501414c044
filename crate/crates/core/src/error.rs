use crate::lattice::Representation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid lattice size {0}: must be even and at least 16")]
    InvalidLatticeSize(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{what} is not normalized (squared norm {norm_sqr})")]
    NotNormalized { what: &'static str, norm_sqr: f64 },
    #[error("expected a state in {expected:?} representation, found {found:?}")]
    RepresentationMismatch {
        expected: Representation,
        found: Representation,
    },
    #[error("lattice size mismatch: {0} vs {1}")]
    GeometryMismatch(usize, usize),
    #[error("symbol is not special unitary at k = {k} (det = {det_re} + {det_im}i)")]
    NotSpecialUnitary { k: f64, det_re: f64, det_im: f64 },
    #[error("degenerate spectrum at k = {k} (omega = {omega})")]
    Degenerate { k: f64, omega: f64 },
    #[error("probability {weight:e} near the lattice boundary; enlarge the lattice")]
    BoundaryContamination { weight: f64 },
    #[error("distributions have different supports")]
    SupportMismatch,
    #[error("total weight vanishes after efficiency filtering")]
    ZeroWeight,
    #[error("insufficient data: need {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },
}
