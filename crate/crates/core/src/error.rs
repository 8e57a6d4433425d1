use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} modes, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("mode index {index} out of range for {modes} modes")]
    Index { index: usize, modes: usize },

    #[error("degenerate state: {0}")]
    Degenerate(String),

    #[error("amplitude overflow at Fock level {level}; increase epsilon")]
    Overflow { level: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("decomposition failed: {0}")]
    DecompositionFailure(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),

    #[error("matrix is not unitary (max |u u^dag - I| = {defect:e})")]
    NotUnitary { defect: f64 },

    #[error("circuit element {index}: {source}")]
    Element {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("photon cutoff too small: unexplained probability {tail:e}")]
    CutoffTooSmall { tail: f64 },

    #[error("sampler initialization failed: {0}")]
    Initialization(String),

    #[error("decomposition terms are not orthogonal (max |overlap| = {max_overlap:e})")]
    NotOrthogonal { max_overlap: f64 },

    #[error("quadrature radius too small: |W| = {boundary:e} on the boundary")]
    RadiusTooSmall { boundary: f64 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn element(index: usize, source: Error) -> Self {
        Error::Element {
            index,
            source: Box::new(source),
        }
    }
}
