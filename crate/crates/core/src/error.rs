use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("word is empty")]
    EmptyWord,
    #[error("letter {letter} out of range 1..={k}")]
    LetterOutOfRange { letter: usize, k: usize },
    #[error("word is not surjective: letter {missing} never occurs")]
    NotSurjective { missing: usize },
    #[error("adjacent repeat of letter {letter} at positions {pos} and {}", pos + 1)]
    AdjacentRepeat { letter: usize, pos: usize },
    /// Positions are 1-based, a < b < c < d with w_a = w_c != w_b = w_d.
    #[error("complexity violation at positions ({}, {}, {}, {})", .positions.0, .positions.1, .positions.2, .positions.3)]
    ComplexityViolation { positions: (usize, usize, usize, usize) },
    #[error("face undefined: lobe {lobe} occurs only once")]
    FaceUndefined { lobe: usize },
    #[error("face undefined: lobe {lobe} has no occurrence {occurrence}")]
    OccurrenceOutOfRange { lobe: usize, occurrence: usize },
    #[error("arity mismatch: expected {expected}, found {found}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("not a permutation: {0}")]
    NotAPermutation(String),
    #[error("invalid coordinates: {0}")]
    InvalidCoordinates(String),
    #[error("degenerate coordinate: {0}")]
    DegenerateCoordinate(String),
    #[error("invalid nested tree: {0}")]
    InvalidTree(String),
    #[error("resource limit: {0}")]
    ResourceLimit(String),
    #[error("constant term must be a nonzero perfect square, got {0}")]
    BadConstantTerm(String),
    #[error("inner series has a nonzero x^0 term")]
    ValuationViolation,
    #[error("series computations disagree at x^{x_degree} t^{t_degree}")]
    InternalDisagreement { x_degree: usize, t_degree: usize },
    #[error("ill-conditioned configuration: {0}")]
    IllConditioned(String),
    #[error("separatrix tracing exceeded {0} steps")]
    StepLimit(usize),
    #[error("capture ambiguity: {0}")]
    CaptureAmbiguity(String),
    #[error("ambiguous first hit at white vertex {0}")]
    AmbiguousFirstHit(usize),
    #[error("point within {clearance:e} of a cell wall")]
    BoundaryProximity { clearance: f64 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("verification failed: {0}")]
    Verification(String),
}

/// Coarse classes used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Resource,
    Verification,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::ResourceLimit(_) | Error::StepLimit(_) => ErrorClass::Resource,
            Error::Verification(_) | Error::InternalDisagreement { .. } => ErrorClass::Verification,
            _ => ErrorClass::Validation,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.class() {
            ErrorClass::Validation => 1,
            ErrorClass::Resource => 2,
            ErrorClass::Verification => 3,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
