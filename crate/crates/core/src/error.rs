use alloc::string::String;

/// Errors raised by the core toolkit.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("unknown cut `{0}`")]
    UnknownCut(String),
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("attribute `{attribute}` has no level `{level}`")]
    UnknownLevel { attribute: String, level: String },
    #[error("attribute `{attribute}` is missing for cut `{cut}`")]
    MissingAttribute { attribute: String, cut: String },
    #[error("attribute `{attribute}` does not apply to cut `{cut}`")]
    NotApplicable { attribute: String, cut: String },
    #[error("data error: {0}")]
    Data(String),
    #[error("model specification error: {0}")]
    Spec(String),
    #[error("parameter `{parameter}` is not identified: {reason}")]
    Unidentified { parameter: String, reason: String },
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("design error: {0}")]
    Design(String),
}

impl Error {
    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }
}

pub type Result<T> = core::result::Result<T, Error>;
