use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A Zak-domain coefficient pair vanished during orthogonalization.
    #[error("degenerate pulse: zero Zak-domain energy at residue {residue}, phase bin {phase}")]
    DegeneratePulse { residue: usize, phase: usize },

    #[error("singular channel: |H[{bin}]| = {magnitude:e}")]
    SingularChannel { bin: usize, magnitude: f64 },

    #[error("singular modulation matrix: {0}")]
    SingularMatrix(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
