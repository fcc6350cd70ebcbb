//! Harness-level errors and their process exit codes.

use crate::idx::IdxError;
use std::fmt;
use std::path::PathBuf;
use tmaf_core::codec::CodecError;
use tmaf_core::data::DataError;
use tmaf_core::la::LaError;
use tmaf_core::network::NetError;
use tmaf_core::optim::{LossError, OptimError};

/// Anything a harness command can fail with.
#[derive(Debug)]
pub enum RunError {
    /// Config file could not be read or parsed.
    ConfigRead {
        path: PathBuf,
        detail: String,
    },
    /// Config parsed but violates semantic constraints; every violation is
    /// listed.
    ConfigInvalid {
        violations: Vec<String>,
    },
    /// Filesystem failure while producing or consuming run artifacts.
    Io {
        path: PathBuf,
        detail: String,
    },
    /// Dataset CSV malformed.
    DatasetCsv {
        path: PathBuf,
        detail: String,
    },
    /// MNIST file malformed.
    Idx(IdxError),
    /// Model file malformed.
    Codec(CodecError),
    /// The model file's architecture does not match the config.
    ArchMismatch,
    /// Training produced a non-finite loss.
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
    },
    /// No probe batch cleared the kink-margin requirement.
    NoMarginBatch {
        tries: usize,
    },
    /// Gradients exceeded the gradient-check tolerance.
    GradcheckFailed {
        max_rel_err: f64,
        tolerance: f64,
    },
    /// Core-library failure surfaced through the harness.
    Net(NetError),
    Data(DataError),
    La(LaError),
    Loss(LossError),
    Optim(OptimError),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::ConfigRead { path, detail } => {
                write!(f, "cannot read config {}: {detail}", path.display())
            }
            RunError::ConfigInvalid { violations } => {
                let n = violations.len();
                let noun = if n == 1 { "violation" } else { "violations" };
                writeln!(f, "invalid config ({n} {noun}):")?;
                for v in violations {
                    writeln!(f, "  - {v}")?;
                }
                Ok(())
            }
            RunError::Io { path, detail } => write!(f, "{}: {detail}", path.display()),
            RunError::DatasetCsv { path, detail } => {
                write!(f, "bad dataset file {}: {detail}", path.display())
            }
            RunError::Idx(e) => write!(f, "{e}"),
            RunError::Codec(e) => write!(f, "{e}"),
            RunError::ArchMismatch => {
                write!(f, "model architecture does not match the config")
            }
            RunError::NonFiniteLoss { epoch, batch } => write!(
                f,
                "training aborted: non-finite loss at epoch {epoch}, batch {batch}"
            ),
            RunError::NoMarginBatch { tries } => write!(
                f,
                "no probe batch kept all activation arguments off kink points after {tries} tries"
            ),
            RunError::GradcheckFailed {
                max_rel_err,
                tolerance,
            } => write!(
                f,
                "gradient check failed: max relative error {max_rel_err:.3e} exceeds {tolerance:.3e}"
            ),
            RunError::Net(e) => write!(f, "{e}"),
            RunError::Data(e) => write!(f, "{e}"),
            RunError::La(e) => write!(f, "{e}"),
            RunError::Loss(e) => write!(f, "{e}"),
            RunError::Optim(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<IdxError> for RunError {
    fn from(e: IdxError) -> RunError {
        RunError::Idx(e)
    }
}

impl From<CodecError> for RunError {
    fn from(e: CodecError) -> RunError {
        RunError::Codec(e)
    }
}

impl From<NetError> for RunError {
    fn from(e: NetError) -> RunError {
        RunError::Net(e)
    }
}

impl From<DataError> for RunError {
    fn from(e: DataError) -> RunError {
        RunError::Data(e)
    }
}

impl From<LaError> for RunError {
    fn from(e: LaError) -> RunError {
        RunError::La(e)
    }
}

impl From<LossError> for RunError {
    fn from(e: LossError) -> RunError {
        RunError::Loss(e)
    }
}

impl From<OptimError> for RunError {
    fn from(e: OptimError) -> RunError {
        RunError::Optim(e)
    }
}

impl RunError {
    /// Process exit code: 1 for configuration problems, 3 for a failed
    /// gradient check, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::ConfigRead { .. } | RunError::ConfigInvalid { .. } => 1,
            RunError::GradcheckFailed { .. } => 3,
            _ => 2,
        }
    }
}
