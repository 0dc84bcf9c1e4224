use alloc::boxed::Box;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Newton iteration on the diode equation did not reach tolerance.
    NonConvergence {
        iterations: usize,
        residual: f64,
    },
    /// Calibrated panel misses one of its targets by more than 1 %.
    CalibrationFailure {
        residual: f64,
    },
    /// A precondition on an argument was violated.
    InvalidInput(&'static str),
    /// Integration step exceeds the stability guard of the converter.
    UnstableStep {
        dt: f64,
        limit: f64,
    },
    /// Neural MPP voltage estimate outside `[0, v_oc]`.
    EstimateOutOfRange {
        v_mpp: f64,
        v_oc: f64,
    },
    /// Damping grew past its ceiling before any step was accepted.
    TrainingDiverged {
        lambda: f64,
    },
    /// Training ran zero epochs.
    NotTrained,
    EmptyDataset,
    /// Profile queried outside `[0, duration]`.
    OutOfRange {
        t: f64,
        duration: f64,
    },
    EmptyTrace,
    /// Sub-module failure during a simulation, tagged with the sim time.
    AtTime {
        t: f64,
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at(self, t: f64) -> Self {
        Error::AtTime {
            t,
            source: Box::new(self),
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NonConvergence { iterations, residual } => write!(
                f,
                "diode equation did not converge after {iterations} iterations (residual {residual:e} A)"
            ),
            Error::CalibrationFailure { residual } => {
                write!(f, "calibration residual {:.3} % exceeds 1 %", residual * 100.0)
            }
            Error::InvalidInput(what) => write!(f, "invalid input: {what}"),
            Error::UnstableStep { dt, limit } => {
                write!(f, "step {dt:e} s exceeds stability limit {limit:e} s")
            }
            Error::EstimateOutOfRange { v_mpp, v_oc } => {
                write!(f, "MPP voltage estimate {v_mpp} V outside [0, {v_oc}] V")
            }
            Error::TrainingDiverged { lambda } => {
                write!(
                    f,
                    "training diverged: damping reached {lambda:e} without an accepted step"
                )
            }
            Error::NotTrained => f.write_str("network not trained (zero epochs)"),
            Error::EmptyDataset => f.write_str("empty dataset"),
            Error::OutOfRange { t, duration } => {
                write!(f, "time {t} s outside profile [0, {duration}] s")
            }
            Error::EmptyTrace => f.write_str("empty trace"),
            Error::AtTime { t, source } => write!(f, "at t = {t} s: {source}"),
        }
    }
}

impl core::error::Error for Error {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            Error::AtTime { source, .. } => Some(source.as_ref()),
            _ => None,
        }
    }
}
