use std::fmt;

/// Errors raised anywhere in the link simulator or receiver DSP.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse { row: usize, column: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("gate window of {window_symbols:.2} symbols is shorter than the 10-symbol minimum")]
    DegenerateWindow { window_symbols: f64 },

    #[error("TDM slots {first} and {second} overlap by {samples} samples (guard {guard})")]
    Overlap {
        first: usize,
        second: usize,
        samples: usize,
        guard: usize,
    },

    #[error("synchronization failed in slot {slot}: normalized peak {peak:.3} below threshold {threshold:.3}")]
    SyncFailure { slot: usize, peak: f64, threshold: f64 },

    #[error("ambiguous synchronization: peaks at offsets {first} and {second} are within 1 dB")]
    SyncAmbiguity { first: usize, second: usize },

    #[error("estimate unreliable: {0}")]
    EstimateUnreliable(String),

    #[error("adaptive filter diverged after {} blocks (last MSE {:.3e})", mse_history.len(), mse_history.last().copied().unwrap_or(f64::NAN))]
    Divergence { mse_history: Vec<f64> },

    #[error("equalizer state has not converged")]
    StaleState,

    #[error("channel matrix is singular (smallest singular value is zero)")]
    SingularChannel,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

/// Pipeline stage used to annotate errors raised inside a full link run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Transmitter,
    Channel,
    Tdm,
    Stitch,
    FrequencyOffset,
    Equalizer,
    Estimation,
    Metrics,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Transmitter => "transmitter",
            Stage::Channel => "channel",
            Stage::Tdm => "tdm combine",
            Stage::Stitch => "tdm stitch",
            Stage::FrequencyOffset => "frequency offset",
            Stage::Equalizer => "equalizer",
            Stage::Estimation => "channel estimation",
            Stage::Metrics => "metrics",
        };
        f.write_str(name)
    }
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Strip stage annotations and return the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures of the signal chain itself (synchronization,
    /// divergence, unreliable estimates) as opposed to bad input.
    pub fn is_runtime(&self) -> bool {
        matches!(
            self.root(),
            Error::SyncFailure { .. }
                | Error::SyncAmbiguity { .. }
                | Error::EstimateUnreliable(_)
                | Error::Divergence { .. }
                | Error::StaleState
                | Error::SingularChannel
                | Error::Overlap { .. }
        )
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
