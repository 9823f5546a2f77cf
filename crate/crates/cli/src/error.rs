use std::fmt;

/// Pipeline stage a diagnostic belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Segment,
    Extract,
    Build,
    Evaluate,
    Synth,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Segment => "segment",
            Stage::Extract => "extract",
            Stage::Build => "build",
            Stage::Evaluate => "evaluate",
            Stage::Synth => "synth",
            Stage::Report => "report",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, config files or parameter values.
    #[error("config: {0}")]
    Config(String),
    /// Missing or malformed input data.
    #[error("{stage}: {message}")]
    Data { stage: Stage, message: String },
    /// An invariant the pipeline itself should guarantee did not hold.
    #[error("{stage}: internal error: {message}")]
    Internal { stage: Stage, message: String },
}

impl CliError {
    pub fn data(stage: Stage, message: impl fmt::Display) -> Self {
        CliError::Data {
            stage,
            message: message.to_string(),
        }
    }

    pub fn internal(stage: Stage, message: impl fmt::Display) -> Self {
        CliError::Internal {
            stage,
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data { .. } => 3,
            CliError::Internal { .. } => 4,
        }
    }
}
