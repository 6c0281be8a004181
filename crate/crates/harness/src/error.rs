//! Harness-level errors: configuration problems and core errors annotated
//! with the (function, stage) context they surfaced in.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] hardy_core::Error),

    #[error("while processing `{function}` at stage {stage}: {source}")]
    Stage {
        function: String,
        stage: &'static str,
        #[source]
        source: hardy_core::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// Attach (function, stage) context to a core error.
pub fn at_stage<T>(
    function: &str,
    stage: &'static str,
    r: hardy_core::Result<T>,
) -> Result<T> {
    r.map_err(|source| HarnessError::Stage { function: function.to_string(), stage, source })
}
