use std::path::PathBuf;

use robustcheck_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("stage `{stage}`: upstream artifact {} is missing; run `{needs}` first", path.display())]
    MissingArtifact { stage: &'static str, needs: &'static str, path: PathBuf },

    #[error("stage `{stage}`: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: CoreError,
    },
}

impl CliError {
    pub(crate) fn from_core_config(e: CoreError) -> Self {
        CliError::Config(e.to_string())
    }

    /// 0 success, 2 configuration, 3 missing upstream artifact, 4 numerical
    /// failure, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::MissingArtifact { .. } => 3,
            CliError::Stage { source, .. } => match source {
                CoreError::InvalidConfig(_) | CoreError::Schema(_) => 2,
                CoreError::Numerical(_)
                | CoreError::EmptyNeighbourhood(_)
                | CoreError::Clustering(_)
                | CoreError::RocUndefined(_) => 4,
                _ => 1,
            },
        }
    }
}

/// Attaches a stage name to core errors.
pub(crate) trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T, E: Into<CoreError>> StageContext<T> for Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|e| CliError::Stage { stage, source: e.into() })
    }
}
