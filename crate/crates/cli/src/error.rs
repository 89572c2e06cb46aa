use std::process::ExitCode;

use recipcal_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl AppError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code())
    }

    pub fn code(&self) -> u8 {
        match self {
            AppError::Config(_) => 2,
            AppError::Numerical(_) => 3,
            AppError::Io(_) => 4,
        }
    }

    /// Core error raised while validating the config section `section`.
    pub fn in_section(section: &str, err: CoreError) -> Self {
        match err {
            CoreError::InvalidParameter { name, reason } => AppError::Config(format!("{section}.{name}: {reason}")),
            other => AppError::Config(format!("{section}: {other}")),
        }
    }
}

impl From<CoreError> for AppError {
    fn from(err: CoreError) -> Self {
        match err {
            CoreError::Underdetermined { .. }
            | CoreError::SingularHardware { .. }
            | CoreError::SingularCalibration { .. }
            | CoreError::ContractViolation(_) => AppError::Numerical(err.to_string()),
            _ => AppError::Config(err.to_string()),
        }
    }
}

impl From<std::io::Error> for AppError {
    fn from(err: std::io::Error) -> Self {
        AppError::Io(err.to_string())
    }
}

pub type AppResult<T> = Result<T, AppError>;
