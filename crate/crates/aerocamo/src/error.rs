use std::io;
use std::path::{Path, PathBuf};

pub type Result<T, E = AppError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{0}")]
    Usage(String),
    #[error("missing input file {}", .0.display())]
    MissingInput(PathBuf),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Core(#[from] aerocamo_core::Error),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) => 2,
            AppError::MissingInput(_) => 3,
            _ => 1,
        }
    }

    /// Short stable identifier for machine consumption.
    pub fn kind(&self) -> &'static str {
        match self {
            AppError::Usage(_) => "usage",
            AppError::MissingInput(_) => "missing_input",
            AppError::Io { .. } => "io",
            AppError::Format { .. } => "format",
            AppError::Core(e) => match e {
                aerocamo_core::Error::Diverged { .. } => "diverged",
                aerocamo_core::Error::InvalidConfig(_)
                | aerocamo_core::Error::InvalidRange { .. }
                | aerocamo_core::Error::PatchTooSmall { .. } => "invalid_config",
                _ => "pipeline",
            },
        }
    }

    pub fn format(path: &Path, message: impl std::fmt::Display) -> Self {
        AppError::Format { path: path.to_path_buf(), message: message.to_string() }
    }

    /// Wraps an IO error, mapping "not found" to [`AppError::MissingInput`].
    pub fn io(path: &Path, source: io::Error) -> Self {
        if source.kind() == io::ErrorKind::NotFound {
            AppError::MissingInput(path.to_path_buf())
        } else {
            AppError::Io { path: path.to_path_buf(), source }
        }
    }

    /// One-line JSON rendering used on stderr by the CLI.
    pub fn to_json_line(&self) -> String {
        serde_json::json!({ "error": self.kind(), "exit_code": self.exit_code(), "message": self.to_string() })
            .to_string()
    }
}

pub(crate) fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| AppError::io(path, e))
}

pub(crate) fn read_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))
}

pub(crate) fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| AppError::Io { path: dir.to_path_buf(), source: e })?;
    }
    std::fs::write(path, bytes).map_err(|e| AppError::Io { path: path.to_path_buf(), source: e })
}

pub(crate) fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| AppError::format(path, e))?;
    text.push('\n');
    write(path, text)
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_string(path)?;
    serde_json::from_str(&text).map_err(|e| AppError::format(path, e))
}
