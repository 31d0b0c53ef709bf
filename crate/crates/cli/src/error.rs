use std::fmt;

/// Process exit statuses.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// A failed command, carrying the exit status it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self { code: EXIT_NUMERICAL, message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self { code: EXIT_IO, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<metavqe::Error> for CliError {
    fn from(e: metavqe::Error) -> Self {
        use metavqe::Error as E;
        let code = match &e {
            E::Numerical { .. } | E::NoConvergence(_) | E::Training { .. } => EXIT_NUMERICAL,
            // Malformed input files are reported with the I/O failures.
            E::Io(_) | E::Parse { .. } | E::Deserialize(_) | E::Version { .. } => EXIT_IO,
            E::Size { .. }
            | E::Shape(_)
            | E::Index { .. }
            | E::Argument(_)
            | E::Validation(_)
            | E::Capacity { .. } => EXIT_USAGE,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::io(e.to_string())
    }
}
