use thiserror::Error;

/// Failures grouped by the exit code they map to.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Fit(_) => 4,
        }
    }

    /// Reclassifies any failure while reading input data as a data error.
    pub fn into_data(self) -> Self {
        match self {
            CliError::Config(m) | CliError::Fit(m) | CliError::Io(m) => CliError::Data(m),
            d => d,
        }
    }
}

impl From<zadr::Error> for CliError {
    fn from(e: zadr::Error) -> Self {
        use zadr::Error as E;
        let msg = match &e {
            E::Config(m) => return CliError::Config(m.clone()),
            E::Data(m) => return CliError::Data(m.clone()),
            _ => e.to_string(),
        };
        match e {
            E::Numeric(_) | E::Fit(_) => CliError::Fit(msg),
            E::Io(_) => CliError::Io(msg),
            _ => CliError::Data(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_distinct() {
        let codes: Vec<u8> = [
            CliError::from(zadr::Error::Config("x".into())),
            CliError::from(zadr::Error::Data("x".into())),
            CliError::from(zadr::Error::Fit("x".into())),
            CliError::from(std::io::Error::other("x")),
        ]
        .iter()
        .map(CliError::exit_code)
        .collect();
        assert_eq!(codes, vec![2, 3, 4, 1]);
        assert_eq!(CliError::from(zadr::Error::Size("x".into())).exit_code(), 3);
        assert_eq!(CliError::from(zadr::Error::Numeric("x".into())).exit_code(), 4);
    }
}
