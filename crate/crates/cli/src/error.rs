use ivnet_core::cycles::CyclesError;
use ivnet_core::forecast::ForecastError;
use ivnet_core::industry_panel::PanelError;
use ivnet_core::io::IoError;
use ivnet_core::network::NetworkError;
use ivnet_core::options_iv::IvError;
use ivnet_core::sim::SimError;
use ivnet_core::tvp_var::TvpVarError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    /// Bad input files, flags or configuration. Exit code 2.
    Input,
    /// An estimation or solve failed on valid input. Exit code 3.
    Numerical,
}

#[derive(Debug, Clone, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Input, message: message.into() }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Numerical, message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Input => 2,
            ErrorKind::Numerical => 3,
        }
    }

    pub fn context(mut self, what: impl std::fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

pub trait Context<T> {
    fn context(self, what: impl std::fmt::Display) -> Result<T>;
}

impl<T, E: Into<CliError>> Context<T> for std::result::Result<T, E> {
    fn context(self, what: impl std::fmt::Display) -> Result<T> {
        self.map_err(|e| e.into().context(what))
    }
}

macro_rules! classify {
    ($err:ty) => {
        impl From<$err> for CliError {
            fn from(e: $err) -> Self {
                CliError::input(e.to_string())
            }
        }
    };
    ($err:ty, |$e:ident| $numerical:expr) => {
        impl From<$err> for CliError {
            fn from($e: $err) -> Self {
                let numerical = $numerical;
                let message = $e.to_string();
                if numerical {
                    CliError::numerical(message)
                } else {
                    CliError::input(message)
                }
            }
        }
    };
}

classify!(IoError);
classify!(PanelError);
classify!(CyclesError);
classify!(std::io::Error);
classify!(toml::de::Error);
classify!(serde_json::Error);
classify!(IvError, |e| !matches!(
    e,
    IvError::MalformedQuote(_) | IvError::MalformedChain(_) | IvError::NegativeInput(_)
));
classify!(TvpVarError, |e| !matches!(e, TvpVarError::InvalidSpec(_) | TvpVarError::PanelTooShort { .. }));
classify!(NetworkError, |e| !matches!(
    e,
    NetworkError::Dimension(_) | NetworkError::TooFewVariables(_) | NetworkError::InvalidWindow { .. }
));
classify!(ForecastError, |e| matches!(
    e,
    ForecastError::InsufficientSample { .. } | ForecastError::CollinearDesign(_) | ForecastError::NonFinite(_)
));
classify!(SimError, |e| matches!(e, SimError::Network(_)));

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_kind() {
        assert_eq!(CliError::from(IoError::EmptyInput("chains")).exit_code(), 2);
        assert_eq!(CliError::from(TvpVarError::SingularDesign).exit_code(), 3);
        assert_eq!(CliError::from(TvpVarError::InvalidSpec("x".into())).exit_code(), 2);
        assert_eq!(CliError::from(ForecastError::CollinearDesign(1e12)).exit_code(), 3);
        assert_eq!(CliError::from(IvError::EmptySelection).exit_code(), 3);
    }

    #[test]
    fn context_prefixes_message() {
        let e: Result<()> = Err(IoError::EmptyInput("chains")).context("reading a.csv");
        assert!(e.unwrap_err().message.starts_with("reading a.csv: "));
    }
}
