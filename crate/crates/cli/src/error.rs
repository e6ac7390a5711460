use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    RankDeficient(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 2,
            Self::RankDeficient(_) => 3,
            Self::Io(_) => 4,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Self::Validation(_) => "validation",
            Self::RankDeficient(_) => "rank_deficient",
            Self::Io(_) => "io",
        }
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Report<'a> {
            error: &'a str,
            message: String,
            exit_code: i32,
        }
        serde_json::to_string(&Report { error: self.kind(), message: self.to_string(), exit_code: self.exit_code() })
            .expect("error report serializes")
    }
}

impl From<lpm_core::Error> for CliError {
    fn from(e: lpm_core::Error) -> Self {
        match e {
            lpm_core::Error::RankDeficient { .. } | lpm_core::Error::NoSolvableReference => {
                Self::RankDeficient(e.to_string())
            }
            _ => Self::Validation(e.to_string()),
        }
    }
}
