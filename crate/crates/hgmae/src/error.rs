use std::fmt;

/// Failure class, mapped one-to-one onto the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Config,
    Data,
    Divergence,
}

impl Kind {
    pub fn exit_code(self) -> u8 {
        match self {
            Kind::Config => 2,
            Kind::Data => 3,
            Kind::Divergence => 4,
        }
    }
}

/// An error tagged with the pipeline stage that raised it.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{stage}: {message}")]
pub struct Failure {
    pub stage: &'static str,
    pub kind: Kind,
    pub message: String,
}

impl Failure {
    pub fn config(stage: &'static str, message: impl fmt::Display) -> Self {
        Failure {
            stage,
            kind: Kind::Config,
            message: message.to_string(),
        }
    }

    pub fn data(stage: &'static str, message: impl fmt::Display) -> Self {
        Failure {
            stage,
            kind: Kind::Data,
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        self.kind.exit_code()
    }

    pub fn from_core(stage: &'static str, err: hgmae_core::Error) -> Self {
        use hgmae_core::Error as E;
        let kind = match err {
            E::Config(_) | E::Parameter(_) => Kind::Config,
            E::Divergence { .. } => Kind::Divergence,
            E::Shape { .. } | E::Degenerate(_) | E::Validation(_) | E::Protocol(_) | E::Data(_) => Kind::Data,
        };
        Failure {
            stage,
            kind,
            message: err.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Failure>;

/// Attaches a stage name to core results.
pub trait InStage<T> {
    fn in_stage(self, stage: &'static str) -> Result<T>;
}

impl<T> InStage<T> for hgmae_core::Result<T> {
    fn in_stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Failure::from_core(stage, e))
    }
}
