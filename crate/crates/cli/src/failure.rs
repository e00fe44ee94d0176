use serde::Serialize;

/// A failed run: which module raised the error and at which stage of the
/// command it happened. Printed to stderr as one JSON object.
#[derive(Debug, Clone, PartialEq, Serialize, thiserror::Error)]
#[error("{module} failed during {stage}: {message}")]
pub struct Failure {
    pub stage: &'static str,
    pub module: &'static str,
    pub message: String,
}

impl Failure {
    pub fn core(stage: &'static str, err: jsqps::Error) -> Self {
        Failure {
            stage,
            module: err.module(),
            message: err.to_string(),
        }
    }

    pub fn config(message: String) -> Self {
        Failure {
            stage: "config",
            module: "cli",
            message,
        }
    }

    pub fn io(stage: &'static str, err: std::io::Error) -> Self {
        Failure {
            stage,
            module: "cli",
            message: err.to_string(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

pub trait AtStage<T> {
    fn at(self, stage: &'static str) -> Result<T, Failure>;
}

impl<T> AtStage<T> for jsqps::Result<T> {
    fn at(self, stage: &'static str) -> Result<T, Failure> {
        self.map_err(|e| Failure::core(stage, e))
    }
}

impl<T> AtStage<T> for std::io::Result<T> {
    fn at(self, stage: &'static str) -> Result<T, Failure> {
        self.map_err(|e| Failure::io(stage, e))
    }
}
