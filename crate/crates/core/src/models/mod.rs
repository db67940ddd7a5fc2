//! Records, input sources and the models under test.

mod dataset;
mod external;
mod lander;
mod mlp;
mod record;
mod tree;

use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dataset::{
    infer_kind, infer_schema, load_dataset, load_dataset_inferred, parse_dataset, DataSource, DatasetError,
    DatasetSchema, Layout, RecordShape,
};
pub use external::{ChildProcessChannel, ExternalModel, DEFAULT_TIMEOUT, PROTOCOL_VERSION};
pub use lander::{Action, Policy, Step, ToyEnv};
pub use mlp::{Dense, Mlp};
pub use record::{value_from_json, value_to_json, Feature, GameState, Grid, Record, Schema, TabularRow};
pub use tree::{DecisionTree, TreeNode};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("kind error: {0}")]
    Kind(String),
    #[error("dimension mismatch: model expects {expected} features, got {got}")]
    Dim { expected: usize, got: usize },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("model process did not answer within {0:?}")]
    Timeout(Duration),
    #[error("backend error: {0}")]
    Backend(String),
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("{0}")]
    Unsupported(String),
}

/// A model the engine can invoke from a spec's code block.
pub trait ModelBackend: Send + Sync {
    fn predict(&self, record: &Record) -> Result<i64, ModelError>;

    /// Plays one episode from `state`; 1 = win, 0 = lose.
    fn play(&self, state: &GameState, seed: u64) -> Result<i64, ModelError> {
        let _ = (state, seed);
        Err(ModelError::Unsupported("this model cannot play episodes".into()))
    }

    /// Largest terrain height the model's environment allows, if it has one.
    fn terrain_max(&self) -> Option<i64> {
        None
    }
}

impl ModelBackend for DecisionTree {
    fn predict(&self, record: &Record) -> Result<i64, ModelError> {
        DecisionTree::predict(self, record)
    }
}

impl ModelBackend for Mlp {
    fn predict(&self, record: &Record) -> Result<i64, ModelError> {
        Mlp::predict(self, record)
    }
}

impl ModelBackend for ExternalModel {
    fn predict(&self, record: &Record) -> Result<i64, ModelError> {
        ExternalModel::predict(self, record)
    }
}

/// Lander environment paired with the policy under test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanderModel {
    #[serde(default)]
    pub env: ToyEnv,
    pub policy: Policy,
}

impl ModelBackend for LanderModel {
    fn predict(&self, _record: &Record) -> Result<i64, ModelError> {
        Err(ModelError::Unsupported("a lander policy is exercised with play(), not predict()".into()))
    }

    fn play(&self, state: &GameState, seed: u64) -> Result<i64, ModelError> {
        Ok(self.env.play(&self.policy, state, seed))
    }

    fn terrain_max(&self) -> Option<i64> {
        Some(self.env.terrain_max)
    }
}

/// On-disk model document, discriminated by `type`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelFile {
    DecisionTree(DecisionTree),
    Mlp(Mlp),
    ToyEnv(LanderModel),
}

impl ModelFile {
    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let m: ModelFile = serde_json::from_str(text).map_err(|e| ModelError::Invalid(e.to_string()))?;
        match &m {
            ModelFile::DecisionTree(t) => t.validate(None)?,
            ModelFile::Mlp(n) => n.validate()?,
            ModelFile::ToyEnv(l) => {
                l.env.validate()?;
                l.policy.validate()?;
            }
        }
        Ok(m)
    }

    pub fn into_backend(self) -> Arc<dyn ModelBackend> {
        match self {
            ModelFile::DecisionTree(t) => Arc::new(t),
            ModelFile::Mlp(n) => Arc::new(n),
            ModelFile::ToyEnv(l) => Arc::new(l),
        }
    }
}

pub fn load_model(path: &Path) -> Result<Arc<dyn ModelBackend>, ModelError> {
    let text = std::fs::read_to_string(path).map_err(|e| ModelError::Invalid(format!("{}: {e}", path.display())))?;
    Ok(ModelFile::parse(&text)?.into_backend())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_documents() {
        let dt = ModelFile::parse(r#"{"type":"decision_tree","nodes":[{"class":2}]}"#).unwrap();
        assert!(matches!(dt, ModelFile::DecisionTree(_)));
        let mlp = ModelFile::parse(
            r#"{"type":"mlp","layers":[{"inputs":1,"outputs":2,"weights":[1.0,-1.0],"bias":[0.0,0.0]}]}"#,
        )
        .unwrap();
        assert!(matches!(mlp, ModelFile::Mlp(_)));
        let policy = serde_json::to_string(&Policy::cautious(2)).unwrap();
        let lander = ModelFile::parse(&format!(r#"{{"type":"toy_env","policy":{policy}}}"#)).unwrap();
        let ModelFile::ToyEnv(l) = lander else { panic!() };
        assert_eq!(l.env, ToyEnv::default());
    }

    #[test]
    fn invalid_documents() {
        assert!(ModelFile::parse(r#"{"type":"decision_tree","nodes":[],"root":0}"#).is_err());
        assert!(ModelFile::parse(r#"{"type":"forest"}"#).is_err());
        assert!(ModelFile::parse(r#"{"type":"mlp","layers":[]}"#).is_err());
    }
}
