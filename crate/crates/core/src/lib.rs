//! Nomos: a language for k-safety properties of machine-learning models and
//! a metamorphic-testing engine that searches for their violations.
//!
//! The pipeline is [`syntax::parse`] → [`sema::check`] → [`engine::run`].

pub mod engine;
pub mod models;
pub mod report;
pub mod rng;
pub mod sema;
pub mod stdlib;
pub mod syntax;
pub mod value;

pub use engine::{run, Bug, EngineError, Harness, RunConfig, RunReport};
pub use models::{DataSource, ModelBackend, Record};
pub use sema::{check, Diagnostic, TypedSpec};
pub use stdlib::FunctionRegistry;
pub use syntax::{parse, pretty_print, Spec};
pub use value::{Kind, Value};
