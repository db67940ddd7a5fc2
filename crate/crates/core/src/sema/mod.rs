//! Name resolution and kind checking.
//!
//! [`check`] turns a parsed [`Spec`] into a [`TypedSpec`]: every name is
//! resolved to a numbered slot, every expression carries its [`Kind`], and
//! every call is bound to its registry entry. Violations are reported as
//! [`Diagnostic`]s tagged with one of five rules:
//!
//! * `R1` names resolve to an earlier declaration (and are declared once);
//! * `R2` preconditions do not mention outputs;
//! * `R3` outputs are assigned on every path, and never read before that;
//! * `R4` calls and operators receive arguments of the right kinds;
//! * `R5` `requires` and `ensures` clauses are boolean.

mod check;
mod typed;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

pub use check::{check, check_with_schemas};
pub use typed::{Role, Symbol, SymbolTable, TExpr, TExprNode, TStmt, TypedSpec};

use crate::models::{DataSource, RecordShape};
use crate::syntax::SourceSpan;
use crate::value::Kind;

/// Value of the built-in `MAX_INT` constant.
pub const MAX_INT: i64 = i32::MAX as i64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    R1,
    R2,
    R3,
    R4,
    R5,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Diagnostic {
    pub severity: Severity,
    /// Set for errors; warnings carry no rule.
    pub rule: Option<Rule>,
    pub span: SourceSpan,
    pub message: String,
}

impl Diagnostic {
    pub fn error(rule: Rule, span: SourceSpan, message: impl Into<String>) -> Self {
        Self { severity: Severity::Error, rule: Some(rule), span, message: message.into() }
    }

    pub fn warning(span: SourceSpan, message: impl Into<String>) -> Self {
        Self { severity: Severity::Warning, rule: None, span, message: message.into() }
    }

    /// `file:line:col: error[R#]: message`
    pub fn render(&self, file: &str) -> String {
        let head = match (self.severity, self.rule) {
            (Severity::Error, Some(r)) => format!("error[{r}]"),
            (Severity::Error, None) => "error".to_string(),
            (Severity::Warning, _) => "warning".to_string(),
        };
        format!("{file}:{}:{}: {head}: {}", self.span.line, self.span.column, self.message)
    }
}

/// What the checker knows statically about the records bound to an input.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSchema {
    pub shape: RecordShape,
    pub label_kind: Option<Kind>,
}

impl InputSchema {
    pub fn of(source: &DataSource) -> Self {
        Self { shape: source.shape().clone(), label_kind: source.label_kind() }
    }
}

/// Input name to schema. Inputs without an entry have unknown shape.
pub type SchemaEnv = HashMap<String, InputSchema>;

pub fn schema_env<'a>(sources: impl IntoIterator<Item = (&'a String, &'a Arc<DataSource>)>) -> SchemaEnv {
    sources.into_iter().map(|(name, src)| (name.clone(), InputSchema::of(src))).collect()
}
