use std::sync::Arc;

use indexmap::IndexMap;

use super::Diagnostic;
use crate::stdlib::FunctionDef;
use crate::syntax::{BinaryOp, SourceSpan, Spec, UnaryOp};
use crate::value::Kind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Input,
    Var,
    Output,
    /// A code-block local: loop index or intermediate such as a seed.
    Temp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Symbol {
    pub name: String,
    pub role: Role,
    pub kind: Kind,
    pub span: SourceSpan,
    pub slot: usize,
}

/// Declared names in slot order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SymbolTable {
    symbols: IndexMap<String, Symbol>,
}

impl SymbolTable {
    pub(crate) fn insert(&mut self, sym: Symbol) {
        debug_assert_eq!(sym.slot, self.symbols.len());
        self.symbols.insert(sym.name.clone(), sym);
    }

    pub fn get(&self, name: &str) -> Option<&Symbol> {
        self.symbols.get(name)
    }

    pub fn by_slot(&self, slot: usize) -> &Symbol {
        &self.symbols[slot]
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Symbol> {
        self.symbols.values()
    }

    pub fn with_role(&self, role: Role) -> impl Iterator<Item = &Symbol> {
        self.iter().filter(move |s| s.role == role)
    }
}

#[derive(Debug, Clone)]
pub struct TExpr {
    pub node: TExprNode,
    pub kind: Kind,
    pub span: SourceSpan,
}

#[derive(Debug, Clone)]
pub enum TExprNode {
    Bool(bool),
    Int(i64),
    Str(Arc<str>),
    Slot(usize),
    Unary(UnaryOp, Box<TExpr>),
    Binary(BinaryOp, Box<TExpr>, Box<TExpr>),
    Call(Arc<FunctionDef>, Vec<TExpr>),
    Predict(Box<TExpr>),
    /// `play(state, seed)`
    Play(Box<TExpr>, Box<TExpr>),
}

#[derive(Debug, Clone)]
pub enum TStmt {
    Assign {
        slot: usize,
        expr: TExpr,
        span: SourceSpan,
    },
    AddAssign {
        slot: usize,
        expr: TExpr,
        span: SourceSpan,
    },
    /// All right-hand sides are evaluated before any slot is written.
    TupleAssign {
        slots: Vec<usize>,
        exprs: Vec<TExpr>,
        span: SourceSpan,
    },
    For {
        index: Option<usize>,
        count: TExpr,
        body: Vec<TStmt>,
        span: SourceSpan,
    },
}

/// A checked spec ready for execution.
#[derive(Debug, Clone)]
pub struct TypedSpec {
    pub spec: Spec,
    pub symbols: SymbolTable,
    pub inputs: Vec<usize>,
    /// Var slots with their initialisers, in declaration order.
    pub vars: Vec<(usize, TExpr)>,
    pub preconds: Vec<TExpr>,
    pub outputs: Vec<usize>,
    pub code: Vec<TStmt>,
    pub postconds: Vec<TExpr>,
    /// Number of `predict`/`play` call sites in the code block.
    pub k_static: usize,
    pub warnings: Vec<Diagnostic>,
}

impl TypedSpec {
    pub fn slot_count(&self) -> usize {
        self.symbols.len()
    }

    pub fn name(&self, slot: usize) -> &str {
        &self.symbols.by_slot(slot).name
    }

    pub fn input_names(&self) -> impl Iterator<Item = &str> {
        self.inputs.iter().map(|&s| self.name(s))
    }
}
