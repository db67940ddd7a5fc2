//! Untyped syntax tree. Equality on every node ignores source spans, so two
//! trees compare equal when they have the same structure.

use std::fmt;

/// Location of a token or node in the source: 1-based line and column, length
/// in characters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SourceSpan {
    pub line: u32,
    pub column: u32,
    pub length: u32,
}

impl SourceSpan {
    pub fn new(line: u32, column: u32, length: u32) -> Self {
        debug_assert!(line >= 1 && column >= 1);
        Self { line, column, length: length.max(1) }
    }

    /// Span covering `self` through `end` when both sit on one line; otherwise
    /// just `self`.
    pub fn to(self, end: SourceSpan) -> SourceSpan {
        if end.line == self.line && end.column >= self.column {
            SourceSpan::new(self.line, self.column, end.column + end.length - self.column)
        } else {
            self
        }
    }
}

impl Default for SourceSpan {
    fn default() -> Self {
        Self { line: 1, column: 1, length: 1 }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone)]
pub struct Spec {
    pub imports: Vec<Ident>,
    pub inputs: Vec<Ident>,
    pub vars: Vec<VarDecl>,
    pub preconds: Vec<Expr>,
    pub outputs: Vec<Ident>,
    pub code: CodeBlock,
    pub postconds: Vec<Expr>,
}

impl PartialEq for Spec {
    fn eq(&self, other: &Self) -> bool {
        self.imports == other.imports
            && self.inputs == other.inputs
            && self.vars == other.vars
            && self.preconds == other.preconds
            && self.outputs == other.outputs
            && self.code == other.code
            && self.postconds == other.postconds
    }
}

/// A declared name (import, input or output) with its position.
#[derive(Debug, Clone)]
pub struct Ident {
    pub name: String,
    pub span: SourceSpan,
}

impl Ident {
    pub fn new(name: impl Into<String>, span: SourceSpan) -> Self {
        Self { name: name.into(), span }
    }
}

impl PartialEq for Ident {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}

#[derive(Debug, Clone)]
pub struct VarDecl {
    pub name: Ident,
    pub init: Expr,
}

impl PartialEq for VarDecl {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.init == other.init
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Not,
    Neg,
}

impl UnaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            UnaryOp::Not => "!",
            UnaryOp::Neg => "-",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Implies,
    Or,
    And,
    Eq,
    Neq,
    Lt,
    Leq,
    Gt,
    Geq,
    Add,
    Sub,
    Mul,
    Div,
}

/// Associativity class of a binary operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assoc {
    Left,
    Right,
    None,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Implies => "==>",
            BinaryOp::Or => "||",
            BinaryOp::And => "&&",
            BinaryOp::Eq => "==",
            BinaryOp::Neq => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Leq => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Geq => ">=",
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
        }
    }

    /// Binding strength; larger binds tighter. Unary operators sit above all.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Implies => 1,
            BinaryOp::Or => 2,
            BinaryOp::And => 3,
            BinaryOp::Eq | BinaryOp::Neq | BinaryOp::Lt | BinaryOp::Leq | BinaryOp::Gt | BinaryOp::Geq => 4,
            BinaryOp::Add | BinaryOp::Sub => 5,
            BinaryOp::Mul | BinaryOp::Div => 6,
        }
    }

    pub fn assoc(self) -> Assoc {
        match self.precedence() {
            1 => Assoc::Right,
            4 => Assoc::None,
            _ => Assoc::Left,
        }
    }

    pub fn is_comparison(self) -> bool {
        self.precedence() == 4
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinaryOp::Implies | BinaryOp::Or | BinaryOp::And)
    }
}

pub const UNARY_PRECEDENCE: u8 = 7;

#[derive(Debug, Clone)]
pub struct Expr {
    pub node: ExprNode,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprNode {
    BoolLit(bool),
    IntLit(i64),
    StrLit(String),
    VarRef(String),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    /// A call by name. The parser accepts any callee; the checker resolves it.
    Call(String, Vec<Expr>),
}

impl Expr {
    pub fn new(node: ExprNode, span: SourceSpan) -> Self {
        Self { node, span }
    }

    /// Visits this expression and all subexpressions in preorder.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match &self.node {
            ExprNode::Unary(_, e) => e.walk(f),
            ExprNode::Binary(_, l, r) => {
                l.walk(f);
                r.walk(f);
            }
            ExprNode::Call(_, args) => args.iter().for_each(|a| a.walk(f)),
            _ => {}
        }
    }

    pub fn walk_mut(&mut self, f: &mut dyn FnMut(&mut Expr)) {
        f(self);
        match &mut self.node {
            ExprNode::Unary(_, e) => e.walk_mut(f),
            ExprNode::Binary(_, l, r) => {
                l.walk_mut(f);
                r.walk_mut(f);
            }
            ExprNode::Call(_, args) => args.iter_mut().for_each(|a| a.walk_mut(f)),
            _ => {}
        }
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.node == other.node
    }
}

#[derive(Debug, Clone, Default)]
pub struct CodeBlock {
    pub stmts: Vec<Stmt>,
}

impl PartialEq for CodeBlock {
    fn eq(&self, other: &Self) -> bool {
        self.stmts == other.stmts
    }
}

#[derive(Debug, Clone)]
pub struct Stmt {
    pub node: StmtNode,
    pub span: SourceSpan,
}

impl PartialEq for Stmt {
    fn eq(&self, other: &Self) -> bool {
        self.node == other.node
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtNode {
    Assign(Ident, Expr),
    AddAssign(Ident, Expr),
    TupleAssign(Vec<Ident>, Vec<Expr>),
    /// `for VAR in range(COUNT):` followed by an indented body. `_` discards
    /// the loop index.
    ForRange {
        var: Ident,
        count: Expr,
        body: Vec<Stmt>,
    },
}

impl CodeBlock {
    /// Every expression in the block, in source order.
    pub fn exprs(&self) -> Vec<&Expr> {
        fn collect<'a>(stmts: &'a [Stmt], out: &mut Vec<&'a Expr>) {
            for s in stmts {
                match &s.node {
                    StmtNode::Assign(_, e) | StmtNode::AddAssign(_, e) => out.push(e),
                    StmtNode::TupleAssign(_, es) => out.extend(es.iter()),
                    StmtNode::ForRange { count, body, .. } => {
                        out.push(count);
                        collect(body, out);
                    }
                }
            }
        }
        let mut out = Vec::new();
        collect(&self.stmts, &mut out);
        out
    }
}

impl Spec {
    /// Every expression in the spec in source order: var initialisers,
    /// preconditions, code block, postconditions.
    pub fn exprs(&self) -> Vec<&Expr> {
        let mut out: Vec<&Expr> = self.vars.iter().map(|v| &v.init).collect();
        out.extend(self.preconds.iter());
        out.extend(self.code.exprs());
        out.extend(self.postconds.iter());
        out
    }

    pub fn exprs_mut(&mut self) -> Vec<&mut Expr> {
        fn collect<'a>(stmts: &'a mut [Stmt], out: &mut Vec<&'a mut Expr>) {
            for s in stmts {
                match &mut s.node {
                    StmtNode::Assign(_, e) | StmtNode::AddAssign(_, e) => out.push(e),
                    StmtNode::TupleAssign(_, es) => out.extend(es.iter_mut()),
                    StmtNode::ForRange { count, body, .. } => {
                        out.push(count);
                        collect(body, out);
                    }
                }
            }
        }
        let mut out: Vec<&mut Expr> = self.vars.iter_mut().map(|v| &mut v.init).collect();
        out.extend(self.preconds.iter_mut());
        collect(&mut self.code.stmts, &mut out);
        out.extend(self.postconds.iter_mut());
        out
    }
}
