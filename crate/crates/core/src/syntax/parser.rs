//! Recursive-descent parser for `.nomos` sources.
//!
//! Section order is fixed: imports, inputs (at least one), vars, requires,
//! outputs, the `{ ... }` code block, ensures. Inside the code block a
//! statement ends at `;`, at `}`, or where the next token starts a new line;
//! the body of a `for` loop is every following statement indented deeper than
//! the `for` keyword.

use thiserror::Error;

use super::ast::*;
use super::lexer::{tokenize, Keyword, LexError, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{span}: {message}")]
pub struct ParseError {
    pub span: SourceSpan,
    /// Token descriptions that would have been accepted here.
    pub expected: Vec<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SyntaxError {
    #[error("lex error at {0}")]
    Lex(#[from] LexError),
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
}

impl SyntaxError {
    pub fn span(&self) -> SourceSpan {
        match self {
            SyntaxError::Lex(e) => e.span,
            SyntaxError::Parse(e) => e.span,
        }
    }

    pub fn message(&self) -> String {
        match self {
            SyntaxError::Lex(e) => e.message.clone(),
            SyntaxError::Parse(e) => e.message.clone(),
        }
    }
}

pub fn parse(source: &str) -> Result<Spec, SyntaxError> {
    let tokens = tokenize(source)?;
    let eof = eof_span(source);
    let mut p = Parser { tokens, pos: 0, eof };
    Ok(p.spec()?)
}

/// Parses a standalone expression, mainly for tests and tooling.
pub fn parse_expr(source: &str) -> Result<Expr, SyntaxError> {
    let tokens = tokenize(source)?;
    let eof = eof_span(source);
    let mut p = Parser { tokens, pos: 0, eof };
    let e = p.expr()?;
    if let Some(t) = p.peek() {
        return Err(p.unexpected(t.clone(), &["end of input"]).into());
    }
    Ok(e)
}

fn eof_span(source: &str) -> SourceSpan {
    let line = source.split('\n').count() as u32;
    let last = source.rsplit('\n').next().unwrap_or("");
    SourceSpan::new(line.max(1), last.chars().count() as u32 + 1, 1)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    eof: SourceSpan,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_kind(&self) -> Option<&TokenKind> {
        self.peek().map(|t| &t.kind)
    }

    fn at(&self, kind: &TokenKind) -> bool {
        self.peek_kind() == Some(kind)
    }

    fn at_kw(&self, kw: Keyword) -> bool {
        self.at(&TokenKind::Keyword(kw))
    }

    fn prev_span(&self) -> SourceSpan {
        self.pos.checked_sub(1).map(|i| self.tokens[i].span).unwrap_or(self.eof)
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        self.pos += 1;
        t
    }

    fn unexpected(&self, found: Token, expected: &[&str]) -> ParseError {
        ParseError {
            span: found.span,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            message: format!("expected {}, found {}", expected.join(" or "), found.kind.describe()),
        }
    }

    fn error_here(&self, expected: &[&str]) -> ParseError {
        match self.peek() {
            Some(t) => self.unexpected(t.clone(), expected),
            None => ParseError {
                span: self.eof,
                expected: expected.iter().map(|s| s.to_string()).collect(),
                message: format!("expected {}, found end of input", expected.join(" or ")),
            },
        }
    }

    fn expect(&mut self, kind: TokenKind) -> PResult<Token> {
        if self.at(&kind) {
            Ok(self.bump())
        } else {
            Err(self.error_here(&[&kind.describe()]))
        }
    }

    fn ident(&mut self) -> PResult<Ident> {
        match self.peek_kind() {
            Some(TokenKind::Ident(_)) => {
                let t = self.bump();
                let TokenKind::Ident(name) = t.kind else { unreachable!() };
                Ok(Ident::new(name, t.span))
            }
            _ => Err(self.error_here(&["identifier"])),
        }
    }

    /// `KEYWORD IDENT ;`
    fn declaration(&mut self, kw: Keyword) -> PResult<Ident> {
        self.expect(TokenKind::Keyword(kw))?;
        let name = self.ident()?;
        self.expect(TokenKind::Semi)?;
        Ok(name)
    }

    fn spec(&mut self) -> PResult<Spec> {
        let mut imports = Vec::new();
        while self.at_kw(Keyword::Import) {
            imports.push(self.declaration(Keyword::Import)?);
        }
        if !self.at_kw(Keyword::Input) {
            let mut expected = vec!["`input`"];
            if imports.is_empty() {
                expected.insert(0, "`import`");
            }
            return Err(self.error_here(&expected));
        }
        let mut inputs = Vec::new();
        while self.at_kw(Keyword::Input) {
            inputs.push(self.declaration(Keyword::Input)?);
        }
        let mut vars = Vec::new();
        while self.at_kw(Keyword::Var) {
            self.bump();
            let name = self.ident()?;
            self.expect(TokenKind::Define)?;
            let init = self.expr()?;
            self.expect(TokenKind::Semi)?;
            vars.push(VarDecl { name, init });
        }
        let mut preconds = Vec::new();
        while self.at_kw(Keyword::Requires) {
            self.bump();
            preconds.push(self.expr()?);
            self.expect(TokenKind::Semi)?;
        }
        let mut outputs = Vec::new();
        while self.at_kw(Keyword::Output) {
            outputs.push(self.declaration(Keyword::Output)?);
        }
        if !self.at(&TokenKind::LBrace) {
            let mut expected = Vec::new();
            if outputs.is_empty() {
                if preconds.is_empty() {
                    if vars.is_empty() {
                        expected.push("`input`");
                    }
                    expected.push("`var`");
                }
                expected.push("`requires`");
            }
            expected.extend(["`output`", "`{`"]);
            return Err(self.error_here(&expected));
        }
        let open = self.bump();
        let stmts = self.block(None, open.span.line)?;
        self.expect(TokenKind::RBrace)?;
        let mut postconds = Vec::new();
        while self.at_kw(Keyword::Ensures) {
            self.bump();
            postconds.push(self.expr()?);
            self.expect(TokenKind::Semi)?;
        }
        if self.peek().is_some() {
            return Err(self.error_here(&["`ensures`", "end of input"]));
        }
        Ok(Spec { imports, inputs, vars, preconds, outputs, code: CodeBlock { stmts }, postconds })
    }

    /// Statements up to the closing brace, or (with `indent = Some(col)`) up to
    /// the first statement starting a line at column `<= col`.
    fn block(&mut self, indent: Option<u32>, mut last_line: u32) -> PResult<Vec<Stmt>> {
        let mut stmts = Vec::new();
        while let Some(tok) = self.peek() {
            if tok.kind == TokenKind::RBrace {
                break;
            }
            if let Some(col) = indent {
                if tok.span.line > last_line && tok.span.column <= col {
                    break;
                }
            }
            let stmt = self.stmt()?;
            last_line = self.prev_span().line;
            stmts.push(stmt);
        }
        Ok(stmts)
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        if self.at_kw(Keyword::For) {
            return self.for_stmt();
        }
        let first = self.ident().map_err(|_| self.error_here(&["identifier", "`for`", "`}`"]))?;
        let start = first.span;
        let node = match self.peek_kind() {
            Some(TokenKind::Assign) => {
                self.bump();
                StmtNode::Assign(first, self.expr()?)
            }
            Some(TokenKind::PlusAssign) => {
                self.bump();
                StmtNode::AddAssign(first, self.expr()?)
            }
            Some(TokenKind::Comma) => {
                let mut targets = vec![first];
                while self.at(&TokenKind::Comma) {
                    self.bump();
                    targets.push(self.ident()?);
                }
                self.expect(TokenKind::Assign)?;
                let mut values = vec![self.expr()?];
                while self.at(&TokenKind::Comma) {
                    self.bump();
                    values.push(self.expr()?);
                }
                StmtNode::TupleAssign(targets, values)
            }
            _ => return Err(self.error_here(&["`=`", "`+=`", "`,`"])),
        };
        let span = start.to(self.prev_span());
        self.end_simple_stmt()?;
        Ok(Stmt { node, span })
    }

    fn end_simple_stmt(&mut self) -> PResult<()> {
        let line = self.prev_span().line;
        match self.peek() {
            None => Ok(()),
            Some(t) if t.kind == TokenKind::Semi => {
                self.bump();
                Ok(())
            }
            Some(t) if t.kind == TokenKind::RBrace || t.span.line > line => Ok(()),
            Some(_) => Err(self.error_here(&["`;`", "newline"])),
        }
    }

    fn for_stmt(&mut self) -> PResult<Stmt> {
        let kw = self.bump();
        let var = self.ident()?;
        self.expect(TokenKind::Keyword(Keyword::In))?;
        match self.peek_kind() {
            Some(TokenKind::Ident(n)) if n == "range" => {
                self.bump();
            }
            _ => return Err(self.error_here(&["`range`"])),
        }
        self.expect(TokenKind::LParen)?;
        let count = self.expr()?;
        self.expect(TokenKind::RParen)?;
        let colon = self.expect(TokenKind::Colon)?;
        match self.peek() {
            Some(t) if t.span.line > colon.span.line && t.span.column > kw.span.column => {}
            _ => return Err(self.error_here(&["indented loop body"])),
        }
        let body = self.block(Some(kw.span.column), colon.span.line)?;
        let span = kw.span.to(colon.span);
        Ok(Stmt { node: StmtNode::ForRange { var, count, body }, span })
    }

    pub(crate) fn expr(&mut self) -> PResult<Expr> {
        self.implies()
    }

    fn implies(&mut self) -> PResult<Expr> {
        let lhs = self.binary_level(2)?;
        if self.at(&TokenKind::Implies) {
            self.bump();
            let rhs = self.implies()?;
            let span = lhs.span.to(rhs.span);
            return Ok(Expr::new(ExprNode::Binary(BinaryOp::Implies, Box::new(lhs), Box::new(rhs)), span));
        }
        Ok(lhs)
    }

    fn op_at_level(&self, level: u8) -> Option<BinaryOp> {
        let op = match self.peek_kind()? {
            TokenKind::OrOr => BinaryOp::Or,
            TokenKind::AndAnd => BinaryOp::And,
            TokenKind::EqEq => BinaryOp::Eq,
            TokenKind::NotEq => BinaryOp::Neq,
            TokenKind::Lt => BinaryOp::Lt,
            TokenKind::Le => BinaryOp::Leq,
            TokenKind::Gt => BinaryOp::Gt,
            TokenKind::Ge => BinaryOp::Geq,
            TokenKind::Plus => BinaryOp::Add,
            TokenKind::Minus => BinaryOp::Sub,
            TokenKind::Star => BinaryOp::Mul,
            TokenKind::Slash => BinaryOp::Div,
            _ => return None,
        };
        (op.precedence() == level).then_some(op)
    }

    /// Left-associative levels 2 (`||`) through 6 (`*` `/`); comparisons (4)
    /// do not chain.
    fn binary_level(&mut self, level: u8) -> PResult<Expr> {
        if level > 6 {
            return self.unary();
        }
        let mut lhs = self.binary_level(level + 1)?;
        while let Some(op) = self.op_at_level(level) {
            self.bump();
            let rhs = self.binary_level(level + 1)?;
            let span = lhs.span.to(rhs.span);
            lhs = Expr::new(ExprNode::Binary(op, Box::new(lhs), Box::new(rhs)), span);
            if op.assoc() == Assoc::None {
                if let Some(next) = self.op_at_level(level) {
                    let t = self.peek().cloned().unwrap();
                    return Err(ParseError {
                        span: t.span,
                        expected: vec!["`)`".into(), "`;`".into()],
                        message: format!("comparison operators do not chain; parenthesise `{}`", next.symbol()),
                    });
                }
                break;
            }
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let op = match self.peek_kind() {
            Some(TokenKind::Bang) => UnaryOp::Not,
            Some(TokenKind::Minus) => UnaryOp::Neg,
            _ => return self.primary(),
        };
        let t = self.bump();
        let operand = self.unary()?;
        let span = t.span.to(operand.span);
        Ok(Expr::new(ExprNode::Unary(op, Box::new(operand)), span))
    }

    fn primary(&mut self) -> PResult<Expr> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.error_here(&["expression"]));
        };
        match tok.kind {
            TokenKind::Keyword(Keyword::True) | TokenKind::Keyword(Keyword::False) => {
                self.bump();
                let b = tok.kind == TokenKind::Keyword(Keyword::True);
                Ok(Expr::new(ExprNode::BoolLit(b), tok.span))
            }
            TokenKind::Int(v) => {
                self.bump();
                Ok(Expr::new(ExprNode::IntLit(v), tok.span))
            }
            TokenKind::Str(s) => {
                self.bump();
                Ok(Expr::new(ExprNode::StrLit(s), tok.span))
            }
            TokenKind::Ident(name) => {
                self.bump();
                if self.at(&TokenKind::LParen) {
                    self.bump();
                    let mut args = Vec::new();
                    if !self.at(&TokenKind::RParen) {
                        args.push(self.expr()?);
                        while self.at(&TokenKind::Comma) {
                            self.bump();
                            args.push(self.expr()?);
                        }
                    }
                    let close = self.expect(TokenKind::RParen).map_err(|_| self.error_here(&["`,`", "`)`"]))?;
                    Ok(Expr::new(ExprNode::Call(name, args), tok.span.to(close.span)))
                } else {
                    Ok(Expr::new(ExprNode::VarRef(name), tok.span))
                }
            }
            TokenKind::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(TokenKind::RParen)?;
                Ok(inner)
            }
            _ => Err(self.error_here(&["expression"])),
        }
    }
}
