use std::fmt;

use thiserror::Error;

use super::ast::SourceSpan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Keyword {
    Import,
    Input,
    Var,
    Requires,
    Output,
    Ensures,
    True,
    False,
    For,
    In,
}

impl Keyword {
    fn from_word(word: &str) -> Option<Keyword> {
        Some(match word {
            "import" => Keyword::Import,
            "input" => Keyword::Input,
            "var" => Keyword::Var,
            "requires" => Keyword::Requires,
            "output" => Keyword::Output,
            "ensures" => Keyword::Ensures,
            "true" => Keyword::True,
            "false" => Keyword::False,
            "for" => Keyword::For,
            "in" => Keyword::In,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Keyword::Import => "import",
            Keyword::Input => "input",
            Keyword::Var => "var",
            Keyword::Requires => "requires",
            Keyword::Output => "output",
            Keyword::Ensures => "ensures",
            Keyword::True => "true",
            Keyword::False => "false",
            Keyword::For => "for",
            Keyword::In => "in",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Keyword(Keyword),
    Ident(String),
    Int(i64),
    Str(String),
    /// `:=`
    Define,
    /// `=`
    Assign,
    /// `+=`
    PlusAssign,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    /// `==>`
    Implies,
    AndAnd,
    OrOr,
    Bang,
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Colon,
}

impl TokenKind {
    /// Short description used in "expected ..." messages.
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Keyword(k) => format!("`{}`", k.as_str()),
            TokenKind::Ident(_) => "identifier".into(),
            TokenKind::Int(_) => "integer literal".into(),
            TokenKind::Str(_) => "string literal".into(),
            other => format!("`{}`", other.punct()),
        }
    }

    fn punct(&self) -> &'static str {
        match self {
            TokenKind::Define => ":=",
            TokenKind::Assign => "=",
            TokenKind::PlusAssign => "+=",
            TokenKind::EqEq => "==",
            TokenKind::NotEq => "!=",
            TokenKind::Lt => "<",
            TokenKind::Le => "<=",
            TokenKind::Gt => ">",
            TokenKind::Ge => ">=",
            TokenKind::Implies => "==>",
            TokenKind::AndAnd => "&&",
            TokenKind::OrOr => "||",
            TokenKind::Bang => "!",
            TokenKind::Plus => "+",
            TokenKind::Minus => "-",
            TokenKind::Star => "*",
            TokenKind::Slash => "/",
            TokenKind::LParen => "(",
            TokenKind::RParen => ")",
            TokenKind::LBrace => "{",
            TokenKind::RBrace => "}",
            TokenKind::Comma => ",",
            TokenKind::Semi => ";",
            TokenKind::Colon => ":",
            _ => "",
        }
    }
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{span}: {message}")]
pub struct LexError {
    pub span: SourceSpan,
    pub message: String,
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: u32,
    column: u32,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.bump();
            true
        } else {
            false
        }
    }
}

/// Splits source text into tokens. `#` starts a comment running to the end
/// of the line; whitespace is insignificant except that the parser reads line
/// and column positions inside code blocks.
pub fn tokenize(source: &str) -> Result<Vec<Token>, LexError> {
    let mut cur = Cursor { chars: source.chars().peekable(), line: 1, column: 1 };
    let mut tokens = Vec::new();

    while let Some(c) = cur.peek() {
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        if c == '#' {
            while let Some(c) = cur.peek() {
                if c == '\n' {
                    break;
                }
                cur.bump();
            }
            continue;
        }

        let (line, column) = (cur.line, cur.column);
        let mut lexeme = String::new();
        let kind = if c.is_ascii_alphabetic() || c == '_' {
            while let Some(c) = cur.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    lexeme.push(c);
                    cur.bump();
                } else {
                    break;
                }
            }
            match Keyword::from_word(&lexeme) {
                Some(k) => TokenKind::Keyword(k),
                None => TokenKind::Ident(lexeme.clone()),
            }
        } else if c.is_ascii_digit() {
            while let Some(c) = cur.peek() {
                if c.is_ascii_digit() {
                    lexeme.push(c);
                    cur.bump();
                } else {
                    break;
                }
            }
            let value = lexeme.parse::<i64>().map_err(|_| LexError {
                span: SourceSpan::new(line, column, lexeme.chars().count() as u32),
                message: format!("integer literal `{lexeme}` out of range"),
            })?;
            TokenKind::Int(value)
        } else if c == '"' {
            cur.bump();
            lexeme.push('"');
            let mut value = String::new();
            loop {
                match cur.bump() {
                    None | Some('\n') => {
                        return Err(LexError {
                            span: SourceSpan::new(line, column, 1),
                            message: "unterminated string literal".into(),
                        })
                    }
                    Some('"') => {
                        lexeme.push('"');
                        break;
                    }
                    Some('\\') => {
                        let (el, ec) = (cur.line, cur.column - 1);
                        match cur.bump() {
                            Some(e @ ('"' | '\\')) => {
                                lexeme.push('\\');
                                lexeme.push(e);
                                value.push(e);
                            }
                            _ => {
                                return Err(LexError {
                                    span: SourceSpan::new(el, ec, 2),
                                    message: "unsupported escape sequence".into(),
                                })
                            }
                        }
                    }
                    Some(ch) => {
                        lexeme.push(ch);
                        value.push(ch);
                    }
                }
            }
            TokenKind::Str(value)
        } else {
            cur.bump();
            lexeme.push(c);
            let kind = match c {
                ':' if cur.eat('=') => TokenKind::Define,
                ':' => TokenKind::Colon,
                '=' if cur.eat('=') => {
                    if cur.eat('>') {
                        TokenKind::Implies
                    } else {
                        TokenKind::EqEq
                    }
                }
                '=' => TokenKind::Assign,
                '+' if cur.eat('=') => TokenKind::PlusAssign,
                '+' => TokenKind::Plus,
                '!' if cur.eat('=') => TokenKind::NotEq,
                '!' => TokenKind::Bang,
                '<' if cur.eat('=') => TokenKind::Le,
                '<' => TokenKind::Lt,
                '>' if cur.eat('=') => TokenKind::Ge,
                '>' => TokenKind::Gt,
                '&' if cur.eat('&') => TokenKind::AndAnd,
                '|' if cur.eat('|') => TokenKind::OrOr,
                '-' => TokenKind::Minus,
                '*' => TokenKind::Star,
                '/' => TokenKind::Slash,
                '(' => TokenKind::LParen,
                ')' => TokenKind::RParen,
                '{' => TokenKind::LBrace,
                '}' => TokenKind::RBrace,
                ',' => TokenKind::Comma,
                ';' => TokenKind::Semi,
                _ => {
                    return Err(LexError {
                        span: SourceSpan::new(line, column, 1),
                        message: format!("illegal character `{c}`"),
                    })
                }
            };
            lexeme = kind.punct().to_string();
            kind
        };

        let length = lexeme.chars().count() as u32;
        tokens.push(Token { kind, lexeme, span: SourceSpan::new(line, column, length) });
    }
    Ok(tokens)
}
