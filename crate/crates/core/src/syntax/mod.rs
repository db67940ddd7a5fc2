//! Lexing, parsing and canonical printing of `.nomos` specifications.

pub mod ast;
mod lexer;
mod parser;
mod pretty;

pub use ast::*;
pub use lexer::{tokenize, Keyword, LexError, Token, TokenKind};
pub use parser::{parse, parse_expr, ParseError, SyntaxError};
pub use pretty::{expr_to_string, pretty_print};

/// Removes `#` comments, keeping line structure (and string literals) intact.
pub fn strip_comments(source: &str) -> String {
    let mut out = String::with_capacity(source.len());
    for line in source.split_inclusive('\n') {
        let mut in_str = false;
        let mut escaped = false;
        let mut cut = line.len();
        for (i, c) in line.char_indices() {
            if in_str {
                if escaped {
                    escaped = false;
                } else if c == '\\' {
                    escaped = true;
                } else if c == '"' {
                    in_str = false;
                }
            } else if c == '"' {
                in_str = true;
            } else if c == '#' {
                cut = i;
                break;
            }
        }
        out.push_str(&line[..cut]);
        if cut < line.len() && line.ends_with('\n') {
            out.push('\n');
        }
    }
    out
}
