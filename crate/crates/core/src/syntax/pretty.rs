use std::fmt::Write;

use super::ast::*;

/// Canonical text for a spec: one declaration or statement per line, single
/// spaces around binary operators, two-space indentation inside the code
/// block, parentheses only where precedence requires them. Empty sections are
/// omitted. Comments are not preserved.
pub fn pretty_print(spec: &Spec) -> String {
    let mut out = String::new();
    for i in &spec.imports {
        let _ = writeln!(out, "import {};", i.name);
    }
    for i in &spec.inputs {
        let _ = writeln!(out, "input {};", i.name);
    }
    for v in &spec.vars {
        let _ = writeln!(out, "var {} := {};", v.name.name, expr_to_string(&v.init));
    }
    for p in &spec.preconds {
        let _ = writeln!(out, "requires {};", expr_to_string(p));
    }
    for o in &spec.outputs {
        let _ = writeln!(out, "output {};", o.name);
    }
    out.push_str("{\n");
    write_stmts(&mut out, &spec.code.stmts, 1);
    out.push_str("}\n");
    for p in &spec.postconds {
        let _ = writeln!(out, "ensures {};", expr_to_string(p));
    }
    out
}

fn write_stmts(out: &mut String, stmts: &[Stmt], depth: usize) {
    let pad = "  ".repeat(depth);
    for s in stmts {
        match &s.node {
            StmtNode::Assign(t, e) => {
                let _ = writeln!(out, "{pad}{} = {}", t.name, expr_to_string(e));
            }
            StmtNode::AddAssign(t, e) => {
                let _ = writeln!(out, "{pad}{} += {}", t.name, expr_to_string(e));
            }
            StmtNode::TupleAssign(ts, es) => {
                let targets: Vec<&str> = ts.iter().map(|t| t.name.as_str()).collect();
                let values: Vec<String> = es.iter().map(expr_to_string).collect();
                let _ = writeln!(out, "{pad}{} = {}", targets.join(", "), values.join(", "));
            }
            StmtNode::ForRange { var, count, body } => {
                let _ = writeln!(out, "{pad}for {} in range({}):", var.name, expr_to_string(count));
                write_stmts(out, body, depth + 1);
            }
        }
    }
}

pub fn expr_to_string(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e);
    s
}

fn precedence(e: &Expr) -> u8 {
    match &e.node {
        ExprNode::Binary(op, ..) => op.precedence(),
        ExprNode::Unary(..) => UNARY_PRECEDENCE,
        _ => u8::MAX,
    }
}

fn write_operand(out: &mut String, e: &Expr, parens: bool) {
    if parens {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}

fn write_expr(out: &mut String, e: &Expr) {
    match &e.node {
        ExprNode::BoolLit(b) => out.push_str(if *b { "true" } else { "false" }),
        ExprNode::IntLit(i) => {
            let _ = write!(out, "{i}");
        }
        ExprNode::StrLit(s) => {
            out.push('"');
            for c in s.chars() {
                if c == '"' || c == '\\' {
                    out.push('\\');
                }
                out.push(c);
            }
            out.push('"');
        }
        ExprNode::VarRef(n) => out.push_str(n),
        ExprNode::Unary(op, inner) => {
            out.push_str(op.symbol());
            write_operand(out, inner, precedence(inner) < UNARY_PRECEDENCE);
        }
        ExprNode::Binary(op, l, r) => {
            let p = op.precedence();
            let (lp, rp) = (precedence(l), precedence(r));
            let (left_parens, right_parens) = match op.assoc() {
                Assoc::Left => (lp < p, rp <= p),
                Assoc::Right => (lp <= p, rp < p),
                Assoc::None => (lp <= p, rp <= p),
            };
            write_operand(out, l, left_parens);
            let _ = write!(out, " {} ", op.symbol());
            write_operand(out, r, right_parens);
        }
        ExprNode::Call(name, args) => {
            out.push_str(name);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, a);
            }
            out.push(')');
        }
    }
}
