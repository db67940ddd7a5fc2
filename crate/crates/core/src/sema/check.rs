use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use super::typed::{Role, Symbol, SymbolTable, TExpr, TExprNode, TStmt, TypedSpec};
use super::{Diagnostic, Rule, SchemaEnv, MAX_INT};
use crate::models::RecordShape;
use crate::stdlib::{FunctionDef, FunctionRegistry, Param, Ret};
use crate::syntax::{BinaryOp, Expr, ExprNode, Ident, SourceSpan, Spec, Stmt, StmtNode, UnaryOp};
use crate::value::Kind;

/// Static record information: shape if known, label kind, and whether the
/// record was produced by a transform (and so carries no label).
#[derive(Debug, Clone, PartialEq)]
struct RecTy {
    shape: Option<RecordShape>,
    label: Option<Kind>,
    derived: bool,
}

#[derive(Debug, Clone, PartialEq)]
enum Ty {
    Scalar(Kind),
    Record(RecTy),
}

impl Ty {
    fn kind(&self) -> Kind {
        match self {
            Ty::Scalar(k) => *k,
            Ty::Record(_) => Kind::Record,
        }
    }

    fn scalar(&self) -> Option<Kind> {
        match self {
            Ty::Scalar(k) => Some(*k),
            Ty::Record(_) => None,
        }
    }

    fn is_numeric(&self) -> bool {
        self.scalar().is_some_and(Kind::is_numeric)
    }
}

/// Per-slot typing state. `Poison` marks a slot whose defining expression
/// was already reported, so uses stay silent.
#[derive(Debug, Clone, PartialEq)]
enum SlotTy {
    Untyped,
    Poison,
    Known(Ty),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Var,
    Precond,
    Code,
    Postcond,
}

struct Decl {
    name: String,
    role: Role,
    span: SourceSpan,
    ty: SlotTy,
}

type Typed = Option<(TExpr, Ty)>;

struct Checker<'a> {
    registry: &'a FunctionRegistry,
    schemas: &'a SchemaEnv,
    decls: Vec<Decl>,
    slots: HashMap<String, usize>,
    output_names: HashSet<String>,
    import_names: HashSet<String>,
    assigned: HashSet<usize>,
    phase: Phase,
    errors: Vec<Diagnostic>,
    warnings: Vec<Diagnostic>,
    k_static: usize,
}

pub fn check(spec: &Spec, registry: &FunctionRegistry) -> Result<TypedSpec, Vec<Diagnostic>> {
    check_with_schemas(spec, registry, &SchemaEnv::new())
}

/// Like [`check`], with known record shapes for some inputs. `getFeat` on an
/// input of known schema takes the kind of the addressed feature.
pub fn check_with_schemas(
    spec: &Spec,
    registry: &FunctionRegistry,
    schemas: &SchemaEnv,
) -> Result<TypedSpec, Vec<Diagnostic>> {
    let mut c = Checker {
        registry,
        schemas,
        decls: Vec::new(),
        slots: HashMap::new(),
        output_names: spec.outputs.iter().map(|o| o.name.clone()).collect(),
        import_names: spec.imports.iter().map(|i| i.name.clone()).collect(),
        assigned: HashSet::new(),
        phase: Phase::Var,
        errors: Vec::new(),
        warnings: Vec::new(),
        k_static: 0,
    };

    let mut inputs = Vec::new();
    for input in &spec.inputs {
        let ty = match c.schemas.get(&input.name) {
            Some(s) => RecTy { shape: Some(s.shape.clone()), label: s.label_kind, derived: false },
            None => RecTy { shape: None, label: None, derived: false },
        };
        if let Some(slot) = c.declare(input, Role::Input, SlotTy::Known(Ty::Record(ty))) {
            inputs.push(slot);
        }
    }

    let mut vars = Vec::new();
    for v in &spec.vars {
        let typed = c.expr(&v.init);
        let ty = match &typed {
            Some((_, t)) => SlotTy::Known(t.clone()),
            None => SlotTy::Poison,
        };
        if let Some(slot) = c.declare(&v.name, Role::Var, ty) {
            if let Some((te, _)) = typed {
                vars.push((slot, te));
            }
        }
    }

    c.phase = Phase::Precond;
    let preconds = c.conditions(&spec.preconds, "requires");

    let mut outputs = Vec::new();
    for o in &spec.outputs {
        if let Some(slot) = c.declare(o, Role::Output, SlotTy::Untyped) {
            outputs.push(slot);
        }
    }

    c.phase = Phase::Code;
    let code = c.block(&spec.code.stmts);
    for &slot in &outputs {
        if !c.assigned.contains(&slot) {
            let d = &c.decls[slot];
            let msg = format!("output `{}` is not assigned on every path through the code block", d.name);
            c.errors.push(Diagnostic::error(Rule::R3, d.span, msg));
        }
    }

    c.phase = Phase::Postcond;
    let postconds = c.conditions(&spec.postconds, "ensures");

    if !c.errors.is_empty() {
        return Err(c.errors);
    }

    let mut symbols = SymbolTable::default();
    for (slot, d) in c.decls.into_iter().enumerate() {
        let kind = match d.ty {
            SlotTy::Known(t) => t.kind(),
            SlotTy::Untyped | SlotTy::Poison => Kind::Int,
        };
        symbols.insert(Symbol { name: d.name, role: d.role, kind, span: d.span, slot });
    }
    Ok(TypedSpec {
        spec: spec.clone(),
        symbols,
        inputs,
        vars,
        preconds: preconds.into_iter().flatten().collect(),
        outputs,
        code,
        postconds: postconds.into_iter().flatten().collect(),
        k_static: c.k_static,
        warnings: c.warnings,
    })
}

fn literal_index(e: &Expr) -> Option<i64> {
    match &e.node {
        ExprNode::IntLit(n) => Some(*n),
        ExprNode::Unary(UnaryOp::Neg, inner) => match inner.node {
            ExprNode::IntLit(n) => Some(-n),
            _ => None,
        },
        _ => None,
    }
}

fn shape_name(shape: &RecordShape) -> &'static str {
    match shape {
        RecordShape::Tabular(_) => "tabular row",
        RecordShape::Grid => "grid",
        RecordShape::GameState => "game state",
    }
}

impl Checker<'_> {
    fn err(&mut self, rule: Rule, span: SourceSpan, msg: impl Into<String>) {
        self.errors.push(Diagnostic::error(rule, span, msg));
    }

    fn declare(&mut self, id: &Ident, role: Role, ty: SlotTy) -> Option<usize> {
        if let Some(&prev) = self.slots.get(&id.name) {
            let at = self.decls[prev].span;
            self.err(Rule::R1, id.span, format!("`{}` is already declared at {at}", id.name));
            return None;
        }
        let slot = self.decls.len();
        self.decls.push(Decl { name: id.name.clone(), role, span: id.span, ty });
        self.slots.insert(id.name.clone(), slot);
        Some(slot)
    }

    fn conditions(&mut self, conds: &[Expr], keyword: &str) -> Vec<Option<TExpr>> {
        conds
            .iter()
            .map(|e| {
                let (te, ty) = self.expr(e)?;
                if ty != Ty::Scalar(Kind::Bool) {
                    self.err(Rule::R5, e.span, format!("`{keyword}` clause must be bool, found {}", ty.kind()));
                    return None;
                }
                Some(te)
            })
            .collect()
    }

    fn resolve(&mut self, name: &str, span: SourceSpan) -> Typed {
        let Some(&slot) = self.slots.get(name) else {
            if name == "MAX_INT" {
                return Some((TExpr { node: TExprNode::Int(MAX_INT), kind: Kind::Int, span }, Ty::Scalar(Kind::Int)));
            }
            let (rule, msg) = if self.phase == Phase::Precond && self.output_names.contains(name) {
                (Rule::R2, format!("precondition refers to output `{name}`"))
            } else if self.output_names.contains(name) {
                (Rule::R1, format!("output `{name}` is not visible in var declarations"))
            } else if self.import_names.contains(name) {
                (Rule::R1, format!("`{name}` names an imported model, not a value"))
            } else {
                (Rule::R1, format!("undeclared name `{name}`"))
            };
            self.err(rule, span, msg);
            return None;
        };
        let d = &self.decls[slot];
        match (d.role, self.phase) {
            (Role::Temp, Phase::Postcond) => {
                self.err(Rule::R1, span, format!("`{name}` is local to the code block"));
                return None;
            }
            (Role::Temp, _) if !self.assigned.contains(&slot) => {
                self.err(Rule::R1, span, format!("`{name}` may be used before it is assigned"));
                return None;
            }
            (Role::Output, Phase::Code) if !self.assigned.contains(&slot) => {
                self.err(Rule::R3, span, format!("output `{name}` is read before it is assigned"));
                return None;
            }
            _ => {}
        }
        match &self.decls[slot].ty {
            SlotTy::Known(t) => {
                let t = t.clone();
                Some((TExpr { node: TExprNode::Slot(slot), kind: t.kind(), span }, t))
            }
            SlotTy::Untyped | SlotTy::Poison => None,
        }
    }

    fn expr(&mut self, e: &Expr) -> Typed {
        let span = e.span;
        let scalar = |node, k| Some((TExpr { node, kind: k, span }, Ty::Scalar(k)));
        match &e.node {
            ExprNode::BoolLit(b) => scalar(TExprNode::Bool(*b), Kind::Bool),
            ExprNode::IntLit(n) => scalar(TExprNode::Int(*n), Kind::Int),
            ExprNode::StrLit(s) => scalar(TExprNode::Str(Arc::from(s.as_str())), Kind::String),
            ExprNode::VarRef(name) => self.resolve(name, span),
            ExprNode::Unary(op, inner) => {
                let (te, ty) = self.expr(inner)?;
                let ok = match op {
                    UnaryOp::Not => ty == Ty::Scalar(Kind::Bool),
                    UnaryOp::Neg => ty.is_numeric(),
                };
                if !ok {
                    let want = if *op == UnaryOp::Not { "bool" } else { "a number" };
                    self.err(Rule::R4, span, format!("`{}` needs {want}, found {}", op.symbol(), ty.kind()));
                    return None;
                }
                scalar(TExprNode::Unary(*op, Box::new(te)), ty.kind())
            }
            ExprNode::Binary(op, l, r) => {
                let left = self.expr(l);
                let right = self.expr(r);
                let ((lt, lty), (rt, rty)) = (left?, right?);
                let result = self.binary_kind(*op, &lty, &rty);
                let Some(k) = result else {
                    self.err(
                        Rule::R4,
                        span,
                        format!("operator `{}` cannot combine {} and {}", op.symbol(), lty.kind(), rty.kind()),
                    );
                    return None;
                };
                scalar(TExprNode::Binary(*op, Box::new(lt), Box::new(rt)), k)
            }
            ExprNode::Call(name, args) => self.call(name, args, span),
        }
    }

    fn binary_kind(&self, op: BinaryOp, l: &Ty, r: &Ty) -> Option<Kind> {
        use BinaryOp::*;
        let bools = *l == Ty::Scalar(Kind::Bool) && *r == Ty::Scalar(Kind::Bool);
        let nums = l.is_numeric() && r.is_numeric();
        match op {
            Implies | Or | And => bools.then_some(Kind::Bool),
            Add | Sub | Mul | Div => {
                nums.then(|| if l.kind() == Kind::Int && r.kind() == Kind::Int { Kind::Int } else { Kind::Float })
            }
            Lt | Leq | Gt | Geq => nums.then_some(Kind::Bool),
            Eq | Neq => (nums || l.kind() == r.kind()).then_some(Kind::Bool),
        }
    }

    fn call(&mut self, name: &str, args: &[Expr], span: SourceSpan) -> Typed {
        let typed: Vec<Typed> = args.iter().map(|a| self.expr(a)).collect();
        if name == "predict" || name == "play" {
            return self.model_call(name, typed, span);
        }
        let Some(def) = self.registry.get(name).cloned() else {
            self.err(Rule::R4, span, format!("unknown function `{name}`"));
            return None;
        };
        if args.len() != def.params.len() {
            self.err(Rule::R4, span, format!("`{name}` takes {} argument(s), found {}", def.params.len(), args.len()));
            return None;
        }
        let typed: Vec<(TExpr, Ty)> = typed.into_iter().collect::<Option<_>>()?;
        let mut ok = true;
        for (i, (param, (te, ty))) in def.params.iter().zip(&typed).enumerate() {
            if let Err(msg) = self.param_ok(*param, ty, args, &typed, i) {
                self.err(Rule::R4, te.span, format!("argument {} of `{name}`: {msg}", i + 1));
                ok = false;
            }
        }
        if !ok {
            return None;
        }
        let ret = self.ret_ty(&def, args, &typed, span)?;
        let node = TExprNode::Call(def, typed.into_iter().map(|(t, _)| t).collect());
        Some((TExpr { node, kind: ret.kind(), span }, ret))
    }

    fn model_call(&mut self, name: &str, typed: Vec<Typed>, span: SourceSpan) -> Typed {
        if self.phase != Phase::Code {
            self.err(Rule::R4, span, format!("`{name}` may only be called inside the code block"));
            return None;
        }
        self.k_static += 1;
        let arity = if name == "predict" { 1 } else { 2 };
        if typed.len() != arity {
            self.err(Rule::R4, span, format!("`{name}` takes {arity} argument(s), found {}", typed.len()));
            return None;
        }
        let mut typed: Vec<(TExpr, Ty)> = typed.into_iter().collect::<Option<_>>()?;
        let record_param = if name == "predict" { Param::Record } else { Param::GameState };
        if let Err(msg) = self.param_ok(record_param, &typed[0].1, &[], &typed, 0) {
            self.err(Rule::R4, typed[0].0.span, format!("argument 1 of `{name}`: {msg}"));
            return None;
        }
        let node = if name == "predict" {
            TExprNode::Predict(Box::new(typed.remove(0).0))
        } else {
            if typed[1].1 != Ty::Scalar(Kind::Int) {
                let found = typed[1].1.kind();
                self.err(Rule::R4, typed[1].0.span, format!("argument 2 of `play`: expected int seed, found {found}"));
                return None;
            }
            let seed = typed.pop().unwrap().0;
            TExprNode::Play(Box::new(typed.pop().unwrap().0), Box::new(seed))
        };
        Some((TExpr { node, kind: Kind::Int, span }, Ty::Scalar(Kind::Int)))
    }

    /// Kind of the feature addressed by `args[1]` of a tabular record, when
    /// statically known. `Err` carries an out-of-range message.
    fn feature_kind(&self, rec: &Ty, index: &Expr) -> Result<Option<Kind>, String> {
        let Ty::Record(RecTy { shape: Some(RecordShape::Tabular(schema)), .. }) = rec else {
            return Ok(None);
        };
        match literal_index(index) {
            Some(i) if i >= 0 && (i as usize) < schema.len() => Ok(schema.kind_of(i as usize)),
            Some(i) => Err(format!("feature index {i} out of range for a schema with {} features", schema.len())),
            None => {
                let first = schema.kind_of(0);
                Ok(first.filter(|k| schema.features.iter().all(|f| f.kind == *k)))
            }
        }
    }

    fn param_ok(&self, param: Param, ty: &Ty, args: &[Expr], typed: &[(TExpr, Ty)], i: usize) -> Result<(), String> {
        let want_shape = |want: fn(&RecordShape) -> bool, label: &str| match ty {
            Ty::Record(RecTy { shape: Some(s), .. }) if !want(s) => {
                Err(format!("expected a {label}, found a {}", shape_name(s)))
            }
            Ty::Record(_) => Ok(()),
            Ty::Scalar(k) => Err(format!("expected a {label}, found {k}")),
        };
        let scalar = |want: Kind| match ty.scalar() {
            Some(k) if k == want => Ok(()),
            _ => Err(format!("expected {want}, found {}", ty.kind())),
        };
        match param {
            Param::Record => want_shape(|_| true, "record"),
            Param::Tabular => want_shape(|s| matches!(s, RecordShape::Tabular(_)), "tabular row"),
            Param::Grid => want_shape(|s| matches!(s, RecordShape::Grid), "grid"),
            Param::GameState => want_shape(|s| matches!(s, RecordShape::GameState), "game state"),
            Param::Int => scalar(Kind::Int),
            Param::String => scalar(Kind::String),
            Param::Scalar => ty.scalar().map(|_| ()).ok_or_else(|| "expected a scalar, found record".to_string()),
            Param::FeatureValue => {
                let k = ty.scalar().ok_or_else(|| "expected a scalar, found record".to_string())?;
                if i < 2 {
                    return Ok(());
                }
                match self.feature_kind(&typed[0].1, &args[1])? {
                    Some(want) if !k.assignable_to(want) => {
                        Err(format!("feature holds {want} values, cannot store {k}"))
                    }
                    _ => Ok(()),
                }
            }
        }
    }

    fn ret_ty(&mut self, def: &FunctionDef, args: &[Expr], typed: &[(TExpr, Ty)], span: SourceSpan) -> Option<Ty> {
        match def.ret {
            Ret::Kind(k) => Some(Ty::Scalar(k)),
            Ret::FeatureKind => match self.feature_kind(&typed[0].1, &args[1]) {
                Ok(Some(k)) => Some(Ty::Scalar(k)),
                Ok(None) => {
                    self.warnings.push(Diagnostic::warning(
                        span,
                        format!("feature kind unknown for `{}`; assuming float", def.name),
                    ));
                    Some(Ty::Scalar(Kind::Float))
                }
                Err(msg) => {
                    self.err(Rule::R4, args[1].span, msg);
                    None
                }
            },
            Ret::LabelKind => match &typed[0].1 {
                Ty::Record(r) if r.derived => {
                    self.err(Rule::R4, span, "`label` of a transformed record: only source rows carry labels");
                    None
                }
                Ty::Record(r) => Some(Ty::Scalar(r.label.unwrap_or(Kind::Int))),
                Ty::Scalar(_) => None,
            },
            Ret::SameRecord => match &typed[0].1 {
                Ty::Record(r) => Some(Ty::Record(RecTy { shape: r.shape.clone(), label: None, derived: true })),
                Ty::Scalar(_) => None,
            },
        }
    }

    fn block(&mut self, stmts: &[Stmt]) -> Vec<TStmt> {
        stmts.iter().filter_map(|s| self.stmt(s)).collect()
    }

    /// Resolves an assignment target, declaring a code-block local on first use.
    fn target(&mut self, id: &Ident) -> Option<usize> {
        match self.slots.get(&id.name) {
            Some(&slot) => match self.decls[slot].role {
                Role::Output | Role::Temp => Some(slot),
                role => {
                    let what = if role == Role::Input { "input" } else { "var" };
                    self.err(Rule::R1, id.span, format!("cannot assign to {what} `{}`", id.name));
                    None
                }
            },
            None => self.declare(id, Role::Temp, SlotTy::Untyped),
        }
    }

    fn store(&mut self, slot: usize, value: Option<&Ty>, span: SourceSpan) -> bool {
        self.assigned.insert(slot);
        let Some(ty) = value else {
            if self.decls[slot].ty == SlotTy::Untyped {
                self.decls[slot].ty = SlotTy::Poison;
            }
            return false;
        };
        match &self.decls[slot].ty {
            SlotTy::Untyped => {
                self.decls[slot].ty = SlotTy::Known(ty.clone());
                true
            }
            SlotTy::Poison => false,
            SlotTy::Known(have) => {
                let fits = match (have, ty) {
                    (Ty::Scalar(h), Ty::Scalar(v)) => v.assignable_to(*h),
                    (Ty::Record(_), Ty::Record(_)) => true,
                    _ => false,
                };
                if !fits {
                    let name = self.decls[slot].name.clone();
                    let msg = format!("`{name}` holds {} values, cannot assign {}", have.kind(), ty.kind());
                    self.err(Rule::R4, span, msg);
                }
                fits
            }
        }
    }

    fn stmt(&mut self, s: &Stmt) -> Option<TStmt> {
        let span = s.span;
        match &s.node {
            StmtNode::Assign(id, e) => {
                let typed = self.expr(e);
                let slot = self.target(id)?;
                let (expr, ty) = typed.unzip();
                let ok = self.store(slot, ty.as_ref(), span);
                Some(TStmt::Assign { slot, expr: expr.filter(|_| ok)?, span })
            }
            StmtNode::AddAssign(id, e) => {
                let current = self.resolve_target_read(id);
                let typed = self.expr(e);
                let (slot, have) = current?;
                let (expr, ty) = typed?;
                let fits = have.is_numeric() && ty.is_numeric() && ty.kind().assignable_to(have.kind());
                if !fits {
                    self.err(
                        Rule::R4,
                        span,
                        format!("cannot add {} to `{}` of kind {}", ty.kind(), id.name, have.kind()),
                    );
                    return None;
                }
                Some(TStmt::AddAssign { slot, expr, span })
            }
            StmtNode::TupleAssign(ids, es) => {
                let typed: Vec<Typed> = es.iter().map(|e| self.expr(e)).collect();
                if ids.len() != es.len() {
                    self.err(
                        Rule::R4,
                        span,
                        format!("tuple assignment of {} value(s) to {} target(s)", es.len(), ids.len()),
                    );
                    return None;
                }
                let mut slots = Vec::new();
                let mut exprs = Vec::new();
                let mut ok = true;
                for (id, t) in ids.iter().zip(typed) {
                    let Some(slot) = self.target(id) else {
                        ok = false;
                        continue;
                    };
                    let (expr, ty) = t.unzip();
                    ok &= self.store(slot, ty.as_ref(), span);
                    slots.push(slot);
                    exprs.extend(expr);
                }
                ok.then_some(TStmt::TupleAssign { slots, exprs, span })
            }
            StmtNode::ForRange { var, count, body } => {
                let count_t = self.expr(count);
                let count_t = match count_t {
                    Some((te, Ty::Scalar(Kind::Int))) => Some(te),
                    Some((te, ty)) => {
                        self.err(Rule::R4, te.span, format!("loop count must be int, found {}", ty.kind()));
                        None
                    }
                    None => None,
                };
                let before = self.assigned.clone();
                let index = if var.name == "_" {
                    None
                } else {
                    let slot = self.target(var);
                    if let Some(slot) = slot {
                        self.store(slot, Some(&Ty::Scalar(Kind::Int)), var.span);
                    }
                    slot
                };
                let body_t = self.block(body);
                let always_runs = match literal_index(count) {
                    Some(n) => n > 0,
                    None => matches!(&count.node, ExprNode::VarRef(n) if n == "MAX_INT" && !self.slots.contains_key(n)),
                };
                if !always_runs {
                    self.assigned = before;
                }
                let incomplete = body_t.len() != body.len() || (var.name != "_" && index.is_none());
                if incomplete {
                    return None;
                }
                Some(TStmt::For { index, count: count_t?, body: body_t, span })
            }
        }
    }

    /// For `x += e`: `x` must already hold a value.
    fn resolve_target_read(&mut self, id: &Ident) -> Option<(usize, Ty)> {
        let Some(&slot) = self.slots.get(&id.name) else {
            self.err(Rule::R1, id.span, format!("undeclared name `{}`", id.name));
            return None;
        };
        if matches!(self.decls[slot].role, Role::Input | Role::Var) {
            let what = if self.decls[slot].role == Role::Input { "input" } else { "var" };
            self.err(Rule::R1, id.span, format!("cannot assign to {what} `{}`", id.name));
            return None;
        }
        let (_, ty) = self.resolve(&id.name, id.span)?;
        Some((slot, ty))
    }
}
