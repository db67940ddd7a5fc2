//! Tree-walking evaluation of typed expressions and code-block statements.

use crate::models::{ModelBackend, Record};
use crate::rng::RngHandle;
use crate::sema::{TExpr, TExprNode, TStmt, TypedSpec};
use crate::stdlib::{CallContext, StdlibConfig};
use crate::syntax::{BinaryOp, SourceSpan, UnaryOp};
use crate::value::{Kind, Value};

use super::EngineError;

/// Slot values of one test. `None` until first assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Env {
    pub slots: Vec<Option<Value>>,
}

impl Env {
    pub fn new(size: usize) -> Self {
        Self { slots: vec![None; size] }
    }

    pub fn get(&self, slot: usize) -> Option<&Value> {
        self.slots.get(slot).and_then(Option::as_ref)
    }
}

pub(crate) struct Machine<'a> {
    pub spec: &'a TypedSpec,
    pub rng: &'a mut RngHandle,
    pub stdlib: &'a StdlibConfig,
    pub model: &'a dyn ModelBackend,
    /// `predict`/`play` calls made so far.
    pub invocations: u64,
}

fn runtime(span: SourceSpan, message: impl Into<String>) -> EngineError {
    EngineError::Runtime { span, message: message.into() }
}

fn int_op(op: BinaryOp, a: i64, b: i64, span: SourceSpan) -> Result<Value, EngineError> {
    let r = match op {
        BinaryOp::Add => a.checked_add(b),
        BinaryOp::Sub => a.checked_sub(b),
        BinaryOp::Mul => a.checked_mul(b),
        BinaryOp::Div => {
            if b == 0 {
                return Err(runtime(span, "division by zero"));
            }
            a.checked_div(b)
        }
        _ => unreachable!("not arithmetic"),
    };
    r.map(Value::Int).ok_or_else(|| runtime(span, format!("integer overflow in `{a} {} {b}`", op.symbol())))
}

fn float_op(op: BinaryOp, a: f64, b: f64) -> f64 {
    match op {
        BinaryOp::Add => a + b,
        BinaryOp::Sub => a - b,
        BinaryOp::Mul => a * b,
        BinaryOp::Div => a / b,
        _ => unreachable!("not arithmetic"),
    }
}

fn compare(op: BinaryOp, l: &Value, r: &Value) -> Option<bool> {
    match op {
        BinaryOp::Eq => Some(l.semantic_eq(r)),
        BinaryOp::Neq => Some(!l.semantic_eq(r)),
        _ => {
            let ord = match (l, r) {
                (Value::Int(a), Value::Int(b)) => a.cmp(b),
                _ => l.as_f64()?.partial_cmp(&r.as_f64()?)?,
            };
            Some(match op {
                BinaryOp::Lt => ord.is_lt(),
                BinaryOp::Leq => ord.is_le(),
                BinaryOp::Gt => ord.is_gt(),
                BinaryOp::Geq => ord.is_ge(),
                _ => unreachable!(),
            })
        }
    }
}

impl Machine<'_> {
    fn record<'v>(&self, v: &'v Value, span: SourceSpan) -> Result<&'v Record, EngineError> {
        v.as_record().map(|r| r.as_ref()).ok_or_else(|| runtime(span, format!("expected a record, found {}", v.kind())))
    }

    fn bool(&mut self, e: &TExpr, env: &Env) -> Result<bool, EngineError> {
        let v = self.eval(e, env)?;
        v.as_bool().ok_or_else(|| runtime(e.span, format!("expected bool, found {}", v.kind())))
    }

    pub fn eval(&mut self, e: &TExpr, env: &Env) -> Result<Value, EngineError> {
        match &e.node {
            TExprNode::Bool(b) => Ok(Value::Bool(*b)),
            TExprNode::Int(n) => Ok(Value::Int(*n)),
            TExprNode::Str(s) => Ok(Value::Str(s.clone())),
            TExprNode::Slot(slot) => env
                .get(*slot)
                .cloned()
                .ok_or_else(|| runtime(e.span, format!("`{}` has no value", self.spec.name(*slot)))),
            TExprNode::Unary(op, inner) => {
                let v = self.eval(inner, env)?;
                match (op, v) {
                    (UnaryOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
                    (UnaryOp::Neg, Value::Int(n)) => {
                        n.checked_neg().map(Value::Int).ok_or_else(|| runtime(e.span, "integer overflow in negation"))
                    }
                    (UnaryOp::Neg, Value::Float(x)) => Ok(Value::Float(-x)),
                    (op, v) => Err(runtime(e.span, format!("`{}` cannot apply to {}", op.symbol(), v.kind()))),
                }
            }
            TExprNode::Binary(op, l, r) => match op {
                BinaryOp::And => Ok(Value::Bool(self.bool(l, env)? && self.bool(r, env)?)),
                BinaryOp::Or => Ok(Value::Bool(self.bool(l, env)? || self.bool(r, env)?)),
                BinaryOp::Implies => Ok(Value::Bool(!self.bool(l, env)? || self.bool(r, env)?)),
                _ => {
                    let lv = self.eval(l, env)?;
                    let rv = self.eval(r, env)?;
                    if op.is_comparison() {
                        return compare(*op, &lv, &rv).map(Value::Bool).ok_or_else(|| {
                            runtime(e.span, format!("cannot compare {} with {}", lv.kind(), rv.kind()))
                        });
                    }
                    match (&lv, &rv) {
                        (Value::Int(a), Value::Int(b)) => int_op(*op, *a, *b, e.span),
                        _ => match (lv.as_f64(), rv.as_f64()) {
                            (Some(a), Some(b)) => Ok(Value::Float(float_op(*op, a, b))),
                            _ => Err(runtime(
                                e.span,
                                format!("`{}` cannot combine {} and {}", op.symbol(), lv.kind(), rv.kind()),
                            )),
                        },
                    }
                }
            },
            TExprNode::Call(def, args) => {
                let values = args.iter().map(|a| self.eval(a, env)).collect::<Result<Vec<_>, _>>()?;
                let mut ctx = CallContext { rng: self.rng, config: self.stdlib };
                def.call(&mut ctx, &values).map_err(|err| runtime(e.span, format!("{}: {err}", def.name)))
            }
            TExprNode::Predict(arg) => {
                let v = self.eval(arg, env)?;
                let class = self.model.predict(self.record(&v, arg.span)?);
                self.invocations += 1;
                class.map(Value::Int).map_err(|source| EngineError::Model { span: e.span, source })
            }
            TExprNode::Play(state, seed) => {
                let s = self.eval(state, env)?;
                let seed = self.eval(seed, env)?;
                let Record::GameState(gs) = self.record(&s, state.span)? else {
                    return Err(runtime(state.span, "play needs a game state"));
                };
                let seed = seed.as_int().ok_or_else(|| runtime(e.span, "play seed must be an int"))?;
                let outcome = self.model.play(gs, seed as u64);
                self.invocations += 1;
                outcome.map(Value::Int).map_err(|source| EngineError::Model { span: e.span, source })
            }
        }
    }

    fn store(&self, env: &mut Env, slot: usize, v: Value) {
        let v = match (self.spec.symbols.by_slot(slot).kind, v) {
            (Kind::Float, Value::Int(n)) => Value::Float(n as f64),
            (_, v) => v,
        };
        env.slots[slot] = Some(v);
    }

    pub fn exec(&mut self, stmts: &[TStmt], env: &mut Env) -> Result<(), EngineError> {
        for s in stmts {
            match s {
                TStmt::Assign { slot, expr, .. } => {
                    let v = self.eval(expr, env)?;
                    self.store(env, *slot, v);
                }
                TStmt::AddAssign { slot, expr, span } => {
                    let add = self.eval(expr, env)?;
                    let cur = env
                        .get(*slot)
                        .cloned()
                        .ok_or_else(|| runtime(*span, format!("`{}` has no value", self.spec.name(*slot))))?;
                    let sum = match (&cur, &add) {
                        (Value::Int(a), Value::Int(b)) => int_op(BinaryOp::Add, *a, *b, *span)?,
                        _ => match (cur.as_f64(), add.as_f64()) {
                            (Some(a), Some(b)) => Value::Float(a + b),
                            _ => return Err(runtime(*span, format!("cannot add {} to {}", add.kind(), cur.kind()))),
                        },
                    };
                    self.store(env, *slot, sum);
                }
                TStmt::TupleAssign { slots, exprs, .. } => {
                    let values = exprs.iter().map(|x| self.eval(x, env)).collect::<Result<Vec<_>, _>>()?;
                    for (slot, v) in slots.iter().zip(values) {
                        self.store(env, *slot, v);
                    }
                }
                TStmt::For { index, count, body, span } => {
                    let n = self.eval(count, env)?;
                    let n = n
                        .as_int()
                        .filter(|n| *n >= 0)
                        .ok_or_else(|| runtime(*span, format!("loop count must be a nonnegative int, found {n}")))?;
                    for i in 0..n {
                        if let Some(slot) = index {
                            env.slots[*slot] = Some(Value::Int(i));
                        }
                        self.exec(body, env)?;
                    }
                }
            }
        }
        Ok(())
    }
}
