//! Extension functions callable from specs, and the registry the checker and
//! interpreter resolve calls against.

mod funcs;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use funcs::{blur, get_feat, label, rand_int, relax, set_feat, str_concat, unrelax, w_noise};

use crate::rng::RngHandle;
use crate::value::{Kind, Value};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StdlibError {
    #[error("feature index {index} out of range for a record with {len} features")]
    Index { index: i64, len: usize },
    #[error("{0}")]
    Kind(String),
    #[error("record has no ground-truth label (it was synthesized or modified)")]
    Provenance,
    #[error("empty range: lo {lo} > hi {hi}")]
    Range { lo: i64, hi: i64 },
}

/// Tunable parameters of the record transforms.
#[derive(Debug, Clone, PartialEq)]
pub struct StdlibConfig {
    /// Half-width of the uniform noise added by `wNoise`.
    pub wnoise_eps: f64,
    /// Side of the square `blur` kernel; odd.
    pub blur_kernel: usize,
    /// Ceiling for `unrelax` when the model does not supply one.
    pub terrain_max: i64,
}

impl Default for StdlibConfig {
    fn default() -> Self {
        Self { wnoise_eps: 0.05, blur_kernel: 3, terrain_max: 10 }
    }
}

pub struct CallContext<'a> {
    pub rng: &'a mut RngHandle,
    pub config: &'a StdlibConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Param {
    /// Any record.
    Record,
    Tabular,
    Grid,
    GameState,
    Int,
    String,
    /// Any scalar kind.
    Scalar,
    /// A scalar the checker matches against the kind of the feature
    /// addressed by the preceding record and index arguments.
    FeatureValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ret {
    Kind(Kind),
    /// Kind of the addressed feature of the record argument.
    FeatureKind,
    /// Kind of the record argument's label.
    LabelKind,
    /// A record of the same shape as the first argument.
    SameRecord,
}

pub type NativeFn = Arc<dyn Fn(&mut CallContext<'_>, &[Value]) -> Result<Value, StdlibError> + Send + Sync>;

#[derive(Clone)]
pub struct FunctionDef {
    pub name: String,
    pub params: Vec<Param>,
    pub ret: Ret,
    pub consumes_randomness: bool,
    pub implementation: NativeFn,
}

impl fmt::Debug for FunctionDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionDef")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("ret", &self.ret)
            .field("consumes_randomness", &self.consumes_randomness)
            .finish_non_exhaustive()
    }
}

impl FunctionDef {
    pub fn call(&self, ctx: &mut CallContext<'_>, args: &[Value]) -> Result<Value, StdlibError> {
        (self.implementation)(ctx, args)
    }
}

/// Names handled by the interpreter itself; they may appear only in the
/// code block and cannot be registered.
pub const MODEL_CALLS: [&str; 2] = ["predict", "play"];

pub const CORE_FUNCTIONS: [&str; 9] =
    ["getFeat", "setFeat", "label", "randInt", "strConcat", "blur", "wNoise", "relax", "unrelax"];

#[derive(Debug, Clone, PartialEq, Error)]
#[error("cannot register `{0}`: the name is reserved")]
pub struct RegistryError(pub String);

#[derive(Debug, Clone)]
pub struct FunctionRegistry {
    functions: BTreeMap<String, Arc<FunctionDef>>,
}

fn record_arg(args: &[Value], i: usize) -> Result<&crate::models::Record, StdlibError> {
    args[i]
        .as_record()
        .map(|r| r.as_ref())
        .ok_or_else(|| StdlibError::Kind(format!("argument {} must be a record", i + 1)))
}

fn int_arg(args: &[Value], i: usize) -> Result<i64, StdlibError> {
    args[i].as_int().ok_or_else(|| StdlibError::Kind(format!("argument {} must be an int", i + 1)))
}

fn str_arg(args: &[Value], i: usize) -> Result<&str, StdlibError> {
    match &args[i] {
        Value::Str(s) => Ok(s),
        _ => Err(StdlibError::Kind(format!("argument {} must be a string", i + 1))),
    }
}

fn native(
    f: impl Fn(&mut CallContext<'_>, &[Value]) -> Result<Value, StdlibError> + Send + Sync + 'static,
) -> NativeFn {
    Arc::new(f)
}

impl FunctionRegistry {
    /// The nine core functions.
    pub fn core() -> Self {
        use Param as P;
        let mut functions = BTreeMap::new();
        let mut add = |name: &str, params: Vec<Param>, ret: Ret, rand: bool, implementation: NativeFn| {
            let def = FunctionDef { name: name.into(), params, ret, consumes_randomness: rand, implementation };
            functions.insert(name.to_string(), Arc::new(def));
        };
        add(
            "getFeat",
            vec![P::Tabular, P::Int],
            Ret::FeatureKind,
            false,
            native(|_, a| get_feat(record_arg(a, 0)?, int_arg(a, 1)?)),
        );
        add(
            "setFeat",
            vec![P::Tabular, P::Int, P::FeatureValue],
            Ret::SameRecord,
            false,
            native(|_, a| Ok(Value::record(set_feat(record_arg(a, 0)?, int_arg(a, 1)?, &a[2])?))),
        );
        add("label", vec![P::Record], Ret::LabelKind, false, native(|_, a| label(record_arg(a, 0)?)));
        add(
            "randInt",
            vec![P::Int, P::Int],
            Ret::Kind(Kind::Int),
            true,
            native(|ctx, a| Ok(Value::Int(rand_int(ctx.rng, int_arg(a, 0)?, int_arg(a, 1)?)?))),
        );
        add(
            "strConcat",
            vec![P::String, P::String],
            Ret::Kind(Kind::String),
            false,
            native(|_, a| Ok(Value::str(&str_concat(str_arg(a, 0)?, str_arg(a, 1)?)))),
        );
        add(
            "blur",
            vec![P::Grid],
            Ret::SameRecord,
            false,
            native(|ctx, a| Ok(Value::record(blur(record_arg(a, 0)?, ctx.config.blur_kernel)?))),
        );
        add(
            "wNoise",
            vec![P::Grid],
            Ret::SameRecord,
            true,
            native(|ctx, a| Ok(Value::record(w_noise(ctx.rng, record_arg(a, 0)?, ctx.config.wnoise_eps)?))),
        );
        add(
            "relax",
            vec![P::GameState],
            Ret::SameRecord,
            false,
            native(|_, a| Ok(Value::record(relax(record_arg(a, 0)?)?))),
        );
        add(
            "unrelax",
            vec![P::GameState],
            Ret::SameRecord,
            false,
            native(|ctx, a| Ok(Value::record(unrelax(record_arg(a, 0)?, ctx.config.terrain_max)?))),
        );
        Self { functions }
    }

    /// Adds a user function. Core names and the model calls are reserved.
    pub fn register(&mut self, def: FunctionDef) -> Result<(), RegistryError> {
        if CORE_FUNCTIONS.contains(&def.name.as_str()) || MODEL_CALLS.contains(&def.name.as_str()) {
            return Err(RegistryError(def.name));
        }
        self.functions.insert(def.name.clone(), Arc::new(def));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Arc<FunctionDef>> {
        self.functions.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.functions.keys().map(String::as_str)
    }
}

impl Default for FunctionRegistry {
    fn default() -> Self {
        Self::core()
    }
}
