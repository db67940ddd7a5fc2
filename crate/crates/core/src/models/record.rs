//! Structured model inputs: tabular rows, grids and game states.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value as Json};

use crate::value::{Kind, Value};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    pub kind: Kind,
}

/// Ordered feature list shared by every row of a tabular source.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Schema {
    pub features: Vec<Feature>,
}

impl Schema {
    pub fn new(features: impl IntoIterator<Item = (String, Kind)>) -> Self {
        Self { features: features.into_iter().map(|(name, kind)| Feature { name, kind }).collect() }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn kind_of(&self, index: usize) -> Option<Kind> {
        self.features.get(index).map(|f| f.kind)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularRow {
    pub schema: Arc<Schema>,
    pub values: Vec<Value>,
    /// Ground-truth label; present only on rows drawn unmodified from a
    /// labelled source.
    pub label: Option<Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub height: usize,
    pub width: usize,
    /// Row-major cells in `[0, 1]`.
    pub cells: Vec<f64>,
    pub label: Option<Value>,
}

impl Grid {
    pub fn new(height: usize, width: usize, cells: Vec<f64>) -> Self {
        assert_eq!(cells.len(), height * width, "grid cell count must be height * width");
        Self { height, width, cells, label: None }
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.cells[row * self.width + col]
    }
}

/// State of the one-dimensional lander. `lander_x` is the lander's position
/// along its single (vertical) axis; it touches down once `lander_x <=
/// terrain`. Negative `lander_vy` means descending.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GameState {
    pub terrain: i64,
    pub lander_x: i64,
    pub lander_vy: i64,
    pub fuel: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Record {
    Tabular(TabularRow),
    Grid(Grid),
    GameState(GameState),
}

impl Record {
    pub fn variant_name(&self) -> &'static str {
        match self {
            Record::Tabular(_) => "tabular",
            Record::Grid(_) => "grid",
            Record::GameState(_) => "game_state",
        }
    }

    pub fn label(&self) -> Option<&Value> {
        match self {
            Record::Tabular(r) => r.label.as_ref(),
            Record::Grid(g) => g.label.as_ref(),
            Record::GameState(_) => None,
        }
    }

    /// Structural equality ignoring provenance.
    pub fn same_features(&self, other: &Record) -> bool {
        match (self, other) {
            (Record::Tabular(a), Record::Tabular(b)) => {
                a.values.len() == b.values.len() && a.values.iter().zip(&b.values).all(|(x, y)| x.semantic_eq(y))
            }
            (Record::Grid(a), Record::Grid(b)) => a.height == b.height && a.width == b.width && a.cells == b.cells,
            (Record::GameState(a), Record::GameState(b)) => a == b,
            _ => false,
        }
    }

    /// Numeric feature vector fed to vector models.
    pub fn flatten(&self) -> Result<Vec<f64>, String> {
        match self {
            Record::Tabular(r) => r
                .values
                .iter()
                .enumerate()
                .map(|(i, v)| match v {
                    Value::Bool(b) => Ok(f64::from(u8::from(*b))),
                    v => v.as_f64().ok_or_else(|| format!("feature {i} is a {} value", v.kind())),
                })
                .collect(),
            Record::Grid(g) => Ok(g.cells.clone()),
            Record::GameState(s) => Ok(vec![s.terrain as f64, s.lander_x as f64, s.lander_vy as f64, s.fuel as f64]),
        }
    }

    /// JSON form used in bug logs. Tabular rows keep feature names so they can
    /// be rebuilt; the label is included when present.
    pub fn to_json(&self) -> Json {
        match self {
            Record::Tabular(r) => {
                let mut m = Map::new();
                m.insert("kind".into(), json!("tabular"));
                m.insert("features".into(), Json::Array(r.schema.features.iter().map(|f| json!(f.name)).collect()));
                m.insert("values".into(), Json::Array(r.values.iter().map(value_to_json).collect()));
                if let Some(l) = &r.label {
                    m.insert("label".into(), value_to_json(l));
                }
                Json::Object(m)
            }
            Record::Grid(g) => {
                let mut m = Map::new();
                m.insert("kind".into(), json!("grid"));
                m.insert("height".into(), json!(g.height));
                m.insert("width".into(), json!(g.width));
                m.insert("cells".into(), json!(g.cells));
                if let Some(l) = &g.label {
                    m.insert("label".into(), value_to_json(l));
                }
                Json::Object(m)
            }
            Record::GameState(s) => json!({
                "kind": "game_state",
                "terrain": s.terrain,
                "lander_x": s.lander_x,
                "lander_vy": s.lander_vy,
                "fuel": s.fuel,
            }),
        }
    }

    /// JSON form sent to external model processes: only the model-visible
    /// content, no names or labels.
    pub fn to_wire_json(&self) -> Json {
        match self {
            Record::Tabular(r) => json!({
                "kind": "tabular",
                "values": r.values.iter().map(value_to_json).collect::<Vec<_>>(),
            }),
            Record::Grid(g) => json!({
                "kind": "grid",
                "height": g.height,
                "width": g.width,
                "cells": g.cells,
            }),
            Record::GameState(_) => self.to_json(),
        }
    }

    pub fn from_json(j: &Json) -> Result<Record, String> {
        let obj = j.as_object().ok_or("record must be a JSON object")?;
        let kind = obj.get("kind").and_then(Json::as_str).ok_or("record needs a `kind`")?;
        let label = obj.get("label").map(value_from_json).transpose()?;
        match kind {
            "tabular" => {
                let values: Vec<Value> = obj
                    .get("values")
                    .and_then(Json::as_array)
                    .ok_or("tabular record needs `values`")?
                    .iter()
                    .map(value_from_json)
                    .collect::<Result<_, _>>()?;
                let names: Vec<String> = match obj.get("features").and_then(Json::as_array) {
                    Some(ns) => ns.iter().map(|n| n.as_str().unwrap_or_default().to_string()).collect(),
                    None => (0..values.len()).map(|i| format!("f{i}")).collect(),
                };
                if names.len() != values.len() {
                    return Err("`features` and `values` differ in length".into());
                }
                let schema = Schema::new(names.into_iter().zip(values.iter().map(Value::kind)));
                Ok(Record::Tabular(TabularRow { schema: Arc::new(schema), values, label }))
            }
            "grid" => {
                let dim = |k: &str| obj.get(k).and_then(Json::as_u64).map(|v| v as usize);
                let (h, w) = dim("height").zip(dim("width")).ok_or("grid needs height and width")?;
                let cells: Vec<f64> = obj
                    .get("cells")
                    .and_then(Json::as_array)
                    .ok_or("grid needs `cells`")?
                    .iter()
                    .map(|c| c.as_f64().ok_or("grid cells must be numbers"))
                    .collect::<Result<_, _>>()?;
                if cells.len() != h * w {
                    return Err(format!("grid has {} cells, expected {}", cells.len(), h * w));
                }
                Ok(Record::Grid(Grid { height: h, width: w, cells, label }))
            }
            "game_state" => {
                let s: GameState = serde_json::from_value(j.clone()).map_err(|e| e.to_string())?;
                Ok(Record::GameState(s))
            }
            other => Err(format!("unknown record kind `{other}`")),
        }
    }
}

pub fn value_to_json(v: &Value) -> Json {
    match v {
        Value::Bool(b) => json!(b),
        Value::Int(i) => json!(i),
        Value::Float(x) => json!(x),
        Value::Str(s) => json!(s.as_ref()),
        Value::Record(r) => r.to_json(),
    }
}

/// Inverse of [`value_to_json`]. JSON integers become `Int`, other numbers
/// `Float`.
pub fn value_from_json(j: &Json) -> Result<Value, String> {
    Ok(match j {
        Json::Bool(b) => Value::Bool(*b),
        Json::Number(n) => match n.as_i64() {
            Some(i) => Value::Int(i),
            None => Value::Float(n.as_f64().ok_or("number out of range")?),
        },
        Json::String(s) => Value::str(s),
        Json::Object(_) => Value::record(Record::from_json(j)?),
        other => return Err(format!("unsupported JSON value {other}")),
    })
}

impl fmt::Display for Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Record::Tabular(r) => {
                f.write_str("[")?;
                for (i, v) in r.values.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
            Record::Grid(g) => write!(f, "grid {}x{}", g.height, g.width),
            Record::GameState(s) => {
                write!(f, "state(terrain={}, x={}, vy={}, fuel={})", s.terrain, s.lander_x, s.lander_vy, s.fuel)
            }
        }
    }
}
