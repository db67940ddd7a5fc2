//! The core extension functions over scalars and records.
//!
//! None of them mutates its argument. Record-producing transforms drop the
//! ground-truth label, so `label` only works on rows drawn unmodified from a
//! labelled source. Feature indices are 0-based.

use std::sync::Arc;

use super::StdlibError;
use crate::models::{GameState, Grid, Record, TabularRow};
use crate::rng::RngHandle;
use crate::value::{Kind, Value};

fn tabular<'a>(r: &'a Record, func: &str) -> Result<&'a TabularRow, StdlibError> {
    match r {
        Record::Tabular(t) => Ok(t),
        other => Err(StdlibError::Kind(format!("{func} expects a tabular row, got a {} record", other.variant_name()))),
    }
}

fn grid<'a>(r: &'a Record, func: &str) -> Result<&'a Grid, StdlibError> {
    match r {
        Record::Grid(g) => Ok(g),
        other => Err(StdlibError::Kind(format!("{func} expects a grid, got a {} record", other.variant_name()))),
    }
}

fn game_state(r: &Record, func: &str) -> Result<GameState, StdlibError> {
    match r {
        Record::GameState(s) => Ok(*s),
        other => Err(StdlibError::Kind(format!("{func} expects a game state, got a {} record", other.variant_name()))),
    }
}

fn feature_index(row: &TabularRow, index: i64) -> Result<usize, StdlibError> {
    usize::try_from(index)
        .ok()
        .filter(|&i| i < row.values.len())
        .ok_or(StdlibError::Index { index, len: row.values.len() })
}

pub fn get_feat(r: &Record, index: i64) -> Result<Value, StdlibError> {
    let row = tabular(r, "getFeat")?;
    Ok(row.values[feature_index(row, index)?].clone())
}

/// Copy of `r` with feature `index` replaced. Ints are widened when the
/// feature is a float; any other kind mismatch is an error.
pub fn set_feat(r: &Record, index: i64, value: &Value) -> Result<Record, StdlibError> {
    let row = tabular(r, "setFeat")?;
    let i = feature_index(row, index)?;
    let want = row.schema.kind_of(i).unwrap_or_else(|| row.values[i].kind());
    let stored = match (want, value) {
        (k, v) if v.kind() == k => v.clone(),
        (Kind::Float, Value::Int(n)) => Value::Float(*n as f64),
        (k, v) => {
            return Err(StdlibError::Kind(format!(
                "feature {i} (`{}`) holds {k} values, cannot store {}",
                row.schema.features.get(i).map(|f| f.name.as_str()).unwrap_or("?"),
                v.kind()
            )))
        }
    };
    let mut values = row.values.clone();
    values[i] = stored;
    Ok(Record::Tabular(TabularRow { schema: Arc::clone(&row.schema), values, label: None }))
}

pub fn label(r: &Record) -> Result<Value, StdlibError> {
    r.label().cloned().ok_or(StdlibError::Provenance)
}

pub fn rand_int(rng: &mut RngHandle, lo: i64, hi: i64) -> Result<i64, StdlibError> {
    if lo > hi {
        return Err(StdlibError::Range { lo, hi });
    }
    Ok(rng.draw_range(lo, hi))
}

pub fn str_concat(a: &str, b: &str) -> String {
    let mut s = String::with_capacity(a.len() + b.len());
    s.push_str(a);
    s.push_str(b);
    s
}

/// `kernel x kernel` box filter; neighbours outside the grid are replaced by
/// the nearest edge cell. `kernel` must be odd.
pub fn blur(r: &Record, kernel: usize) -> Result<Record, StdlibError> {
    let g = grid(r, "blur")?;
    if kernel.is_multiple_of(2) {
        return Err(StdlibError::Kind(format!("blur kernel must be odd, got {kernel}")));
    }
    let radius = (kernel / 2) as isize;
    let area = (kernel * kernel) as f64;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut cells = Vec::with_capacity(g.cells.len());
    for row in 0..g.height {
        for col in 0..g.width {
            let mut sum = 0.0;
            for dr in -radius..=radius {
                for dc in -radius..=radius {
                    sum += g.at(clamp(row as isize + dr, g.height), clamp(col as isize + dc, g.width));
                }
            }
            cells.push((sum / area).clamp(0.0, 1.0));
        }
    }
    Ok(Record::Grid(Grid { height: g.height, width: g.width, cells, label: None }))
}

/// Adds independent uniform noise in `[-eps, eps]` to every cell (one draw
/// per cell, row-major) and clamps to `[0, 1]`.
pub fn w_noise(rng: &mut RngHandle, r: &Record, eps: f64) -> Result<Record, StdlibError> {
    let g = grid(r, "wNoise")?;
    let cells = g.cells.iter().map(|c| (c + eps * (2.0 * rng.draw_unit() - 1.0)).clamp(0.0, 1.0)).collect();
    Ok(Record::Grid(Grid { height: g.height, width: g.width, cells, label: None }))
}

/// Lowers the terrain by one unit, not below zero.
pub fn relax(r: &Record) -> Result<Record, StdlibError> {
    let mut s = game_state(r, "relax")?;
    s.terrain = (s.terrain - 1).max(0);
    Ok(Record::GameState(s))
}

/// Raises the terrain by one unit, not above `terrain_max`.
pub fn unrelax(r: &Record, terrain_max: i64) -> Result<Record, StdlibError> {
    let mut s = game_state(r, "unrelax")?;
    s.terrain = (s.terrain + 1).min(terrain_max);
    Ok(Record::GameState(s))
}
