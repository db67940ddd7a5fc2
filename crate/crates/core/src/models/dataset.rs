//! CSV ingestion of input sources.

use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use super::record::{GameState, Grid, Record, Schema, TabularRow};
use crate::value::{Kind, Value};

#[derive(Debug, Error)]
pub enum DatasetError {
    /// `row` is the 1-based line number in the file; the header is line 1.
    #[error("{path}: line {row}: {message}")]
    Schema { path: String, row: usize, message: String },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// How the columns of a CSV map onto records.
#[derive(Debug, Clone, PartialEq)]
pub enum Layout {
    /// Every non-label column is a feature of the given kind, in file order.
    Tabular(Vec<Kind>),
    /// Non-label columns are the `height * width` cells in row-major order.
    Grid { height: usize, width: usize },
    /// Columns `terrain`, `lander_x`, `lander_vy`, `fuel`.
    GameState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSchema {
    pub layout: Layout,
    /// Column holding the ground-truth label, if any.
    pub label_col: Option<String>,
    pub label_kind: Kind,
}

impl DatasetSchema {
    pub fn tabular(kinds: Vec<Kind>, label_col: Option<&str>) -> Self {
        Self { layout: Layout::Tabular(kinds), label_col: label_col.map(Into::into), label_kind: Kind::Int }
    }
}

/// Static shape of the records a source yields, as the checker sees it.
#[derive(Debug, Clone, PartialEq)]
pub enum RecordShape {
    Tabular(Arc<Schema>),
    Grid,
    GameState,
}

/// A nonempty pool of records sharing one shape.
#[derive(Debug, Clone)]
pub struct DataSource {
    pub name: String,
    rows: Vec<Arc<Record>>,
    shape: RecordShape,
    label_kind: Option<Kind>,
}

impl DataSource {
    pub fn new(name: impl Into<String>, rows: Vec<Record>) -> Result<Self, String> {
        let first = rows.first().ok_or("empty dataset")?;
        let shape = match first {
            Record::Tabular(r) => RecordShape::Tabular(r.schema.clone()),
            Record::Grid(_) => RecordShape::Grid,
            Record::GameState(_) => RecordShape::GameState,
        };
        for (i, r) in rows.iter().enumerate() {
            let same = match (&shape, r) {
                (RecordShape::Tabular(s), Record::Tabular(row)) => {
                    row.schema.as_ref() == s.as_ref() && row.values.len() == s.len()
                }
                (RecordShape::Grid, Record::Grid(_)) | (RecordShape::GameState, Record::GameState(_)) => true,
                _ => false,
            };
            if !same {
                return Err(format!("row {i} does not share the source's shape"));
            }
        }
        let label_kind = first.label().map(Value::kind);
        Ok(Self { name: name.into(), rows: rows.into_iter().map(Arc::new).collect(), shape, label_kind })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, index: usize) -> &Arc<Record> {
        &self.rows[index]
    }

    pub fn rows(&self) -> &[Arc<Record>] {
        &self.rows
    }

    pub fn shape(&self) -> &RecordShape {
        &self.shape
    }

    pub fn label_kind(&self) -> Option<Kind> {
        self.label_kind
    }
}

fn parse_cell(text: &str, kind: Kind) -> Option<Value> {
    let t = text.trim();
    match kind {
        Kind::Int => t.parse().ok().map(Value::Int),
        Kind::Float => t.parse().ok().map(Value::Float),
        Kind::Bool => match t {
            "true" | "True" | "1" => Some(Value::Bool(true)),
            "false" | "False" | "0" => Some(Value::Bool(false)),
            _ => None,
        },
        Kind::String => Some(Value::str(text)),
        Kind::Record => None,
    }
}

/// Narrowest kind every cell parses as: int, then float, then bool, else string.
pub fn infer_kind<'a>(cells: impl IntoIterator<Item = &'a str> + Clone) -> Kind {
    for kind in [Kind::Int, Kind::Float, Kind::Bool] {
        if cells.clone().into_iter().all(|c| parse_cell(c, kind).is_some()) {
            return kind;
        }
    }
    Kind::String
}

pub fn load_dataset(path: &Path, schema: &DatasetSchema) -> Result<DataSource, DatasetError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| DatasetError::Io { path: path.display().to_string(), message: e.to_string() })?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("data").to_string();
    parse_dataset(&name, &text, schema)
}

/// Loads a CSV whose layout and kinds are inferred with [`infer_schema`].
pub fn load_dataset_inferred(path: &Path, label_col: Option<&str>) -> Result<DataSource, DatasetError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| DatasetError::Io { path: path.display().to_string(), message: e.to_string() })?;
    let schema = infer_schema(&text, label_col).map_err(|e| match e {
        DatasetError::Csv { source, .. } => DatasetError::Csv { path: path.display().to_string(), source },
        other => other,
    })?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("data").to_string();
    parse_dataset(&name, &text, &schema)
}

/// Chooses a layout from the header and contents: `terrain,lander_x,lander_vy,fuel`
/// means game states, `px_R_C` columns mean a grid, anything else is tabular
/// with per-column inferred kinds.
pub fn infer_schema(text: &str, label_col: Option<&str>) -> Result<DatasetSchema, DatasetError> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let csv_err = |source| DatasetError::Csv { path: "<input>".into(), source };
    let header: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let records: Vec<csv::StringRecord> = reader.records().collect::<Result<_, _>>().map_err(csv_err)?;
    let label_col = label_col.filter(|l| header.iter().any(|h| h == l)).map(str::to_string);
    let column_kind = |idx: usize| infer_kind(records.iter().map(move |r| r.get(idx).unwrap_or("")));
    let label_kind = match &label_col {
        Some(l) => column_kind(header.iter().position(|h| h == l).unwrap()),
        None => Kind::Int,
    };
    let features: Vec<(usize, &String)> =
        header.iter().enumerate().filter(|(_, h)| Some(*h) != label_col.as_ref()).collect();

    let names: Vec<&str> = features.iter().map(|(_, h)| h.as_str()).collect();
    if names == ["terrain", "lander_x", "lander_vy", "fuel"] {
        return Ok(DatasetSchema { layout: Layout::GameState, label_col, label_kind });
    }
    let pixel = |h: &str| -> Option<(usize, usize)> {
        let rest = h.strip_prefix("px_")?;
        let (r, c) = rest.split_once('_')?;
        Some((r.parse().ok()?, c.parse().ok()?))
    };
    if !names.is_empty() && names.iter().all(|h| pixel(h).is_some()) {
        let coords: Vec<(usize, usize)> = names.iter().filter_map(|h| pixel(h)).collect();
        let height = coords.iter().map(|c| c.0).max().unwrap() + 1;
        let width = coords.iter().map(|c| c.1).max().unwrap() + 1;
        let row_major = coords.iter().enumerate().all(|(i, &(r, c))| r * width + c == i);
        if row_major && coords.len() == height * width {
            return Ok(DatasetSchema { layout: Layout::Grid { height, width }, label_col, label_kind });
        }
    }
    let kinds = features.iter().map(|(i, _)| column_kind(*i)).collect();
    Ok(DatasetSchema { layout: Layout::Tabular(kinds), label_col, label_kind })
}

pub fn parse_dataset(name: &str, text: &str, schema: &DatasetSchema) -> Result<DataSource, DatasetError> {
    let schema_err = |row: usize, message: String| DatasetError::Schema { path: name.to_string(), row, message };
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|source| DatasetError::Csv { path: name.to_string(), source })?
        .iter()
        .map(str::to_string)
        .collect();
    let label_idx = match &schema.label_col {
        Some(l) => Some(
            header
                .iter()
                .position(|h| h == l)
                .ok_or_else(|| schema_err(1, format!("label column `{l}` not in header")))?,
        ),
        None => None,
    };
    let feature_cols: Vec<usize> = (0..header.len()).filter(|i| Some(*i) != label_idx).collect();
    let expected = match &schema.layout {
        Layout::Tabular(kinds) => kinds.len(),
        Layout::Grid { height, width } => height * width,
        Layout::GameState => 4,
    };
    if feature_cols.len() != expected {
        return Err(schema_err(
            1,
            format!("header has {} feature columns, schema declares {expected}", feature_cols.len()),
        ));
    }
    let tab_schema = match &schema.layout {
        Layout::Tabular(kinds) => {
            Some(Arc::new(Schema::new(feature_cols.iter().zip(kinds).map(|(&i, &k)| (header[i].clone(), k)))))
        }
        _ => None,
    };

    let mut rows = Vec::new();
    for (n, rec) in reader.records().enumerate() {
        let line = n + 2;
        let rec = rec.map_err(|source| DatasetError::Csv { path: name.to_string(), source })?;
        if rec.len() != header.len() {
            return Err(schema_err(line, format!("expected {} columns, found {}", header.len(), rec.len())));
        }
        let label = match label_idx {
            Some(i) => Some(parse_cell(&rec[i], schema.label_kind).ok_or_else(|| {
                schema_err(line, format!("label `{}` is not a {} value", &rec[i], schema.label_kind))
            })?),
            None => None,
        };
        let cell = |col: usize, kind: Kind| {
            parse_cell(&rec[col], kind).ok_or_else(|| {
                schema_err(line, format!("column `{}`: `{}` is not a {kind} value", header[col], &rec[col]))
            })
        };
        let record = match &schema.layout {
            Layout::Tabular(kinds) => {
                let values = feature_cols.iter().zip(kinds).map(|(&c, &k)| cell(c, k)).collect::<Result<_, _>>()?;
                Record::Tabular(TabularRow { schema: tab_schema.clone().unwrap(), values, label })
            }
            Layout::Grid { height, width } => {
                let cells: Vec<f64> = feature_cols
                    .iter()
                    .map(|&c| cell(c, Kind::Float).map(|v| v.as_f64().unwrap()))
                    .collect::<Result<_, _>>()?;
                if let Some(bad) = cells.iter().position(|c| !(0.0..=1.0).contains(c)) {
                    return Err(schema_err(line, format!("grid cell {bad} outside [0, 1]")));
                }
                Record::Grid(Grid { height: *height, width: *width, cells, label })
            }
            Layout::GameState => {
                let mut v = [0i64; 4];
                for (slot, name) in v.iter_mut().zip(["terrain", "lander_x", "lander_vy", "fuel"]) {
                    let col = header
                        .iter()
                        .position(|h| h == name)
                        .ok_or_else(|| schema_err(1, format!("missing column `{name}`")))?;
                    *slot = cell(col, Kind::Int)?.as_int().unwrap();
                }
                Record::GameState(GameState { terrain: v[0], lander_x: v[1], lander_vy: v[2], fuel: v[3] })
            }
        };
        rows.push(record);
    }
    if rows.is_empty() {
        return Err(schema_err(1, "empty dataset".into()));
    }
    DataSource::new(name, rows).map_err(|m| schema_err(1, m))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(n: usize) -> DatasetSchema {
        DatasetSchema::tabular(vec![Kind::Int; n], Some("label"))
    }

    #[test]
    fn three_int_rows() {
        let src = parse_dataset("t", "a,b,label\n1,2,0\n3,4,1\n5,6,2\n", &ints(2)).unwrap();
        assert_eq!(src.len(), 3);
        let Record::Tabular(r) = src.get(2).as_ref() else { panic!() };
        assert_eq!(r.values, vec![Value::Int(5), Value::Int(6)]);
        assert_eq!(r.label, Some(Value::Int(2)));
    }

    #[test]
    fn non_numeric_int_cell() {
        let err = parse_dataset("t", "a,b,label\nx,2,0\n", &ints(2)).unwrap_err();
        match err {
            DatasetError::Schema { row, .. } => assert_eq!(row, 2),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn header_only_is_empty() {
        let err = parse_dataset("t", "a,b,label\n", &ints(2)).unwrap_err();
        assert!(err.to_string().contains("empty dataset"), "{err}");
    }

    #[test]
    fn column_count_mismatch() {
        let err = parse_dataset("t", "a,b,label\n1,2,0\n1,2\n", &ints(2)).unwrap_err();
        assert!(matches!(err, DatasetError::Schema { row: 3, .. }), "{err}");
    }

    #[test]
    fn infers_layouts() {
        let s = infer_schema("terrain,lander_x,lander_vy,fuel\n1,2,3,4\n", None).unwrap();
        assert_eq!(s.layout, Layout::GameState);
        let s = infer_schema("px_0_0,px_0_1,label\n0.1,0.2,3\n", Some("label")).unwrap();
        assert_eq!(s.layout, Layout::Grid { height: 1, width: 2 });
        let s = infer_schema("a,b,c,label\n1,0.5,hi,1\n2,1,there,0\n", Some("label")).unwrap();
        assert_eq!(s.layout, Layout::Tabular(vec![Kind::Int, Kind::Float, Kind::String]));
    }
}
