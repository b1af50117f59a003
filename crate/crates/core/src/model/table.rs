use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Text,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

impl Column {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        Self {
            name: name.into(),
            kind,
        }
    }
}

/// A present cell value. Absent cells are `None` in the row vectors.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Number(f64),
    Label(String),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Number(v) => Some(*v),
            Value::Label(_) => None,
        }
    }

    /// Canonical text used as a grouping key.
    pub fn key(&self) -> String {
        match self {
            Value::Number(v) => format!("{v}"),
            Value::Label(s) => s.clone(),
        }
    }
}

pub type Cell = Option<Value>;

/// Typed records with explicit missingness.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordTable {
    columns: Vec<Column>,
    rows: Vec<Vec<Cell>>,
}

impl RecordTable {
    pub fn new(columns: Vec<Column>, rows: Vec<Vec<Cell>>) -> Result<Self> {
        let mut names = HashSet::new();
        for c in &columns {
            if !names.insert(c.name.as_str()) {
                return Err(Error::InvalidData(format!("duplicate column `{}`", c.name)));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(Error::RowWidth {
                    path: "<table>".into(),
                    row: i + 1,
                    found: row.len(),
                    expected: columns.len(),
                });
            }
            for (cell, col) in row.iter().zip(&columns) {
                let ok = match (cell, col.kind) {
                    (None, _) => true,
                    (Some(Value::Number(v)), ColumnKind::Numeric) => v.is_finite(),
                    (Some(Value::Label(_)), ColumnKind::Categorical | ColumnKind::Text) => true,
                    _ => false,
                };
                if !ok {
                    return Err(Error::InvalidData(format!(
                        "row {}: cell in column `{}` does not match its {:?} kind",
                        i + 1,
                        col.name,
                        col.kind
                    )));
                }
            }
        }
        Ok(Self { columns, rows })
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn require_column(&self, name: &str) -> Result<usize> {
        self.column_index(name)
            .ok_or_else(|| Error::UnknownField(name.to_string()))
    }

    pub fn kind(&self, name: &str) -> Option<ColumnKind> {
        self.column_index(name).map(|i| self.columns[i].kind)
    }

    pub fn cell(&self, row: usize, col: usize) -> Option<&Value> {
        self.rows[row][col].as_ref()
    }

    pub fn number(&self, row: usize, col: usize) -> Option<f64> {
        self.cell(row, col).and_then(Value::as_f64)
    }

    /// n×m mask, `true` where the value is absent.
    pub fn missing_mask(&self) -> Vec<Vec<bool>> {
        self.rows
            .iter()
            .map(|r| r.iter().map(Option::is_none).collect())
            .collect()
    }

    pub fn missing_count(&self) -> usize {
        self.rows.iter().flatten().filter(|c| c.is_none()).count()
    }

    /// Observed distinct values of a column (missing cells excluded).
    pub fn domain(&self, name: &str) -> Result<BTreeSet<String>> {
        let c = self.require_column(name)?;
        Ok(self.rows.iter().filter_map(|r| r[c].as_ref().map(Value::key)).collect())
    }

    /// Present numeric values of a column.
    pub fn numeric_values(&self, name: &str) -> Result<Vec<f64>> {
        let c = self.require_column(name)?;
        Ok(self.rows.iter().filter_map(|r| r[c].as_ref().and_then(Value::as_f64)).collect())
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        Self {
            columns: self.columns.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Rows whose `column` holds the label `value`.
    pub fn rows_where(&self, column: &str, value: &str) -> Result<Vec<usize>> {
        let c = self.require_column(column)?;
        Ok(self
            .rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r[c].as_ref().map(Value::key).as_deref() == Some(value))
            .map(|(i, _)| i)
            .collect())
    }

    pub fn without_column(&self, name: &str) -> Result<Self> {
        let c = self.require_column(name)?;
        let mut columns = self.columns.clone();
        columns.remove(c);
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r.remove(c);
                r
            })
            .collect();
        Ok(Self { columns, rows })
    }

    pub fn set_cell(&mut self, row: usize, col: usize, cell: Cell) {
        self.rows[row][col] = cell;
    }
}
