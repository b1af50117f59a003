//! Delimiter-separated and line-delimited JSON dataset readers/writers.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::congruence::ImagePair;
use crate::error::{Error, Result};
use crate::model::{Cell, Column, ColumnKind, EmbeddingSet, RecordTable, Value};

use super::pgm::read_pgm;

/// Column names used to pick ids and labels out of an embedding file.
#[derive(Debug, Clone)]
pub struct EmbeddingColumns<'a> {
    pub id: &'a str,
    pub subgroup: Option<&'a str>,
    pub region: Option<&'a str>,
}

impl Default for EmbeddingColumns<'_> {
    fn default() -> Self {
        Self {
            id: "id",
            subgroup: None,
            region: None,
        }
    }
}

fn delimiter_for(path: &Path) -> u8 {
    match path.extension().and_then(|e| e.to_str()) {
        Some("tsv") | Some("tab") => b'\t',
        _ => b',',
    }
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn csv_reader(text: &str, delimiter: u8) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let row = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        path: display(path),
        row,
        column: 0,
        message: e.to_string(),
    }
}

/// Reads an embedding matrix. Accepts a delimiter-separated file with a header
/// row (`.csv`, `.tsv`) or line-delimited JSON (`.jsonl`) whose records carry
/// an id, a `features` array, and optional label fields.
///
/// Every column other than the id/subgroup/region columns is a feature, in
/// header order. Label columns absent from the file leave the labels unset.
/// Without an id column the 1-based data row number is used.
/// Row and column numbers in errors are 1-based data rows and columns.
pub fn read_embeddings(path: &Path, cols: &EmbeddingColumns<'_>) -> Result<EmbeddingSet> {
    let text = read_text(path)?;
    if path.extension().and_then(|e| e.to_str()) == Some("jsonl") {
        return parse_embeddings_jsonl(&text, &display(path), cols);
    }
    parse_embeddings(&text, delimiter_for(path), &display(path), cols)
}

pub fn parse_embeddings(
    text: &str,
    delimiter: u8,
    source: &str,
    cols: &EmbeddingColumns<'_>,
) -> Result<EmbeddingSet> {
    let path = Path::new(source);
    let mut rdr = csv_reader(text, delimiter);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let find = |name: Option<&str>| name.and_then(|n| header.iter().position(|h| h == n));
    let id_col = header.iter().position(|h| h == cols.id);
    let sub_col = find(cols.subgroup);
    let reg_col = find(cols.region);
    let feature_cols: Vec<usize> = (0..header.len())
        .filter(|&c| Some(c) != id_col && Some(c) != sub_col && Some(c) != reg_col)
        .collect();
    let d = feature_cols.len();

    let mut ids = Vec::new();
    let mut data = Vec::new();
    let mut subgroup = Vec::new();
    let mut region = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let row = r + 1;
        if rec.len() != header.len() {
            return Err(Error::RowWidth {
                path: source.into(),
                row,
                found: rec.len(),
                expected: header.len(),
            });
        }
        ids.push(match id_col {
            Some(c) => rec[c].to_string(),
            None => row.to_string(),
        });
        for (j, &c) in feature_cols.iter().enumerate() {
            let cell = &rec[c];
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                path: source.into(),
                row,
                column: j + 1,
                message: format!("`{cell}` is not a number"),
            })?;
            data.push(v);
        }
        if let Some(c) = sub_col {
            subgroup.push(rec[c].to_string());
        }
        if let Some(c) = reg_col {
            region.push(rec[c].to_string());
        }
    }
    let mut set = EmbeddingSet::new(ids, data, d)?;
    if sub_col.is_some() {
        set = set.with_subgroups(subgroup)?;
    }
    if reg_col.is_some() {
        set = set.with_regions(region)?;
    }
    Ok(set)
}

fn parse_embeddings_jsonl(
    text: &str,
    source: &str,
    cols: &EmbeddingColumns<'_>,
) -> Result<EmbeddingSet> {
    let mut ids = Vec::new();
    let mut data = Vec::new();
    let mut subgroup = Vec::new();
    let mut region = Vec::new();
    let mut dim = None;
    let (mut has_subgroup, mut has_region) = (false, false);
    let err = |row: usize, column: usize, message: String| Error::Parse {
        path: source.into(),
        row,
        column,
        message,
    };
    let label = |v: &serde_json::Value| match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    };
    for (r, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
        let row = r + 1;
        let obj: serde_json::Map<String, serde_json::Value> =
            serde_json::from_str(line).map_err(|e| err(row, 0, e.to_string()))?;
        ids.push(obj.get(cols.id).map_or_else(|| row.to_string(), label));
        let feats = obj
            .get("features")
            .and_then(|f| f.as_array())
            .ok_or_else(|| err(row, 0, "missing `features` array".into()))?;
        if *dim.get_or_insert(feats.len()) != feats.len() {
            return Err(Error::RowWidth {
                path: source.into(),
                row,
                found: feats.len(),
                expected: dim.unwrap_or(0),
            });
        }
        for (j, f) in feats.iter().enumerate() {
            data.push(
                f.as_f64()
                    .ok_or_else(|| err(row, j + 1, format!("`{f}` is not a number")))?,
            );
        }
        if row == 1 {
            has_subgroup = cols.subgroup.is_some_and(|n| obj.contains_key(n));
            has_region = cols.region.is_some_and(|n| obj.contains_key(n));
        }
        for (name, present, out) in [
            (cols.subgroup, has_subgroup, &mut subgroup),
            (cols.region, has_region, &mut region),
        ] {
            if let (Some(n), true) = (name, present) {
                out.push(
                    obj.get(n)
                        .map(label)
                        .ok_or_else(|| err(row, 0, format!("missing `{n}`")))?,
                );
            }
        }
    }
    let mut set = EmbeddingSet::new(ids, data, dim.unwrap_or(0))?;
    if has_subgroup {
        set = set.with_subgroups(subgroup)?;
    }
    if has_region {
        set = set.with_regions(region)?;
    }
    Ok(set)
}

/// CSV text for an embedding set: `id,f0..f{d-1}` plus `subgroup`/`region`
/// columns when present. Values use the shortest round-trip representation,
/// so reading the text back reproduces the matrix bit-exactly.
pub fn format_embeddings(set: &EmbeddingSet) -> String {
    let mut out = String::from("id");
    for j in 0..set.dim() {
        out.push_str(&format!(",f{j}"));
    }
    if set.subgroups().is_some() {
        out.push_str(",subgroup");
    }
    if set.regions().is_some() {
        out.push_str(",region");
    }
    out.push('\n');
    for (i, row) in set.rows().enumerate() {
        out.push_str(&set.ids()[i]);
        for v in row {
            out.push_str(&format!(",{v:?}"));
        }
        if let Some(s) = set.subgroups() {
            out.push_str(&format!(",{}", s[i]));
        }
        if let Some(r) = set.regions() {
            out.push_str(&format!(",{}", r[i]));
        }
        out.push('\n');
    }
    out
}

/// Column kinds and the missing-value sentinel for a record table.
#[derive(Debug, Clone, Default)]
pub struct TableSchema {
    pub kinds: BTreeMap<String, ColumnKind>,
    /// Cells equal to this (after trimming) are missing; empty cells always are.
    pub missing_sentinel: String,
}

/// Reads a delimiter-separated record table. Columns absent from the schema
/// are numeric when every present cell parses as a finite number, otherwise
/// categorical. Schema entries for columns the file lacks are ignored.
pub fn read_record_table(path: &Path, schema: &TableSchema) -> Result<RecordTable> {
    let text = read_text(path)?;
    parse_record_table(&text, delimiter_for(path), &display(path), schema)
}

pub fn parse_record_table(
    text: &str,
    delimiter: u8,
    source: &str,
    schema: &TableSchema,
) -> Result<RecordTable> {
    let path = Path::new(source);
    let mut rdr = csv_reader(text, delimiter);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut raw: Vec<Vec<Option<String>>> = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        if rec.len() != header.len() {
            return Err(Error::RowWidth {
                path: source.into(),
                row: r + 1,
                found: rec.len(),
                expected: header.len(),
            });
        }
        raw.push(
            rec.iter()
                .map(|c| {
                    (!c.is_empty() && c != schema.missing_sentinel).then(|| c.to_string())
                })
                .collect(),
        );
    }
    let columns: Vec<Column> = header
        .iter()
        .enumerate()
        .map(|(c, name)| {
            let kind = schema.kinds.get(name).copied().unwrap_or_else(|| {
                let numeric = raw.iter().filter_map(|r| r[c].as_deref()).all(|v| {
                    v.parse::<f64>().map(f64::is_finite).unwrap_or(false)
                });
                if numeric {
                    ColumnKind::Numeric
                } else {
                    ColumnKind::Categorical
                }
            });
            Column::new(name.clone(), kind)
        })
        .collect();
    let mut rows = Vec::with_capacity(raw.len());
    for (r, raw_row) in raw.into_iter().enumerate() {
        let mut row: Vec<Cell> = Vec::with_capacity(columns.len());
        for (c, cell) in raw_row.into_iter().enumerate() {
            row.push(match (cell, columns[c].kind) {
                (None, _) => None,
                (Some(s), ColumnKind::Numeric) => {
                    let v = s
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::Parse {
                            path: source.into(),
                            row: r + 1,
                            column: c + 1,
                            message: format!("`{s}` is not a finite number in numeric column `{}`", columns[c].name),
                        })?;
                    Some(Value::Number(v))
                }
                (Some(s), _) => Some(Value::Label(s)),
            });
        }
        rows.push(row);
    }
    RecordTable::new(columns, rows)
}

/// CSV text for a record table; missing cells are empty.
pub fn format_record_table(table: &RecordTable) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(table.columns().iter().map(|c| c.name.as_str()))
        .expect("in-memory write");
    for row in table.rows() {
        w.write_record(row.iter().map(|c| match c {
            None => String::new(),
            Some(Value::Number(v)) => format!("{v:?}"),
            Some(Value::Label(s)) => s.clone(),
        }))
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8")
}

/// Reads a two-column manifest of `(real image, synthetic image)` paths,
/// relative to the manifest's directory. A `real,synthetic` header row is
/// optional.
pub fn read_image_manifest(path: &Path) -> Result<Vec<(PathBuf, PathBuf)>> {
    let text = read_text(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter_for(path))
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        if rec.len() != 2 {
            return Err(Error::RowWidth {
                path: display(path),
                row: r + 1,
                found: rec.len(),
                expected: 2,
            });
        }
        if r == 0 && rec[0].eq_ignore_ascii_case("real") && rec[1].eq_ignore_ascii_case("synthetic")
        {
            continue;
        }
        out.push((base.join(&rec[0]), base.join(&rec[1])));
    }
    Ok(out)
}

pub fn load_image_pairs(manifest: &Path) -> Result<Vec<ImagePair>> {
    read_image_manifest(manifest)?
        .into_iter()
        .map(|(r, s)| {
            Ok(ImagePair {
                label: format!(
                    "{}|{}",
                    r.file_name().map(|f| f.to_string_lossy()).unwrap_or_default(),
                    s.file_name().map(|f| f.to_string_lossy()).unwrap_or_default()
                ),
                real: read_pgm(&r)?,
                synthetic: read_pgm(&s)?,
            })
        })
        .collect()
}
