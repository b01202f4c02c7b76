//! Typed raw tables read from CSV.

use std::collections::{BTreeSet, HashMap};
use std::io::Read;
use std::path::Path;

use super::schema::{ColumnKind, ColumnSpec, FeatureSchema};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum RawColumn {
    Numeric(Vec<f64>),
    /// Indices into the column's modality list.
    Categorical(Vec<usize>),
}

impl RawColumn {
    pub fn len(&self) -> usize {
        match self {
            RawColumn::Numeric(v) => v.len(),
            RawColumn::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, rows: &[usize]) -> RawColumn {
        match self {
            RawColumn::Numeric(v) => RawColumn::Numeric(rows.iter().map(|&r| v[r]).collect()),
            RawColumn::Categorical(v) => RawColumn::Categorical(rows.iter().map(|&r| v[r]).collect()),
        }
    }
}

/// A typed table. `schema` is resolved: every categorical and label column
/// carries its modality list.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub schema: FeatureSchema,
    pub columns: Vec<RawColumn>,
    pub rows: usize,
}

impl RawTable {
    pub fn column(&self, name: &str) -> Option<(&ColumnSpec, &RawColumn)> {
        self.schema
            .columns
            .iter()
            .position(|c| c.name == name)
            .map(|i| (&self.schema.columns[i], &self.columns[i]))
    }

    pub fn labels(&self) -> &[usize] {
        let i = self.schema.columns.iter().position(|c| c.kind == ColumnKind::Label).expect("validated");
        match &self.columns[i] {
            RawColumn::Categorical(v) => v,
            RawColumn::Numeric(_) => unreachable!("label columns are categorical"),
        }
    }

    pub fn classes(&self) -> &[String] {
        self.schema.label().modalities.as_deref().expect("resolved schema")
    }

    /// Sub-table of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> RawTable {
        RawTable {
            schema: self.schema.clone(),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            rows: rows.len(),
        }
    }

    /// Sub-table restricted to the named columns (the label is always kept).
    pub fn select_columns(&self, names: &[&str]) -> RawTable {
        let keep: Vec<usize> = (0..self.schema.columns.len())
            .filter(|&i| {
                let c = &self.schema.columns[i];
                c.kind == ColumnKind::Label || names.contains(&c.name.as_str())
            })
            .collect();
        RawTable {
            schema: FeatureSchema { columns: keep.iter().map(|&i| self.schema.columns[i].clone()).collect() },
            columns: keep.iter().map(|&i| self.columns[i].clone()).collect(),
            rows: self.rows,
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<RawTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    read_csv(file, schema, path)
}

/// Parses CSV text against `schema`. Every schema column must appear in the
/// header; extra CSV columns are ignored. Empty cells are rejected.
pub fn read_csv<R: Read>(reader: R, schema: &FeatureSchema, origin: &Path) -> Result<RawTable> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let positions: Vec<usize> = schema
        .columns
        .iter()
        .map(|c| {
            header.iter().position(|h| h == c.name).ok_or_else(|| Error::MissingColumn {
                path: origin.to_path_buf(),
                column: c.name.clone(),
            })
        })
        .collect::<Result<_>>()?;

    let mut cells: Vec<Vec<String>> = vec![Vec::new(); schema.columns.len()];
    let mut numbers: Vec<Vec<f64>> = vec![Vec::new(); schema.columns.len()];
    let mut rows = 0;
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        // 1-based data row numbers, header excluded
        let row_no = row + 1;
        for (ci, (spec, &pos)) in schema.columns.iter().zip(&positions).enumerate() {
            let value = record.get(pos).unwrap_or("");
            if value.is_empty() {
                return Err(Error::MissingValue { row: row_no, column: spec.name.clone() });
            }
            match spec.kind {
                ColumnKind::Numeric => {
                    let v: f64 = value.parse().map_err(|_| Error::ParseCell {
                        row: row_no,
                        column: spec.name.clone(),
                        value: value.to_string(),
                    })?;
                    if !v.is_finite() {
                        return Err(Error::ParseCell {
                            row: row_no,
                            column: spec.name.clone(),
                            value: value.to_string(),
                        });
                    }
                    numbers[ci].push(v);
                }
                ColumnKind::Categorical | ColumnKind::Label => cells[ci].push(value.to_string()),
            }
        }
        rows += 1;
    }

    let mut resolved = schema.clone();
    let mut columns = Vec::with_capacity(schema.columns.len());
    for (ci, spec) in resolved.columns.iter_mut().enumerate() {
        match spec.kind {
            ColumnKind::Numeric => columns.push(RawColumn::Numeric(std::mem::take(&mut numbers[ci]))),
            ColumnKind::Categorical | ColumnKind::Label => {
                let values = std::mem::take(&mut cells[ci]);
                let modalities = match &spec.modalities {
                    Some(m) => m.clone(),
                    None => values.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect(),
                };
                if modalities.is_empty() {
                    return Err(Error::Schema(format!("column `{}` has no values", spec.name)));
                }
                let lookup: HashMap<&str, usize> =
                    modalities.iter().enumerate().map(|(i, m)| (m.as_str(), i)).collect();
                let codes = values
                    .iter()
                    .enumerate()
                    .map(|(row, v)| {
                        lookup.get(v.as_str()).copied().ok_or_else(|| Error::UnknownCategory {
                            row: row + 1,
                            column: spec.name.clone(),
                            value: v.clone(),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                spec.modalities = Some(modalities);
                columns.push(RawColumn::Categorical(codes));
            }
        }
    }
    log::info!("{}: loaded {rows} rows", origin.display());
    Ok(RawTable { schema: resolved, columns, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> FeatureSchema {
        FeatureSchema::new(vec![
            ColumnSpec::numeric("a"),
            ColumnSpec::categorical("c", ["red", "green"]),
            ColumnSpec { name: "y".into(), kind: ColumnKind::Label, modalities: None },
        ])
        .unwrap()
    }

    fn parse(text: &str) -> Result<RawTable> {
        read_csv(text.as_bytes(), &schema(), Path::new("inline.csv"))
    }

    #[test]
    fn three_typed_rows() {
        let t = parse("a,c,y\n1.5,red,no\n-2,green,yes\n0,red,no\n").unwrap();
        assert_eq!(t.rows, 3);
        assert_eq!(t.columns[0], RawColumn::Numeric(vec![1.5, -2.0, 0.0]));
        assert_eq!(t.columns[1], RawColumn::Categorical(vec![0, 1, 0]));
        assert_eq!(t.classes(), ["no", "yes"]);
        assert_eq!(t.labels(), [0, 1, 0]);
    }

    #[test]
    fn parse_error_names_row_and_column() {
        let err = parse("a,c,y\n1,red,no\nabc,red,no\n").unwrap_err();
        match err {
            Error::ParseCell { row, column, value } => {
                assert_eq!((row, column.as_str(), value.as_str()), (2, "a", "abc"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_column_unknown_category_missing_value() {
        assert!(matches!(parse("a,y\n1,no\n"), Err(Error::MissingColumn { .. })));
        assert!(matches!(parse("a,c,y\n1,blue,no\n"), Err(Error::UnknownCategory { row: 1, .. })));
        assert!(matches!(parse("a,c,y\n,red,no\n"), Err(Error::MissingValue { row: 1, .. })));
    }

    #[test]
    fn column_order_in_file_is_free() {
        let t = parse("y,extra,c,a\nno,zz,green,4\n").unwrap();
        assert_eq!(t.columns[0], RawColumn::Numeric(vec![4.0]));
        assert_eq!(t.columns[1], RawColumn::Categorical(vec![1]));
    }
}
