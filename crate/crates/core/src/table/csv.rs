// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! CSV I/O for benchmark inputs and outputs.
//!
//! The format is deliberately minimal: a header row with column names,
//! `\n` newlines, comma separators, no quoting (values are numeric only).
//! `int64` cells are written as decimal text; `float64` cells use the
//! shortest decimal representation that round-trips, so a write/read cycle
//! preserves values exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use super::{Column, DType, Schema, Table, TableError};

pub fn write_csv(table: &Table, path: impl AsRef<Path>) -> Result<(), TableError> {
    let mut w = BufWriter::new(File::create(path)?);
    let names: Vec<&str> = table
        .schema()
        .fields()
        .iter()
        .map(|f| f.name.as_str())
        .collect();
    writeln!(w, "{}", names.join(","))?;
    let mut line = String::new();
    for row in 0..table.row_count() {
        line.clear();
        for (i, col) in table.columns().iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            match col {
                Column::Int64(v) => line.push_str(&v[row].to_string()),
                Column::Float64(v) => line.push_str(&v[row].to_string()),
            }
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: impl AsRef<Path>, schema: Arc<Schema>) -> Result<Table, TableError> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();

    let header = lines.next().transpose()?.unwrap_or_default();
    let expected: Vec<&str> = schema.fields().iter().map(|f| f.name.as_str()).collect();
    let expected = expected.join(",");
    if header != expected {
        return Err(TableError::CsvHeader { expected, actual: header });
    }

    let mut columns: Vec<Column> = schema
        .fields()
        .iter()
        .map(|f| match f.dtype {
            DType::Int64 => Column::Int64(Vec::new()),
            DType::Float64 => Column::Float64(Vec::new()),
        })
        .collect();

    for (row, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut cells = line.split(',');
        for (field, col) in schema.fields().iter().zip(columns.iter_mut()) {
            let cell = cells.next().ok_or_else(|| TableError::CsvParse {
                row,
                column: field.name.clone(),
                message: "missing cell".into(),
            })?;
            match col {
                Column::Int64(v) => v.push(cell.parse().map_err(|e| TableError::CsvParse {
                    row,
                    column: field.name.clone(),
                    message: format!("{e}: `{cell}`"),
                })?),
                Column::Float64(v) => v.push(cell.parse().map_err(|e| TableError::CsvParse {
                    row,
                    column: field.name.clone(),
                    message: format!("{e}: `{cell}`"),
                })?),
            }
        }
        if let Some(extra) = cells.next() {
            return Err(TableError::CsvParse {
                row,
                column: String::new(),
                message: format!("unexpected trailing cell `{extra}`"),
            });
        }
    }
    Table::new(schema, columns)
}
