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

//! Columnar table data model.
//!
//! A [`Table`] is a schema-typed collection of equal-length columns and is
//! the unit of data-plane work. Tables are immutable after construction and
//! safe to share read-only across concurrent ranks.

mod csv;
mod gen;

pub use csv::{read_csv, write_csv};
pub use gen::{generate, GenSpec};

use std::cmp::Ordering;
use std::sync::Arc;

use thiserror::Error;

/// Column value type. Only fixed-width numeric types are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum DType {
    Int64,
    Float64,
}

impl std::fmt::Display for DType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DType::Int64 => write!(f, "int64"),
            DType::Float64 => write!(f, "float64"),
        }
    }
}

/// A named, typed column slot in a [`Schema`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Field {
    pub name: String,
    pub dtype: DType,
}

impl Field {
    pub fn new(name: impl Into<String>, dtype: DType) -> Self {
        Self { name: name.into(), dtype }
    }
}

/// Ordered column layout plus the index of the join/sort key column.
///
/// Invariants enforced at construction: column names are unique, the key
/// index is in range, and the key column is `int64`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    fields: Vec<Field>,
    key_index: usize,
}

impl Schema {
    pub fn new(fields: Vec<Field>, key_index: usize) -> Result<Self, TableError> {
        if key_index >= fields.len() {
            return Err(TableError::KeyIndexOutOfRange {
                key_index,
                columns: fields.len(),
            });
        }
        for (i, f) in fields.iter().enumerate() {
            if fields[..i].iter().any(|g| g.name == f.name) {
                return Err(TableError::DuplicateColumn(f.name.clone()));
            }
        }
        if fields[key_index].dtype != DType::Int64 {
            return Err(TableError::KeyColumnNotInt64 {
                name: fields[key_index].name.clone(),
            });
        }
        Ok(Self { fields, key_index })
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    pub fn key_index(&self) -> usize {
        self.key_index
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }
}

/// A typed value vector.
#[derive(Debug, Clone)]
pub enum Column {
    Int64(Vec<i64>),
    Float64(Vec<f64>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Int64(v) => v.len(),
            Column::Float64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> DType {
        match self {
            Column::Int64(_) => DType::Int64,
            Column::Float64(_) => DType::Float64,
        }
    }

    /// Borrow as `&[i64]`, panicking on dtype mismatch. Internal use where
    /// the schema already guarantees the dtype.
    pub(crate) fn as_int64(&self) -> &[i64] {
        match self {
            Column::Int64(v) => v,
            Column::Float64(_) => panic!("column is float64, expected int64"),
        }
    }

    fn with_capacity(dtype: DType, cap: usize) -> Column {
        match dtype {
            DType::Int64 => Column::Int64(Vec::with_capacity(cap)),
            DType::Float64 => Column::Float64(Vec::with_capacity(cap)),
        }
    }

    fn push_from(&mut self, src: &Column, row: usize) {
        match (self, src) {
            (Column::Int64(dst), Column::Int64(s)) => dst.push(s[row]),
            (Column::Float64(dst), Column::Float64(s)) => dst.push(s[row]),
            _ => panic!("column dtype mismatch"),
        }
    }

    fn extend_from(&mut self, src: &Column) {
        match (self, src) {
            (Column::Int64(dst), Column::Int64(s)) => dst.extend_from_slice(s),
            (Column::Float64(dst), Column::Float64(s)) => dst.extend_from_slice(s),
            _ => panic!("column dtype mismatch"),
        }
    }

    /// Bit-exact cell comparison; floats compare by `total_cmp` so the
    /// ordering is total and equality means identical bits.
    fn cmp_cells(&self, i: usize, other: &Column, j: usize) -> Ordering {
        match (self, other) {
            (Column::Int64(a), Column::Int64(b)) => a[i].cmp(&b[j]),
            (Column::Float64(a), Column::Float64(b)) => a[i].total_cmp(&b[j]),
            _ => panic!("column dtype mismatch"),
        }
    }
}

/// Columnar table: a schema plus equal-length typed columns.
#[derive(Debug, Clone)]
pub struct Table {
    schema: Arc<Schema>,
    columns: Vec<Column>,
    row_count: usize,
}

impl Table {
    pub fn new(schema: Arc<Schema>, columns: Vec<Column>) -> Result<Self, TableError> {
        if columns.len() != schema.len() {
            return Err(TableError::ColumnCountMismatch {
                expected: schema.len(),
                actual: columns.len(),
            });
        }
        let row_count = columns.first().map_or(0, Column::len);
        for (field, col) in schema.fields().iter().zip(&columns) {
            if col.dtype() != field.dtype {
                return Err(TableError::DtypeMismatch {
                    column: field.name.clone(),
                    expected: field.dtype,
                    actual: col.dtype(),
                });
            }
            if col.len() != row_count {
                return Err(TableError::LengthMismatch {
                    column: field.name.clone(),
                    expected: row_count,
                    actual: col.len(),
                });
            }
        }
        Ok(Self { schema, columns, row_count })
    }

    /// An empty table with the given schema.
    pub fn empty(schema: Arc<Schema>) -> Self {
        let columns = schema
            .fields()
            .iter()
            .map(|f| Column::with_capacity(f.dtype, 0))
            .collect();
        Self { schema, columns, row_count: 0 }
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, index: usize) -> &Column {
        &self.columns[index]
    }

    /// The key column as `&[i64]` (guaranteed by the schema invariant).
    pub fn key_column(&self) -> &[i64] {
        self.columns[self.schema.key_index()].as_int64()
    }

    /// A new table containing the rows at `indices`, in that order.
    pub fn take(&self, indices: &[usize]) -> Table {
        let mut columns: Vec<Column> = self
            .schema
            .fields()
            .iter()
            .map(|f| Column::with_capacity(f.dtype, indices.len()))
            .collect();
        for &i in indices {
            for (dst, src) in columns.iter_mut().zip(&self.columns) {
                dst.push_from(src, i);
            }
        }
        Table {
            schema: self.schema.clone(),
            columns,
            row_count: indices.len(),
        }
    }

    /// Bit-exact equality: same schema, same row order, identical value bits
    /// (floats compared by bit pattern).
    pub fn bit_eq(&self, other: &Table) -> bool {
        if self.schema != other.schema || self.row_count != other.row_count {
            return false;
        }
        self.columns
            .iter()
            .zip(&other.columns)
            .all(|(a, b)| match (a, b) {
                (Column::Int64(x), Column::Int64(y)) => x == y,
                (Column::Float64(x), Column::Float64(y)) => {
                    x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits())
                }
                _ => false,
            })
    }

    fn cmp_rows(&self, i: usize, other: &Table, j: usize) -> Ordering {
        for (a, b) in self.columns.iter().zip(&other.columns) {
            let ord = a.cmp_cells(i, b, j);
            if ord != Ordering::Equal {
                return ord;
            }
        }
        Ordering::Equal
    }

    /// Rows reordered into the total row ordering used by
    /// [`canonical_equal`]: a pure function of the row multiset, so any two
    /// tables with equal row multisets canonicalize to bit-identical
    /// tables.
    pub fn canonicalized(&self) -> Table {
        let mut idx: Vec<usize> = (0..self.row_count).collect();
        idx.sort_unstable_by(|&i, &j| self.cmp_rows(i, self, j));
        self.take(&idx)
    }
}

/// Append the rows of `parts` in order. All parts must share one schema.
pub fn concat(parts: &[Table]) -> Result<Table, TableError> {
    let first = parts.first().ok_or(TableError::EmptyConcat)?;
    let schema = first.schema().clone();
    for p in &parts[1..] {
        if p.schema() != &schema {
            return Err(TableError::SchemaMismatch);
        }
    }
    let total: usize = parts.iter().map(Table::row_count).sum();
    let mut columns: Vec<Column> = schema
        .fields()
        .iter()
        .map(|f| Column::with_capacity(f.dtype, total))
        .collect();
    for p in parts {
        for (dst, src) in columns.iter_mut().zip(p.columns()) {
            dst.extend_from(src);
        }
    }
    Ok(Table { schema, columns, row_count: total })
}

/// True iff `a` and `b` contain the same multiset of rows.
///
/// Row order is ignored: both tables' row indices are sorted under a total
/// row ordering (lexicographic over columns, floats by `total_cmp`) and
/// compared pairwise.
pub fn canonical_equal(a: &Table, b: &Table) -> Result<bool, TableError> {
    if a.schema() != b.schema() {
        return Err(TableError::SchemaMismatch);
    }
    if a.row_count() != b.row_count() {
        return Ok(false);
    }
    let order_of = |t: &Table| {
        let mut idx: Vec<usize> = (0..t.row_count()).collect();
        idx.sort_unstable_by(|&i, &j| t.cmp_rows(i, t, j));
        idx
    };
    let ia = order_of(a);
    let ib = order_of(b);
    Ok(ia
        .iter()
        .zip(&ib)
        .all(|(&i, &j)| a.cmp_rows(i, b, j) == Ordering::Equal))
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("key index {key_index} out of range for {columns} columns")]
    KeyIndexOutOfRange { key_index: usize, columns: usize },
    #[error("key column `{name}` must be int64")]
    KeyColumnNotInt64 { name: String },
    #[error("expected {expected} columns, got {actual}")]
    ColumnCountMismatch { expected: usize, actual: usize },
    #[error("column `{column}`: expected dtype {expected}, got {actual}")]
    DtypeMismatch {
        column: String,
        expected: DType,
        actual: DType,
    },
    #[error("column `{column}`: expected {expected} rows, got {actual}")]
    LengthMismatch {
        column: String,
        expected: usize,
        actual: usize,
    },
    #[error("tables have different schemas")]
    SchemaMismatch,
    #[error("concat requires at least one part")]
    EmptyConcat,
    #[error("csv parse error at data row {row}, column `{column}`: {message}")]
    CsvParse {
        row: usize,
        column: String,
        message: String,
    },
    #[error("csv header mismatch: expected `{expected}`, got `{actual}`")]
    CsvHeader { expected: String, actual: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn two_col_schema() -> Arc<Schema> {
        Arc::new(
            Schema::new(
                vec![
                    Field::new("key", DType::Int64),
                    Field::new("p0", DType::Float64),
                ],
                0,
            )
            .unwrap(),
        )
    }

    pub(crate) fn tbl(keys: &[i64], payload: &[f64]) -> Table {
        Table::new(
            two_col_schema(),
            vec![
                Column::Int64(keys.to_vec()),
                Column::Float64(payload.to_vec()),
            ],
        )
        .unwrap()
    }

    #[test]
    fn schema_rejects_duplicates_and_bad_key() {
        let dup = Schema::new(
            vec![
                Field::new("a", DType::Int64),
                Field::new("a", DType::Float64),
            ],
            0,
        );
        assert!(matches!(dup, Err(TableError::DuplicateColumn(_))));

        let out = Schema::new(vec![Field::new("a", DType::Int64)], 1);
        assert!(matches!(out, Err(TableError::KeyIndexOutOfRange { .. })));

        let float_key = Schema::new(vec![Field::new("a", DType::Float64)], 0);
        assert!(matches!(float_key, Err(TableError::KeyColumnNotInt64 { .. })));
    }

    #[test]
    fn concat_identity_and_append() {
        let t = tbl(&[1, 2, 3], &[0.1, 0.2, 0.3]);
        let single = concat(std::slice::from_ref(&t)).unwrap();
        assert!(single.bit_eq(&t));

        let empty = Table::empty(two_col_schema());
        let with_empty = concat(&[empty, t.clone()]).unwrap();
        assert!(with_empty.bit_eq(&t));

        let a = tbl(&[1, 2, 3], &[0.1, 0.2, 0.3]);
        let b = tbl(&[4, 5, 6, 7, 8], &[0.4, 0.5, 0.6, 0.7, 0.8]);
        let ab = concat(&[a.clone(), b]).unwrap();
        assert_eq!(ab.row_count(), 8);
        let head = ab.take(&[0, 1, 2]);
        assert!(head.bit_eq(&a));
    }

    #[test]
    fn concat_rejects_schema_mismatch() {
        let t = tbl(&[1], &[0.5]);
        let other_schema = Arc::new(
            Schema::new(
                vec![
                    Field::new("k", DType::Int64),
                    Field::new("v", DType::Float64),
                ],
                0,
            )
            .unwrap(),
        );
        let u = Table::empty(other_schema);
        assert!(matches!(
            concat(&[t, u]),
            Err(TableError::SchemaMismatch)
        ));
    }

    #[test]
    fn canonical_equal_is_order_insensitive() {
        let t = tbl(&[3, 1, 2, 1], &[0.3, 0.1, 0.2, 0.15]);
        let shuffled = t.take(&[2, 0, 3, 1]);
        assert!(canonical_equal(&t, &shuffled).unwrap());

        let missing = t.take(&[0, 1, 2]);
        assert!(!canonical_equal(&t, &missing).unwrap());

        // Same keys, different payload bits: not equal.
        let tweaked = tbl(&[3, 1, 2, 1], &[0.3, 0.1, 0.2, 0.16]);
        assert!(!canonical_equal(&t, &tweaked).unwrap());
    }

    #[test]
    fn take_preserves_values() {
        let t = tbl(&[10, 20, 30], &[1.0, 2.0, 3.0]);
        let sub = t.take(&[2, 0]);
        assert_eq!(sub.key_column(), &[30, 10]);
        match sub.column(1) {
            Column::Float64(v) => assert_eq!(v, &[3.0, 1.0]),
            _ => unreachable!(),
        }
    }
}
