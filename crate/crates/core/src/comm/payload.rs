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

//! Table payload encoding, byte-exact.
//!
//! ```text
//! payload := n_cols     u32 little-endian
//!            key_index  u32 little-endian
//!            column descriptor * n_cols:
//!                name_len u32 LE, name bytes (UTF-8), dtype u8 (0=int64, 1=float64)
//!            row_count  u64 little-endian
//!            value block * n_cols, column-major:
//!                row_count * 8 bytes little-endian (i64 or f64 bit pattern)
//! ```
//!
//! Both backends ship tables in this layout, which is what makes per-rank
//! results bit-identical across backends.

use std::sync::Arc;

use crate::table::{Column, DType, Field, Schema, Table};

use super::CommError;

pub fn encode_table(table: &Table) -> Vec<u8> {
    let schema = table.schema();
    let mut out = Vec::with_capacity(32 + table.row_count() * schema.len() * 8);
    out.extend_from_slice(&(schema.len() as u32).to_le_bytes());
    out.extend_from_slice(&(schema.key_index() as u32).to_le_bytes());
    for f in schema.fields() {
        out.extend_from_slice(&(f.name.len() as u32).to_le_bytes());
        out.extend_from_slice(f.name.as_bytes());
        out.push(match f.dtype {
            DType::Int64 => 0,
            DType::Float64 => 1,
        });
    }
    out.extend_from_slice(&(table.row_count() as u64).to_le_bytes());
    for col in table.columns() {
        match col {
            Column::Int64(v) => {
                for x in v {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
            Column::Float64(v) => {
                for x in v {
                    out.extend_from_slice(&x.to_bits().to_le_bytes());
                }
            }
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CommError> {
        if self.pos + n > self.bytes.len() {
            return Err(CommError::Protocol(format!(
                "payload truncated at offset {} (wanted {n} bytes of {})",
                self.pos,
                self.bytes.len()
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CommError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CommError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_table(bytes: &[u8]) -> Result<Table, CommError> {
    let mut c = Cursor { bytes, pos: 0 };
    let n_cols = c.u32()? as usize;
    let key_index = c.u32()? as usize;
    let mut fields = Vec::with_capacity(n_cols);
    for _ in 0..n_cols {
        let name_len = c.u32()? as usize;
        let name = std::str::from_utf8(c.take(name_len)?)
            .map_err(|e| CommError::Protocol(format!("column name not utf-8: {e}")))?
            .to_string();
        let dtype = match c.take(1)?[0] {
            0 => DType::Int64,
            1 => DType::Float64,
            d => return Err(CommError::Protocol(format!("unknown dtype byte {d}"))),
        };
        fields.push(Field::new(name, dtype));
    }
    let schema = Arc::new(
        Schema::new(fields, key_index)
            .map_err(|e| CommError::Protocol(format!("invalid schema: {e}")))?,
    );
    let row_count = c.u64()? as usize;
    let mut columns = Vec::with_capacity(n_cols);
    for f in schema.fields() {
        match f.dtype {
            DType::Int64 => {
                let mut v = Vec::with_capacity(row_count);
                for _ in 0..row_count {
                    v.push(c.u64()? as i64);
                }
                columns.push(Column::Int64(v));
            }
            DType::Float64 => {
                let mut v = Vec::with_capacity(row_count);
                for _ in 0..row_count {
                    v.push(f64::from_bits(c.u64()?));
                }
                columns.push(Column::Float64(v));
            }
        }
    }
    if c.pos != bytes.len() {
        return Err(CommError::Protocol(format!(
            "trailing {} bytes after table payload",
            bytes.len() - c.pos
        )));
    }
    Table::new(schema, columns).map_err(|e| CommError::Protocol(format!("invalid table: {e}")))
}
