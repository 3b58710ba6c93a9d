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

//! Timing-record CSV: the harness's primary machine-readable output and the
//! input format of `bench report`.

use anyhow::{anyhow, bail, Context, Result};
use deskpilot::runtime::{OpKind, TimingRecord};

pub const HEADER: &str = "uid,op,ranks,iteration,t_deserialize,t_comm_construct,t_execute,t_total";

pub fn to_csv(records: &[TimingRecord]) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.uid,
            r.op_kind,
            r.ranks,
            r.iteration,
            r.t_deserialize,
            r.t_comm_construct,
            r.t_execute,
            r.t_total
        ));
    }
    out
}

pub fn from_csv(text: &str) -> Result<Vec<TimingRecord>> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != HEADER {
        bail!("unexpected results header `{header}`");
    }
    let mut records = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 8 {
            bail!("line {}: expected 8 cells, got {}", lineno + 2, cells.len());
        }
        let ctx = || format!("line {}", lineno + 2);
        let op_kind = match cells[1] {
            "join" => OpKind::Join,
            "sort" => OpKind::Sort,
            "synthetic_sleep" => OpKind::SyntheticSleep,
            other => return Err(anyhow!("line {}: unknown op `{other}`", lineno + 2)),
        };
        records.push(TimingRecord {
            uid: cells[0].to_string(),
            op_kind,
            ranks: cells[2].parse().with_context(ctx)?,
            iteration: cells[3].parse().with_context(ctx)?,
            t_deserialize: cells[4].parse().with_context(ctx)?,
            t_comm_construct: cells[5].parse().with_context(ctx)?,
            t_execute: cells[6].parse().with_context(ctx)?,
            t_total: cells[7].parse().with_context(ctx)?,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(uid: &str, op_kind: OpKind, iteration: usize) -> TimingRecord {
        TimingRecord {
            uid: uid.to_string(),
            op_kind,
            ranks: 4,
            iteration,
            t_deserialize: 1.25e-5,
            t_comm_construct: 3.5e-4,
            t_execute: 0.125,
            t_total: 0.1253625,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let records = vec![
            record("a", OpKind::Join, 0),
            record("a", OpKind::Join, 1),
            record("b", OpKind::Sort, 0),
            record("c", OpKind::SyntheticSleep, 0),
        ];
        let text = to_csv(&records);
        assert!(text.starts_with(HEADER));
        let back = from_csv(&text).unwrap();
        assert_eq!(back, records);
    }

    #[test]
    fn header_and_cell_errors_are_reported() {
        assert!(from_csv("nope\n").is_err());
        let bad = format!("{HEADER}\nx,join,4,0,oops,0,0,0\n");
        let err = from_csv(&bad).unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }
}
