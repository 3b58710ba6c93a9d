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

//! Independent single-process reference implementations, used exclusively
//! by tests.
//!
//! These favor obvious correctness over speed: the join is a plain nested
//! loop and the sort is an explicit comparison sort on `(key, row index)`.
//! Neither touches the partitioning or hashing machinery in `ops`, so
//! agreement between the two routes is meaningful evidence (see
//! CONTRIBUTING for the review checklist). Test sizes should stay at or
//! below 10^5 rows.

use crate::ops::{assemble_join_output, JoinSpec, SortSpec};
use crate::table::Table;

/// Nested-loop inner join producing all matching pairs in deterministic
/// left-major order.
pub fn oracle_join(left: &Table, right: &Table, _spec: &JoinSpec) -> Table {
    let left_keys = left.key_column();
    let right_keys = right.key_column();
    let mut pairs = Vec::new();
    for (li, &lk) in left_keys.iter().enumerate() {
        for (ri, &rk) in right_keys.iter().enumerate() {
            if lk == rk {
                pairs.push((li, ri));
            }
        }
    }
    assemble_join_output(left, right, &pairs)
}

/// Comparison sort, ascending on the key, stable on original row index.
pub fn oracle_sort(table: &Table, _spec: &SortSpec) -> Table {
    let keys = table.key_column();
    let mut decorated: Vec<(i64, usize)> = keys.iter().copied().zip(0..table.row_count()).collect();
    decorated.sort();
    let order: Vec<usize> = decorated.into_iter().map(|(_, i)| i).collect();
    table.take(&order)
}

/// Sum over keys of left-count times right-count: the exact inner-join
/// output size, computed without producing the rows.
pub fn expected_join_rows(left: &Table, right: &Table) -> usize {
    use std::collections::HashMap;
    let mut right_counts: HashMap<i64, usize> = HashMap::new();
    for &k in right.key_column() {
        *right_counts.entry(k).or_insert(0) += 1;
    }
    left.key_column()
        .iter()
        .map(|k| right_counts.get(k).copied().unwrap_or(0))
        .sum()
}
