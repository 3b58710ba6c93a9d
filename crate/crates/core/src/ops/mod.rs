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

//! Local and distributed relational operators.
//!
//! Local operators work on locally accessible data only; the distributed
//! variants compose them with partitioning and a shuffle:
//!
//! - distributed join: hash-partition both sides on the key, shuffle, then
//!   join locally (rows with equal keys are co-located after the shuffle).
//! - distributed sort: sample sort — stratified local key samples are
//!   gathered at rank 0, which picks size-1 splitters at equal quantiles;
//!   after a broadcast, rows are range-partitioned, shuffled, and sorted
//!   locally. Rank order concatenation of the outputs is globally sorted.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::comm::{CommError, Communicator, PartitionMap};
use crate::table::{Column, DType, Field, Schema, Table};
use crate::util::splitmix64;

/// Inner equi-join on both tables' schema key columns.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinSpec {}

/// Ascending sort on the schema key column. `oversample` is the number of
/// splitter-selection samples each rank contributes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SortSpec {
    pub oversample: usize,
}

impl Default for SortSpec {
    fn default() -> Self {
        Self { oversample: 32 }
    }
}

impl SortSpec {
    pub fn validate(&self) -> Result<(), OpsError> {
        if self.oversample == 0 {
            return Err(OpsError::InvalidSpec("oversample must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum OpsError {
    #[error("invalid operator spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Comm(#[from] CommError),
}

/// Platform-independent avalanche hash for partitioning keys.
///
/// This is the SplitMix64 mixer applied to the key's two's-complement bits;
/// the exact constants are documented in `util::splitmix64`.
#[inline]
pub fn stable_hash64(key: i64) -> u64 {
    splitmix64(key as u64)
}

/// Destination map sending row `i` to `stable_hash64(key_i) mod parts`.
/// Rows with equal keys always share a destination.
pub fn hash_partition_map(table: &Table, parts: usize) -> PartitionMap {
    assert!(parts >= 1, "parts must be >= 1");
    PartitionMap::new(
        table
            .key_column()
            .iter()
            .map(|&k| (stable_hash64(k) % parts as u64) as usize)
            .collect(),
    )
}

/// Output schema of a join: left columns, then right non-key columns.
/// Right-side names that collide with an existing output name get an `_r`
/// suffix (repeated until unique).
pub(crate) fn join_output_schema(left: &Schema, right: &Schema) -> Schema {
    let mut fields: Vec<Field> = left.fields().to_vec();
    for (i, f) in right.fields().iter().enumerate() {
        if i == right.key_index() {
            continue;
        }
        let mut name = f.name.clone();
        while fields.iter().any(|g| g.name == name) {
            name.push_str("_r");
        }
        fields.push(Field::new(name, f.dtype));
    }
    Schema::new(fields, left.key_index()).expect("join schema is valid by construction")
}

pub(crate) fn assemble_join_output(
    left: &Table,
    right: &Table,
    pairs: &[(usize, usize)],
) -> Table {
    let schema = std::sync::Arc::new(join_output_schema(left.schema(), right.schema()));
    let left_rows: Vec<usize> = pairs.iter().map(|&(l, _)| l).collect();
    let right_rows: Vec<usize> = pairs.iter().map(|&(_, r)| r).collect();
    let left_part = left.take(&left_rows);
    let right_part = right.take(&right_rows);
    let mut columns: Vec<Column> = left_part.columns().to_vec();
    for (i, col) in right_part.columns().iter().enumerate() {
        if i == right.schema().key_index() {
            continue;
        }
        columns.push(col.clone());
    }
    Table::new(schema, columns).expect("join columns match schema")
}

/// Inner hash join. Builds a key map on the smaller side and probes with
/// the larger; output rows are ordered by left row index, then right row
/// index within a key.
pub fn local_join(left: &Table, right: &Table, _spec: &JoinSpec) -> Table {
    let left_keys = left.key_column();
    let right_keys = right.key_column();

    let mut pairs: Vec<(usize, usize)> = Vec::new();
    if right.row_count() <= left.row_count() {
        let mut by_key: HashMap<i64, Vec<usize>> = HashMap::with_capacity(right.row_count());
        for (ri, &k) in right_keys.iter().enumerate() {
            by_key.entry(k).or_default().push(ri);
        }
        for (li, &k) in left_keys.iter().enumerate() {
            if let Some(rs) = by_key.get(&k) {
                pairs.extend(rs.iter().map(|&ri| (li, ri)));
            }
        }
    } else {
        let mut by_key: HashMap<i64, Vec<usize>> = HashMap::with_capacity(left.row_count());
        for (li, &k) in left_keys.iter().enumerate() {
            by_key.entry(k).or_default().push(li);
        }
        for (ri, &k) in right_keys.iter().enumerate() {
            if let Some(ls) = by_key.get(&k) {
                pairs.extend(ls.iter().map(|&li| (li, ri)));
            }
        }
        // Probing right-major; restore the left-major output contract.
        pairs.sort_unstable();
    }
    assemble_join_output(left, right, &pairs)
}

/// Ascending stable sort on the key column (ties keep original row order).
pub fn local_sort(table: &Table, _spec: &SortSpec) -> Table {
    let keys = table.key_column();
    let mut idx: Vec<usize> = (0..table.row_count()).collect();
    idx.sort_unstable_by_key(|&i| (keys[i], i));
    table.take(&idx)
}

/// Distributed inner join: per-rank partitions in, per-rank partition of
/// the global join out. The union of all ranks' outputs equals the global
/// inner join of the unions of the inputs.
pub fn dist_join(
    comm: &Communicator,
    left: &Table,
    right: &Table,
    spec: &JoinSpec,
) -> Result<Table, OpsError> {
    let left_map = hash_partition_map(left, comm.size());
    let right_map = hash_partition_map(right, comm.size());
    let left_shuffled = comm.shuffle(left, &left_map)?;
    let right_shuffled = comm.shuffle(right, &right_map)?;
    Ok(local_join(&left_shuffled, &right_shuffled, spec))
}

fn key_only_schema() -> std::sync::Arc<Schema> {
    std::sync::Arc::new(
        Schema::new(vec![Field::new("key", DType::Int64)], 0).expect("valid sample schema"),
    )
}

/// Stratified splitter samples: key values at positions `⌊i·n/oversample⌋`
/// of the locally sorted key vector.
fn sample_keys(keys: &[i64], oversample: usize) -> Vec<i64> {
    if keys.is_empty() {
        return Vec::new();
    }
    let mut sorted = keys.to_vec();
    sorted.sort_unstable();
    (0..oversample)
        .map(|i| sorted[i * sorted.len() / oversample])
        .collect()
}

/// Distributed sample sort. Each rank returns one sorted range of the
/// global order: rank `r`'s max key never exceeds rank `r+1`'s min key, and
/// concatenating outputs in rank order yields the global stable sort.
pub fn dist_sort(comm: &Communicator, table: &Table, spec: &SortSpec) -> Result<Table, OpsError> {
    spec.validate()?;
    let size = comm.size();

    let samples = sample_keys(table.key_column(), spec.oversample);
    let sample_table = Table::new(key_only_schema(), vec![Column::Int64(samples)])
        .expect("sample table is schema-valid");
    let gathered = comm.gather(&sample_table, 0)?;

    // Rank 0 sorts the pooled samples and picks size-1 splitters at equal
    // quantiles.
    let splitters: Vec<i64> = match gathered {
        Some(t) => {
            let mut pool = t.key_column().to_vec();
            pool.sort_unstable();
            if pool.is_empty() {
                Vec::new()
            } else {
                (1..size).map(|r| pool[r * pool.len() / size]).collect()
            }
        }
        None => Vec::new(),
    };
    let splitters = comm.broadcast_splitters(0, &splitters)?;

    // Row with key k goes to the smallest rank r with k <= splitter_r;
    // keys above every splitter go to the last rank. Duplicates equal to a
    // splitter all land on the lower rank.
    let map = PartitionMap::new(
        table
            .key_column()
            .iter()
            .map(|&k| {
                let dest = splitters.partition_point(|&s| s < k);
                dest.min(size - 1)
            })
            .collect(),
    );
    let shuffled = comm.shuffle(table, &map)?;
    Ok(local_sort(&shuffled, spec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{generate, GenSpec};

    #[test]
    fn stable_hash64_pinned_avalanche() {
        assert_eq!(stable_hash64(5), stable_hash64(5));
        // Frozen regression value for the chosen mixer: inputs 0 and 1
        // differ in 34 of 64 output bits.
        let bits = (stable_hash64(0) ^ stable_hash64(1)).count_ones();
        assert_eq!(bits, 34);
        assert!(bits >= 20);
    }

    #[test]
    fn stable_hash64_bucket_balance() {
        let t = generate(&GenSpec::new(100_000, 11, 100_000, 1));
        let mut counts = [0u64; 8];
        for &k in t.key_column() {
            counts[(stable_hash64(k) % 8) as usize] += 1;
        }
        let max = *counts.iter().max().unwrap() as f64;
        let min = *counts.iter().min().unwrap() as f64;
        assert!(max / min < 1.2, "bucket ratio {}", max / min);
    }

    #[test]
    fn hash_partition_map_single_part_is_zero() {
        let t = generate(&GenSpec::new(100, 3, 50, 1));
        let map = hash_partition_map(&t, 1);
        assert!(map.assignments().iter().all(|&d| d == 0));
    }

    #[test]
    fn hash_partition_equal_keys_share_destination() {
        let t = generate(&GenSpec::new(5000, 9, 40, 1));
        let map = hash_partition_map(&t, 7);
        let mut seen: HashMap<i64, usize> = HashMap::new();
        for (row, &k) in t.key_column().iter().enumerate() {
            let dst = map.assignments()[row];
            assert_eq!(*seen.entry(k).or_insert(dst), dst);
        }
    }

    #[test]
    fn hash_partition_balance_within_ten_percent() {
        let t = generate(&GenSpec::new(100_000, 13, 100_000, 1));
        let parts = 7;
        let map = hash_partition_map(&t, parts);
        let mut counts = vec![0f64; parts];
        for &d in map.assignments() {
            counts[d] += 1.0;
        }
        let mean = t.row_count() as f64 / parts as f64;
        for c in counts {
            assert!((c - mean).abs() / mean < 0.10, "count {c} vs mean {mean}");
        }
    }

    #[test]
    fn local_join_empty_right_is_empty() {
        let left = generate(&GenSpec::new(100, 1, 10, 1));
        let right = generate(&GenSpec::new(0, 2, 10, 1));
        let out = local_join(&left, &right, &JoinSpec::default());
        assert_eq!(out.row_count(), 0);
        assert_eq!(out.schema().len(), 3); // key, p0, p0_r
    }

    #[test]
    fn local_join_hand_counted() {
        use crate::table::tests::tbl;
        let left = tbl(&[1, 2, 2], &[0.1, 0.2, 0.3]);
        let right = tbl(&[2, 2, 3], &[0.4, 0.5, 0.6]);
        let out = local_join(&left, &right, &JoinSpec::default());
        assert_eq!(out.row_count(), 4);
        assert!(out.key_column().iter().all(|&k| k == 2));
        // Left-major pair order: (1,0) (1,1) (2,0) (2,1).
        match out.column(1) {
            Column::Float64(v) => assert_eq!(v, &[0.2, 0.2, 0.3, 0.3]),
            _ => unreachable!(),
        }
        match out.column(2) {
            Column::Float64(v) => assert_eq!(v, &[0.4, 0.5, 0.4, 0.5]),
            _ => unreachable!(),
        }
    }

    #[test]
    fn local_join_build_side_does_not_change_output() {
        // Larger left probes a right-side map and vice versa; the output
        // contract is identical.
        let big = generate(&GenSpec::new(600, 5, 50, 1));
        let small = generate(&GenSpec::new(200, 6, 50, 1));
        let a = local_join(&big, &small, &JoinSpec::default());
        let b_schema_swap = local_join(&small, &big, &JoinSpec::default());
        // Not directly comparable tables (column roles swap); compare via
        // pair counts per key instead.
        let count = |t: &Table| t.row_count();
        assert_eq!(count(&a), count(&b_schema_swap));
    }

    #[test]
    fn local_sort_small_and_stability() {
        use crate::table::tests::tbl;
        let t = tbl(&[3, 1, 2], &[0.3, 0.1, 0.2]);
        let sorted = local_sort(&t, &SortSpec::default());
        assert_eq!(sorted.key_column(), &[1, 2, 3]);
        match sorted.column(1) {
            Column::Float64(v) => assert_eq!(v, &[0.1, 0.2, 0.3]),
            _ => unreachable!(),
        }

        // Equal keys keep original order.
        let dup = tbl(&[5, 5, 5, 1], &[0.0, 1.0, 2.0, 3.0]);
        let sorted = local_sort(&dup, &SortSpec::default());
        match sorted.column(1) {
            Column::Float64(v) => assert_eq!(v, &[3.0, 0.0, 1.0, 2.0]),
            _ => unreachable!(),
        }
    }

    #[test]
    fn sample_keys_stratified_positions() {
        assert_eq!(sample_keys(&[], 4), Vec::<i64>::new());
        // n=3, oversample=4: positions 0,0,1,2 of the sorted keys.
        assert_eq!(sample_keys(&[30, 10, 20], 4), vec![10, 10, 20, 30]);
    }
}
