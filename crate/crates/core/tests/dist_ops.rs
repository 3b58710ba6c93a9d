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

//! Distributed operators checked against the single-process reference
//! implementations.

use std::sync::Arc;

use deskpilot::comm::{init_world, Communicator, WorldConfig};
use deskpilot::oracle::{expected_join_rows, oracle_join, oracle_sort};
use deskpilot::ops::{dist_join, dist_sort, local_join, local_sort, JoinSpec, SortSpec};
use deskpilot::table::{canonical_equal, concat, generate, GenSpec, Table};

fn run_world<T, F>(config: &WorldConfig, f: F) -> Vec<T>
where
    T: Send + 'static,
    F: Fn(Communicator) -> T + Send + Sync + 'static,
{
    let handles = init_world(config).expect("world init");
    let f = Arc::new(f);
    let joins: Vec<_> = handles
        .into_iter()
        .map(|comm| {
            let f = f.clone();
            std::thread::spawn(move || f(comm))
        })
        .collect();
    joins.into_iter().map(|j| j.join().expect("rank thread")).collect()
}

fn per_rank_rows(total: usize, size: usize, rank: usize) -> usize {
    total / size + usize::from(rank < total % size)
}

#[test]
fn dist_join_single_rank_equals_local_join() {
    let out = run_world(&WorldConfig::in_process(1), |comm| {
        let left = generate(&GenSpec::new(500, 1, 200, 1));
        let right = generate(&GenSpec::new(400, 2, 200, 1));
        let dist = dist_join(&comm, &left, &right, &JoinSpec::default()).unwrap();
        let local = local_join(&left, &right, &JoinSpec::default());
        (dist, local)
    });
    let (dist, local) = &out[0];
    assert!(canonical_equal(dist, local).unwrap());
    assert_eq!(dist.row_count(), local.row_count());
}

#[test]
fn dist_join_empty_everywhere_is_empty() {
    let out = run_world(&WorldConfig::in_process(4), |comm| {
        let left = generate(&GenSpec::new(0, 1, 10, 1));
        let right = generate(&GenSpec::new(0, 2, 10, 1));
        dist_join(&comm, &left, &right, &JoinSpec::default()).unwrap()
    });
    for t in out {
        assert_eq!(t.row_count(), 0);
    }
}

#[test]
fn dist_join_matches_oracle_on_four_ranks() {
    let total = 10_000usize;
    let out = run_world(&WorldConfig::in_process(4), move |comm| {
        let rows = per_rank_rows(total, comm.size(), comm.rank());
        let left = generate(&GenSpec::new(rows, 100 + comm.rank() as u64, total as u64, 1));
        let right = generate(&GenSpec::new(rows, 200 + comm.rank() as u64, total as u64, 1));
        let dist = dist_join(&comm, &left, &right, &JoinSpec::default()).unwrap();
        (left, right, dist)
    });
    let lefts: Vec<Table> = out.iter().map(|(l, _, _)| l.clone()).collect();
    let rights: Vec<Table> = out.iter().map(|(_, r, _)| r.clone()).collect();
    let dists: Vec<Table> = out.iter().map(|(_, _, d)| d.clone()).collect();

    let left_all = concat(&lefts).unwrap();
    let right_all = concat(&rights).unwrap();
    let dist_all = concat(&dists).unwrap();
    let reference = oracle_join(&left_all, &right_all, &JoinSpec::default());

    assert_eq!(dist_all.row_count(), expected_join_rows(&left_all, &right_all));
    assert!(canonical_equal(&dist_all, &reference).unwrap());
}

#[test]
fn dist_sort_single_rank_equals_local_sort() {
    let out = run_world(&WorldConfig::in_process(1), |comm| {
        let t = generate(&GenSpec::new(1000, 5, 300, 1));
        let dist = dist_sort(&comm, &t, &SortSpec::default()).unwrap();
        let local = local_sort(&t, &SortSpec::default());
        (dist, local)
    });
    let (dist, local) = &out[0];
    assert!(dist.bit_eq(local));
}

#[test]
fn dist_sort_all_identical_keys_is_valid() {
    let out = run_world(&WorldConfig::in_process(4), |comm| {
        let schema = GenSpec::new(0, 0, 10, 1).schema();
        let t = Table::new(
            schema,
            vec![
                deskpilot::table::Column::Int64(vec![7; 100]),
                deskpilot::table::Column::Float64(vec![comm.rank() as f64; 100]),
            ],
        )
        .unwrap();
        dist_sort(&comm, &t, &SortSpec::default()).unwrap()
    });
    let total: usize = out.iter().map(Table::row_count).sum();
    assert_eq!(total, 400);
    let all = concat(&out).unwrap();
    assert!(all.key_column().windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn dist_sort_matches_oracle_on_four_ranks() {
    let per_rank = 25_000usize;
    let out = run_world(&WorldConfig::in_process(4), move |comm| {
        let t = generate(&GenSpec::new(per_rank, 300 + comm.rank() as u64, 80_000, 1));
        let sorted = dist_sort(&comm, &t, &SortSpec::default()).unwrap();
        (t, sorted)
    });
    let inputs: Vec<Table> = out.iter().map(|(t, _)| t.clone()).collect();
    let outputs: Vec<Table> = out.iter().map(|(_, s)| s.clone()).collect();

    // Every per-rank output is itself sorted.
    for part in &outputs {
        assert!(part.key_column().windows(2).all(|w| w[0] <= w[1]));
    }
    // Adjacent-rank boundary invariant over nonempty ranks.
    let mut prev_max: Option<i64> = None;
    for part in &outputs {
        if let (Some(&min), Some(&max)) =
            (part.key_column().first(), part.key_column().last())
        {
            if let Some(pm) = prev_max {
                assert!(pm <= min, "boundary violated: {pm} > {min}");
            }
            prev_max = Some(max);
        }
    }
    // Rank-order concatenation equals the reference stable sort of the
    // gathered input, bit for bit (key sequence and payloads).
    let concatenated = concat(&outputs).unwrap();
    let reference = oracle_sort(&concat(&inputs).unwrap(), &SortSpec::default());
    assert_eq!(concatenated.key_column(), reference.key_column());
    assert!(concatenated.bit_eq(&reference));
}

#[test]
fn dist_sort_more_ranks_than_rows() {
    let out = run_world(&WorldConfig::in_process(8), |comm| {
        // Three rows in the whole world; most ranks hold nothing.
        let rows = usize::from(comm.rank() < 3);
        let t = generate(&GenSpec::new(rows, 42 + comm.rank() as u64, 10, 1));
        let sorted = dist_sort(&comm, &t, &SortSpec::default()).unwrap();
        (t, sorted)
    });
    let inputs: Vec<Table> = out.iter().map(|(t, _)| t.clone()).collect();
    let outputs: Vec<Table> = out.iter().map(|(_, s)| s.clone()).collect();
    let all_in = concat(&inputs).unwrap();
    let all_out = concat(&outputs).unwrap();
    assert_eq!(all_out.row_count(), 3);
    assert!(canonical_equal(&all_in, &all_out).unwrap());
    assert!(all_out.key_column().windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn dist_outputs_are_deterministic_across_runs_and_backends() {
    let run = |config: &WorldConfig| -> Vec<(Table, Table)> {
        run_world(config, |comm| {
            let left = generate(&GenSpec::new(4000, 71 + comm.rank() as u64, 6000, 1));
            let right = generate(&GenSpec::new(4000, 81 + comm.rank() as u64, 6000, 1));
            let joined = dist_join(&comm, &left, &right, &JoinSpec::default()).unwrap();
            let sorted = dist_sort(&comm, &left, &SortSpec::default()).unwrap();
            (joined, sorted)
        })
    };
    let a = run(&WorldConfig::in_process(4));
    let b = run(&WorldConfig::in_process(4));
    let c = run(&WorldConfig::tcp_loopback(4));
    for ((ja, sa), (jb, sb)) in a.iter().zip(&b) {
        assert!(ja.bit_eq(jb));
        assert!(sa.bit_eq(sb));
    }
    for ((ja, sa), (jc, sc)) in a.iter().zip(&c) {
        assert!(ja.bit_eq(jc));
        assert!(sa.bit_eq(sc));
    }
}

#[test]
fn dist_sort_balance_on_uniform_keys() {
    // Stratified splitter sampling keeps per-rank output counts within
    // 15% of the mean for uniform keys.
    let per_rank = 15_000usize;
    let out = run_world(&WorldConfig::in_process(8), move |comm| {
        let t = generate(&GenSpec::new(per_rank, 500 + comm.rank() as u64, 1 << 40, 1));
        dist_sort(&comm, &t, &SortSpec::default()).unwrap().row_count()
    });
    let total: usize = out.iter().sum();
    assert_eq!(total, per_rank * 8);
    let mean = total as f64 / 8.0;
    for count in out {
        assert!(
            (count as f64 - mean).abs() / mean < 0.15,
            "rank holds {count} rows vs mean {mean}"
        );
    }
}
