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

//! End-to-end harness behavior: scenario runs, output structure, CSV
//! round trips, repeatability, and refusals.

use std::collections::HashMap;

use deskpilot::comm::Backend;
use deskpilot::runtime::OpKind;
use deskpilot_bench::scenario::{Mode, Scenario};
use deskpilot_bench::{csv, runner};

fn tiny_weak_sort() -> Scenario {
    Scenario {
        name: "tiny_weak_sort".into(),
        ops: vec![OpKind::Sort],
        mode: Mode::Weak,
        ranks: vec![1, 2],
        rows_per_rank: Some(5_000),
        total_rows: None,
        iterations: 3,
        seed: 42,
        backend: Backend::InProcess,
        endpoints: Vec::new(),
    }
}

#[test]
fn weak_scenario_produces_expected_row_structure() {
    let outcome = runner::run_scenario(&tiny_weak_sort(), 64).unwrap();
    // One op, two parallelism points, three iterations each.
    assert_eq!(outcome.records.len(), 2 * 3);
    let csv_text = csv::to_csv(&outcome.records);
    let parsed = csv::from_csv(&csv_text).unwrap();
    assert_eq!(parsed, outcome.records);

    // Transition log: four events per task, timestamps rendered at 6dp.
    assert_eq!(outcome.transitions.len(), 2 * 4);
    for e in &outcome.transitions {
        let line = e.log_line();
        let ts = line.split(',').next().unwrap();
        assert_eq!(ts.split('.').nth(1).map(str::len), Some(6), "bad line {line}");
    }

    let groups = &outcome.summary.groups;
    assert_eq!(groups.len(), 2);
    assert!(groups.iter().all(|g| g.samples == 3));
}

#[test]
fn same_seed_reproduces_correctness_artifacts() {
    let scenario = tiny_weak_sort();
    let a = runner::run_scenario(&scenario, 64).unwrap();
    let b = runner::run_scenario(&scenario, 64).unwrap();
    let da: HashMap<_, _> = a.digests.iter().cloned().collect();
    let db: HashMap<_, _> = b.digests.iter().cloned().collect();
    assert_eq!(da, db, "same scenario and seed must reproduce task outputs");
    assert!(da.values().all(|d| d.is_some()));

    // A different seed changes the artifacts.
    let mut reseeded = scenario;
    reseeded.seed = 43;
    let c = runner::run_scenario(&reseeded, 64).unwrap();
    let dc: HashMap<_, _> = c.digests.iter().cloned().collect();
    assert_ne!(da, dc);
}

#[test]
fn oversubscription_cap_refuses_with_explanation() {
    let mut scenario = tiny_weak_sort();
    scenario.ranks = vec![1, 2, 64];
    let err = match runner::run_scenario(&scenario, 8) {
        Err(e) => e.to_string(),
        Ok(_) => panic!("expected a cap refusal"),
    };
    assert!(err.contains("64"), "{err}");
    assert!(err.contains("cap"), "{err}");
    assert!(err.contains("--oversub-cap"), "{err}");
}

#[test]
fn heterogeneous_comparison_reports_improvement() {
    let scenario = Scenario {
        name: "tiny_hetero".into(),
        ops: vec![OpKind::Join, OpKind::Sort],
        mode: Mode::Heterogeneous,
        ranks: vec![2],
        rows_per_rank: Some(4_000),
        total_rows: None,
        iterations: 2,
        seed: 5,
        backend: Backend::InProcess,
        endpoints: Vec::new(),
    };
    let outcome = runner::run_scenario(&scenario, 64).unwrap();
    assert_eq!(outcome.summary.pipelines.len(), 1);
    let p = &outcome.summary.pipelines[0];
    assert_eq!(p.pool_ranks, 4);
    let batch = p.batch_makespan.expect("batch makespan");
    let hetero = p.heterogeneous_makespan.expect("hetero makespan");
    let reported = p.improvement_percent.expect("improvement");
    let computed = (batch - hetero) / batch * 100.0;
    assert!((reported - computed).abs() < 1e-9);

    // The report renders both sections.
    let text = deskpilot_bench::report::render(&outcome.summary);
    assert!(text.contains("heterogeneous vs batch"));
    assert!(text.contains("417.33"));
}

#[test]
fn batch_mode_runs_without_hetero_leg() {
    let scenario = Scenario {
        name: "tiny_batch".into(),
        ops: vec![OpKind::Join, OpKind::Sort],
        mode: Mode::Batch,
        ranks: vec![1],
        rows_per_rank: Some(2_000),
        total_rows: None,
        iterations: 1,
        seed: 9,
        backend: Backend::InProcess,
        endpoints: Vec::new(),
    };
    let outcome = runner::run_scenario(&scenario, 64).unwrap();
    let p = &outcome.summary.pipelines[0];
    assert!(p.batch_makespan.is_some());
    assert!(p.heterogeneous_makespan.is_none());
    assert!(p.improvement_percent.is_none());
}

#[test]
fn strong_mode_divides_rows_and_flags_tiny_partitions() {
    let scenario = Scenario {
        name: "tiny_strong".into(),
        ops: vec![OpKind::Sort],
        mode: Mode::Strong,
        ranks: vec![1, 4],
        rows_per_rank: None,
        total_rows: Some(3_200),
        iterations: 1,
        seed: 3,
        backend: Backend::InProcess,
        endpoints: Vec::new(),
    };
    let outcome = runner::run_scenario(&scenario, 64).unwrap();
    // 3200/4 = 800 < 1000 triggers the idle-regime note.
    assert!(outcome
        .summary
        .warnings
        .iter()
        .any(|w| w.contains("idle")));
    let groups = &outcome.summary.groups;
    assert_eq!(groups.len(), 2);
    let p4 = groups.iter().find(|g| g.parallelism == 4).unwrap();
    assert!(p4.speedup.is_some());
}

#[test]
fn explicit_endpoints_drive_a_tcp_scenario() {
    let mut scenario = tiny_weak_sort();
    scenario.name = "tiny_endpoints".into();
    scenario.backend = Backend::Tcp;
    scenario.ranks = vec![2];
    scenario.iterations = 1;
    // Pool of 2 workers plus the master.
    scenario.endpoints = vec![
        "127.0.0.1:24761".into(),
        "127.0.0.1:24762".into(),
        "127.0.0.1:24763".into(),
    ];
    let outcome = runner::run_scenario(&scenario, 64).unwrap();
    assert_eq!(outcome.records.len(), 1);

    // Endpoints with several rank counts cannot work; refuse loudly.
    let mut bad = scenario;
    bad.ranks = vec![1, 2];
    let err = match runner::run_scenario(&bad, 64) {
        Err(e) => format!("{e:#}"),
        Ok(_) => panic!("expected validation failure"),
    };
    assert!(err.contains("single rank count"), "{err}");
}

#[test]
fn tcp_backend_scenario_runs() {
    let mut scenario = tiny_weak_sort();
    scenario.name = "tiny_weak_sort_tcp".into();
    scenario.backend = Backend::Tcp;
    scenario.ranks = vec![2];
    scenario.iterations = 1;
    let outcome = runner::run_scenario(&scenario, 64).unwrap();
    assert_eq!(outcome.records.len(), 1);

    // Identical data over the in-process backend reproduces the artifacts.
    let mut inproc = tiny_weak_sort();
    inproc.ranks = vec![2];
    inproc.iterations = 1;
    let reference = runner::run_scenario(&inproc, 64).unwrap();
    let tcp_digest = &outcome.digests[0].1;
    let ref_digest = reference
        .digests
        .iter()
        .find(|(uid, _)| uid == "sort-p2")
        .map(|(_, d)| d.clone())
        .unwrap();
    assert_eq!(*tcp_digest, ref_digest);
}
