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

//! Reference measurements from a published large-scale HPC deployment of
//! the same experiment design (hundreds of cores, 35M rows per rank weak /
//! 3.5B rows total strong).
//!
//! These exist purely for side-by-side rendering in reports, so readers can
//! compare the *shape* of desk-scale results against the original study.
//! They are never comparable in absolute terms and are never used as
//! pass/fail thresholds anywhere in this repository.

/// One reference row: execution time and runtime overhead at a given
/// parallelism, as mean ± sample std over 10 iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fixture {
    pub op: &'static str,
    pub scaling: &'static str,
    pub parallelism: u32,
    pub time_mean: f64,
    pub time_std: f64,
    pub overhead_mean: f64,
    pub overhead_std: f64,
}

pub const REFERENCE_SCALING: &[Fixture] = &[
    Fixture { op: "join", scaling: "weak", parallelism: 148, time_mean: 215.64, time_std: 4.35, overhead_mean: 2.9, overhead_std: 0.1 },
    Fixture { op: "join", scaling: "weak", parallelism: 222, time_mean: 226.12, time_std: 2.59, overhead_mean: 2.3, overhead_std: 0.4 },
    Fixture { op: "join", scaling: "weak", parallelism: 296, time_mean: 237.01, time_std: 2.96, overhead_mean: 2.8, overhead_std: 0.8 },
    Fixture { op: "join", scaling: "weak", parallelism: 370, time_mean: 239.87, time_std: 3.41, overhead_mean: 2.5, overhead_std: 0.8 },
    Fixture { op: "join", scaling: "weak", parallelism: 444, time_mean: 241.59, time_std: 2.76, overhead_mean: 2.9, overhead_std: 0.4 },
    Fixture { op: "join", scaling: "weak", parallelism: 518, time_mean: 253.66, time_std: 1.53, overhead_mean: 3.2, overhead_std: 0.6 },
    Fixture { op: "join", scaling: "strong", parallelism: 148, time_mean: 144.80, time_std: 3.21, overhead_mean: 2.79, overhead_std: 0.05 },
    Fixture { op: "join", scaling: "strong", parallelism: 222, time_mean: 98.03, time_std: 3.32, overhead_mean: 2.51, overhead_std: 0.2 },
    Fixture { op: "join", scaling: "strong", parallelism: 296, time_mean: 78.14, time_std: 3.02, overhead_mean: 2.45, overhead_std: 0.1 },
    Fixture { op: "join", scaling: "strong", parallelism: 370, time_mean: 61.80, time_std: 3.35, overhead_mean: 2.81, overhead_std: 0.3 },
    Fixture { op: "join", scaling: "strong", parallelism: 444, time_mean: 52.72, time_std: 2.32, overhead_mean: 3.0, overhead_std: 0.8 },
    Fixture { op: "join", scaling: "strong", parallelism: 518, time_mean: 47.10, time_std: 3.54, overhead_mean: 3.5, overhead_std: 0.8 },
    Fixture { op: "sort", scaling: "weak", parallelism: 148, time_mean: 192.74, time_std: 3.21, overhead_mean: 3.87, overhead_std: 0.9 },
    Fixture { op: "sort", scaling: "weak", parallelism: 222, time_mean: 204.44, time_std: 3.32, overhead_mean: 3.4, overhead_std: 1.2 },
    Fixture { op: "sort", scaling: "weak", parallelism: 296, time_mean: 207.20, time_std: 4.02, overhead_mean: 3.85, overhead_std: 0.9 },
    Fixture { op: "sort", scaling: "weak", parallelism: 370, time_mean: 212.81, time_std: 3.35, overhead_mean: 2.59, overhead_std: 0.39 },
    Fixture { op: "sort", scaling: "weak", parallelism: 444, time_mean: 215.05, time_std: 3.32, overhead_mean: 2.61, overhead_std: 0.88 },
    Fixture { op: "sort", scaling: "weak", parallelism: 518, time_mean: 223.88, time_std: 4.54, overhead_mean: 3.23, overhead_std: 1.3 },
    Fixture { op: "sort", scaling: "strong", parallelism: 148, time_mean: 125.53, time_std: 2.64, overhead_mean: 2.42, overhead_std: 0.8 },
    Fixture { op: "sort", scaling: "strong", parallelism: 222, time_mean: 84.20, time_std: 2.64, overhead_mean: 2.37, overhead_std: 0.61 },
    Fixture { op: "sort", scaling: "strong", parallelism: 296, time_mean: 63.76, time_std: 2.80, overhead_mean: 2.42, overhead_std: 0.5 },
    Fixture { op: "sort", scaling: "strong", parallelism: 370, time_mean: 51.31, time_std: 3.18, overhead_mean: 2.65, overhead_std: 0.92 },
    Fixture { op: "sort", scaling: "strong", parallelism: 444, time_mean: 44.46, time_std: 0.96, overhead_mean: 2.91, overhead_std: 0.8 },
    Fixture { op: "sort", scaling: "strong", parallelism: 518, time_mean: 39.52, time_std: 3.98, overhead_mean: 3.5, overhead_std: 1.05 },
];

/// Reference heterogeneous-vs-batch pair: a weak-scaling join+sort pipeline
/// on 84 CPUs, with heterogeneous execution reported 4–15% faster than
/// batch execution across configurations.
#[derive(Debug, Clone, Copy)]
pub struct HeteroFixture {
    pub cpus: u32,
    pub heterogeneous_seconds: f64,
    pub batch_seconds: f64,
    pub improvement_percent_range: (f64, f64),
}

pub const REFERENCE_HETERO: HeteroFixture = HeteroFixture {
    cpus: 84,
    heterogeneous_seconds: 417.33,
    batch_seconds: 488.33,
    improvement_percent_range: (4.0, 15.0),
};
