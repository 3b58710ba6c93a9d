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

//! Scenario execution: drives the pilot runtime through the experiment
//! grid and aggregates timing statistics.

use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use deskpilot::runtime::{
    makespan, start_pilot_with, OpKind, Pilot, PilotDescription, PilotOptions, TaskDescription,
    TaskEvent, TaskResult, TaskState, TimingRecord,
};
use deskpilot::table::GenSpec;

use crate::host::{self, HostInfo};
use crate::mean_std;
use crate::scenario::{Mode, Scenario};

#[derive(Debug, Clone)]
pub struct GroupStat {
    pub op: OpKind,
    pub parallelism: usize,
    pub samples: usize,
    pub exec_mean: f64,
    pub exec_std: f64,
    pub comm_mean: f64,
    pub comm_std: f64,
    pub deser_mean: f64,
    pub deser_std: f64,
    /// Mean execution time at the smallest measured parallelism of the same
    /// op, divided by this group's mean.
    pub speedup: Option<f64>,
}

/// Heterogeneous-vs-batch comparison at one parallelism.
#[derive(Debug, Clone)]
pub struct PipelineStat {
    pub parallelism: usize,
    pub pool_ranks: usize,
    pub heterogeneous_makespan: Option<f64>,
    pub batch_makespan: Option<f64>,
    /// `(batch - heterogeneous) / batch`, in percent.
    pub improvement_percent: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Summary {
    pub scenario_name: String,
    pub mode: Mode,
    pub backend: deskpilot::comm::Backend,
    pub iterations: usize,
    pub seed: u64,
    pub host: HostInfo,
    pub cap: usize,
    pub groups: Vec<GroupStat>,
    pub pipelines: Vec<PipelineStat>,
    pub warnings: Vec<String>,
}

pub struct RunOutcome {
    pub records: Vec<TimingRecord>,
    pub transitions: Vec<TaskEvent>,
    /// Task uid to canonical output fingerprint: the scenario's correctness
    /// artifacts. Identical scenario and seed must reproduce these exactly.
    pub digests: Vec<(String, Option<String>)>,
    pub summary: Summary,
}

fn pilot_options(scenario: &Scenario) -> PilotOptions {
    PilotOptions {
        iterations: scenario.iterations,
        comm_timeout: Duration::from_secs(60),
        ..PilotOptions::default()
    }
}

fn gen_for(scenario: &Scenario, p: usize) -> GenSpec {
    let rows = scenario.rows_at(p);
    // Keys span the global row count, so a self-join expects about one
    // match per key.
    let key_range = (rows * p).max(1) as u64;
    GenSpec::new(rows, scenario.seed, key_range, 1)
}

fn task_for(op: OpKind, uid: String, p: usize, gen: GenSpec) -> TaskDescription {
    match op {
        OpKind::Join => TaskDescription::join(uid, p, gen),
        OpKind::Sort => TaskDescription::sort(uid, p, gen),
        OpKind::SyntheticSleep => TaskDescription::sleep(uid, p, 0.0),
    }
}

fn check_done(results: &[TaskResult]) -> Result<()> {
    for r in results {
        if r.state != TaskState::Done {
            bail!(
                "task {} failed: {}",
                r.uid,
                r.error.as_deref().unwrap_or("unknown cause")
            );
        }
    }
    Ok(())
}

/// The pool size a scenario needs at parallelism `p`: scaling modes give
/// every task the whole pool; pipeline modes run a join lane and a sort
/// lane side by side.
pub fn pool_ranks(mode: Mode, p: usize) -> usize {
    match mode {
        Mode::Weak | Mode::Strong => p,
        Mode::Heterogeneous | Mode::Batch => 2 * p,
    }
}

pub fn run_scenario(scenario: &Scenario, cap: usize) -> Result<RunOutcome> {
    scenario.validate().context("invalid scenario")?;
    let host = host::detect();
    for &p in &scenario.ranks {
        let pool = pool_ranks(scenario.mode, p);
        if pool > cap {
            bail!(
                "scenario `{}` needs {pool} ranks at parallelism {p}, above the \
                 oversubscription cap of {cap} (2x logical cores by default; raise it \
                 with --oversub-cap if you accept heavily oversubscribed timings)",
                scenario.name
            );
        }
    }

    let clock = Instant::now();
    let mut records: Vec<TimingRecord> = Vec::new();
    let mut transitions: Vec<TaskEvent> = Vec::new();
    let mut digests: Vec<(String, Option<String>)> = Vec::new();
    let mut pipelines: Vec<PipelineStat> = Vec::new();
    let mut warnings: Vec<String> = Vec::new();

    for &p in &scenario.ranks {
        if p > host.physical_cores {
            warnings.push(format!(
                "parallelism {p} exceeds the {} physical cores; timing curves at this \
                 point are advisory only",
                host.physical_cores
            ));
        }
        if scenario.mode == Mode::Strong && scenario.rows_at(p) < 1000 {
            warnings.push(format!(
                "strong scaling at parallelism {p} leaves only {} rows per rank; \
                 expect idle workers and degraded scaling in this regime",
                scenario.rows_at(p)
            ));
        }
        match scenario.mode {
            Mode::Weak | Mode::Strong => {
                run_scaling_point(scenario, p, clock, &mut records, &mut transitions, &mut digests)?;
            }
            Mode::Heterogeneous => {
                let stat = run_pipeline_point(
                    scenario, p, clock, true, &mut records, &mut transitions, &mut digests,
                )?;
                pipelines.push(stat);
            }
            Mode::Batch => {
                let stat = run_pipeline_point(
                    scenario, p, clock, false, &mut records, &mut transitions, &mut digests,
                )?;
                pipelines.push(stat);
            }
        }
    }

    let groups = group_stats(&records);
    if scenario.mode == Mode::Strong {
        warn_on_inversions(&groups, &mut warnings);
    }

    Ok(RunOutcome {
        summary: Summary {
            scenario_name: scenario.name.clone(),
            mode: scenario.mode,
            backend: scenario.backend,
            iterations: scenario.iterations,
            seed: scenario.seed,
            host,
            cap,
            groups,
            pipelines,
            warnings,
        },
        records,
        transitions,
        digests,
    })
}

fn start_point_pilot(scenario: &Scenario, pool: usize) -> Result<Pilot> {
    let desc = PilotDescription {
        total_ranks: pool,
        backend: scenario.backend,
        endpoints: scenario.endpoints.clone(),
    };
    start_pilot_with(&desc, pilot_options(scenario)).context("pilot startup failed")
}

fn absorb_transitions(
    sink: &mut Vec<TaskEvent>,
    pilot: &Pilot,
    epoch: f64,
) {
    sink.extend(pilot.transitions().into_iter().map(|mut e| {
        e.timestamp += epoch;
        e
    }));
}

fn run_scaling_point(
    scenario: &Scenario,
    p: usize,
    clock: Instant,
    records: &mut Vec<TimingRecord>,
    transitions: &mut Vec<TaskEvent>,
    digests: &mut Vec<(String, Option<String>)>,
) -> Result<()> {
    let epoch = clock.elapsed().as_secs_f64();
    let pilot = start_point_pilot(scenario, pool_ranks(scenario.mode, p))?;
    let tasks: Vec<TaskDescription> = scenario
        .ops
        .iter()
        .map(|&op| task_for(op, format!("{op}-p{p}"), p, gen_for(scenario, p)))
        .collect();
    let results = pilot.submit(tasks)?.wait()?;
    check_done(&results)?;
    for r in &results {
        records.extend(r.records.iter().cloned());
        digests.push((r.uid.clone(), r.output_digest.clone()));
    }
    absorb_transitions(transitions, &pilot, epoch);
    pilot.shutdown();
    Ok(())
}

/// One pipeline comparison point. Always runs the batch schedule; also runs
/// the heterogeneous schedule when `with_hetero` is set, on a fresh pool of
/// the same size (resource parity between the two modes).
fn run_pipeline_point(
    scenario: &Scenario,
    p: usize,
    clock: Instant,
    with_hetero: bool,
    records: &mut Vec<TimingRecord>,
    transitions: &mut Vec<TaskEvent>,
    digests: &mut Vec<(String, Option<String>)>,
) -> Result<PipelineStat> {
    let pool = pool_ranks(scenario.mode, p);
    let gen = gen_for(scenario, p);

    // One lane per operator class; the first class carries a trailing task
    // so the lanes are deliberately imbalanced and heterogeneous scheduling
    // has a freed-rank window to exploit.
    let lane_tasks = |tag: &str| -> Vec<Vec<TaskDescription>> {
        let mut lanes: Vec<Vec<TaskDescription>> = Vec::new();
        for (i, &op) in scenario.ops.iter().enumerate() {
            let mut lane = vec![task_for(
                op,
                format!("{tag}-{op}-p{p}"),
                p,
                gen.clone(),
            )];
            if i == 0 {
                lane.push(task_for(
                    op,
                    format!("{tag}-{op}-trail-p{p}"),
                    p,
                    gen.clone(),
                ));
            }
            lanes.push(lane);
        }
        lanes
    };

    // Batch leg.
    let epoch = clock.elapsed().as_secs_f64();
    let pilot = start_point_pilot(scenario, pool)?;
    let lanes = lane_tasks("batch");
    let batch_uids: Vec<String> = lanes
        .iter()
        .flatten()
        .map(|t| t.uid.clone())
        .collect();
    let results = pilot.run_batch(lanes)?;
    check_done(&results)?;
    for r in &results {
        records.extend(r.records.iter().cloned());
        digests.push((r.uid.clone(), r.output_digest.clone()));
    }
    let batch_events = pilot.transitions();
    let batch_makespan = makespan(&batch_events, &batch_uids);
    absorb_transitions(transitions, &pilot, epoch);
    pilot.shutdown();

    // Heterogeneous leg: same tasks, one shared pool.
    let mut heterogeneous_makespan = None;
    if with_hetero {
        let epoch = clock.elapsed().as_secs_f64();
        let pilot = start_point_pilot(scenario, pool)?;
        let tasks: Vec<TaskDescription> = lane_tasks("hetero").into_iter().flatten().collect();
        let uids: Vec<String> = tasks.iter().map(|t| t.uid.clone()).collect();
        let results = pilot.submit(tasks)?.wait()?;
        check_done(&results)?;
        for r in &results {
            records.extend(r.records.iter().cloned());
            digests.push((r.uid.clone(), r.output_digest.clone()));
        }
        let events = pilot.transitions();
        heterogeneous_makespan = makespan(&events, &uids);
        absorb_transitions(transitions, &pilot, epoch);
        pilot.shutdown();
    }

    let improvement_percent = match (batch_makespan, heterogeneous_makespan) {
        (Some(b), Some(h)) if b > 0.0 => Some((b - h) / b * 100.0),
        _ => None,
    };
    Ok(PipelineStat {
        parallelism: p,
        pool_ranks: pool,
        heterogeneous_makespan,
        batch_makespan,
        improvement_percent,
    })
}

/// Aggregate per (op, parallelism): mean ± sample std over all recorded
/// iterations, plus strong-scaling speedups relative to the smallest
/// parallelism of the same op.
pub fn group_stats(records: &[TimingRecord]) -> Vec<GroupStat> {
    let mut keys: Vec<(OpKind, usize)> = records
        .iter()
        .map(|r| (r.op_kind, r.ranks))
        .collect();
    keys.sort_by_key(|&(op, p)| (format!("{op}"), p));
    keys.dedup();

    let mut groups: Vec<GroupStat> = keys
        .into_iter()
        .map(|(op, p)| {
            let of = |f: fn(&TimingRecord) -> f64| -> Vec<f64> {
                records
                    .iter()
                    .filter(|r| r.op_kind == op && r.ranks == p)
                    .map(f)
                    .collect()
            };
            let exec = of(|r| r.t_execute);
            let comm = of(|r| r.t_comm_construct);
            let deser = of(|r| r.t_deserialize);
            let (exec_mean, exec_std) = mean_std(&exec);
            let (comm_mean, comm_std) = mean_std(&comm);
            let (deser_mean, deser_std) = mean_std(&deser);
            GroupStat {
                op,
                parallelism: p,
                samples: exec.len(),
                exec_mean,
                exec_std,
                comm_mean,
                comm_std,
                deser_mean,
                deser_std,
                speedup: None,
            }
        })
        .collect();

    let ops: Vec<OpKind> = {
        let mut v: Vec<OpKind> = groups.iter().map(|g| g.op).collect();
        v.dedup();
        v
    };
    for op in ops {
        let base = groups
            .iter()
            .filter(|g| g.op == op)
            .min_by_key(|g| g.parallelism)
            .map(|g| (g.parallelism, g.exec_mean));
        if let Some((base_p, base_mean)) = base {
            for g in groups.iter_mut().filter(|g| g.op == op) {
                if g.parallelism != base_p && g.exec_mean > 0.0 {
                    g.speedup = Some(base_mean / g.exec_mean);
                }
            }
        }
    }
    groups
}

fn warn_on_inversions(groups: &[GroupStat], warnings: &mut Vec<String>) {
    let mut by_op: std::collections::HashMap<OpKind, Vec<&GroupStat>> = Default::default();
    for g in groups {
        by_op.entry(g.op).or_default().push(g);
    }
    for (op, mut gs) in by_op {
        gs.sort_by_key(|g| g.parallelism);
        for pair in gs.windows(2) {
            if pair[1].exec_mean > pair[0].exec_mean {
                warnings.push(format!(
                    "strong-scaling inversion for {op}: mean execute time rises from \
                     {:.4}s at P={} to {:.4}s at P={}",
                    pair[0].exec_mean, pair[0].parallelism, pair[1].exec_mean, pair[1].parallelism
                ));
            }
        }
    }
}
