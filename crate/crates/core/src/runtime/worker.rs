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

//! Worker rank daemon.
//!
//! Each worker is a stateless sequential actor: it blocks on its control
//! mailbox, executes one assignment at a time on its own thread, and goes
//! back to waiting. Grouping is entirely the master's job. All failure
//! modes of an assignment (operator errors, communication errors, panics)
//! are contained here and reported by the group leader; a failed task never
//! takes the worker down.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use crate::comm::Communicator;
use crate::ops;
use crate::table::{generate, Table};
use crate::util::fold_digest;

use super::protocol::{self, Assignment, ControlMsg, ResultMsg, CONTROL_TAG, RESULT_TAG};
use super::{OpParams, TaskDescription, TimingRecord};

/// Seed offset separating a join task's right-side table stream from its
/// left side. The right table's base seed is `gen.seed + JOIN_RIGHT_SEED_OFFSET`.
pub const JOIN_RIGHT_SEED_OFFSET: u64 = crate::util::SPLITMIX64_GAMMA;

/// Run the worker daemon until a shutdown message arrives.
pub(crate) fn worker_loop(comm: Communicator, master_rank: usize) {
    loop {
        let bytes = match comm.recv_bytes(master_rank, CONTROL_TAG, None) {
            Ok(b) => b,
            Err(e) => {
                log::warn!("worker {}: control channel lost: {e}", comm.rank());
                return;
            }
        };
        match protocol::decode::<ControlMsg>(&bytes) {
            Ok(ControlMsg::Shutdown) => return,
            Ok(ControlMsg::Assign(assignment)) => run_assignment(&comm, master_rank, &assignment),
            Err(e) => log::warn!("worker {}: {e}", comm.rank()),
        }
    }
}

/// Execute one assignment on this member rank; the group leader reports
/// the outcome to the master.
fn run_assignment(world: &Communicator, master_rank: usize, assignment: &Assignment) {
    let my_world_rank = world.rank();
    let leader = assignment.members.first() == Some(&my_world_rank);

    let outcome = catch_unwind(AssertUnwindSafe(|| execute(world, assignment)));
    let outcome = match outcome {
        Ok(res) => res,
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "task panicked".to_string());
            Err(format!("task panicked: {msg}"))
        }
    };

    if !leader {
        return;
    }
    let uid = decode_uid(&assignment.task_wire);
    let msg = match outcome {
        Ok((records, output_digest)) => ResultMsg {
            uid,
            records,
            output_digest,
            error: None,
        },
        Err(error) => ResultMsg {
            uid,
            records: Vec::new(),
            output_digest: None,
            error: Some(error),
        },
    };
    if let Err(e) = world.send_bytes(master_rank, RESULT_TAG, protocol::encode(&msg)) {
        log::warn!("worker {my_world_rank}: cannot report result: {e}");
    }
}

fn decode_uid(task_wire: &str) -> String {
    serde_json::from_str::<TaskDescription>(task_wire)
        .map(|t| t.uid)
        .unwrap_or_else(|_| "<undecodable>".to_string())
}

type ExecOutcome = Result<(Vec<TimingRecord>, Option<String>), String>;

/// The member-side execution path: decode the task (timed), split the
/// private group off the world (timed), generate inputs, then run the
/// operation for the configured iteration count, all under BSP discipline.
fn execute(world: &Communicator, assignment: &Assignment) -> ExecOutcome {
    let t0 = Instant::now();
    let task: TaskDescription =
        serde_json::from_str(&assignment.task_wire).map_err(|e| format!("bad task wire: {e}"))?;
    let t_deserialize = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let group = world
        .split(&assignment.members)
        .map_err(|e| format!("group construction failed: {e}"))?
        .ok_or("placed rank missing from member list")?;
    let t_comm_construct = t1.elapsed().as_secs_f64();

    // Phase boundary between group construction and data setup: no member
    // may start generating (and hogging a core) while others are still
    // inside the construction window being measured above.
    group
        .barrier()
        .map_err(|e| format!("post-construction barrier failed: {e}"))?;

    // Inputs are generated in place from the task's GenSpec, with the seed
    // offset by the new group rank so every member holds a distinct
    // partition of the task's data.
    let rank_gen = task.gen.with_seed_offset(group.rank() as u64);
    let inputs: Option<(Table, Option<Table>)> = match &task.op_params {
        OpParams::Join(_) => {
            let right_gen = task
                .gen
                .with_seed_offset(JOIN_RIGHT_SEED_OFFSET)
                .with_seed_offset(group.rank() as u64);
            Some((generate(&rank_gen), Some(generate(&right_gen))))
        }
        OpParams::Sort(_) => Some((generate(&rank_gen), None)),
        OpParams::Sleep { .. } => None,
    };

    let mut records = Vec::with_capacity(assignment.iterations);
    let mut last_output: Option<Table> = None;
    for iteration in 0..assignment.iterations {
        let t2 = Instant::now();
        let output = match (&task.op_params, &inputs) {
            (OpParams::Join(spec), Some((left, Some(right)))) => {
                Some(ops::dist_join(&group, left, right, spec).map_err(|e| e.to_string())?)
            }
            (OpParams::Sort(spec), Some((table, None))) => {
                Some(ops::dist_sort(&group, table, spec).map_err(|e| e.to_string())?)
            }
            (OpParams::Sleep { seconds }, None) => {
                std::thread::sleep(std::time::Duration::from_secs_f64(*seconds));
                None
            }
            _ => return Err("op params inconsistent with generated inputs".into()),
        };
        let local_execute = t2.elapsed().as_secs_f64();
        let times = group
            .allgather_scalars(local_execute)
            .map_err(|e| format!("timing allgather failed: {e}"))?;
        let t_execute = times.iter().copied().fold(0.0f64, f64::max);
        records.push(TimingRecord {
            uid: task.uid.clone(),
            op_kind: task.op_kind,
            ranks: group.size(),
            iteration,
            t_deserialize,
            t_comm_construct,
            t_execute,
            t_total: t_deserialize + t_comm_construct + t_execute,
        });
        last_output = output;
    }

    // Correctness fingerprint: the global output gathered at the leader
    // and digested in canonical row order. Canonicalizing makes the
    // fingerprint a pure function of the output row multiset, so a
    // reference implementation can predict it without knowing how rows
    // were partitioned across ranks.
    let output_digest = match &last_output {
        Some(table) if assignment.fingerprint => group
            .gather(table, 0)
            .map_err(|e| format!("output gather failed: {e}"))?
            .map(|global| canonical_output_digest(&global)),
        _ => None,
    };

    // Release all bulk state before the closing barrier: once any rank
    // leaves the task, every rank's cleanup is already done, so the next
    // task placed on these ranks never contends with stale teardown.
    drop(last_output);
    drop(inputs);

    group
        .barrier()
        .map_err(|e| format!("closing barrier failed: {e}"))?;
    Ok((records, output_digest))
}

/// The fingerprint a task reports for its global output: the table's rows
/// in canonical order, encoded and folded. Equal row multisets yield equal
/// digests, which is what lets tests compare a task's digest against an
/// independently computed reference output.
pub fn canonical_output_digest(global_output: &Table) -> String {
    let canonical = global_output.canonicalized();
    let digest = fold_digest(0, &crate::comm::payload::encode_table(&canonical));
    format!("{digest:016x}")
}
