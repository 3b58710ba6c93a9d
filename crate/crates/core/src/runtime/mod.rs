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

//! Pilot-style runtime: a pool of worker ranks, one master.
//!
//! Starting a pilot establishes a world communicator over the requested
//! backend (the master occupies one extra hidden rank), spawns one worker
//! daemon per rank, and leaves the whole pool free. Submitted tasks flow
//! `NEW -> SCHEDULED -> EXECUTING -> DONE | FAILED`; the master places
//! them with a FIFO-plus-backfill policy and each placed task gets a
//! private communicator group split from the world at execution time, so
//! tasks on disjoint rank sets run fully concurrently and in isolation.
//!
//! Batch mode is the comparison baseline: the pool is statically cut into
//! fixed lanes that each run their tasks sequentially and never lend their
//! ranks to another lane, even when idle.

mod master;
mod protocol;
mod scheduler;
mod worker;

pub use scheduler::{schedule_step, Placement, RankSlot, ResourceLedger};
pub use worker::{canonical_output_digest, JOIN_RIGHT_SEED_OFFSET};

use std::collections::HashSet;
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::comm::{init_world, Backend, CommError, WorldConfig, DEFAULT_TIMEOUT};
use crate::ops::{JoinSpec, SortSpec};
use crate::table::GenSpec;

use master::{master_loop, MasterCmd, MasterCtx};

/// The resource pool request: how many worker ranks, over which transport.
/// For TCP, `endpoints` may list one `host:port` per rank plus one for the
/// master (total_ranks + 1 entries); leave it empty for loopback with
/// OS-assigned ports.
#[derive(Debug, Clone)]
pub struct PilotDescription {
    pub total_ranks: usize,
    pub backend: Backend,
    pub endpoints: Vec<String>,
}

impl PilotDescription {
    pub fn in_process(total_ranks: usize) -> Self {
        Self { total_ranks, backend: Backend::InProcess, endpoints: Vec::new() }
    }

    pub fn tcp(total_ranks: usize) -> Self {
        Self { total_ranks, backend: Backend::Tcp, endpoints: Vec::new() }
    }
}

/// Runtime tuning knobs that are not part of the resource request.
#[derive(Debug, Clone)]
pub struct PilotOptions {
    /// Operator iterations per task; timing is recorded per iteration.
    pub iterations: usize,
    /// Collective and control-plane timeout.
    pub comm_timeout: Duration,
    /// Master poll interval for its event loop.
    pub poll_interval: Duration,
    /// Compute the canonical output fingerprint per task. Costs one gather
    /// of the full output plus a canonical sort at the group leader; timing
    /// probes that do not check correctness can turn it off.
    pub fingerprint_outputs: bool,
}

impl Default for PilotOptions {
    fn default() -> Self {
        Self {
            iterations: 10,
            comm_timeout: DEFAULT_TIMEOUT,
            poll_interval: Duration::from_millis(2),
            fingerprint_outputs: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Join,
    Sort,
    SyntheticSleep,
}

impl std::fmt::Display for OpKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OpKind::Join => write!(f, "join"),
            OpKind::Sort => write!(f, "sort"),
            OpKind::SyntheticSleep => write!(f, "synthetic_sleep"),
        }
    }
}

/// Operator parameters matching the task's `op_kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpParams {
    Join(JoinSpec),
    Sort(SortSpec),
    Sleep { seconds: f64 },
}

/// Declarative unit of work submitted to the runtime.
///
/// `gen` describes each member rank's input partition; workers generate
/// data in place with the seed offset by their private-group rank rather
/// than shipping tables through the control plane.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskDescription {
    pub uid: String,
    pub op_kind: OpKind,
    pub ranks_required: usize,
    pub gen: GenSpec,
    pub op_params: OpParams,
    /// Seconds since pilot start; stamped at submission.
    pub submit_time: f64,
}

impl TaskDescription {
    pub fn join(uid: impl Into<String>, ranks_required: usize, gen: GenSpec) -> Self {
        Self {
            uid: uid.into(),
            op_kind: OpKind::Join,
            ranks_required,
            gen,
            op_params: OpParams::Join(JoinSpec::default()),
            submit_time: 0.0,
        }
    }

    pub fn sort(uid: impl Into<String>, ranks_required: usize, gen: GenSpec) -> Self {
        Self {
            uid: uid.into(),
            op_kind: OpKind::Sort,
            ranks_required,
            gen,
            op_params: OpParams::Sort(SortSpec::default()),
            submit_time: 0.0,
        }
    }

    pub fn sleep(uid: impl Into<String>, ranks_required: usize, seconds: f64) -> Self {
        Self {
            uid: uid.into(),
            op_kind: OpKind::SyntheticSleep,
            ranks_required,
            gen: GenSpec::new(0, 0, 1, 1),
            op_params: OpParams::Sleep { seconds },
            submit_time: 0.0,
        }
    }
}

/// Task lifecycle states; transitions are monotone
/// `NEW -> SCHEDULED -> EXECUTING -> (DONE | FAILED)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskState {
    New,
    Scheduled,
    Executing,
    Done,
    Failed,
}

impl TaskState {
    pub fn is_terminal(self) -> bool {
        matches!(self, TaskState::Done | TaskState::Failed)
    }

    /// Position in the lifecycle order, for monotonicity checks.
    pub fn order(self) -> u8 {
        match self {
            TaskState::New => 0,
            TaskState::Scheduled => 1,
            TaskState::Executing => 2,
            TaskState::Done | TaskState::Failed => 3,
        }
    }
}

impl std::fmt::Display for TaskState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TaskState::New => write!(f, "NEW"),
            TaskState::Scheduled => write!(f, "SCHEDULED"),
            TaskState::Executing => write!(f, "EXECUTING"),
            TaskState::Done => write!(f, "DONE"),
            TaskState::Failed => write!(f, "FAILED"),
        }
    }
}

/// One observed state transition.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskEvent {
    pub timestamp: f64,
    pub uid: String,
    pub state: TaskState,
    pub ranks: usize,
}

impl TaskEvent {
    /// The state-transition log line format:
    /// `timestamp,uid,state,ranks`, timestamp in seconds since pilot start
    /// with six decimal places.
    pub fn log_line(&self) -> String {
        format!("{:.6},{},{},{}", self.timestamp, self.uid, self.state, self.ranks)
    }
}

/// Per-iteration, per-phase timing of one task.
///
/// `t_deserialize` and `t_comm_construct` are one-time costs measured on
/// the group leader and repeated on every iteration row; `t_execute` is the
/// maximum per-rank operator time for that iteration, agreed via an
/// allgather. `t_total` is the sum of the three, so it never undercuts
/// `t_deserialize + t_comm_construct`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub uid: String,
    pub op_kind: OpKind,
    pub ranks: usize,
    pub iteration: usize,
    pub t_deserialize: f64,
    pub t_comm_construct: f64,
    pub t_execute: f64,
    pub t_total: f64,
}

/// Terminal outcome of a task.
#[derive(Debug, Clone)]
pub struct TaskResult {
    pub uid: String,
    pub state: TaskState,
    pub records: Vec<TimingRecord>,
    /// Fingerprint of the per-rank outputs folded in rank order; `None`
    /// for sleep tasks and failures.
    pub output_digest: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("task {uid}: {reason}")]
    InvalidTask { uid: String, reason: String },
    #[error("task uid `{0}` already used in this session")]
    DuplicateUid(String),
    #[error("task {uid} needs {required} ranks but the pilot has {total}")]
    RanksExceedPool {
        uid: String,
        required: usize,
        total: usize,
    },
    #[error("batch lanes need {required} ranks but the pilot has {total}")]
    LaneOversubscribed { required: usize, total: usize },
    #[error("batch run rejected: {0}")]
    BatchRejected(String),
    #[error("the master daemon is gone")]
    MasterGone,
    #[error(transparent)]
    Comm(#[from] CommError),
}

/// Stream handle returned by [`Pilot::submit`]: a per-task ordered event
/// stream plus the terminal results.
pub struct SubmitHandle {
    pub events: Receiver<TaskEvent>,
    results: Receiver<TaskResult>,
    expected: usize,
}

impl SubmitHandle {
    /// Block until every submitted task is terminal; results arrive in
    /// completion order. Call once per handle — the events stream stays
    /// readable afterwards.
    pub fn wait(&self) -> Result<Vec<TaskResult>, RuntimeError> {
        let mut out = Vec::with_capacity(self.expected);
        for _ in 0..self.expected {
            out.push(self.results.recv().map_err(|_| RuntimeError::MasterGone)?);
        }
        Ok(out)
    }
}

/// A running pilot: the world, the master daemon, and one worker daemon
/// per rank.
pub struct Pilot {
    cmd_tx: Sender<MasterCmd>,
    master: Option<JoinHandle<()>>,
    workers: Vec<JoinHandle<()>>,
    start: Instant,
    transitions: Arc<Mutex<Vec<TaskEvent>>>,
    uids: Mutex<HashSet<String>>,
    total_ranks: usize,
    backend: Backend,
}

pub fn start_pilot(desc: &PilotDescription) -> Result<Pilot, RuntimeError> {
    start_pilot_with(desc, PilotOptions::default())
}

pub fn start_pilot_with(
    desc: &PilotDescription,
    options: PilotOptions,
) -> Result<Pilot, RuntimeError> {
    if desc.total_ranks == 0 {
        return Err(RuntimeError::InvalidTask {
            uid: "<pilot>".into(),
            reason: "total_ranks must be >= 1".into(),
        });
    }
    let world_size = desc.total_ranks + 1; // workers + master
    let endpoints = match desc.backend {
        Backend::InProcess => Vec::new(),
        Backend::Tcp => {
            if desc.endpoints.is_empty() {
                vec!["127.0.0.1:0".to_string(); world_size]
            } else if desc.endpoints.len() == world_size {
                desc.endpoints.clone()
            } else {
                return Err(RuntimeError::Comm(CommError::InvalidConfig(format!(
                    "need {world_size} endpoints (one per worker plus the master), got {}",
                    desc.endpoints.len()
                ))));
            }
        }
    };
    let config = WorldConfig {
        backend: desc.backend,
        world_size,
        endpoints,
        timeout: options.comm_timeout,
    };
    let mut handles = init_world(&config)?;
    let master_comm = handles.pop().expect("world has the master rank");
    let master_rank = desc.total_ranks;

    let workers: Vec<JoinHandle<()>> = handles
        .into_iter()
        .enumerate()
        .map(|(rank, comm)| {
            std::thread::Builder::new()
                .name(format!("worker-{rank}"))
                .spawn(move || worker::worker_loop(comm, master_rank))
                .expect("spawn worker thread")
        })
        .collect();

    let start = Instant::now();
    let transitions = Arc::new(Mutex::new(Vec::new()));
    let (cmd_tx, cmd_rx) = channel();
    let ctx = MasterCtx {
        comm: master_comm,
        worker_count: desc.total_ranks,
        cmd_rx,
        start,
        iterations: options.iterations,
        fingerprint: options.fingerprint_outputs,
        poll: options.poll_interval,
        transitions: transitions.clone(),
    };
    let master = std::thread::Builder::new()
        .name("master".into())
        .spawn(move || master_loop(ctx))
        .expect("spawn master thread");

    Ok(Pilot {
        cmd_tx,
        master: Some(master),
        workers,
        start,
        transitions,
        uids: Mutex::new(HashSet::new()),
        total_ranks: desc.total_ranks,
        backend: desc.backend,
    })
}

impl Pilot {
    pub fn total_ranks(&self) -> usize {
        self.total_ranks
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    /// Seconds since pilot start.
    pub fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    fn validate(&self, task: &TaskDescription, fresh: &mut HashSet<String>) -> Result<(), RuntimeError> {
        let uid = task.uid.clone();
        if uid.is_empty() {
            return Err(RuntimeError::InvalidTask { uid, reason: "uid must not be empty".into() });
        }
        if self.uids.lock().unwrap().contains(&uid) || !fresh.insert(uid.clone()) {
            return Err(RuntimeError::DuplicateUid(uid));
        }
        if task.ranks_required == 0 {
            return Err(RuntimeError::InvalidTask {
                uid,
                reason: "ranks_required must be >= 1".into(),
            });
        }
        if task.ranks_required > self.total_ranks {
            return Err(RuntimeError::RanksExceedPool {
                uid,
                required: task.ranks_required,
                total: self.total_ranks,
            });
        }
        task.gen
            .validate()
            .map_err(|reason| RuntimeError::InvalidTask { uid: uid.clone(), reason })?;
        match (&task.op_kind, &task.op_params) {
            (OpKind::Join, OpParams::Join(_)) => Ok(()),
            (OpKind::Sort, OpParams::Sort(spec)) => spec.validate().map_err(|e| {
                RuntimeError::InvalidTask { uid: uid.clone(), reason: e.to_string() }
            }),
            (OpKind::SyntheticSleep, OpParams::Sleep { seconds }) => {
                if seconds.is_finite() && *seconds >= 0.0 {
                    Ok(())
                } else {
                    Err(RuntimeError::InvalidTask {
                        uid: uid.clone(),
                        reason: "sleep seconds must be finite and non-negative".into(),
                    })
                }
            }
            _ => Err(RuntimeError::InvalidTask {
                uid: uid.clone(),
                reason: "op_kind does not match op_params".into(),
            }),
        }
    }

    fn commit_uids(&self, fresh: HashSet<String>) {
        self.uids.lock().unwrap().extend(fresh);
    }

    /// Submit tasks for heterogeneous scheduling. All descriptions are
    /// validated synchronously; any invalid one rejects the whole call and
    /// nothing is enqueued.
    pub fn submit(&self, mut tasks: Vec<TaskDescription>) -> Result<SubmitHandle, RuntimeError> {
        let mut fresh = HashSet::new();
        for task in &tasks {
            self.validate(task, &mut fresh)?;
        }
        self.commit_uids(fresh);
        let now = self.elapsed();
        for task in &mut tasks {
            task.submit_time = now;
        }
        let expected = tasks.len();
        let (events_tx, events_rx) = channel();
        let (results_tx, results_rx) = channel();
        self.cmd_tx
            .send(MasterCmd::Submit { tasks, events: events_tx, results: results_tx })
            .map_err(|_| RuntimeError::MasterGone)?;
        Ok(SubmitHandle { events: events_rx, results: results_rx, expected })
    }

    /// Run a batch schedule: one fixed rank lane per inner list, tasks
    /// within a lane strictly sequential, no rank reuse across lanes.
    /// Blocks until the whole batch completes and returns results in
    /// completion order.
    pub fn run_batch(
        &self,
        mut lanes: Vec<Vec<TaskDescription>>,
    ) -> Result<Vec<TaskResult>, RuntimeError> {
        let mut fresh = HashSet::new();
        let mut needed = 0usize;
        for lane in &lanes {
            for task in lane {
                self.validate(task, &mut fresh)?;
            }
            needed += lane.iter().map(|t| t.ranks_required).max().unwrap_or(0);
        }
        if needed > self.total_ranks {
            return Err(RuntimeError::LaneOversubscribed {
                required: needed,
                total: self.total_ranks,
            });
        }
        self.commit_uids(fresh);
        let now = self.elapsed();
        for lane in &mut lanes {
            for task in lane {
                task.submit_time = now;
            }
        }
        let (reply_tx, reply_rx) = channel();
        self.cmd_tx
            .send(MasterCmd::RunBatch { lanes, reply: reply_tx })
            .map_err(|_| RuntimeError::MasterGone)?;
        reply_rx
            .recv()
            .map_err(|_| RuntimeError::MasterGone)?
            .map_err(RuntimeError::BatchRejected)
    }

    /// Block until no task is pending or running.
    pub fn drain(&self) -> Result<(), RuntimeError> {
        let (tx, rx) = channel();
        self.cmd_tx
            .send(MasterCmd::Drain { reply: tx })
            .map_err(|_| RuntimeError::MasterGone)?;
        rx.recv().map_err(|_| RuntimeError::MasterGone)
    }

    /// Current per-rank occupancy, as seen by the master.
    pub fn ledger_snapshot(&self) -> Result<Vec<RankSlot>, RuntimeError> {
        let (tx, rx) = channel();
        self.cmd_tx
            .send(MasterCmd::Snapshot { reply: tx })
            .map_err(|_| RuntimeError::MasterGone)?;
        rx.recv().map_err(|_| RuntimeError::MasterGone)
    }

    /// Snapshot of every state transition recorded so far.
    pub fn transitions(&self) -> Vec<TaskEvent> {
        self.transitions.lock().unwrap().clone()
    }

    /// Stop scheduling, wait for running tasks, and tear the pilot down.
    pub fn shutdown(mut self) {
        self.shutdown_inner();
    }

    fn shutdown_inner(&mut self) {
        if let Some(master) = self.master.take() {
            let _ = self.cmd_tx.send(MasterCmd::Shutdown);
            let _ = master.join();
            for w in self.workers.drain(..) {
                let _ = w.join();
            }
        }
    }
}

impl Drop for Pilot {
    fn drop(&mut self) {
        self.shutdown_inner();
    }
}

/// Wall-clock span of a task set from its first placement to its last
/// terminal event, computed from the transition log. `None` when any of
/// the uids lacks a placement or terminal event.
pub fn makespan(events: &[TaskEvent], uids: &[String]) -> Option<f64> {
    let mut first_scheduled = f64::INFINITY;
    let mut last_terminal = f64::NEG_INFINITY;
    for uid in uids {
        let scheduled = events
            .iter()
            .find(|e| &e.uid == uid && e.state == TaskState::Scheduled)?;
        let terminal = events
            .iter()
            .find(|e| &e.uid == uid && e.state.is_terminal())?;
        first_scheduled = first_scheduled.min(scheduled.timestamp);
        last_terminal = last_terminal.max(terminal.timestamp);
    }
    (last_terminal >= first_scheduled).then_some(last_terminal - first_scheduled)
}

/// The generation spec a sort task's member rank uses for its partition.
pub fn sort_rank_gen(task_gen: &GenSpec, group_rank: usize) -> GenSpec {
    task_gen.with_seed_offset(group_rank as u64)
}

/// The (left, right) generation specs a join task's member rank uses.
pub fn join_rank_gens(task_gen: &GenSpec, group_rank: usize) -> (GenSpec, GenSpec) {
    (
        task_gen.with_seed_offset(group_rank as u64),
        task_gen
            .with_seed_offset(JOIN_RIGHT_SEED_OFFSET)
            .with_seed_offset(group_rank as u64),
    )
}
