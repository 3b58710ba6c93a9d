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

//! Master daemon: the single sequential actor that owns the ledger.
//!
//! The master multiplexes two event sources — client commands over an
//! in-process channel and worker results over the transport — in one poll
//! loop. Every scheduling decision, ledger mutation, and state transition
//! happens on this thread, so ledger safety needs no locking contract.

use std::collections::{HashMap, VecDeque};
use std::sync::mpsc::{Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use crate::comm::Communicator;

use super::protocol::{self, Assignment, ControlMsg, ResultMsg, CONTROL_TAG, RESULT_TAG};
use super::scheduler::{schedule_step, Placement, RankSlot, ResourceLedger};
use super::{TaskDescription, TaskEvent, TaskResult, TaskState};

pub(crate) enum MasterCmd {
    Submit {
        tasks: Vec<TaskDescription>,
        events: Sender<TaskEvent>,
        results: Sender<TaskResult>,
    },
    RunBatch {
        lanes: Vec<Vec<TaskDescription>>,
        reply: Sender<Result<Vec<TaskResult>, String>>,
    },
    Drain {
        reply: Sender<()>,
    },
    Snapshot {
        reply: Sender<Vec<RankSlot>>,
    },
    Shutdown,
}

struct Subscriber {
    events: Sender<TaskEvent>,
    results: Sender<TaskResult>,
}

struct RunningTask {
    task: TaskDescription,
    ranks: Vec<usize>,
    scheduled_at: f64,
    lane: Option<usize>,
}

struct LaneState {
    ranks: Vec<usize>,
    queue: VecDeque<TaskDescription>,
    current: Option<String>,
}

struct BatchRun {
    lanes: Vec<LaneState>,
    reply: Sender<Result<Vec<TaskResult>, String>>,
    results: Vec<TaskResult>,
}

pub(crate) struct MasterCtx {
    pub comm: Communicator,
    pub worker_count: usize,
    pub cmd_rx: Receiver<MasterCmd>,
    pub start: Instant,
    pub iterations: usize,
    pub fingerprint: bool,
    pub poll: std::time::Duration,
    pub transitions: Arc<Mutex<Vec<TaskEvent>>>,
}

pub(crate) fn master_loop(ctx: MasterCtx) {
    let mut m = Master {
        ledger: ResourceLedger::new(ctx.worker_count),
        pending: VecDeque::new(),
        running: HashMap::new(),
        subscribers: HashMap::new(),
        batch: None,
        drain_waiters: Vec::new(),
        shutdown: false,
        ctx,
    };
    m.run();
}

struct Master {
    ledger: ResourceLedger,
    pending: VecDeque<TaskDescription>,
    running: HashMap<String, RunningTask>,
    subscribers: HashMap<String, Subscriber>,
    batch: Option<BatchRun>,
    drain_waiters: Vec<Sender<()>>,
    shutdown: bool,
    ctx: MasterCtx,
}

impl Master {
    fn run(&mut self) {
        loop {
            while let Ok(cmd) = self.ctx.cmd_rx.try_recv() {
                self.handle_cmd(cmd);
            }
            if self.shutdown && self.running.is_empty() && self.batch.is_none() {
                break;
            }
            if let Some((_src, bytes)) = self.ctx.comm.recv_bytes_any(RESULT_TAG, self.ctx.poll) {
                match protocol::decode::<ResultMsg>(&bytes) {
                    Ok(msg) => self.handle_result(msg),
                    Err(e) => log::warn!("master: {e}"),
                }
            }
            self.schedule();
            self.notify_if_idle();
        }
        // Orderly worker shutdown.
        let msg = protocol::encode(&ControlMsg::Shutdown);
        for rank in 0..self.ctx.worker_count {
            let _ = self.ctx.comm.send_bytes(rank, CONTROL_TAG, msg.clone());
        }
    }

    fn now(&self) -> f64 {
        self.ctx.start.elapsed().as_secs_f64()
    }

    fn emit(&mut self, uid: &str, state: TaskState, ranks: usize) {
        let event = TaskEvent {
            timestamp: self.now(),
            uid: uid.to_string(),
            state,
            ranks,
        };
        self.ctx.transitions.lock().unwrap().push(event.clone());
        if let Some(sub) = self.subscribers.get(uid) {
            let _ = sub.events.send(event);
        }
    }

    fn handle_cmd(&mut self, cmd: MasterCmd) {
        match cmd {
            MasterCmd::Submit { tasks, events, results } => {
                for task in tasks {
                    let uid = task.uid.clone();
                    let ranks = task.ranks_required;
                    self.subscribers
                        .insert(uid.clone(), Subscriber { events: events.clone(), results: results.clone() });
                    self.pending.push_back(task);
                    self.emit(&uid, TaskState::New, ranks);
                }
            }
            MasterCmd::RunBatch { lanes, reply } => self.start_batch(lanes, reply),
            MasterCmd::Drain { reply } => self.drain_waiters.push(reply),
            MasterCmd::Snapshot { reply } => {
                let _ = reply.send(self.ledger.slots().to_vec());
            }
            MasterCmd::Shutdown => self.shutdown = true,
        }
    }

    fn notify_if_idle(&mut self) {
        if self.pending.is_empty() && self.running.is_empty() && self.batch.is_none() {
            for w in self.drain_waiters.drain(..) {
                let _ = w.send(());
            }
        }
    }

    fn schedule(&mut self) {
        if self.shutdown {
            return;
        }
        let placements = schedule_step(&mut self.ledger, &mut self.pending);
        for p in placements {
            self.dispatch(p, None);
        }
    }

    /// Send the assignment to every member and record the task as running.
    /// SCHEDULED marks the placement decision, EXECUTING the dispatch of
    /// work to the ranks.
    fn dispatch(&mut self, placement: Placement, lane: Option<usize>) {
        let Placement { task, ranks } = placement;
        let uid = task.uid.clone();
        self.emit(&uid, TaskState::Scheduled, ranks.len());
        let assignment = Assignment {
            members: ranks.clone(),
            iterations: self.ctx.iterations,
            fingerprint: self.ctx.fingerprint,
            task_wire: protocol::task_wire(&task),
        };
        let msg = protocol::encode(&ControlMsg::Assign(assignment));
        for &r in &ranks {
            if let Err(e) = self.ctx.comm.send_bytes(r, CONTROL_TAG, msg.clone()) {
                log::warn!("master: assign to rank {r} failed: {e}");
            }
        }
        self.running.insert(
            uid.clone(),
            RunningTask { task, ranks: ranks.clone(), scheduled_at: self.now(), lane },
        );
        self.emit(&uid, TaskState::Executing, ranks.len());
    }

    fn handle_result(&mut self, msg: ResultMsg) {
        let Some(running) = self.running.remove(&msg.uid) else {
            log::warn!("master: result for unknown task {}", msg.uid);
            return;
        };
        let release_to = match running.lane {
            Some(lane) => RankSlot::Reserved { lane },
            None => RankSlot::Free,
        };
        let freed = self.ledger.release(&msg.uid, release_to);
        debug_assert_eq!(freed.len(), running.ranks.len());
        self.ledger.check_invariants();

        let failed = msg.error.is_some();
        let state = if failed { TaskState::Failed } else { TaskState::Done };
        let mut records = msg.records;
        if records.is_empty() {
            // Terminal tasks always carry at least one timing record; for a
            // task that failed before producing any, synthesize one from the
            // master's own clock.
            records.push(super::TimingRecord {
                uid: msg.uid.clone(),
                op_kind: running.task.op_kind,
                ranks: running.ranks.len(),
                iteration: 0,
                t_deserialize: 0.0,
                t_comm_construct: 0.0,
                t_execute: 0.0,
                t_total: self.now() - running.scheduled_at,
            });
        }
        let result = TaskResult {
            uid: msg.uid.clone(),
            state,
            records,
            output_digest: msg.output_digest,
            error: msg.error,
        };
        self.emit(&msg.uid, state, running.ranks.len());

        if let Some(lane_idx) = running.lane {
            self.record_batch_result(lane_idx, result);
        } else if let Some(sub) = self.subscribers.remove(&msg.uid) {
            let _ = sub.results.send(result);
        }
    }

    // -- batch mode -------------------------------------------------------

    /// Statically partition the pool into fixed disjoint lanes, one rank
    /// block per lane, and run each lane's tasks sequentially on its own
    /// block. Ranks freed by a finished lane stay reserved and are never
    /// reused by other lanes.
    fn start_batch(
        &mut self,
        lanes: Vec<Vec<TaskDescription>>,
        reply: Sender<Result<Vec<TaskResult>, String>>,
    ) {
        if self.batch.is_some() {
            let _ = reply.send(Err("a batch run is already active".into()));
            return;
        }
        let widths: Vec<usize> = lanes
            .iter()
            .map(|lane| lane.iter().map(|t| t.ranks_required).max().unwrap_or(0))
            .collect();
        let needed: usize = widths.iter().sum();
        if needed > self.ledger.free_count() {
            let _ = reply.send(Err(format!(
                "batch lanes need {needed} ranks but only {} are free",
                self.ledger.free_count()
            )));
            return;
        }

        let mut lane_states = Vec::with_capacity(lanes.len());
        for (lane_idx, (tasks, width)) in lanes.into_iter().zip(&widths).enumerate() {
            let ranks = self.ledger.lowest_free(*width);
            self.ledger.reserve_lane(&ranks, lane_idx);
            for task in &tasks {
                let uid = task.uid.clone();
                self.emit(&uid, TaskState::New, task.ranks_required);
            }
            lane_states.push(LaneState {
                ranks,
                queue: VecDeque::from(tasks),
                current: None,
            });
        }
        self.ledger.check_invariants();
        self.batch = Some(BatchRun { lanes: lane_states, reply, results: Vec::new() });
        for lane_idx in 0..widths.len() {
            self.advance_lane(lane_idx);
        }
    }

    fn advance_lane(&mut self, lane_idx: usize) {
        let Some(batch) = &mut self.batch else { return };
        let lane = &mut batch.lanes[lane_idx];
        if lane.current.is_some() {
            return;
        }
        let Some(task) = lane.queue.pop_front() else { return };
        let ranks: Vec<usize> = lane.ranks[..task.ranks_required].to_vec();
        let uid = task.uid.clone();
        lane.current = Some(uid.clone());
        self.ledger.assign_in_lane(&ranks, lane_idx, &uid);
        self.dispatch(Placement { task, ranks }, Some(lane_idx));
    }

    fn record_batch_result(&mut self, lane_idx: usize, result: TaskResult) {
        let Some(batch) = &mut self.batch else { return };
        batch.lanes[lane_idx].current = None;
        batch.results.push(result);
        self.advance_lane(lane_idx);
        let all_done = self
            .batch
            .as_ref()
            .map(|b| {
                b.lanes
                    .iter()
                    .all(|l| l.current.is_none() && l.queue.is_empty())
            })
            .unwrap_or(false);
        if all_done {
            let batch = self.batch.take().unwrap();
            for lane_idx in 0..batch.lanes.len() {
                self.ledger.release_lane(lane_idx);
            }
            self.ledger.check_invariants();
            let _ = batch.reply.send(Ok(batch.results));
        }
    }
}
