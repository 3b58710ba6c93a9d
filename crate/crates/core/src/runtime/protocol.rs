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

//! Control-plane message formats.
//!
//! Control traffic rides the same transport as the data plane, on the world
//! group, using tags in the reserved high range (bit 31 set) so they can
//! never collide with collective phase tags. Messages from the master to a
//! given worker share one tag and therefore arrive in FIFO order.

use serde::{Deserialize, Serialize};

use super::{TaskDescription, TimingRecord};

/// Master -> worker: assignments and shutdown, strictly ordered per worker.
pub(crate) const CONTROL_TAG: u32 = 0x8000_0001;
/// Worker (group leader) -> master: task results.
pub(crate) const RESULT_TAG: u32 = 0x8000_0002;

#[derive(Debug, Serialize, Deserialize)]
pub(crate) enum ControlMsg {
    Assign(Assignment),
    Shutdown,
}

/// One placed task, as delivered to every member rank.
///
/// `task_wire` is the task description's wire form; workers time its
/// decoding as the task's deserialization overhead.
#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct Assignment {
    /// Member world ranks, ascending; position in this list is the member's
    /// rank in the private group.
    pub members: Vec<usize>,
    pub iterations: usize,
    pub fingerprint: bool,
    pub task_wire: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct ResultMsg {
    pub uid: String,
    pub records: Vec<TimingRecord>,
    pub output_digest: Option<String>,
    pub error: Option<String>,
}

pub(crate) fn encode<T: Serialize>(msg: &T) -> Vec<u8> {
    serde_json::to_vec(msg).expect("control messages serialize")
}

pub(crate) fn decode<'a, T: Deserialize<'a>>(bytes: &'a [u8]) -> Result<T, String> {
    serde_json::from_slice(bytes).map_err(|e| format!("malformed control message: {e}"))
}

pub(crate) fn task_wire(task: &TaskDescription) -> String {
    serde_json::to_string(task).expect("task descriptions serialize")
}
