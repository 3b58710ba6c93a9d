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

//! In-process transport: one shared hub routing messages straight into the
//! destination rank's mailbox. Payload bytes take exactly the same encode
//! and decode path as the TCP backend, which keeps the two backends
//! bit-equivalent; only the framing and sockets are skipped.

use std::sync::Arc;

use super::mailbox::{Key, Mailbox};

pub(crate) struct Hub {
    mailboxes: Vec<Arc<Mailbox>>,
}

impl Hub {
    pub fn new(world_size: usize) -> Arc<Hub> {
        Arc::new(Hub {
            mailboxes: (0..world_size)
                .map(|_| Arc::new(Mailbox::new(world_size)))
                .collect(),
        })
    }

    pub fn mailbox(&self, world_rank: usize) -> &Arc<Mailbox> {
        &self.mailboxes[world_rank]
    }

    pub fn deliver(&self, world_dst: usize, key: Key, payload: Vec<u8>) {
        self.mailboxes[world_dst].push(key, payload);
    }
}
