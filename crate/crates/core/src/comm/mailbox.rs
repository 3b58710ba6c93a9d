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

//! Per-rank keyed mailbox.
//!
//! Incoming messages are queued under their full routing key
//! `(group, tag, src, dst)`; receivers block until a matching message
//! arrives, a deadline passes, or the awaited peer is known to be down.
//! Keying by group id is what isolates sibling groups: a message tagged
//! with one group id can never satisfy a receive in another.

use std::collections::{HashMap, VecDeque};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use super::GroupId;

pub(crate) type Key = (GroupId, u32, u32, u32);

#[derive(Debug)]
pub(crate) enum RecvError {
    Timeout,
    PeerDown(usize),
}

struct State {
    queues: HashMap<Key, VecDeque<Vec<u8>>>,
    peer_down: Vec<bool>,
}

pub(crate) struct Mailbox {
    state: Mutex<State>,
    cv: Condvar,
}

impl Mailbox {
    pub fn new(world_size: usize) -> Self {
        Self {
            state: Mutex::new(State {
                queues: HashMap::new(),
                peer_down: vec![false; world_size],
            }),
            cv: Condvar::new(),
        }
    }

    pub fn push(&self, key: Key, payload: Vec<u8>) {
        let mut st = self.state.lock().unwrap();
        st.queues.entry(key).or_default().push_back(payload);
        self.cv.notify_all();
    }

    /// Record that a peer's link failed; wakes all waiters so receives
    /// blocked on that peer can error out.
    pub fn mark_peer_down(&self, world_rank: usize) {
        let mut st = self.state.lock().unwrap();
        if let Some(flag) = st.peer_down.get_mut(world_rank) {
            *flag = true;
        }
        self.cv.notify_all();
    }

    /// Blocking receive for an exact key. `src_world` is the world rank
    /// behind the key's source, used for failure detection. A `deadline` of
    /// `None` waits indefinitely.
    pub fn recv(
        &self,
        key: Key,
        src_world: usize,
        deadline: Option<Instant>,
    ) -> Result<Vec<u8>, RecvError> {
        let mut st = self.state.lock().unwrap();
        loop {
            if let Some(q) = st.queues.get_mut(&key) {
                if let Some(payload) = q.pop_front() {
                    if q.is_empty() {
                        st.queues.remove(&key);
                    }
                    return Ok(payload);
                }
            }
            if st.peer_down.get(src_world).copied().unwrap_or(false) {
                return Err(RecvError::PeerDown(src_world));
            }
            st = match deadline {
                None => self.cv.wait(st).unwrap(),
                Some(d) => {
                    let now = Instant::now();
                    if now >= d {
                        return Err(RecvError::Timeout);
                    }
                    self.cv.wait_timeout(st, d - now).unwrap().0
                }
            };
        }
    }

    /// Receive the next message matching `(group, tag, *, dst)` from any
    /// source. Returns `Ok(None)` when the wait window elapses with nothing
    /// available.
    pub fn recv_any(
        &self,
        group: GroupId,
        tag: u32,
        dst: u32,
        wait: Duration,
    ) -> Option<(u32, Vec<u8>)> {
        let deadline = Instant::now() + wait;
        let mut st = self.state.lock().unwrap();
        loop {
            let found = st
                .queues
                .iter_mut()
                .find(|((g, t, _, d), q)| *g == group && *t == tag && *d == dst && !q.is_empty());
            if let Some((&key, q)) = found {
                let payload = q.pop_front().unwrap();
                if q.is_empty() {
                    st.queues.remove(&key);
                }
                return Some((key.2, payload));
            }
            let now = Instant::now();
            if now >= deadline {
                return None;
            }
            st = self.cv.wait_timeout(st, deadline - now).unwrap().0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    const G: GroupId = GroupId([9; 16]);

    #[test]
    fn fifo_per_key() {
        let mb = Mailbox::new(2);
        mb.push((G, 1, 0, 1), vec![1]);
        mb.push((G, 1, 0, 1), vec![2]);
        assert_eq!(mb.recv((G, 1, 0, 1), 0, None).unwrap(), vec![1]);
        assert_eq!(mb.recv((G, 1, 0, 1), 0, None).unwrap(), vec![2]);
    }

    #[test]
    fn keys_do_not_cross() {
        let mb = Mailbox::new(2);
        let other = GroupId([7; 16]);
        mb.push((other, 1, 0, 1), vec![1]);
        let r = mb.recv((G, 1, 0, 1), 0, Some(Instant::now() + Duration::from_millis(20)));
        assert!(matches!(r, Err(RecvError::Timeout)));
        // The message is still there under its own key.
        assert_eq!(mb.recv((other, 1, 0, 1), 0, None).unwrap(), vec![1]);
    }

    #[test]
    fn peer_down_unblocks_waiter() {
        let mb = Arc::new(Mailbox::new(2));
        let mb2 = mb.clone();
        let h = std::thread::spawn(move || mb2.recv((G, 1, 1, 0), 1, None));
        std::thread::sleep(Duration::from_millis(10));
        mb.mark_peer_down(1);
        assert!(matches!(h.join().unwrap(), Err(RecvError::PeerDown(1))));
    }

    #[test]
    fn recv_any_picks_any_source() {
        let mb = Mailbox::new(4);
        mb.push((G, 5, 2, 3), vec![42]);
        let (src, payload) = mb.recv_any(G, 5, 3, Duration::from_millis(50)).unwrap();
        assert_eq!(src, 2);
        assert_eq!(payload, vec![42]);
        assert!(mb.recv_any(G, 5, 3, Duration::from_millis(5)).is_none());
    }
}
