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

//! Communicator groups and collective operations.
//!
//! A [`Communicator`] is one rank's handle into a group: it knows its rank,
//! the group size, and the group id that scopes every message it sends.
//! Private sub-groups are split from a parent group at runtime; distinct
//! groups operate fully concurrently and their traffic never crosses.
//!
//! Collectives follow BSP discipline: every member of a group participates
//! exactly once per call, in the same order. All collectives are built from
//! point-to-point messages (no tree algorithms); the shuffle is a pairwise
//! all-to-all in a fixed round-robin order, and empty contributions are
//! sent as real zero-length messages so the message count per collective
//! depends only on the group size.
//!
//! A handle is `Send` but deliberately not `Sync`: it is confined to the
//! single thread driving that rank, though it may be moved between threads.

mod inproc;
mod mailbox;
mod tcp;

pub mod frame;
pub mod payload;

use std::cell::{Cell, RefCell};
use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::table::{concat, Table, TableError};
use crate::util::splitmix64;

use frame::Frame;
use inproc::Hub;
use mailbox::{Mailbox, RecvError};
use tcp::TcpWorld;

/// Opaque group identifier, unique per split. Carried in every frame
/// header; messages only match receives within the same group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GroupId(pub [u8; 16]);

impl std::fmt::Display for GroupId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in &self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

/// The id shared by every rank of a freshly initialized world.
pub const WORLD_GROUP_ID: GroupId = GroupId([0; 16]);

/// Transport selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Backend {
    InProcess,
    Tcp,
}

impl std::str::FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "in_process" | "inprocess" | "in-process" => Ok(Backend::InProcess),
            "tcp" => Ok(Backend::Tcp),
            other => Err(format!("unknown backend `{other}` (use in_process or tcp)")),
        }
    }
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Backend::InProcess => write!(f, "in_process"),
            Backend::Tcp => write!(f, "tcp"),
        }
    }
}

/// Default collective timeout; tests and the runtime override it.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

/// World construction parameters. For TCP, `endpoints` must hold one
/// `host:port` per rank (port 0 is allowed with [`init_world`], which binds
/// everything itself and learns the assigned ports).
#[derive(Debug, Clone)]
pub struct WorldConfig {
    pub backend: Backend,
    pub world_size: usize,
    pub endpoints: Vec<String>,
    pub timeout: Duration,
}

impl WorldConfig {
    pub fn in_process(world_size: usize) -> Self {
        Self {
            backend: Backend::InProcess,
            world_size,
            endpoints: Vec::new(),
            timeout: DEFAULT_TIMEOUT,
        }
    }

    /// TCP world on loopback with OS-assigned ports.
    pub fn tcp_loopback(world_size: usize) -> Self {
        Self {
            backend: Backend::Tcp,
            world_size,
            endpoints: vec!["127.0.0.1:0".to_string(); world_size],
            timeout: DEFAULT_TIMEOUT,
        }
    }

    pub fn tcp(endpoints: Vec<String>) -> Self {
        Self {
            backend: Backend::Tcp,
            world_size: endpoints.len(),
            endpoints,
            timeout: DEFAULT_TIMEOUT,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    fn validate(&self) -> Result<(), CommError> {
        if self.world_size == 0 {
            return Err(CommError::InvalidConfig("world_size must be >= 1".into()));
        }
        if self.backend == Backend::Tcp && self.endpoints.len() != self.world_size {
            return Err(CommError::InvalidConfig(format!(
                "tcp backend needs {} endpoints, got {}",
                self.world_size,
                self.endpoints.len()
            )));
        }
        Ok(())
    }
}

/// Per-row destination ranks driving a shuffle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionMap {
    assignments: Vec<usize>,
}

impl PartitionMap {
    pub fn new(assignments: Vec<usize>) -> Self {
        Self { assignments }
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }
}

/// Transport handle for one world rank.
enum Endpoint {
    InProc { hub: Arc<Hub>, world_rank: usize },
    Tcp(Arc<TcpWorld>),
}

impl Endpoint {
    fn mailbox(&self) -> &Arc<Mailbox> {
        match self {
            Endpoint::InProc { hub, world_rank } => hub.mailbox(*world_rank),
            Endpoint::Tcp(world) => world.mailbox(),
        }
    }

    fn send(&self, world_dst: usize, frame: Frame) -> Result<(), CommError> {
        match self {
            Endpoint::InProc { hub, .. } => {
                hub.deliver(world_dst, (frame.group, frame.tag, frame.src, frame.dst), frame.payload);
                Ok(())
            }
            Endpoint::Tcp(world) => world.send(world_dst, frame),
        }
    }
}

/// One rank's handle into a communicator group.
pub struct Communicator {
    ep: Arc<Endpoint>,
    group: GroupId,
    rank: usize,
    members: Arc<Vec<usize>>, // group rank -> world rank
    timeout: Duration,
    phase: Cell<u32>,
    split_seq: RefCell<HashMap<Vec<usize>, u32>>,
}

impl std::fmt::Debug for Communicator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Communicator")
            .field("group", &self.group.to_string())
            .field("rank", &self.rank)
            .field("size", &self.members.len())
            .finish()
    }
}

/// Build a world: one communicator handle per rank, all sharing the same
/// group id. The caller hands each handle to the thread (or actor) driving
/// that rank.
pub fn init_world(config: &WorldConfig) -> Result<Vec<Communicator>, CommError> {
    config.validate()?;
    match config.backend {
        Backend::InProcess => {
            let hub = Hub::new(config.world_size);
            Ok((0..config.world_size)
                .map(|r| Communicator {
                    ep: Arc::new(Endpoint::InProc { hub: hub.clone(), world_rank: r }),
                    group: WORLD_GROUP_ID,
                    rank: r,
                    members: Arc::new((0..config.world_size).collect()),
                    timeout: config.timeout,
                    phase: Cell::new(0),
                    split_seq: RefCell::new(HashMap::new()),
                })
                .collect())
        }
        Backend::Tcp => {
            // Bind every listener first so ephemeral ports are known before
            // anyone dials.
            let mut listeners = Vec::with_capacity(config.world_size);
            let mut addrs: Vec<SocketAddr> = Vec::with_capacity(config.world_size);
            for ep in &config.endpoints {
                let listener = tcp::bind(ep)?;
                addrs.push(listener.local_addr().map_err(CommError::Io)?);
                listeners.push(listener);
            }
            let timeout = config.timeout;
            let handles: Vec<_> = listeners
                .into_iter()
                .enumerate()
                .map(|(rank, listener)| {
                    let addrs = addrs.clone();
                    std::thread::spawn(move || tcp::connect_mesh(rank, listener, &addrs, timeout))
                })
                .collect();
            let mut worlds = Vec::with_capacity(config.world_size);
            for h in handles {
                worlds.push(h.join().expect("mesh thread panicked")?);
            }
            Ok(worlds
                .into_iter()
                .enumerate()
                .map(|(r, world)| Communicator {
                    ep: Arc::new(Endpoint::Tcp(world)),
                    group: WORLD_GROUP_ID,
                    rank: r,
                    members: Arc::new((0..config.world_size).collect()),
                    timeout: config.timeout,
                    phase: Cell::new(0),
                    split_seq: RefCell::new(HashMap::new()),
                })
                .collect())
        }
    }
}

/// Join a TCP world as a single rank, for deployments where each rank runs
/// in its own process. Endpoints must carry concrete ports.
pub fn init_tcp_rank(config: &WorldConfig, rank: usize) -> Result<Communicator, CommError> {
    config.validate()?;
    if config.backend != Backend::Tcp {
        return Err(CommError::InvalidConfig(
            "per-rank init is only meaningful for the tcp backend".into(),
        ));
    }
    if rank >= config.world_size {
        return Err(CommError::InvalidConfig(format!(
            "rank {rank} out of range for world of {}",
            config.world_size
        )));
    }
    let mut addrs = Vec::with_capacity(config.world_size);
    for ep in &config.endpoints {
        addrs.push(tcp::resolve(ep)?);
    }
    let listener = tcp::bind(&config.endpoints[rank])?;
    let world = tcp::connect_mesh(rank, listener, &addrs, config.timeout)?;
    Ok(Communicator {
        ep: Arc::new(Endpoint::Tcp(world)),
        group: WORLD_GROUP_ID,
        rank,
        members: Arc::new((0..config.world_size).collect()),
        timeout: config.timeout,
        phase: Cell::new(0),
        split_seq: RefCell::new(HashMap::new()),
    })
}

impl Communicator {
    /// This rank's id within the group, in `[0, size)`.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Number of ranks in the group.
    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn group_id(&self) -> GroupId {
        self.group
    }

    /// The underlying world rank of a group member.
    pub fn world_rank_of(&self, group_rank: usize) -> usize {
        self.members[group_rank]
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    pub fn set_timeout(&mut self, timeout: Duration) {
        self.timeout = timeout;
    }

    fn next_tag(&self) -> u32 {
        let t = self.phase.get();
        self.phase.set(t.wrapping_add(1));
        t & 0x7FFF_FFFF
    }

    fn send_to(&self, dst: usize, tag: u32, payload: Vec<u8>) -> Result<(), CommError> {
        let frame = Frame::new(self.group, tag, self.rank as u32, dst as u32, payload);
        self.ep.send(self.members[dst], frame)
    }

    fn recv_from(&self, src: usize, tag: u32, deadline: Option<Instant>) -> Result<Vec<u8>, CommError> {
        let key = (self.group, tag, src as u32, self.rank as u32);
        self.ep
            .mailbox()
            .recv(key, self.members[src], deadline)
            .map_err(|e| match e {
                RecvError::Timeout => CommError::Timeout {
                    from: src,
                    world: self.members[src],
                    timeout: self.timeout,
                },
                RecvError::PeerDown(world) => CommError::PeerFailure { world },
            })
    }

    fn deadline(&self) -> Option<Instant> {
        Some(Instant::now() + self.timeout)
    }

    /// Split a private sub-group out of this group.
    ///
    /// `member_ranks` lists the members as ranks of *this* group; the new
    /// rank of each member is its position in the list. Members return the
    /// new communicator, everyone else gets `None`. The new group's id is
    /// derived deterministically from the parent id, the member list, and a
    /// per-member-list sequence number, so concurrent splits of disjoint
    /// member sets proceed independently; the call only synchronizes the
    /// members themselves (they run a barrier on the new group before
    /// returning).
    pub fn split(&self, member_ranks: &[usize]) -> Result<Option<Communicator>, CommError> {
        if member_ranks.is_empty() {
            return Err(CommError::EmptyMembers);
        }
        for (i, &m) in member_ranks.iter().enumerate() {
            if m >= self.size() {
                return Err(CommError::InvalidMemberRank { rank: m, size: self.size() });
            }
            if member_ranks[..i].contains(&m) {
                return Err(CommError::DuplicateMemberRank(m));
            }
        }
        let seq = {
            let mut seqs = self.split_seq.borrow_mut();
            let entry = seqs.entry(member_ranks.to_vec()).or_insert(0);
            let seq = *entry;
            *entry += 1;
            seq
        };
        let group = derive_group_id(self.group, seq, member_ranks);
        let Some(position) = member_ranks.iter().position(|&m| m == self.rank) else {
            return Ok(None);
        };
        let members_world: Vec<usize> = member_ranks.iter().map(|&m| self.members[m]).collect();
        let child = Communicator {
            ep: self.ep.clone(),
            group,
            rank: position,
            members: Arc::new(members_world),
            timeout: self.timeout,
            phase: Cell::new(0),
            split_seq: RefCell::new(HashMap::new()),
        };
        // Handshake among the new members; proves the group is live and
        // gives group construction a real, size-dependent cost.
        child.barrier()?;
        Ok(Some(child))
    }

    /// Block until every member of the group has entered the barrier.
    pub fn barrier(&self) -> Result<(), CommError> {
        let tag = self.next_tag();
        let deadline = self.deadline();
        if self.rank == 0 {
            for src in 1..self.size() {
                self.recv_from(src, tag, deadline)?;
            }
            for dst in 1..self.size() {
                self.send_to(dst, tag, Vec::new())?;
            }
        } else {
            self.send_to(0, tag, Vec::new())?;
            self.recv_from(0, tag, deadline)?;
        }
        Ok(())
    }

    /// All-to-all row redistribution. Row `i` of `local` travels to the
    /// group rank `map[i]`; every rank returns the concatenation of what it
    /// received, ordered by source rank and then source row order.
    pub fn shuffle(&self, local: &Table, map: &PartitionMap) -> Result<Table, CommError> {
        if map.len() != local.row_count() {
            return Err(CommError::PartitionLength {
                map_len: map.len(),
                rows: local.row_count(),
            });
        }
        let size = self.size();
        if let Some((row, &value)) = map
            .assignments()
            .iter()
            .enumerate()
            .find(|(_, &v)| v >= size)
        {
            return Err(CommError::PartitionOutOfRange { row, value, size });
        }

        let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); size];
        for (row, &dst) in map.assignments().iter().enumerate() {
            buckets[dst].push(row);
        }

        let tag = self.next_tag();
        // Fixed round-robin send order starting at our own rank; empty
        // buckets still go out so the message count is deterministic.
        for offset in 0..size {
            let dst = (self.rank + offset) % size;
            let part = local.take(&buckets[dst]);
            self.send_to(dst, tag, payload::encode_table(&part))?;
        }
        let deadline = self.deadline();
        let mut parts = Vec::with_capacity(size);
        for src in 0..size {
            let bytes = self.recv_from(src, tag, deadline)?;
            parts.push(payload::decode_table(&bytes)?);
        }
        concat(&parts).map_err(CommError::Table)
    }

    /// Collect every rank's table at `root`, concatenated in rank order.
    /// Non-root ranks return `None`.
    pub fn gather(&self, local: &Table, root: usize) -> Result<Option<Table>, CommError> {
        if root >= self.size() {
            return Err(CommError::InvalidRoot { root, size: self.size() });
        }
        let tag = self.next_tag();
        self.send_to(root, tag, payload::encode_table(local))?;
        if self.rank != root {
            return Ok(None);
        }
        let deadline = self.deadline();
        let mut parts = Vec::with_capacity(self.size());
        for src in 0..self.size() {
            let bytes = self.recv_from(src, tag, deadline)?;
            parts.push(payload::decode_table(&bytes)?);
        }
        concat(&parts).map(Some).map_err(CommError::Table)
    }

    /// Every rank contributes one float; every rank returns the same
    /// vector, entry `r` holding rank `r`'s value bit-exactly.
    pub fn allgather_scalars(&self, value: f64) -> Result<Vec<f64>, CommError> {
        let tag = self.next_tag();
        let deadline = self.deadline();
        self.send_to(0, tag, value.to_bits().to_le_bytes().to_vec())?;
        if self.rank == 0 {
            let mut blob = Vec::with_capacity(self.size() * 8);
            for src in 0..self.size() {
                let bytes = self.recv_from(src, tag, deadline)?;
                if bytes.len() != 8 {
                    return Err(CommError::Protocol(format!(
                        "scalar payload of {} bytes",
                        bytes.len()
                    )));
                }
                blob.extend_from_slice(&bytes);
            }
            for dst in 0..self.size() {
                self.send_to(dst, tag, blob.clone())?;
            }
        }
        let blob = self.recv_from(0, tag, deadline)?;
        if blob.len() != self.size() * 8 {
            return Err(CommError::Protocol(format!(
                "allgather blob of {} bytes for size {}",
                blob.len(),
                self.size()
            )));
        }
        Ok(blob
            .chunks_exact(8)
            .map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().unwrap())))
            .collect())
    }

    /// Distribute `root`'s key vector to every rank. Non-root inputs are
    /// ignored.
    pub fn broadcast_splitters(&self, root: usize, keys: &[i64]) -> Result<Vec<i64>, CommError> {
        if root >= self.size() {
            return Err(CommError::InvalidRoot { root, size: self.size() });
        }
        let tag = self.next_tag();
        if self.rank == root {
            let mut blob = Vec::with_capacity(keys.len() * 8);
            for k in keys {
                blob.extend_from_slice(&k.to_le_bytes());
            }
            for dst in 0..self.size() {
                self.send_to(dst, tag, blob.clone())?;
            }
        }
        let blob = self.recv_from(root, tag, self.deadline())?;
        if blob.len() % 8 != 0 {
            return Err(CommError::Protocol(format!(
                "splitter payload of {} bytes",
                blob.len()
            )));
        }
        Ok(blob
            .chunks_exact(8)
            .map(|c| i64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    // -- control-plane primitives (used by the runtime) ------------------

    /// Point-to-point send outside the collective tag space.
    pub(crate) fn send_bytes(&self, dst: usize, tag: u32, payload: Vec<u8>) -> Result<(), CommError> {
        debug_assert!(tag & 0x8000_0000 != 0, "control tags live in the high range");
        self.send_to(dst, tag, payload)
    }

    /// Point-to-point receive; `wait` of `None` blocks indefinitely.
    pub(crate) fn recv_bytes(
        &self,
        src: usize,
        tag: u32,
        wait: Option<Duration>,
    ) -> Result<Vec<u8>, CommError> {
        self.recv_from(src, tag, wait.map(|w| Instant::now() + w))
    }

    /// Receive the next message with `tag` from any source, or `None` if
    /// the wait window elapses.
    pub(crate) fn recv_bytes_any(&self, tag: u32, wait: Duration) -> Option<(usize, Vec<u8>)> {
        self.ep
            .mailbox()
            .recv_any(self.group, tag, self.rank as u32, wait)
            .map(|(src, bytes)| (src as usize, bytes))
    }
}

fn derive_group_id(parent: GroupId, seq: u32, members: &[usize]) -> GroupId {
    let lo = u64::from_le_bytes(parent.0[0..8].try_into().unwrap());
    let hi = u64::from_le_bytes(parent.0[8..16].try_into().unwrap());
    let mut h1 = splitmix64(lo ^ seq as u64 ^ (members.len() as u64) << 32);
    let mut h2 = splitmix64(hi ^ ((seq as u64) << 17) ^ members.len() as u64);
    for &m in members {
        h1 = splitmix64(h1 ^ m as u64);
        h2 = splitmix64(h2 ^ (m as u64).rotate_left(32));
    }
    let mut id = [0u8; 16];
    id[0..8].copy_from_slice(&h1.to_le_bytes());
    id[8..16].copy_from_slice(&h2.to_le_bytes());
    GroupId(id)
}

#[derive(Debug, Error)]
pub enum CommError {
    #[error("invalid world config: {0}")]
    InvalidConfig(String),
    #[error("cannot bind endpoint `{endpoint}`: {source}")]
    Bind {
        endpoint: String,
        source: std::io::Error,
    },
    #[error("rank {rank} unreachable at `{endpoint}`: {detail}")]
    ConnectTimeout {
        rank: usize,
        endpoint: String,
        detail: String,
    },
    #[error("handshake with rank {rank} failed: {message}")]
    Handshake { rank: usize, message: String },
    #[error("timed out after {timeout:?} waiting for group rank {from} (world rank {world})")]
    Timeout {
        from: usize,
        world: usize,
        timeout: Duration,
    },
    #[error("peer at world rank {world} failed or closed its connection")]
    PeerFailure { world: usize },
    #[error("member rank {rank} out of range for group of {size}")]
    InvalidMemberRank { rank: usize, size: usize },
    #[error("duplicate member rank {0}")]
    DuplicateMemberRank(usize),
    #[error("member list must not be empty")]
    EmptyMembers,
    #[error("root {root} out of range for group of {size}")]
    InvalidRoot { root: usize, size: usize },
    #[error("partition map length {map_len} does not match table rows {rows}")]
    PartitionLength { map_len: usize, rows: usize },
    #[error("partition map entry {value} at row {row} out of range for group size {size}")]
    PartitionOutOfRange {
        row: usize,
        value: usize,
        size: usize,
    },
    #[error("malformed payload: {0}")]
    Protocol(String),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_id_derivation_is_deterministic_and_order_sensitive() {
        let a = derive_group_id(WORLD_GROUP_ID, 0, &[0, 1, 2]);
        let b = derive_group_id(WORLD_GROUP_ID, 0, &[0, 1, 2]);
        assert_eq!(a, b);
        assert_ne!(a, derive_group_id(WORLD_GROUP_ID, 1, &[0, 1, 2]));
        assert_ne!(a, derive_group_id(WORLD_GROUP_ID, 0, &[2, 1, 0]));
        assert_ne!(a, derive_group_id(WORLD_GROUP_ID, 0, &[0, 1]));
    }

    #[test]
    fn config_validation() {
        assert!(init_world(&WorldConfig::in_process(0)).is_err());
        let mut bad = WorldConfig::tcp_loopback(3);
        bad.endpoints.pop();
        assert!(init_world(&bad).is_err());
    }
}
